#include "prbgan/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_set>

namespace prbgan::autodiff {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<EMat>;
using CMapMat = Eigen::Map<const EMat>;

MapMat as_matrix(Tensor& t) { return MapMat(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())); }
CMapMat as_matrix(const Tensor& t) { return CMapMat(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())); }

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

enum class BinKind { same, a_scalar, b_scalar };

BinKind classify(const Tensor& a, const Tensor& b, const char* op) {
    if (a.same_shape(b)) return BinKind::same;
    if (a.numel() == 1) return BinKind::a_scalar;
    if (b.numel() == 1) return BinKind::b_scalar;
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str() + " (only scalar broadcasting is supported)");
}

const Tensor& wider(const Tensor& a, const Tensor& b, BinKind k) {
    return k == BinKind::a_scalar ? b : a;
}

void require_rank2(const Tensor& t, const char* op, const char* operand) {
    if (t.rank() != 2)
        throw DimensionError(std::string(op) + ": " + operand + " must be rank 2, got " +
                             t.shape_str());
}

} // namespace

NodePtr Node::leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->grad_ = Tensor::zeros(value.shape());
    n->value_ = std::move(value);
    n->requires_grad_ = requires_grad;
    n->op_ = "leaf";
    return n;
}

NodePtr Node::make(Tensor value, std::vector<NodePtr> parents, const char* op,
                   std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->grad_ = Tensor::zeros(value.shape());
    n->value_ = std::move(value);
    n->parents_ = std::move(parents);
    n->backward_ = std::move(backward);
    n->op_ = op;
    for (const auto& p : n->parents_)
        if (p->requires_grad_) { n->requires_grad_ = true; break; }
    return n;
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    const Tensor& av = a->value();
    const Tensor& bv = b->value();
    require_rank2(av, "matmul", "lhs");
    require_rank2(bv, "matmul", "rhs");
    if (av.cols() != bv.rows())
        throw DimensionError("matmul: inner dimensions disagree, " + av.shape_str() + " vs " +
                             bv.shape_str());
    Tensor out({av.rows(), bv.cols()});
    as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
    return Node::make(std::move(out), {a, b}, "matmul", [](Node& n) {
        const auto& pa = n.parents()[0];
        const auto& pb = n.parents()[1];
        const Tensor& gt = n.grad();
        CMapMat g = as_matrix(gt);
        if (pa->requires_grad())
            as_matrix(pa->grad()).noalias() += g * as_matrix(pb->value()).transpose();
        if (pb->requires_grad())
            as_matrix(pb->grad()).noalias() += as_matrix(pa->value()).transpose() * g;
    });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    const Tensor& av = a->value();
    const Tensor& bv = b->value();
    const BinKind k = classify(av, bv, "add");
    Tensor out(wider(av, bv, k).shape());
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = k == BinKind::a_scalar ? av[0] : av[i];
        const double y = k == BinKind::b_scalar ? bv[0] : bv[i];
        out[i] = x + y;
    }
    return Node::make(std::move(out), {a, b}, "add", [k](Node& nd) {
        const auto& pa = nd.parents()[0];
        const auto& pb = nd.parents()[1];
        const Tensor& g = nd.grad();
        if (pa->requires_grad()) {
            if (k == BinKind::a_scalar)
                for (std::size_t i = 0; i < g.numel(); ++i) pa->grad()[0] += g[i];
            else
                for (std::size_t i = 0; i < g.numel(); ++i) pa->grad()[i] += g[i];
        }
        if (pb->requires_grad()) {
            if (k == BinKind::b_scalar)
                for (std::size_t i = 0; i < g.numel(); ++i) pb->grad()[0] += g[i];
            else
                for (std::size_t i = 0; i < g.numel(); ++i) pb->grad()[i] += g[i];
        }
    });
}

NodePtr add(const NodePtr& a, double s) { return add(a, Node::constant_scalar(s)); }

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    const Tensor& av = a->value();
    const Tensor& bv = b->value();
    const BinKind k = classify(av, bv, "sub");
    Tensor out(wider(av, bv, k).shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double x = k == BinKind::a_scalar ? av[0] : av[i];
        const double y = k == BinKind::b_scalar ? bv[0] : bv[i];
        out[i] = x - y;
    }
    return Node::make(std::move(out), {a, b}, "sub", [k](Node& nd) {
        const auto& pa = nd.parents()[0];
        const auto& pb = nd.parents()[1];
        const Tensor& g = nd.grad();
        if (pa->requires_grad()) {
            if (k == BinKind::a_scalar)
                for (std::size_t i = 0; i < g.numel(); ++i) pa->grad()[0] += g[i];
            else
                for (std::size_t i = 0; i < g.numel(); ++i) pa->grad()[i] += g[i];
        }
        if (pb->requires_grad()) {
            if (k == BinKind::b_scalar)
                for (std::size_t i = 0; i < g.numel(); ++i) pb->grad()[0] -= g[i];
            else
                for (std::size_t i = 0; i < g.numel(); ++i) pb->grad()[i] -= g[i];
        }
    });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    const Tensor& av = a->value();
    const Tensor& bv = b->value();
    const BinKind k = classify(av, bv, "mul");
    Tensor out(wider(av, bv, k).shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double x = k == BinKind::a_scalar ? av[0] : av[i];
        const double y = k == BinKind::b_scalar ? bv[0] : bv[i];
        out[i] = x * y;
    }
    return Node::make(std::move(out), {a, b}, "mul", [k](Node& nd) {
        const auto& pa = nd.parents()[0];
        const auto& pb = nd.parents()[1];
        const Tensor& g = nd.grad();
        const Tensor& av2 = pa->value();
        const Tensor& bv2 = pb->value();
        if (pa->requires_grad()) {
            for (std::size_t i = 0; i < g.numel(); ++i) {
                const double y = k == BinKind::b_scalar ? bv2[0] : bv2[i];
                pa->grad()[k == BinKind::a_scalar ? 0 : i] += g[i] * y;
            }
        }
        if (pb->requires_grad()) {
            for (std::size_t i = 0; i < g.numel(); ++i) {
                const double x = k == BinKind::a_scalar ? av2[0] : av2[i];
                pb->grad()[k == BinKind::b_scalar ? 0 : i] += g[i] * x;
            }
        }
    });
}

NodePtr mul(const NodePtr& a, double s) { return mul(a, Node::constant_scalar(s)); }

NodePtr div(const NodePtr& a, const NodePtr& b) {
    const Tensor& av = a->value();
    const Tensor& bv = b->value();
    const BinKind k = classify(av, bv, "div");
    for (std::size_t i = 0; i < bv.numel(); ++i)
        if (std::fabs(bv[i]) < kDivGuard)
            throw NumericError("div: denominator magnitude below guard (" +
                               std::to_string(bv[i]) + ")");
    Tensor out(wider(av, bv, k).shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double x = k == BinKind::a_scalar ? av[0] : av[i];
        const double y = k == BinKind::b_scalar ? bv[0] : bv[i];
        out[i] = x / y;
    }
    return Node::make(std::move(out), {a, b}, "div", [k](Node& nd) {
        const auto& pa = nd.parents()[0];
        const auto& pb = nd.parents()[1];
        const Tensor& g = nd.grad();
        const Tensor& bv2 = pb->value();
        const Tensor& ov = nd.value();
        if (pa->requires_grad()) {
            for (std::size_t i = 0; i < g.numel(); ++i) {
                const double y = k == BinKind::b_scalar ? bv2[0] : bv2[i];
                pa->grad()[k == BinKind::a_scalar ? 0 : i] += g[i] / y;
            }
        }
        if (pb->requires_grad()) {
            for (std::size_t i = 0; i < g.numel(); ++i) {
                const double y = k == BinKind::b_scalar ? bv2[0] : bv2[i];
                pb->grad()[k == BinKind::b_scalar ? 0 : i] -= g[i] * ov[i] / y;
            }
        }
    });
}

NodePtr neg(const NodePtr& a) {
    Tensor out(a->value().shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = -a->value()[i];
    return Node::make(std::move(out), {a}, "neg", [](Node& nd) {
        const auto& pa = nd.parents()[0];
        if (!pa->requires_grad()) return;
        for (std::size_t i = 0; i < nd.grad().numel(); ++i) pa->grad()[i] -= nd.grad()[i];
    });
}

NodePtr log(const NodePtr& a) {
    const Tensor& av = a->value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) {
        if (!(av[i] > 0.0))
            throw DomainError("log: non-positive input " + std::to_string(av[i]));
        out[i] = std::log(av[i]);
    }
    return Node::make(std::move(out), {a}, "log", [](Node& nd) {
        const auto& pa = nd.parents()[0];
        if (!pa->requires_grad()) return;
        for (std::size_t i = 0; i < nd.grad().numel(); ++i)
            pa->grad()[i] += nd.grad()[i] / pa->value()[i];
    });
}

NodePtr exp(const NodePtr& a) {
    const Tensor& av = a->value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) {
        out[i] = std::exp(av[i]);
        if (!std::isfinite(out[i]))
            throw NumericError("exp: overflow at input " + std::to_string(av[i]));
    }
    return Node::make(std::move(out), {a}, "exp", [](Node& nd) {
        const auto& pa = nd.parents()[0];
        if (!pa->requires_grad()) return;
        for (std::size_t i = 0; i < nd.grad().numel(); ++i)
            pa->grad()[i] += nd.grad()[i] * nd.value()[i];
    });
}

NodePtr sum(const NodePtr& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a->value().numel(); ++i) s += a->value()[i];
    return Node::make(Tensor::scalar(s), {a}, "sum", [](Node& nd) {
        const auto& pa = nd.parents()[0];
        if (!pa->requires_grad()) return;
        const double g = nd.grad()[0];
        for (std::size_t i = 0; i < pa->grad().numel(); ++i) pa->grad()[i] += g;
    });
}

NodePtr mean(const NodePtr& a) {
    const std::size_t n = a->value().numel();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a->value()[i];
    return Node::make(Tensor::scalar(s / static_cast<double>(n)), {a}, "mean", [n](Node& nd) {
        const auto& pa = nd.parents()[0];
        if (!pa->requires_grad()) return;
        const double g = nd.grad()[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < pa->grad().numel(); ++i) pa->grad()[i] += g;
    });
}

NodePtr population_variance(const NodePtr& a) {
    const std::size_t n = a->value().numel();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a->value()[i];
    const double mu = s / static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a->value()[i] - mu;
        v += d * d;
    }
    v /= static_cast<double>(n);
    return Node::make(Tensor::scalar(v), {a}, "population_variance", [n, mu](Node& nd) {
        const auto& pa = nd.parents()[0];
        if (!pa->requires_grad()) return;
        const double g = nd.grad()[0] * 2.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) pa->grad()[i] += g * (pa->value()[i] - mu);
    });
}

NodePtr leaky_relu(const NodePtr& a, double slope) {
    const Tensor& av = a->value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i)
        out[i] = av[i] >= 0.0 ? av[i] : slope * av[i];
    return Node::make(std::move(out), {a}, "leaky_relu", [slope](Node& nd) {
        const auto& pa = nd.parents()[0];
        if (!pa->requires_grad()) return;
        for (std::size_t i = 0; i < nd.grad().numel(); ++i)
            pa->grad()[i] += nd.grad()[i] * (pa->value()[i] >= 0.0 ? 1.0 : slope);
    });
}

NodePtr sigmoid(const NodePtr& a) {
    const Tensor& av = a->value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = stable_sigmoid(av[i]);
    return Node::make(std::move(out), {a}, "sigmoid", [](Node& nd) {
        const auto& pa = nd.parents()[0];
        if (!pa->requires_grad()) return;
        for (std::size_t i = 0; i < nd.grad().numel(); ++i) {
            const double s = nd.value()[i];
            pa->grad()[i] += nd.grad()[i] * s * (1.0 - s);
        }
    });
}

NodePtr softplus(const NodePtr& a) {
    const Tensor& av = a->value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) {
        const double x = av[i];
        out[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
    }
    return Node::make(std::move(out), {a}, "softplus", [](Node& nd) {
        const auto& pa = nd.parents()[0];
        if (!pa->requires_grad()) return;
        for (std::size_t i = 0; i < nd.grad().numel(); ++i)
            pa->grad()[i] += nd.grad()[i] * stable_sigmoid(pa->value()[i]);
    });
}

NodePtr add_row(const NodePtr& m, const NodePtr& row) {
    const Tensor& mv = m->value();
    const Tensor& rv = row->value();
    require_rank2(mv, "add_row", "matrix");
    if (rv.rank() != 1 || rv.numel() != mv.cols())
        throw DimensionError("add_row: row " + rv.shape_str() + " does not match matrix " +
                             mv.shape_str());
    Tensor out(mv.shape());
    const std::size_t r = mv.rows(), c = mv.cols();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = mv.at(i, j) + rv[j];
    return Node::make(std::move(out), {m, row}, "add_row", [r, c](Node& nd) {
        const auto& pm = nd.parents()[0];
        const auto& pr = nd.parents()[1];
        const Tensor& g = nd.grad();
        if (pm->requires_grad())
            for (std::size_t i = 0; i < g.numel(); ++i) pm->grad()[i] += g[i];
        if (pr->requires_grad())
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) pr->grad()[j] += g.at(i, j);
    });
}

NodePtr mul_row(const NodePtr& m, const NodePtr& row) {
    const Tensor& mv = m->value();
    const Tensor& rv = row->value();
    require_rank2(mv, "mul_row", "matrix");
    if (rv.rank() != 1 || rv.numel() != mv.cols())
        throw DimensionError("mul_row: row " + rv.shape_str() + " does not match matrix " +
                             mv.shape_str());
    Tensor out(mv.shape());
    const std::size_t r = mv.rows(), c = mv.cols();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = mv.at(i, j) * rv[j];
    return Node::make(std::move(out), {m, row}, "mul_row", [r, c](Node& nd) {
        const auto& pm = nd.parents()[0];
        const auto& pr = nd.parents()[1];
        const Tensor& g = nd.grad();
        if (pm->requires_grad())
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    pm->grad().at(i, j) += g.at(i, j) * pr->value()[j];
        if (pr->requires_grad())
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    pr->grad()[j] += g.at(i, j) * pm->value().at(i, j);
    });
}

NodePtr bce_with_logits(const NodePtr& logits, const Tensor& targets) {
    const Tensor& lv = logits->value();
    require_same_shape(lv, targets, "bce_with_logits");
    for (std::size_t i = 0; i < targets.numel(); ++i)
        if (targets[i] != 0.0 && targets[i] != 1.0)
            throw DomainError("bce_with_logits: target not in {0,1}: " +
                              std::to_string(targets[i]));
    const std::size_t n = lv.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = lv[i];
        acc += std::max(x, 0.0) - targets[i] * x + std::log1p(std::exp(-std::fabs(x)));
    }
    Tensor t = targets;
    return Node::make(Tensor::scalar(acc / static_cast<double>(n)), {logits}, "bce_with_logits",
                      [t = std::move(t), n](Node& nd) {
                          const auto& pl = nd.parents()[0];
                          if (!pl->requires_grad()) return;
                          const double g = nd.grad()[0] / static_cast<double>(n);
                          for (std::size_t i = 0; i < n; ++i)
                              pl->grad()[i] += g * (stable_sigmoid(pl->value()[i]) - t[i]);
                      });
}

NodePtr sorted_sq_diff(const NodePtr& a, const NodePtr& b) {
    const Tensor& av = a->value();
    const Tensor& bv = b->value();
    require_rank2(av, "sorted_sq_diff", "lhs");
    require_same_shape(av, bv, "sorted_sq_diff");
    const std::size_t n = av.rows(), k = av.cols();
    auto column_order = [n](const Tensor& t, std::size_t col) {
        std::vector<std::uint32_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0u);
        std::sort(idx.begin(), idx.end(), [&](std::uint32_t i, std::uint32_t j) {
            const double vi = t.at(i, col), vj = t.at(j, col);
            return vi < vj || (vi == vj && i < j);
        });
        return idx;
    };
    std::vector<std::vector<std::uint32_t>> perm_a(k), perm_b(k);
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        perm_a[c] = column_order(av, c);
        perm_b[c] = column_order(bv, c);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = av.at(perm_a[c][i], c) - bv.at(perm_b[c][i], c);
            acc += d * d;
        }
    }
    const double scale = 1.0 / static_cast<double>(n * k);
    return Node::make(Tensor::scalar(acc * scale), {a, b}, "sorted_sq_diff",
                      [perm_a = std::move(perm_a), perm_b = std::move(perm_b), n, k,
                       scale](Node& nd) {
                          const auto& pa = nd.parents()[0];
                          const auto& pb = nd.parents()[1];
                          const double g = nd.grad()[0] * 2.0 * scale;
                          for (std::size_t c = 0; c < k; ++c) {
                              for (std::size_t i = 0; i < n; ++i) {
                                  const std::size_t ia = perm_a[c][i], ib = perm_b[c][i];
                                  const double d =
                                      pa->value().at(ia, c) - pb->value().at(ib, c);
                                  if (pa->requires_grad()) pa->grad().at(ia, c) += g * d;
                                  if (pb->requires_grad()) pb->grad().at(ib, c) -= g * d;
                              }
                          }
                      });
}

void backward(const NodePtr& root) {
    if (root->value().numel() != 1)
        throw ContractError("backward: root must be scalar, got shape " +
                            root->value().shape_str());
    if (!root->requires_grad()) {
        root->grad()[0] += 1.0;
        return;
    }
    // Reverse post-order DFS gives a deterministic topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        std::size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.node->parents().size()) {
            Node* p = f.node->parents()[f.next++].get();
            if (p->requires_grad() && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }
    root->grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_) (*it)->backward_(**it);
}

} // namespace prbgan::autodiff
