#include "prbgan/nn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <fstream>

namespace prbgan::nn {

namespace ad = prbgan::autodiff;

void validate(const std::vector<LayerSpec>& spec) {
    if (spec.empty()) throw ConfigError("layer spec: empty");
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const LayerSpec& l = spec[i];
        if (l.in_dim < 1 || l.out_dim < 1)
            throw ConfigError("layer " + std::to_string(i) + ": dims must be >= 1");
        if (l.activation == Activation::leaky_relu && !(l.slope > 0.0 && l.slope < 1.0))
            throw ConfigError("layer " + std::to_string(i) + ": leaky slope " +
                              std::to_string(l.slope) + " outside (0,1)");
        if (i > 0 && spec[i - 1].out_dim != l.in_dim)
            throw ConfigError("layer " + std::to_string(i) + ": in_dim " +
                              std::to_string(l.in_dim) + " does not match previous out_dim " +
                              std::to_string(spec[i - 1].out_dim));
    }
}

std::vector<ad::NodePtr> Mlp::parameters() const {
    std::vector<ad::NodePtr> out;
    out.reserve(weights.size() * 2);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.push_back(weights[i]);
        out.push_back(biases[i]);
    }
    return out;
}

void Mlp::zero_grads() {
    for (auto& w : weights) w->zero_grad();
    for (auto& b : biases) b->zero_grad();
}

Mlp Mlp::clone_frozen() const {
    Mlp out;
    out.spec = spec;
    out.weights.reserve(weights.size());
    out.biases.reserve(biases.size());
    for (const auto& w : weights) out.weights.push_back(ad::Node::constant(w->value()));
    for (const auto& b : biases) out.biases.push_back(ad::Node::constant(b->value()));
    return out;
}

Mlp xavier_init(const std::vector<LayerSpec>& spec, std::uint64_t seed) {
    validate(spec);
    rng::Stream rng(seed);
    Mlp net;
    net.spec = spec;
    for (const LayerSpec& l : spec) {
        const double bound = std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
        Tensor w({l.in_dim, l.out_dim});
        for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
        net.weights.push_back(ad::Node::leaf(std::move(w)));
        net.biases.push_back(ad::Node::leaf(Tensor::zeros({l.out_dim})));
    }
    return net;
}

DropoutMaskSet DropoutMaskSet::all_ones(const std::vector<LayerSpec>& spec) {
    DropoutMaskSet m;
    m.unit_masks.resize(spec.size()); // empty tensors: implicit all-ones
    return m;
}

DropoutMaskSet sample_mask_set(const std::vector<LayerSpec>& spec, double p, rng::Stream& rng) {
    std::vector<double> per_layer(spec.size(), p);
    return sample_mask_set(spec, per_layer, rng);
}

DropoutMaskSet sample_mask_set(const std::vector<LayerSpec>& spec,
                               std::span<const double> p_per_layer, rng::Stream& rng) {
    if (p_per_layer.size() != spec.size())
        throw ConfigError("sample_mask_set: " + std::to_string(p_per_layer.size()) +
                          " drop probabilities for " + std::to_string(spec.size()) + " layers");
    DropoutMaskSet m;
    m.unit_masks.resize(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (!spec[i].maskable) continue;
        const double p = p_per_layer[i];
        if (!(p >= 0.0 && p < 1.0))
            throw ConfigError("sample_mask_set: drop probability " + std::to_string(p) +
                              " outside [0,1)");
        Tensor mask({spec[i].out_dim});
        for (std::size_t j = 0; j < spec[i].out_dim; ++j)
            mask[j] = rng.bernoulli(1.0 - p) ? 1.0 : 0.0;
        m.unit_masks[i] = std::move(mask);
    }
    return m;
}

namespace {
void check_mask_shapes(const Mlp& params, const DropoutMaskSet& masks) {
    if (masks.unit_masks.size() != params.num_layers())
        throw DimensionError("forward: mask set has " +
                             std::to_string(masks.unit_masks.size()) + " layers, network has " +
                             std::to_string(params.num_layers()));
    for (std::size_t i = 0; i < params.num_layers(); ++i)
        if (masks.layer_masked(i) && masks.unit_masks[i].numel() != params.spec[i].out_dim)
            throw DimensionError("forward: layer " + std::to_string(i) + " mask length " +
                                 std::to_string(masks.unit_masks[i].numel()) +
                                 " != unit count " + std::to_string(params.spec[i].out_dim));
}

void check_input(const Mlp& params, const Tensor& in) {
    if (in.rank() != 2 || in.cols() != params.in_dim())
        throw DimensionError("forward: input " + in.shape_str() + " does not match first layer in_dim " +
                             std::to_string(params.in_dim()));
}
} // namespace

std::vector<ad::NodePtr> forward_layers(const Mlp& params, const DropoutMaskSet& masks,
                                        const ad::NodePtr& input) {
    check_input(params, input->value());
    check_mask_shapes(params, masks);
    std::vector<ad::NodePtr> acts;
    acts.reserve(params.num_layers());
    ad::NodePtr h = input;
    for (std::size_t i = 0; i < params.num_layers(); ++i) {
        ad::NodePtr z = ad::add_row(ad::matmul(h, params.weights[i]), params.biases[i]);
        switch (params.spec[i].activation) {
            case Activation::leaky_relu: h = ad::leaky_relu(z, params.spec[i].slope); break;
            case Activation::sigmoid: h = ad::sigmoid(z); break;
            case Activation::linear: h = z; break;
        }
        // Unit dropout: a dropped unit's activation is exactly zero, so the
        // output is structurally independent of everything downstream of it.
        if (masks.layer_masked(i))
            h = ad::mul_row(h, ad::Node::constant(masks.unit_masks[i]));
        acts.push_back(h);
    }
    return acts;
}

ad::NodePtr forward(const Mlp& params, const DropoutMaskSet& masks, const ad::NodePtr& input) {
    return forward_layers(params, masks, input).back();
}

namespace {
using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor layer_value(const Tensor& h, const LayerSpec& spec, const Tensor& w, const Tensor& b,
                   const Tensor& mask) {
    Tensor out({h.rows(), w.cols()});
    Eigen::Map<EMat>(out.data(), static_cast<Eigen::Index>(out.rows()),
                     static_cast<Eigen::Index>(out.cols()))
        .noalias() = Eigen::Map<const EMat>(h.data(), static_cast<Eigen::Index>(h.rows()),
                                            static_cast<Eigen::Index>(h.cols())) *
                     Eigen::Map<const EMat>(w.data(), static_cast<Eigen::Index>(w.rows()),
                                            static_cast<Eigen::Index>(w.cols()));
    const std::size_t r = out.rows(), c = out.cols();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            double z = out.at(i, j) + b[j];
            switch (spec.activation) {
                case Activation::leaky_relu: z = z >= 0.0 ? z : spec.slope * z; break;
                case Activation::sigmoid:
                    z = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                 : std::exp(z) / (1.0 + std::exp(z));
                    break;
                case Activation::linear: break;
            }
            if (!mask.empty()) z *= mask[j];
            out.at(i, j) = z;
        }
    return out;
}
} // namespace

std::vector<Tensor> forward_layers_value(const Mlp& params, const DropoutMaskSet& masks,
                                         const Tensor& input) {
    check_input(params, input);
    check_mask_shapes(params, masks);
    std::vector<Tensor> acts;
    acts.reserve(params.num_layers());
    const Tensor* h = &input;
    for (std::size_t i = 0; i < params.num_layers(); ++i) {
        acts.push_back(layer_value(*h, params.spec[i], params.weights[i]->value(),
                                   params.biases[i]->value(), masks.unit_masks[i]));
        h = &acts.back();
    }
    return acts;
}

Tensor forward_value(const Mlp& params, const DropoutMaskSet& masks, const Tensor& input) {
    return forward_layers_value(params, masks, input).back();
}

OptimizerState OptimizerState::sgd(double lr, double weight_decay) {
    OptimizerState s;
    s.kind = OptKind::sgd;
    s.learning_rate = lr;
    s.weight_decay = weight_decay;
    s.validate();
    return s;
}

OptimizerState OptimizerState::adam(double lr, double weight_decay, double beta1, double beta2,
                                    double eps) {
    OptimizerState s;
    s.kind = OptKind::adam;
    s.learning_rate = lr;
    s.weight_decay = weight_decay;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    s.validate();
    return s;
}

void OptimizerState::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("optimizer: learning_rate must be > 0");
    if (weight_decay < 0.0) throw ConfigError("optimizer: weight_decay must be >= 0");
    if (kind == OptKind::adam &&
        !(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0))
        throw ConfigError("optimizer: adam betas must lie in [0,1), eps > 0");
}

void apply_update(std::span<const ad::NodePtr> params, const std::vector<Tensor>& grads,
                  OptimizerState& opt) {
    if (grads.size() != params.size())
        throw ContractError("apply_update: " + std::to_string(grads.size()) + " gradients for " +
                            std::to_string(params.size()) + " parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(params[i]->value(), grads[i], "apply_update");
        if (!grads[i].all_finite())
            throw NumericError("apply_update: non-finite gradient for parameter " +
                               std::to_string(i) + "; step aborted, parameters unchanged");
    }
    if (opt.kind == OptKind::adam && opt.m.empty()) {
        opt.m.reserve(params.size());
        opt.v.reserve(params.size());
        for (const auto& p : params) {
            opt.m.push_back(Tensor::zeros(p->value().shape()));
            opt.v.push_back(Tensor::zeros(p->value().shape()));
        }
    }
    opt.step_count += 1;
    const double lr = opt.learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = params[i]->value();
        const Tensor& g = grads[i];
        if (opt.kind == OptKind::sgd) {
            for (std::size_t j = 0; j < w.numel(); ++j)
                w[j] -= lr * (g[j] + 2.0 * opt.weight_decay * w[j]);
        } else {
            const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
            const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
            Tensor& m = opt.m[i];
            Tensor& v = opt.v[i];
            for (std::size_t j = 0; j < w.numel(); ++j) {
                const double ge = g[j] + 2.0 * opt.weight_decay * w[j];
                m[j] = opt.beta1 * m[j] + (1.0 - opt.beta1) * ge;
                v[j] = opt.beta2 * v[j] + (1.0 - opt.beta2) * ge * ge;
                const double mhat = m[j] / c1;
                const double vhat = v[j] / c2;
                w[j] -= lr * mhat / (std::sqrt(vhat) + opt.eps);
            }
        }
    }
}

void apply_update(Mlp& params, const std::vector<Tensor>& grads, OptimizerState& opt) {
    auto p = params.parameters();
    apply_update(std::span<const ad::NodePtr>(p), grads, opt);
}

// --- checkpoint io ----------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'P', 'R', 'B', 'G', 'A', 'N', '0', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(os, bits);
}

bool get_u32(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return true;
}

std::uint64_t get_u64_or_throw(std::istream& is, const char* what) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw ContractError(std::string("checkpoint: truncated while reading ") + what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}
} // namespace

void save_checkpoint(const std::string& path, const std::vector<Tensor>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ContractError("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 8);
    for (const Tensor& t : tensors) {
        put_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t e : t.shape()) put_u64(os, static_cast<std::uint64_t>(e));
        for (std::size_t i = 0; i < t.numel(); ++i) put_f64(os, t[i]);
    }
    if (!os) throw ContractError("checkpoint: write failed for " + path);
}

std::vector<Tensor> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ContractError("checkpoint: cannot open " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw ContractError("checkpoint: bad magic in " + path);
    std::vector<Tensor> out;
    std::uint32_t rank;
    while (get_u32(is, rank)) {
        if (rank > 8) throw ContractError("checkpoint: implausible rank " + std::to_string(rank));
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i)
            shape[i] = static_cast<std::size_t>(get_u64_or_throw(is, "extent"));
        Tensor t(shape);
        for (std::size_t i = 0; i < t.numel(); ++i) {
            const std::uint64_t bits = get_u64_or_throw(is, "payload");
            double d;
            std::memcpy(&d, &bits, 8);
            t[i] = d;
        }
        out.push_back(std::move(t));
    }
    return out;
}

void save_params(const std::string& path, const Mlp& params) {
    std::vector<Tensor> ts;
    for (const auto& p : params.parameters()) ts.push_back(p->value());
    save_checkpoint(path, ts);
}

void load_params(const std::string& path, Mlp& params) {
    auto ts = load_checkpoint(path);
    auto ps = params.parameters();
    if (ts.size() != ps.size())
        throw ContractError("checkpoint: " + std::to_string(ts.size()) + " tensors for " +
                            std::to_string(ps.size()) + " parameters");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        require_same_shape(ps[i]->value(), ts[i], "load_params");
        ps[i]->value() = std::move(ts[i]);
    }
}

} // namespace prbgan::nn
