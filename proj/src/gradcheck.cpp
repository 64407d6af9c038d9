#include "prbgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "prbgan/gan.hpp"
#include "prbgan/nn.hpp"
#include "prbgan/rng.hpp"
#include "prbgan/synthdata.hpp"

namespace prbgan::gradcheck {

namespace ad = prbgan::autodiff;

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
    return std::fabs(analytic - numeric) / denom;
}

Report check(const std::function<ad::NodePtr()>& build, std::span<const ad::NodePtr> leaves,
             double h) {
    for (const auto& l : leaves) l->zero_grad();
    ad::NodePtr root = build();
    ad::backward(root);
    std::vector<Tensor> analytic;
    analytic.reserve(leaves.size());
    for (const auto& l : leaves) analytic.push_back(l->grad());

    Report rep;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor& v = leaves[li]->value();
        for (std::size_t i = 0; i < v.numel(); ++i) {
            const double orig = v[i];
            v[i] = orig + h;
            const double fp = build()->value().item();
            v[i] = orig - h;
            const double fm = build()->value().item();
            v[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            rep.max_rel_err = std::max(rep.max_rel_err, relative_error(analytic[li][i], fd));
            rep.entries_checked += 1;
        }
    }
    return rep;
}

namespace {

struct TestRig {
    gan::GanConfig cfg;
    nn::Mlp gen, disc, u_head;
    nn::DropoutMaskSet gmasks, dmasks_a, dmasks_b;
    ad::NodePtr z_in, x_in;
    Tensor sliced_proj; // fixed unit projections for the sliced variant

    std::vector<ad::NodePtr> leaves() const {
        std::vector<ad::NodePtr> out = gen.parameters();
        for (const auto& p : disc.parameters()) out.push_back(p);
        if (!u_head.spec.empty())
            for (const auto& p : u_head.parameters()) out.push_back(p);
        return out;
    }
};

TestRig make_rig(gan::Variant variant, std::uint64_t seed) {
    rng::Stream dims(rng::derive(seed, {1}));
    gan::NetSpec net;
    net.data_dim = 1 + dims.index(3);
    net.hidden = 6 + dims.index(11); // widths well under the 32 cap
    net.hidden_layers = 3;           // 4 fully connected layers
    net.leaky_slope = 0.2;

    TestRig rig;
    rig.cfg.variant = variant;
    rig.cfg.latent_dim = 1 + static_cast<int>(dims.index(3));
    rig.cfg.batch = 3 + static_cast<int>(dims.index(3));
    rig.cfg.n_mc = 3;
    rig.cfg.p = 0.4;
    rig.cfg.b1 = 0.3;
    rig.cfg.b2 = 0.3;
    rig.cfg.lambda_var = variant == gan::Variant::prb_v2 ? 1.0 : 0.0;

    rig.gen = nn::xavier_init(gan::generator_layers(net, rig.cfg.latent_dim),
                              rng::derive(seed, {2}));
    rig.disc = nn::xavier_init(gan::discriminator_layers(net), rng::derive(seed, {3}));
    if (rig.cfg.has_uncertainty_head())
        rig.u_head = nn::xavier_init({{net.hidden, 1, nn::Activation::linear, 0.2, false}},
                                     rng::derive(seed, {4}));

    rng::Stream mask_rng(rng::derive(seed, {5}));
    rig.gmasks = rig.cfg.gen_uses_dropout()
                     ? nn::sample_mask_set(rig.gen.spec, rig.cfg.p, mask_rng)
                     : nn::DropoutMaskSet::all_ones(rig.gen.spec);
    rig.dmasks_a = rig.cfg.disc_uses_dropout()
                       ? nn::sample_mask_set(rig.disc.spec, rig.cfg.p, mask_rng)
                       : nn::DropoutMaskSet::all_ones(rig.disc.spec);
    rig.dmasks_b = rig.cfg.disc_uses_dropout()
                       ? nn::sample_mask_set(rig.disc.spec, rig.cfg.p, mask_rng)
                       : nn::DropoutMaskSet::all_ones(rig.disc.spec);

    // Nonzero biases: with zero biases a fully-masked fan-in parks a leaky
    // pre-activation exactly on the kink, where central differences and the
    // one-sided analytic derivative legitimately disagree.
    rng::Stream bias_rng(rng::derive(seed, {7}));
    for (nn::Mlp* m : {&rig.gen, &rig.disc})
        for (auto& b : m->biases)
            for (std::size_t i = 0; i < b->value().numel(); ++i)
                b->value()[i] = bias_rng.uniform(-0.3, 0.3);

    rng::Stream data_rng(rng::derive(seed, {6}));
    rig.z_in = ad::Node::constant(synthdata::sample_latent(
        static_cast<std::size_t>(rig.cfg.latent_dim), rig.cfg.batch, data_rng));
    Tensor x({static_cast<std::size_t>(rig.cfg.batch), net.data_dim});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = data_rng.gaussian(0.0, 1.0);
    rig.x_in = ad::Node::constant(x);

    if (variant == gan::Variant::swgan || variant == gan::Variant::prb_swgan) {
        rng::Stream proj_rng(rng::derive(seed, {8}));
        rig.sliced_proj = gan::sample_projections(net.hidden, 4, proj_rng);
    }
    return rig;
}

// Finite differences with step h only see the correct derivative when no
// leaky pre-activation sits within a safety margin of its kink (and, for the
// sliced objective, when no two projected values are near a sorting tie).
double min_leaky_preact_margin(const nn::Mlp& net, const nn::DropoutMaskSet& masks,
                               const Tensor& input) {
    double margin = 1e300;
    Tensor h = input;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const Tensor& w = net.weights[l]->value();
        const Tensor& b = net.biases[l]->value();
        Tensor z({h.rows(), w.cols()});
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t j = 0; j < z.cols(); ++j) {
                double acc = b[j];
                for (std::size_t kk = 0; kk < h.cols(); ++kk)
                    acc += h.at(i, kk) * w.at(kk, j);
                z.at(i, j) = acc;
            }
        for (std::size_t i = 0; i < z.numel(); ++i) {
            double v = z[i];
            if (net.spec[l].activation == nn::Activation::leaky_relu)
                margin = std::min(margin, std::fabs(v));
            if (net.spec[l].activation == nn::Activation::leaky_relu && v < 0.0)
                v *= net.spec[l].slope;
            else if (net.spec[l].activation == nn::Activation::sigmoid)
                v = 1.0 / (1.0 + std::exp(-v));
            z[i] = v;
        }
        if (masks.layer_masked(l))
            for (std::size_t i = 0; i < z.rows(); ++i)
                for (std::size_t j = 0; j < z.cols(); ++j)
                    z.at(i, j) *= masks.unit_masks[l][j];
        h = std::move(z);
    }
    return margin;
}

double min_sorted_gap(const Tensor& values) {
    double gap = 1e300;
    for (std::size_t c = 0; c < values.cols(); ++c) {
        std::vector<double> col(values.rows());
        for (std::size_t r = 0; r < values.rows(); ++r) col[r] = values.at(r, c);
        std::sort(col.begin(), col.end());
        for (std::size_t r = 1; r < col.size(); ++r) gap = std::min(gap, col[r] - col[r - 1]);
    }
    return gap;
}

bool rig_is_regular(const TestRig& rig, const Tensor& sliced_proj) {
    constexpr double kMargin = 1e-3;
    const Tensor& z = rig.z_in->value();
    const Tensor& x = rig.x_in->value();
    const Tensor fake = nn::forward_value(rig.gen, rig.gmasks, z);
    if (min_leaky_preact_margin(rig.gen, rig.gmasks, z) < kMargin) return false;
    if (min_leaky_preact_margin(rig.disc, rig.dmasks_a, x) < kMargin) return false;
    if (min_leaky_preact_margin(rig.disc, rig.dmasks_a, fake) < kMargin) return false;
    if (rig.cfg.variant == gan::Variant::prb_v1 || rig.cfg.variant == gan::Variant::prb_v2)
        if (min_leaky_preact_margin(rig.disc, rig.dmasks_b, fake) < kMargin) return false;
    if (!sliced_proj.empty()) {
        auto features = [&](const Tensor& in) {
            auto acts = nn::forward_layers_value(rig.disc, rig.dmasks_a, in);
            return acts[acts.size() - 2];
        };
        auto project = [&](const Tensor& f) {
            Tensor p({f.rows(), sliced_proj.cols()});
            for (std::size_t i = 0; i < p.rows(); ++i)
                for (std::size_t j = 0; j < p.cols(); ++j) {
                    double acc = 0.0;
                    for (std::size_t kk = 0; kk < f.cols(); ++kk)
                        acc += f.at(i, kk) * sliced_proj.at(kk, j);
                    p.at(i, j) = acc;
                }
            return p;
        };
        if (min_sorted_gap(project(features(x))) < kMargin) return false;
        if (min_sorted_gap(project(features(fake))) < kMargin) return false;
    }
    return true;
}

// Composite loss with both networks live, so finite differences cover every
// parameter through the full graph.
ad::NodePtr build_variant_loss(const TestRig& rig) {
    const nn::Mlp* uh = rig.u_head.spec.empty() ? nullptr : &rig.u_head;
    auto fake = nn::forward(rig.gen, rig.gmasks, rig.z_in);
    auto out_real = gan::disc_forward(rig.disc, uh, rig.dmasks_a, rig.x_in);
    auto out_fake = gan::disc_forward(rig.disc, uh, rig.dmasks_a, fake);
    switch (rig.cfg.variant) {
        case gan::Variant::prb_v1:
        case gan::Variant::prb_v2: {
            std::vector<gan::DiscOutput> outs;
            outs.push_back(out_fake);
            outs.push_back(gan::disc_forward(rig.disc, uh, rig.dmasks_b, fake));
            gan::GanConfig cfg2 = rig.cfg;
            cfg2.n_mc = 2;
            return ad::add(gan::disc_sample_loss(out_real, out_fake, rig.cfg),
                           gan::gen_loss_v2(outs, cfg2));
        }
        case gan::Variant::swgan:
        case gan::Variant::prb_swgan: {
            auto sliced =
                gan::sliced_w_node(out_real.features, out_fake.features, rig.sliced_proj);
            return ad::add(sliced, gan::disc_sample_loss(out_real, out_fake, rig.cfg));
        }
        default:
            return ad::add(gan::disc_sample_loss(out_real, out_fake, rig.cfg),
                           gan::gen_sample_loss(out_fake, rig.cfg));
    }
}

} // namespace

std::vector<SuiteResult> run_loss_suite(std::uint64_t seed, int n_models, double tol, double h) {
    const std::pair<gan::Variant, const char*> variants[] = {
        {gan::Variant::vanilla_ns, "vanilla"}, {gan::Variant::prb, "prb"},
        {gan::Variant::prb_v1, "v1"},          {gan::Variant::prb_v2, "v2"},
        {gan::Variant::swgan, "sliced_w"},
    };
    std::vector<SuiteResult> results;
    for (auto [variant, name] : variants) {
        SuiteResult res;
        res.name = name;
        res.pass = true;
        for (int k = 0; k < n_models; ++k) {
            TestRig rig;
            for (std::uint64_t attempt = 0;; ++attempt) {
                rig = make_rig(variant,
                               rng::derive(seed, {static_cast<std::uint64_t>(variant),
                                                  static_cast<std::uint64_t>(k), attempt}));
                if (rig_is_regular(rig, rig.sliced_proj) || attempt >= 200) break;
            }
            auto leaves = rig.leaves();
            Report rep = check([&rig] { return build_variant_loss(rig); },
                               std::span<const ad::NodePtr>(leaves), h);
            res.max_rel_err = std::max(res.max_rel_err, rep.max_rel_err);
            res.entries += rep.entries_checked;
        }
        res.pass = res.max_rel_err < tol;
        results.push_back(std::move(res));
    }
    return results;
}

} // namespace prbgan::gradcheck
