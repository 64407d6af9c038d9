#include "prbgan/gan.hpp"

#include <cmath>
#include <cstring>

namespace prbgan::gan {

namespace ad = prbgan::autodiff;

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::vanilla_ns: return "vanilla_ns";
        case Variant::vanilla_ls: return "vanilla_ls";
        case Variant::prb: return "prb";
        case Variant::prb_v1: return "prb_v1";
        case Variant::prb_v2: return "prb_v2";
        case Variant::swgan: return "swgan";
        case Variant::prb_swgan: return "prb_swgan";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    for (Variant v : {Variant::vanilla_ns, Variant::vanilla_ls, Variant::prb, Variant::prb_v1,
                      Variant::prb_v2, Variant::swgan, Variant::prb_swgan})
        if (name == variant_name(v)) return v;
    throw ConfigError("unknown variant '" + name + "'");
}

void GanConfig::validate() const {
    if (n_mc < 1) throw ConfigError("gan: n_mc must be >= 1");
    if (batch < 1) throw ConfigError("gan: batch must be >= 1");
    if (latent_dim < 1) throw ConfigError("gan: latent_dim must be >= 1");
    if (!(b1 > 0.0)) throw ConfigError("gan: b1 must be > 0");
    if (!(b2 > 0.0)) throw ConfigError("gan: b2 must be > 0");
    if (lambda_var < 0.0) throw ConfigError("gan: lambda_var must be >= 0");
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("gan: p must lie in [0,1)");
    for (double pl : p_per_layer)
        if (!(pl >= 0.0 && pl < 1.0)) throw ConfigError("gan: per-layer p must lie in [0,1)");
    if (variant == Variant::prb_v2 && n_mc < 2)
        throw ConfigError("gan: prb_v2 needs n_mc >= 2 (variance of a singleton score set)");
    if (is_sliced()) {
        if (n_projections < 1) throw ConfigError("gan: n_projections must be >= 1");
        if (m_slice < 1) throw ConfigError("gan: m_slice must be >= 1");
    }
    if (data_shift.size() != data_scale.size())
        throw ConfigError("gan: data_shift and data_scale must have equal length");
    for (double s : data_scale)
        if (!(s > 0.0)) throw ConfigError("gan: data_scale entries must be > 0");
    nn::OptimizerState opt;
    opt.kind = opt_kind;
    opt.learning_rate = learning_rate;
    opt.weight_decay = weight_decay;
    opt.beta1 = adam_beta1;
    opt.beta2 = adam_beta2;
    opt.eps = adam_eps;
    opt.validate();
}

std::vector<nn::LayerSpec> generator_layers(const NetSpec& net, std::size_t latent_dim) {
    std::vector<nn::LayerSpec> layers;
    std::size_t in = latent_dim;
    for (std::size_t i = 0; i < net.hidden_layers; ++i) {
        layers.push_back({in, net.hidden, nn::Activation::leaky_relu, net.leaky_slope, true});
        in = net.hidden;
    }
    layers.push_back({in, net.data_dim, nn::Activation::linear, net.leaky_slope, false});
    return layers;
}

std::vector<nn::LayerSpec> discriminator_layers(const NetSpec& net) {
    std::vector<nn::LayerSpec> layers;
    std::size_t in = net.data_dim;
    for (std::size_t i = 0; i < net.hidden_layers; ++i) {
        layers.push_back({in, net.hidden, nn::Activation::leaky_relu, net.leaky_slope, true});
        in = net.hidden;
    }
    layers.push_back({in, 1, nn::Activation::linear, net.leaky_slope, false});
    return layers;
}

GanModel GanModel::build(const GanConfig& cfg, const NetSpec& net) {
    cfg.validate();
    GanModel m;
    m.cfg = cfg;
    m.gen = nn::xavier_init(generator_layers(net, static_cast<std::size_t>(cfg.latent_dim)),
                            rng::derive(cfg.seed, {stream_tag::gen_init}));
    m.disc = nn::xavier_init(discriminator_layers(net),
                             rng::derive(cfg.seed, {stream_tag::disc_init}));
    if (cfg.has_uncertainty_head()) {
        const std::size_t penult = net.hidden_layers >= 1 ? net.hidden : net.data_dim;
        m.u_head = nn::xavier_init({{penult, 1, nn::Activation::linear, 0.2, false}},
                                   rng::derive(cfg.seed, {stream_tag::u_head_init}));
    }
    auto make_opt = [&cfg]() {
        return cfg.opt_kind == nn::OptKind::sgd
                   ? nn::OptimizerState::sgd(cfg.learning_rate, cfg.weight_decay)
                   : nn::OptimizerState::adam(cfg.learning_rate, cfg.weight_decay,
                                              cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    };
    m.gen_opt = make_opt();
    m.disc_opt = make_opt();
    return m;
}

DiscOutput disc_forward(const nn::Mlp& disc, const nn::Mlp* u_head,
                        const nn::DropoutMaskSet& masks, const ad::NodePtr& input) {
    auto acts = nn::forward_layers(disc, masks, input);
    DiscOutput out;
    out.logit = acts.back();
    out.features = acts.size() >= 2 ? acts[acts.size() - 2] : input;
    if (u_head) {
        auto raw = nn::forward(*u_head, nn::DropoutMaskSet::all_ones(u_head->spec), out.features);
        out.uncertainty = ad::softplus(raw);
    }
    return out;
}

ad::NodePtr weighted_logit(const ad::NodePtr& logit, const ad::NodePtr& uncertainty, double b1) {
    if (!(b1 > 0.0)) throw ContractError("weighted_logit: b1 must be > 0");
    if (!uncertainty) throw ContractError("weighted_logit: uncertainty output missing");
    return ad::div(logit, ad::add(uncertainty, b1));
}

namespace {

ad::NodePtr square(const ad::NodePtr& x) { return ad::mul(x, x); }

// Mean BCE over the 2B scored rows: (BCE(real->1) + BCE(fake->0)) / 2.
ad::NodePtr bce_pair(const ad::NodePtr& logit_real, const ad::NodePtr& logit_fake) {
    auto lr = ad::bce_with_logits(logit_real, Tensor::ones(logit_real->value().shape()));
    auto lf = ad::bce_with_logits(logit_fake, Tensor::zeros(logit_fake->value().shape()));
    return ad::mul(ad::add(lr, lf), 0.5);
}

} // namespace

ad::NodePtr disc_sample_loss(const DiscOutput& real, const DiscOutput& fake,
                             const GanConfig& cfg) {
    switch (cfg.variant) {
        case Variant::vanilla_ls: {
            auto lr = ad::mean(square(ad::add(real.logit, -1.0)));
            auto lf = ad::mean(square(fake.logit));
            return ad::mul(ad::add(lr, lf), 0.5);
        }
        case Variant::prb_v1:
        case Variant::prb_v2: {
            auto wr = weighted_logit(real.logit, real.uncertainty, cfg.b1);
            auto wf = weighted_logit(fake.logit, fake.uncertainty, cfg.b1);
            auto bce = bce_pair(wr, wf);
            auto penalty =
                ad::mul(ad::add(ad::mean(real.uncertainty), ad::mean(fake.uncertainty)), 0.5);
            return ad::add(bce, penalty);
        }
        default:
            return bce_pair(real.logit, fake.logit);
    }
}

ad::NodePtr gen_sample_loss(const DiscOutput& fake, const GanConfig& cfg) {
    if (cfg.variant == Variant::vanilla_ls)
        return ad::mean(square(ad::add(fake.logit, -1.0)));
    return ad::bce_with_logits(fake.logit, Tensor::ones(fake.logit->value().shape()));
}

namespace {

double tensor_mean(const Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.numel(); ++i) s += t[i];
    return s / static_cast<double>(t.numel());
}

// Batch-averaged population variance across the per-sample score columns.
double score_set_variance_value(const std::vector<Tensor>& per_sample_logits) {
    if (per_sample_logits.size() < 2) return 0.0;
    const std::size_t n = per_sample_logits.size();
    const std::size_t b = per_sample_logits.front().numel();
    double acc = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        double mu = 0.0;
        for (const Tensor& t : per_sample_logits) mu += t[r];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (const Tensor& t : per_sample_logits) {
            const double d = t[r] - mu;
            var += d * d;
        }
        acc += var / static_cast<double>(n);
    }
    return acc / static_cast<double>(b);
}

std::vector<Tensor> collect_scaled_grads(const std::vector<ad::NodePtr>& params, double scale) {
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (const auto& p : params) {
        Tensor g = p->grad();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= scale;
        grads.push_back(std::move(g));
    }
    return grads;
}

double grad_norm(const std::vector<Tensor>& grads) {
    double acc = 0.0;
    for (const Tensor& g : grads)
        for (std::size_t i = 0; i < g.numel(); ++i) acc += g[i] * g[i];
    return std::sqrt(acc);
}

nn::DropoutMaskSet masks_for(const nn::Mlp& net, bool use_dropout, const GanConfig& cfg,
                             std::uint64_t stream_seed) {
    if (!use_dropout) return nn::DropoutMaskSet::all_ones(net.spec);
    rng::Stream s(stream_seed);
    if (!cfg.p_per_layer.empty()) return nn::sample_mask_set(net.spec, cfg.p_per_layer, s);
    return nn::sample_mask_set(net.spec, cfg.p, s);
}

} // namespace

ad::NodePtr disc_loss_v1(const std::vector<DiscOutput>& outputs_real,
                         const std::vector<DiscOutput>& outputs_fake, const GanConfig& cfg) {
    if (outputs_real.size() != static_cast<std::size_t>(cfg.n_mc) ||
        outputs_fake.size() != outputs_real.size())
        throw ContractError("disc_loss_v1: expected " + std::to_string(cfg.n_mc) +
                            " outputs per side, got " + std::to_string(outputs_real.size()) +
                            "/" + std::to_string(outputs_fake.size()));
    ad::NodePtr acc;
    for (std::size_t i = 0; i < outputs_real.size(); ++i) {
        const DiscOutput& r = outputs_real[i];
        const DiscOutput& f = outputs_fake[i];
        if (!r.uncertainty || !f.uncertainty)
            throw ContractError("disc_loss_v1: output " + std::to_string(i) +
                                " has no uncertainty");
        auto bce = bce_pair(weighted_logit(r.logit, r.uncertainty, cfg.b1),
                            weighted_logit(f.logit, f.uncertainty, cfg.b1));
        auto penalty =
            ad::mul(ad::add(ad::mean(r.uncertainty), ad::mean(f.uncertainty)), 0.5);
        auto term = ad::add(bce, penalty);
        acc = acc ? ad::add(acc, term) : term;
    }
    return ad::mul(acc, 1.0 / static_cast<double>(cfg.n_mc));
}

ad::NodePtr gen_loss_v2(const std::vector<DiscOutput>& fake_outputs, const GanConfig& cfg) {
    const std::size_t n = fake_outputs.size();
    if (n != static_cast<std::size_t>(cfg.n_mc))
        throw ContractError("gen_loss_v2: expected " + std::to_string(cfg.n_mc) +
                            " outputs, got " + std::to_string(n));
    // Weighted scores when the uncertainty head exists, raw scores otherwise.
    const bool weighted = static_cast<bool>(fake_outputs.front().uncertainty);
    std::vector<ad::NodePtr> scores;
    scores.reserve(n);
    for (const DiscOutput& o : fake_outputs) {
        if (static_cast<bool>(o.uncertainty) != weighted)
            throw ContractError("gen_loss_v2: mixed outputs with and without uncertainty");
        scores.push_back(weighted ? weighted_logit(o.logit, o.uncertainty, cfg.b1) : o.logit);
    }
    ad::NodePtr bce_acc;
    for (const auto& s : scores) {
        auto term = ad::bce_with_logits(s, Tensor::ones(s->value().shape()));
        bce_acc = bce_acc ? ad::add(bce_acc, term) : term;
    }
    ad::NodePtr loss = ad::mul(bce_acc, 1.0 / static_cast<double>(n));
    if (cfg.lambda_var == 0.0) return loss;
    if (n < 2)
        throw ConfigError("gen_loss_v2: variance reward needs at least 2 score samples");
    // Per generated point: population variance and mean across the N scores.
    ad::NodePtr sum;
    for (const auto& s : scores) sum = sum ? ad::add(sum, s) : s;
    ad::NodePtr mu = ad::mul(sum, 1.0 / static_cast<double>(n));
    ad::NodePtr var_acc;
    for (const auto& s : scores) {
        auto term = square(ad::sub(s, mu));
        var_acc = var_acc ? ad::add(var_acc, term) : term;
    }
    ad::NodePtr var = ad::mul(var_acc, 1.0 / static_cast<double>(n));
    ad::NodePtr reward = ad::mean(ad::div(var, ad::add(square(mu), cfg.b2)));
    return ad::sub(loss, ad::mul(reward, cfg.lambda_var));
}

ad::NodePtr sliced_w_node(const ad::NodePtr& features_real, const ad::NodePtr& features_fake,
                          const Tensor& projections) {
    const Tensor& fr = features_real->value();
    const Tensor& ff = features_fake->value();
    if (fr.rank() != 2 || ff.rank() != 2)
        throw ContractError("sliced_w: feature sets must be rank 2");
    if (fr.rows() != ff.rows())
        throw ContractError("sliced_w: unequal row counts " + std::to_string(fr.rows()) +
                            " vs " + std::to_string(ff.rows()));
    if (projections.rank() != 2 || projections.rows() != fr.cols())
        throw DimensionError("sliced_w: projections " + projections.shape_str() +
                             " do not match features " + fr.shape_str());
    auto proj = ad::Node::constant(projections);
    return ad::sorted_sq_diff(ad::matmul(features_real, proj),
                              ad::matmul(features_fake, proj));
}

double sliced_w_distance(const Tensor& features_real, const Tensor& features_fake,
                         const Tensor& projections, int* non_unit_warnings) {
    if (projections.rank() != 2)
        throw DimensionError("sliced_w_distance: projections must be rank 2, got " +
                             projections.shape_str());
    Tensor proj = projections;
    const std::size_t d = proj.rows(), k = proj.cols();
    for (std::size_t c = 0; c < k; ++c) {
        double norm2 = 0.0;
        for (std::size_t r = 0; r < d; ++r) norm2 += proj.at(r, c) * proj.at(r, c);
        const double norm = std::sqrt(norm2);
        if (!(norm > 0.0))
            throw DomainError("sliced_w_distance: zero projection column " + std::to_string(c));
        if (std::fabs(norm - 1.0) > 1e-9) {
            for (std::size_t r = 0; r < d; ++r) proj.at(r, c) /= norm;
            if (non_unit_warnings) ++*non_unit_warnings;
        }
    }
    auto node = sliced_w_node(ad::Node::constant(features_real),
                              ad::Node::constant(features_fake), proj);
    return node->value().item();
}

Tensor sample_projections(std::size_t dim, std::size_t k, rng::Stream& rng) {
    Tensor proj({dim, k});
    for (std::size_t c = 0; c < k; ++c) {
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (std::size_t r = 0; r < dim; ++r) {
                proj.at(r, c) = rng.gaussian(0.0, 1.0);
                norm2 += proj.at(r, c) * proj.at(r, c);
            }
        } while (!(norm2 > 0.0));
        const double norm = std::sqrt(norm2);
        for (std::size_t r = 0; r < dim; ++r) proj.at(r, c) /= norm;
    }
    return proj;
}

namespace {
// Penultimate activation (the feature map of the sliced objectives).
Tensor features_value(const nn::Mlp& disc, const nn::DropoutMaskSet& masks, const Tensor& in) {
    auto acts = nn::forward_layers_value(disc, masks, in);
    return acts.size() >= 2 ? acts[acts.size() - 2] : in;
}
} // namespace

Tensor to_net_space(const GanConfig& cfg, const Tensor& data) {
    if (cfg.data_shift.empty()) return data;
    if (data.rank() != 2 || data.cols() != cfg.data_shift.size())
        throw DimensionError("to_net_space: data " + data.shape_str() +
                             " vs standardization of dimension " +
                             std::to_string(cfg.data_shift.size()));
    Tensor out = data;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c)
            out.at(r, c) = (out.at(r, c) - cfg.data_shift[c]) / cfg.data_scale[c];
    return out;
}

Tensor to_data_space(const GanConfig& cfg, const Tensor& net_out) {
    if (cfg.data_shift.empty()) return net_out;
    if (net_out.rank() != 2 || net_out.cols() != cfg.data_shift.size())
        throw DimensionError("to_data_space: output " + net_out.shape_str() +
                             " vs standardization of dimension " +
                             std::to_string(cfg.data_shift.size()));
    Tensor out = net_out;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c)
            out.at(r, c) = out.at(r, c) * cfg.data_scale[c] + cfg.data_shift[c];
    return out;
}

double prb_sliced_w_distance(const GanModel& model, const Tensor& batch_real,
                             std::uint64_t seed) {
    const GanConfig& cfg = model.cfg;
    if (cfg.m_slice < 1) throw ConfigError("prb_sliced_w_distance: m_slice must be >= 1");
    const std::size_t b = batch_real.rows();
    auto noise = rng::derive_stream(seed, {stream_tag::noise});
    const Tensor z = synthdata::sample_latent(static_cast<std::size_t>(cfg.latent_dim), b, noise,
                                              cfg.latent_prior);
    const Tensor fake =
        nn::forward_value(model.gen, nn::DropoutMaskSet::all_ones(model.gen.spec), z);
    const std::size_t feat_dim = model.disc.num_layers() >= 2
                                     ? model.disc.spec[model.disc.num_layers() - 2].out_dim
                                     : model.disc.in_dim();
    auto proj_rng = rng::derive_stream(seed, {stream_tag::projections});
    const Tensor proj =
        sample_projections(feat_dim, static_cast<std::size_t>(cfg.n_projections), proj_rng);
    const Tensor real_net = to_net_space(cfg, batch_real);
    double acc = 0.0;
    for (int m = 0; m < cfg.m_slice; ++m) {
        auto masks = masks_for(model.disc, cfg.disc_uses_dropout(), cfg,
                               rng::derive(seed, {stream_tag::disc_mask,
                                                  static_cast<std::uint64_t>(m)}));
        const Tensor fr = features_value(model.disc, masks, real_net);
        const Tensor ff = features_value(model.disc, masks, fake);
        acc += sliced_w_distance(fr, ff, proj);
    }
    return acc / static_cast<double>(cfg.m_slice);
}

// One noise batch per training step, shared between the discriminator and
// generator updates of that step (the generator trains against the z its
// opponent just saw).
static Tensor step_noise(const GanConfig& cfg, std::uint64_t step_index, std::uint64_t substep) {
    auto noise = rng::derive_stream(cfg.seed, {stream_tag::noise, step_index, substep});
    return synthdata::sample_latent(static_cast<std::size_t>(cfg.latent_dim),
                                    static_cast<std::size_t>(cfg.batch), noise,
                                    cfg.latent_prior);
}

StepReport disc_step(GanModel& model, const Tensor& batch_real, std::uint64_t step_index,
                     std::uint64_t substep) {
    const GanConfig& cfg = model.cfg;
    if (batch_real.rank() != 2 || batch_real.rows() != static_cast<std::size_t>(cfg.batch) ||
        batch_real.cols() != model.disc.in_dim())
        throw DimensionError("disc_step: batch_real " + batch_real.shape_str() + " must be [" +
                             std::to_string(cfg.batch) + "x" +
                             std::to_string(model.disc.in_dim()) + "]");
    const std::uint64_t phase = stream_tag::disc_phase;
    const Tensor z = step_noise(cfg, step_index, substep);
    // One sampled generator for the whole discriminator step.
    auto gen_masks = masks_for(model.gen, cfg.gen_uses_dropout(), cfg,
                               rng::derive(cfg.seed, {phase, step_index, substep,
                                                      stream_tag::gen_mask}));
    const Tensor fake = nn::forward_value(model.gen, gen_masks, z);

    model.disc.zero_grads();
    if (model.has_u_head()) model.u_head.zero_grads();
    auto real_in = ad::Node::constant(to_net_space(cfg, batch_real));
    auto fake_in = ad::Node::constant(fake);
    nn::Mlp* u_head = model.has_u_head() ? &model.u_head : nullptr;

    StepReport rep;
    std::vector<Tensor> fake_logits;
    fake_logits.reserve(static_cast<std::size_t>(cfg.n_mc));
    double u_acc = 0.0;
    for (int i = 0; i < cfg.n_mc; ++i) {
        auto disc_masks = masks_for(model.disc, cfg.disc_uses_dropout(), cfg,
                                    rng::derive(cfg.seed, {phase, step_index, substep,
                                                           stream_tag::disc_mask,
                                                           static_cast<std::uint64_t>(i)}));
        DiscOutput out_real = disc_forward(model.disc, u_head, disc_masks, real_in);
        DiscOutput out_fake = disc_forward(model.disc, u_head, disc_masks, fake_in);
        ad::NodePtr loss = disc_sample_loss(out_real, out_fake, cfg);
        if (!std::isfinite(loss->value().item()))
            throw NumericError("disc_step: non-finite loss at MC sample " + std::to_string(i));
        ad::backward(loss);
        rep.disc_loss += loss->value().item();
        rep.mean_logit_real += tensor_mean(out_real.logit->value());
        rep.mean_logit_fake += tensor_mean(out_fake.logit->value());
        if (out_real.uncertainty)
            u_acc += 0.5 * (tensor_mean(out_real.uncertainty->value()) +
                            tensor_mean(out_fake.uncertainty->value()));
        fake_logits.push_back(out_fake.logit->value());
    }
    const double inv_n = 1.0 / static_cast<double>(cfg.n_mc);
    rep.disc_loss *= inv_n;
    rep.mean_logit_real *= inv_n;
    rep.mean_logit_fake *= inv_n;
    rep.uncertainty_mean = u_acc * inv_n;
    rep.score_set_variance = score_set_variance_value(fake_logits);

    std::vector<ad::NodePtr> params = model.disc.parameters();
    if (model.has_u_head())
        for (const auto& p : model.u_head.parameters()) params.push_back(p);
    auto grads = collect_scaled_grads(params, inv_n);
    rep.grad_norm_disc = grad_norm(grads);
    nn::apply_update(std::span<const ad::NodePtr>(params), grads, model.disc_opt);
    return rep;
}

StepReport gen_step(GanModel& model, const Tensor& batch_real, std::uint64_t step_index,
                    std::uint64_t substep) {
    const GanConfig& cfg = model.cfg;
    const std::uint64_t phase = stream_tag::gen_phase;
    const Tensor z = step_noise(cfg, step_index, substep);
    auto z_in = ad::Node::constant(z);
    model.gen.zero_grads();
    nn::Mlp frozen_disc = model.disc.clone_frozen();
    StepReport rep;
    std::vector<ad::NodePtr> params = model.gen.parameters();
    std::vector<Tensor> grads;

    switch (cfg.variant) {
        case Variant::vanilla_ns:
        case Variant::vanilla_ls:
        case Variant::prb: {
            // One frozen discriminator, N generator samples.
            auto disc_masks = masks_for(model.disc, cfg.disc_uses_dropout(), cfg,
                                        rng::derive(cfg.seed, {phase, step_index, 0,
                                                               stream_tag::disc_mask}));
            for (int i = 0; i < cfg.n_mc; ++i) {
                auto gmasks = masks_for(model.gen, cfg.gen_uses_dropout(), cfg,
                                        rng::derive(cfg.seed, {phase, step_index, 0,
                                                               stream_tag::gen_mask,
                                                               static_cast<std::uint64_t>(i)}));
                auto fake = nn::forward(model.gen, gmasks, z_in);
                DiscOutput out = disc_forward(frozen_disc, nullptr, disc_masks, fake);
                ad::NodePtr loss = gen_sample_loss(out, cfg);
                if (!std::isfinite(loss->value().item()))
                    throw NumericError("gen_step: non-finite loss at MC sample " +
                                       std::to_string(i));
                ad::backward(loss);
                rep.gen_loss += loss->value().item();
                rep.mean_logit_fake += tensor_mean(out.logit->value());
            }
            const double inv_n = 1.0 / static_cast<double>(cfg.n_mc);
            rep.gen_loss *= inv_n;
            rep.mean_logit_fake *= inv_n;
            grads = collect_scaled_grads(params, inv_n);
            break;
        }
        case Variant::prb_v1:
        case Variant::prb_v2: {
            // Deterministic generator, N sampled discriminators on the same
            // generated points (the score set of the variance reward).
            auto fake = nn::forward(model.gen, nn::DropoutMaskSet::all_ones(model.gen.spec),
                                    z_in);
            nn::Mlp frozen_u = model.u_head.clone_frozen();
            std::vector<DiscOutput> outs;
            outs.reserve(static_cast<std::size_t>(cfg.n_mc));
            std::vector<Tensor> fake_logits;
            for (int i = 0; i < cfg.n_mc; ++i) {
                auto dmasks = masks_for(model.disc, cfg.disc_uses_dropout(), cfg,
                                        rng::derive(cfg.seed, {phase, step_index, 0,
                                                               stream_tag::disc_mask,
                                                               static_cast<std::uint64_t>(i)}));
                outs.push_back(disc_forward(frozen_disc, &frozen_u, dmasks, fake));
                fake_logits.push_back(outs.back().logit->value());
                rep.mean_logit_fake += tensor_mean(fake_logits.back());
                rep.uncertainty_mean += tensor_mean(outs.back().uncertainty->value());
            }
            GanConfig loss_cfg = cfg;
            if (cfg.variant == Variant::prb_v1) loss_cfg.lambda_var = 0.0;
            ad::NodePtr loss = gen_loss_v2(outs, loss_cfg);
            if (!std::isfinite(loss->value().item()))
                throw NumericError("gen_step: non-finite generator loss");
            ad::backward(loss);
            rep.gen_loss = loss->value().item();
            const double inv_n = 1.0 / static_cast<double>(cfg.n_mc);
            rep.mean_logit_fake *= inv_n;
            rep.uncertainty_mean *= inv_n;
            rep.score_set_variance = score_set_variance_value(fake_logits);
            grads = collect_scaled_grads(params, 1.0);
            break;
        }
        case Variant::swgan:
        case Variant::prb_swgan: {
            if (batch_real.rank() != 2 || batch_real.rows() != static_cast<std::size_t>(cfg.batch))
                throw DimensionError("gen_step: sliced variants need a real batch of " +
                                     std::to_string(cfg.batch) + " rows, got " +
                                     batch_real.shape_str());
            auto fake = nn::forward(model.gen, nn::DropoutMaskSet::all_ones(model.gen.spec),
                                    z_in);
            const std::size_t feat_dim =
                model.disc.num_layers() >= 2
                    ? model.disc.spec[model.disc.num_layers() - 2].out_dim
                    : model.disc.in_dim();
            auto proj_rng = rng::derive_stream(cfg.seed, {phase, step_index, 0,
                                                          stream_tag::projections});
            const Tensor proj = sample_projections(
                feat_dim, static_cast<std::size_t>(cfg.n_projections), proj_rng);
            const int m_total = cfg.variant == Variant::prb_swgan ? cfg.m_slice : 1;
            const Tensor real_net = to_net_space(cfg, batch_real);
            ad::NodePtr loss_acc;
            for (int m = 0; m < m_total; ++m) {
                auto dmasks = masks_for(model.disc, cfg.disc_uses_dropout(), cfg,
                                        rng::derive(cfg.seed, {phase, step_index, 0,
                                                               stream_tag::disc_mask,
                                                               static_cast<std::uint64_t>(m)}));
                const Tensor fr = features_value(model.disc, dmasks, real_net);
                auto acts = nn::forward_layers(frozen_disc, dmasks, fake);
                auto ff = acts.size() >= 2 ? acts[acts.size() - 2] : fake;
                auto term = sliced_w_node(ad::Node::constant(fr), ff, proj);
                loss_acc = loss_acc ? ad::add(loss_acc, term) : term;
            }
            ad::NodePtr loss = ad::mul(loss_acc, 1.0 / static_cast<double>(m_total));
            if (!std::isfinite(loss->value().item()))
                throw NumericError("gen_step: non-finite sliced loss");
            ad::backward(loss);
            rep.gen_loss = loss->value().item();
            grads = collect_scaled_grads(params, 1.0);
            break;
        }
    }
    rep.grad_norm_gen = grad_norm(grads);
    nn::apply_update(std::span<const ad::NodePtr>(params), grads, model.gen_opt);
    return rep;
}

Tensor generate(const GanModel& model, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ContractError("generate: n must be >= 1");
    const GanConfig& cfg = model.cfg;
    const std::size_t chunk = static_cast<std::size_t>(cfg.batch);
    const std::size_t dim = model.gen.out_dim();
    Tensor out({n, dim});
    std::size_t done = 0;
    std::uint64_t c = 0;
    while (done < n) {
        const std::size_t take = std::min(chunk, n - done);
        auto noise = rng::derive_stream(seed, {stream_tag::eval_noise, c});
        const Tensor z = synthdata::sample_latent(static_cast<std::size_t>(cfg.latent_dim),
                                                  take, noise, cfg.latent_prior);
        auto masks = masks_for(model.gen, cfg.gen_uses_dropout(), cfg,
                               rng::derive(seed, {stream_tag::eval_mask, c}));
        const Tensor fake = to_data_space(cfg, nn::forward_value(model.gen, masks, z));
        std::memcpy(out.data() + done * dim, fake.data(), take * dim * sizeof(double));
        done += take;
        ++c;
    }
    return out;
}

} // namespace prbgan::gan
