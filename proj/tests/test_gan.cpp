#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "prbgan/gan.hpp"
#include "prbgan/nn.hpp"
#include "prbgan/rng.hpp"
#include "prbgan/synthdata.hpp"

using namespace prbgan;
namespace ad = prbgan::autodiff;

namespace {

ad::NodePtr col(std::vector<double> v) {
    const std::size_t n = v.size();
    return ad::constant(Tensor::from({n, 1}, std::move(v)));
}

gan::DiscOutput fake_output(std::vector<double> logits, const double* u = nullptr) {
    gan::DiscOutput o;
    const std::size_t n = logits.size();
    o.logit = col(std::move(logits));
    if (u) o.uncertainty = ad::constant(Tensor::full({n, 1}, *u));
    o.features = o.logit;
    return o;
}

// Order-statistics oracle, independent of the autodiff path: project, sort
// with std::sort, pair, average the squared gaps.
double swd_oracle(const Tensor& real, const Tensor& fake, const Tensor& proj) {
    const std::size_t n = real.rows(), d = real.cols(), k = proj.cols();
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> pr(n), pf(n);
        for (std::size_t i = 0; i < n; ++i) {
            double sr = 0.0, sf = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                sr += real.at(i, j) * proj.at(j, c);
                sf += fake.at(i, j) * proj.at(j, c);
            }
            pr[i] = sr;
            pf[i] = sf;
        }
        std::sort(pr.begin(), pr.end());
        std::sort(pf.begin(), pf.end());
        for (std::size_t i = 0; i < n; ++i) acc += (pr[i] - pf[i]) * (pr[i] - pf[i]);
    }
    return acc / static_cast<double>(n * k);
}

Tensor random_matrix(std::size_t r, std::size_t c, rng::Stream& rng, double scale = 1.0) {
    Tensor t({r, c});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.gaussian(0.0, scale);
    return t;
}

gan::GanConfig tiny_cfg(gan::Variant v, std::uint64_t seed, int n_mc = 4) {
    gan::GanConfig cfg;
    cfg.variant = v;
    cfg.p = 0.4;
    cfg.n_mc = n_mc;
    cfg.batch = 8;
    cfg.latent_dim = 2;
    cfg.seed = seed;
    cfg.learning_rate = 1e-3;
    return cfg;
}

gan::NetSpec tiny_net() {
    gan::NetSpec net;
    net.data_dim = 1;
    net.hidden = 12;
    net.hidden_layers = 3;
    return net;
}

Tensor real_batch_for(const gan::GanConfig& cfg, std::uint64_t seed) {
    auto rng = rng::derive_stream(seed, {gan::stream_tag::real_batch, 1, 0});
    return synthdata::sample(synthdata::paper_mixture(), cfg.batch, rng);
}

bool params_bitwise_equal(const nn::Mlp& a, const nn::Mlp& b) {
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        if (std::memcmp(a.weights[l]->value().data(), b.weights[l]->value().data(),
                        a.weights[l]->value().numel() * 8) != 0)
            return false;
        if (std::memcmp(a.biases[l]->value().data(), b.biases[l]->value().data(),
                        a.biases[l]->value().numel() * 8) != 0)
            return false;
    }
    return true;
}

} // namespace

TEST_CASE("weighted_logit") {
    auto logit = col({2.6});
    auto u = col({0.7});
    CHECK(gan::weighted_logit(logit, u, 0.3)->value().item() ==
          doctest::Approx(2.6).epsilon(1e-15));

    auto u0 = col({0.0});
    CHECK(gan::weighted_logit(logit, u0, 0.3)->value().item() ==
          doctest::Approx(2.6 / 0.3).epsilon(1e-15));

    // |sigmoid(D') - 0.5| is nonincreasing as u grows, any fixed logit
    for (double raw : {-4.0, -0.3, 1.7, 8.0}) {
        double prev = 2.0;
        for (double uv = 0.0; uv <= 10.0; uv += 0.25) {
            const double w = gan::weighted_logit(col({raw}), col({uv}), 0.3)->value().item();
            const double gap = std::fabs(1.0 / (1.0 + std::exp(-w)) - 0.5);
            CHECK(gap <= prev + 1e-15);
            prev = gap;
        }
    }
    CHECK_THROWS_AS(gan::weighted_logit(logit, nullptr, 0.3), ContractError);
    CHECK_THROWS_AS(gan::weighted_logit(logit, u, 0.0), ContractError);
}

TEST_CASE("disc_loss_v1 reductions and penalty") {
    gan::GanConfig cfg;
    cfg.n_mc = 1;
    cfg.b1 = 1.0;

    SUBCASE("u == 0, b1 = 1 reduces to the plain BCE loss") {
        const double zero = 0.0;
        rng::Stream rng(3);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> lr(5), lf(5);
            for (auto& x : lr) x = rng.gaussian(0.0, 3.0);
            for (auto& x : lf) x = rng.gaussian(0.0, 3.0);
            auto real = fake_output(lr, &zero);
            auto fake = fake_output(lf, &zero);
            auto v1 = gan::disc_loss_v1({real}, {fake}, cfg);

            gan::GanConfig vanilla;
            vanilla.variant = gan::Variant::vanilla_ns;
            auto plain = gan::disc_sample_loss(fake_output(lr), fake_output(lf), vanilla);
            CHECK(v1->value().item() ==
                  doctest::Approx(plain->value().item()).epsilon(1e-12));
        }
    }

    SUBCASE("N=1, logits 0, u=0, b1=1 gives ln 2") {
        const double zero = 0.0;
        auto real = fake_output({0.0, 0.0}, &zero);
        auto fake = fake_output({0.0, 0.0}, &zero);
        CHECK(gan::disc_loss_v1({real}, {fake}, cfg)->value().item() ==
              doctest::Approx(std::log(2.0)).epsilon(1e-15));
    }

    SUBCASE("a constant uncertainty offset raises the loss once predictions saturate") {
        cfg.b1 = 0.3;
        double prev = -1e300;
        for (double uv : {0.0, 0.5, 1.0, 2.0, 4.0}) {
            auto real = fake_output({6.0, 7.0, 5.5}, &uv);
            auto fake = fake_output({-6.0, -8.0, -5.0}, &uv);
            const double loss = gan::disc_loss_v1({real}, {fake}, cfg)->value().item();
            CHECK(loss > prev);
            prev = loss;
        }
    }

    SUBCASE("list length must match n_mc") {
        const double zero = 0.0;
        auto o = fake_output({0.0}, &zero);
        cfg.n_mc = 2;
        CHECK_THROWS_AS(gan::disc_loss_v1({o}, {o}, cfg), ContractError);
    }
}

TEST_CASE("gen_loss_v2 worked example") {
    gan::GanConfig cfg;
    cfg.n_mc = 4;
    cfg.b2 = 0.3;
    cfg.lambda_var = 1.0;

    // score set [-5, 7, -5, 7]: mean 1, population variance 36
    auto scores1 = ad::constant(Tensor::from({4}, {-5, 7, -5, 7}));
    CHECK(ad::mean(scores1)->value().item() == 1.0);
    CHECK(ad::population_variance(scores1)->value().item() == 36.0);

    std::vector<gan::DiscOutput> set1 = {fake_output({-5.0}), fake_output({7.0}),
                                         fake_output({-5.0}), fake_output({7.0})};
    std::vector<gan::DiscOutput> set2 = {fake_output({1.0}), fake_output({1.0}),
                                         fake_output({1.0}), fake_output({1.0})};

    // frozen via a 40-digit softplus oracle
    const double bce1 = 2.503813407471446;
    const double bce2 = 0.3132616875182228;
    const double reward1 = 36.0 / 1.3;

    const double loss1 = gan::gen_loss_v2(set1, cfg)->value().item();
    const double loss2 = gan::gen_loss_v2(set2, cfg)->value().item();
    CHECK(std::fabs(loss1 - (bce1 - reward1)) < 1e-12);
    CHECK(std::fabs(loss2 - bce2) < 1e-12); // zero variance, zero reward
    CHECK(loss1 < loss2);                   // high variance rewarded at equal means

    SUBCASE("lambda = 0 reduces to the v1 generator loss") {
        cfg.lambda_var = 0.0;
        const double v1 = gan::gen_loss_v2(set1, cfg)->value().item();
        CHECK(std::fabs(v1 - bce1) < 1e-12);
    }

    SUBCASE("variance of a singleton is rejected") {
        cfg.n_mc = 1;
        CHECK_THROWS_AS(gan::gen_loss_v2({fake_output({1.0})}, cfg), ConfigError);
    }
}

TEST_CASE("gen_loss_v2 is strictly decreasing in score variance at fixed mean") {
    gan::GanConfig cfg;
    cfg.n_mc = 2;
    cfg.b2 = 0.3;
    cfg.lambda_var = 1.0;
    double prev = 1e300;
    for (double spread : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        // mean stays 1, population variance = spread^2
        std::vector<gan::DiscOutput> outs = {fake_output({1.0 - spread}),
                                             fake_output({1.0 + spread})};
        const double loss = gan::gen_loss_v2(outs, cfg)->value().item();
        if (spread > 0.0) CHECK(loss < prev);
        prev = loss;
    }
}

TEST_CASE("sliced_w_distance basics and oracle equivalence") {
    SUBCASE("identical feature sets give zero") {
        rng::Stream rng(4);
        Tensor f = random_matrix(10, 3, rng);
        Tensor proj({3, 2});
        rng::Stream prng(5);
        proj = gan::sample_projections(3, 2, prng);
        CHECK(gan::sliced_w_distance(f, f, proj) == 0.0);
    }

    SUBCASE("single pair at unit distance") {
        Tensor real = Tensor::from({1, 1}, {0.0});
        Tensor fake = Tensor::from({1, 1}, {1.0});
        Tensor proj = Tensor::from({1, 1}, {1.0});
        CHECK(gan::sliced_w_distance(real, fake, proj) == doctest::Approx(1.0).epsilon(1e-15));
    }

    SUBCASE("matches the order-statistics oracle on random instances") {
        rng::Stream rng(11);
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t n = 2 + rng.index(15), d = 1 + rng.index(4),
                              k = 1 + rng.index(8);
            Tensor real = random_matrix(n, d, rng);
            Tensor fake = random_matrix(n, d, rng);
            rng::Stream prng(rng.next_u64());
            Tensor proj = gan::sample_projections(d, k, prng);
            const double got = gan::sliced_w_distance(real, fake, proj);
            const double want = swd_oracle(real, fake, proj);
            CHECK(got == doctest::Approx(want).epsilon(1e-12));
            // symmetric in (real, fake)
            CHECK(gan::sliced_w_distance(fake, real, proj) ==
                  doctest::Approx(got).epsilon(1e-12));
            CHECK(got >= 0.0);
        }
    }

    SUBCASE("unequal row counts rejected; non-unit projections renormalized with warning") {
        rng::Stream rng(12);
        Tensor a = random_matrix(4, 2, rng);
        Tensor b = random_matrix(5, 2, rng);
        Tensor proj = gan::sample_projections(2, 3, rng);
        CHECK_THROWS_AS(gan::sliced_w_distance(a, b, proj), ContractError);

        Tensor fake = random_matrix(4, 2, rng);
        Tensor scaled = proj;
        for (std::size_t i = 0; i < scaled.numel(); ++i) scaled[i] *= 2.0;
        int warnings = 0;
        const double v1 = gan::sliced_w_distance(a, fake, scaled, &warnings);
        CHECK(warnings == 3);
        CHECK(v1 == doctest::Approx(gan::sliced_w_distance(a, fake, proj)).epsilon(1e-12));
    }
}

TEST_CASE("prb_sliced_w_distance reductions and replay") {
    gan::GanConfig cfg = tiny_cfg(gan::Variant::prb_swgan, 33);
    cfg.n_projections = 5;
    gan::GanModel model = gan::GanModel::build(cfg, tiny_net());
    Tensor batch = real_batch_for(cfg, 33);

    SUBCASE("M=1 equals the single sample's sliced distance") {
        model.cfg.m_slice = 1;
        const double got = gan::prb_sliced_w_distance(model, batch, 99);

        // replay the internals through the public stream tags
        auto noise = rng::derive_stream(99, {gan::stream_tag::noise});
        Tensor z = synthdata::sample_latent(cfg.latent_dim, batch.rows(), noise);
        Tensor fake = nn::forward_value(model.gen, nn::DropoutMaskSet::all_ones(model.gen.spec), z);
        auto prng = rng::derive_stream(99, {gan::stream_tag::projections});
        Tensor proj = gan::sample_projections(model.disc.spec[model.disc.num_layers() - 2].out_dim,
                                              cfg.n_projections, prng);
        auto mrng = rng::derive_stream(99, {gan::stream_tag::disc_mask, 0});
        auto masks = nn::sample_mask_set(model.disc.spec, cfg.p, mrng);
        auto acts_r = nn::forward_layers_value(model.disc, masks, batch);
        auto acts_f = nn::forward_layers_value(model.disc, masks, fake);
        const double want = gan::sliced_w_distance(acts_r[acts_r.size() - 2],
                                                   acts_f[acts_f.size() - 2], proj);
        CHECK(got == doctest::Approx(want).epsilon(1e-15));
    }

    SUBCASE("p=0 makes every mask sample identical") {
        model.cfg.p = 0.0;
        model.cfg.m_slice = 1;
        const double single = gan::prb_sliced_w_distance(model, batch, 7);
        model.cfg.m_slice = 4;
        const double averaged = gan::prb_sliced_w_distance(model, batch, 7);
        CHECK(averaged == doctest::Approx(single).epsilon(1e-15));
    }

    SUBCASE("M=4 equals the hand-averaged replay of single samples") {
        model.cfg.m_slice = 4;
        const double got = gan::prb_sliced_w_distance(model, batch, 123);

        auto noise = rng::derive_stream(123, {gan::stream_tag::noise});
        Tensor z = synthdata::sample_latent(cfg.latent_dim, batch.rows(), noise);
        Tensor fake = nn::forward_value(model.gen, nn::DropoutMaskSet::all_ones(model.gen.spec), z);
        auto prng = rng::derive_stream(123, {gan::stream_tag::projections});
        Tensor proj = gan::sample_projections(model.disc.spec[model.disc.num_layers() - 2].out_dim,
                                              cfg.n_projections, prng);
        double acc = 0.0;
        for (std::uint64_t m = 0; m < 4; ++m) {
            auto mrng = rng::derive_stream(123, {gan::stream_tag::disc_mask, m});
            auto masks = nn::sample_mask_set(model.disc.spec, cfg.p, mrng);
            auto acts_r = nn::forward_layers_value(model.disc, masks, batch);
            auto acts_f = nn::forward_layers_value(model.disc, masks, fake);
            acc += gan::sliced_w_distance(acts_r[acts_r.size() - 2],
                                          acts_f[acts_f.size() - 2], proj);
        }
        CHECK(got == doctest::Approx(acc / 4.0).epsilon(1e-14));
    }
}

TEST_CASE("p=0 collapses prb onto vanilla, bitwise, step for step") {
    gan::GanConfig prb_cfg = tiny_cfg(gan::Variant::prb, 5);
    prb_cfg.p = 0.0;
    gan::GanConfig van_cfg = tiny_cfg(gan::Variant::vanilla_ns, 5);
    gan::GanModel a = gan::GanModel::build(prb_cfg, tiny_net());
    gan::GanModel b = gan::GanModel::build(van_cfg, tiny_net());
    REQUIRE(params_bitwise_equal(a.gen, b.gen));

    auto mixture = synthdata::paper_mixture();
    for (std::uint64_t step = 1; step <= 20; ++step) {
        auto rng = rng::derive_stream(5, {gan::stream_tag::real_batch, step, 0});
        Tensor batch = synthdata::sample(mixture, prb_cfg.batch, rng);
        gan::StepReport ra = gan::disc_step(a, batch, step);
        gan::StepReport rb = gan::disc_step(b, batch, step);
        gan::StepReport ga = gan::gen_step(a, batch, step);
        gan::StepReport gb = gan::gen_step(b, batch, step);
        CHECK(std::memcmp(&ra, &rb, sizeof ra) == 0);
        CHECK(std::memcmp(&ga, &gb, sizeof ga) == 0);
        REQUIRE(params_bitwise_equal(a.disc, b.disc));
        REQUIRE(params_bitwise_equal(a.gen, b.gen));
    }
    // generation agrees too
    Tensor sa = gan::generate(a, 100, 42);
    Tensor sb = gan::generate(b, 100, 42);
    CHECK(std::memcmp(sa.data(), sb.data(), sa.numel() * 8) == 0);
}

TEST_CASE("disc_step aggregation equals the mean of replayed per-sample gradients") {
    gan::GanConfig cfg = tiny_cfg(gan::Variant::prb, 21, 4);
    gan::GanModel live = gan::GanModel::build(cfg, tiny_net());
    gan::GanModel replay = gan::GanModel::build(cfg, tiny_net());
    Tensor batch = real_batch_for(cfg, 21);
    const std::uint64_t step = 1;

    gan::disc_step(live, batch, step);

    // replay: same streams, per-sample gradients computed in isolation
    auto noise = rng::derive_stream(cfg.seed, {gan::stream_tag::noise, step, 0});
    Tensor z = synthdata::sample_latent(cfg.latent_dim, cfg.batch, noise);
    auto gmask_rng = rng::derive_stream(cfg.seed, {gan::stream_tag::disc_phase, step, 0,
                                                   gan::stream_tag::gen_mask});
    auto gmasks = nn::sample_mask_set(replay.gen.spec, cfg.p, gmask_rng);
    Tensor fake = nn::forward_value(replay.gen, gmasks, z);
    auto real_in = ad::constant(batch);
    auto fake_in = ad::constant(fake);

    auto params = replay.disc.parameters();
    std::vector<Tensor> mean_grads;
    for (const auto& p : params) mean_grads.push_back(Tensor::zeros(p->value().shape()));
    for (int i = 0; i < cfg.n_mc; ++i) {
        replay.disc.zero_grads();
        auto mrng = rng::derive_stream(cfg.seed, {gan::stream_tag::disc_phase, step, 0,
                                                  gan::stream_tag::disc_mask,
                                                  static_cast<std::uint64_t>(i)});
        auto dmasks = nn::sample_mask_set(replay.disc.spec, cfg.p, mrng);
        auto out_r = gan::disc_forward(replay.disc, nullptr, dmasks, real_in);
        auto out_f = gan::disc_forward(replay.disc, nullptr, dmasks, fake_in);
        ad::backward(gan::disc_sample_loss(out_r, out_f, cfg));
        for (std::size_t pi = 0; pi < params.size(); ++pi)
            for (std::size_t e = 0; e < mean_grads[pi].numel(); ++e)
                mean_grads[pi][e] += params[pi]->grad()[e];
    }
    for (auto& g : mean_grads)
        for (std::size_t e = 0; e < g.numel(); ++e) g[e] /= cfg.n_mc;
    nn::apply_update(replay.disc, mean_grads, replay.disc_opt);

    for (std::size_t l = 0; l < live.disc.weights.size(); ++l)
        for (std::size_t e = 0; e < live.disc.weights[l]->value().numel(); ++e) {
            const double a = live.disc.weights[l]->value()[e];
            const double b = replay.disc.weights[l]->value()[e];
            CHECK(std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(a)));
        }
}

TEST_CASE("gen_step aggregation equals the mean of replayed per-sample gradients") {
    gan::GanConfig cfg = tiny_cfg(gan::Variant::prb, 23, 3);
    gan::GanModel live = gan::GanModel::build(cfg, tiny_net());
    gan::GanModel replay = gan::GanModel::build(cfg, tiny_net());
    Tensor batch = real_batch_for(cfg, 23);
    const std::uint64_t step = 1;

    gan::gen_step(live, batch, step);

    auto noise = rng::derive_stream(cfg.seed, {gan::stream_tag::noise, step, 0});
    auto z_in = ad::constant(synthdata::sample_latent(cfg.latent_dim, cfg.batch, noise));
    auto dmask_rng = rng::derive_stream(cfg.seed, {gan::stream_tag::gen_phase, step, 0,
                                                   gan::stream_tag::disc_mask});
    auto dmasks = nn::sample_mask_set(replay.disc.spec, cfg.p, dmask_rng);
    nn::Mlp frozen = replay.disc.clone_frozen();

    auto params = replay.gen.parameters();
    std::vector<Tensor> mean_grads;
    for (const auto& p : params) mean_grads.push_back(Tensor::zeros(p->value().shape()));
    for (int i = 0; i < cfg.n_mc; ++i) {
        replay.gen.zero_grads();
        auto grng = rng::derive_stream(cfg.seed, {gan::stream_tag::gen_phase, step, 0,
                                                  gan::stream_tag::gen_mask,
                                                  static_cast<std::uint64_t>(i)});
        auto gmasks = nn::sample_mask_set(replay.gen.spec, cfg.p, grng);
        auto fake = nn::forward(replay.gen, gmasks, z_in);
        auto out = gan::disc_forward(frozen, nullptr, dmasks, fake);
        ad::backward(gan::gen_sample_loss(out, cfg));
        for (std::size_t pi = 0; pi < params.size(); ++pi)
            for (std::size_t e = 0; e < mean_grads[pi].numel(); ++e)
                mean_grads[pi][e] += params[pi]->grad()[e];
    }
    for (auto& g : mean_grads)
        for (std::size_t e = 0; e < g.numel(); ++e) g[e] /= cfg.n_mc;
    nn::apply_update(replay.gen, mean_grads, replay.gen_opt);

    for (std::size_t l = 0; l < live.gen.weights.size(); ++l)
        for (std::size_t e = 0; e < live.gen.weights[l]->value().numel(); ++e) {
            const double a = live.gen.weights[l]->value()[e];
            const double b = replay.gen.weights[l]->value()[e];
            CHECK(std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(a)));
        }
}

TEST_CASE("parameter isolation between the two steps") {
    for (gan::Variant v : {gan::Variant::prb, gan::Variant::prb_v2, gan::Variant::prb_swgan}) {
        gan::GanConfig cfg = tiny_cfg(v, 31);
        gan::GanModel model = gan::GanModel::build(cfg, tiny_net());
        Tensor batch = real_batch_for(cfg, 31);

        gan::GanModel snapshot = gan::GanModel::build(cfg, tiny_net());
        gan::disc_step(model, batch, 1);
        CHECK(params_bitwise_equal(model.gen, snapshot.gen)); // gen untouched

        gan::GanModel before_gen = gan::GanModel::build(cfg, tiny_net());
        for (std::size_t l = 0; l < model.disc.weights.size(); ++l) {
            before_gen.disc.weights[l]->value() = model.disc.weights[l]->value();
            before_gen.disc.biases[l]->value() = model.disc.biases[l]->value();
        }
        model.disc.zero_grads();
        gan::gen_step(model, batch, 1);
        CHECK(params_bitwise_equal(model.disc, before_gen.disc)); // disc untouched
        for (const auto& p : model.disc.parameters())             // and its grads stay zero
            for (std::size_t e = 0; e < p->grad().numel(); ++e) CHECK(p->grad()[e] == 0.0);
    }
}

TEST_CASE("non-finite loss aborts the step with the sample index") {
    gan::GanConfig cfg = tiny_cfg(gan::Variant::prb, 41);
    gan::GanModel model = gan::GanModel::build(cfg, tiny_net());
    Tensor batch = real_batch_for(cfg, 41);
    model.gen.weights[0]->value()[0] = std::nan("");
    Tensor disc_w0 = model.disc.weights[0]->value();
    try {
        gan::disc_step(model, batch, 1);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("sample 0") != std::string::npos);
    }
    CHECK(std::memcmp(disc_w0.data(), model.disc.weights[0]->value().data(),
                      disc_w0.numel() * 8) == 0);
}

TEST_CASE("uncertainty head keeps uncertainty nonnegative") {
    gan::GanConfig cfg = tiny_cfg(gan::Variant::prb_v1, 51);
    gan::GanModel model = gan::GanModel::build(cfg, tiny_net());
    REQUIRE(model.has_u_head());
    Tensor batch = real_batch_for(cfg, 51);
    auto masks = nn::DropoutMaskSet::all_ones(model.disc.spec);
    auto out = gan::disc_forward(model.disc, &model.u_head, masks, ad::constant(batch));
    REQUIRE(out.uncertainty);
    for (std::size_t i = 0; i < out.uncertainty->value().numel(); ++i)
        CHECK(out.uncertainty->value()[i] >= 0.0);
    CHECK(out.features->value().cols() == 12);
}

TEST_CASE("training steps run for every variant") {
    for (gan::Variant v :
         {gan::Variant::vanilla_ns, gan::Variant::vanilla_ls, gan::Variant::prb,
          gan::Variant::prb_v1, gan::Variant::prb_v2, gan::Variant::swgan,
          gan::Variant::prb_swgan}) {
        gan::GanConfig cfg = tiny_cfg(v, 61);
        if (v == gan::Variant::vanilla_ns || v == gan::Variant::vanilla_ls ||
            v == gan::Variant::swgan)
            cfg.n_mc = 1;
        gan::GanModel model = gan::GanModel::build(cfg, tiny_net());
        Tensor batch = real_batch_for(cfg, 61);
        for (std::uint64_t step = 1; step <= 3; ++step) {
            gan::StepReport dr = gan::disc_step(model, batch, step);
            gan::StepReport gr = gan::gen_step(model, batch, step);
            CHECK(std::isfinite(dr.disc_loss));
            CHECK(std::isfinite(gr.gen_loss));
            CHECK(dr.grad_norm_disc > 0.0);
            CHECK(gr.grad_norm_gen > 0.0);
        }
    }
}

TEST_CASE("data standardization maps") {
    gan::GanConfig cfg = tiny_cfg(gan::Variant::vanilla_ns, 71);
    cfg.data_shift = {56.0};
    cfg.data_scale = {37.0};

    rng::Stream rng(2);
    Tensor raw = random_matrix(6, 1, rng, 30.0);
    Tensor net = gan::to_net_space(cfg, raw);
    Tensor back = gan::to_data_space(cfg, net);
    for (std::size_t i = 0; i < raw.numel(); ++i)
        CHECK(back[i] == doctest::Approx(raw[i]).epsilon(1e-12));
    CHECK(net[0] == doctest::Approx((raw[0] - 56.0) / 37.0).epsilon(1e-15));

    // a generator that emits constant c in net space generates c*scale+shift
    gan::GanModel model = gan::GanModel::build(cfg, tiny_net());
    for (auto& w : model.gen.weights) w->value().fill(0.0);
    for (auto& b : model.gen.biases) b->value().fill(0.0);
    model.gen.biases.back()->value().fill(0.25);
    Tensor samples = gan::generate(model, 10, 5);
    for (std::size_t i = 0; i < samples.numel(); ++i)
        CHECK(samples[i] == doctest::Approx(0.25 * 37.0 + 56.0).epsilon(1e-12));

    // disc_step consumes raw batches and standardizes internally: a run with
    // the transform equals a run fed pre-standardized data with identity maps
    gan::GanConfig ident = cfg;
    ident.data_shift.clear();
    ident.data_scale.clear();
    gan::GanModel m1 = gan::GanModel::build(cfg, tiny_net());
    gan::GanModel m2 = gan::GanModel::build(ident, tiny_net());
    Tensor batch = real_batch_for(cfg, 71);
    gan::StepReport r1 = gan::disc_step(m1, batch, 1);
    gan::StepReport r2 = gan::disc_step(m2, gan::to_net_space(cfg, batch), 1);
    CHECK(std::memcmp(&r1, &r2, sizeof r1) == 0);
    CHECK(params_bitwise_equal(m1.disc, m2.disc));

    cfg.data_scale = {0.0};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config validation") {
    gan::GanConfig cfg;
    cfg.n_mc = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.b1 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.p = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.variant = gan::Variant::prb_v2;
    cfg.n_mc = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    CHECK(gan::variant_from_name("prb_swgan") == gan::Variant::prb_swgan);
    CHECK_THROWS_AS(gan::variant_from_name("nope"), ConfigError);
}
