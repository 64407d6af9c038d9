#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "prbgan/nn.hpp"
#include "prbgan/rng.hpp"

using namespace prbgan;
namespace ad = prbgan::autodiff;

namespace {
const std::vector<nn::LayerSpec> kTinySpec = {
    {3, 5, nn::Activation::leaky_relu, 0.2, true},
    {5, 5, nn::Activation::leaky_relu, 0.2, true},
    {5, 1, nn::Activation::linear, 0.2, false},
};

Tensor random_input(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    rng::Stream rng(seed);
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.gaussian(0.0, 1.0);
    return t;
}
} // namespace

TEST_CASE("xavier bounds, determinism and variance") {
    std::vector<nn::LayerSpec> spec = {{4, 4, nn::Activation::linear, 0.2, false}};
    nn::Mlp a = nn::xavier_init(spec, 123);
    const double bound = std::sqrt(6.0 / 8.0);
    for (std::size_t i = 0; i < a.weights[0]->value().numel(); ++i)
        CHECK(std::fabs(a.weights[0]->value()[i]) <= bound);
    for (std::size_t i = 0; i < a.biases[0]->value().numel(); ++i)
        CHECK(a.biases[0]->value()[i] == 0.0);

    nn::Mlp b = nn::xavier_init(spec, 123);
    CHECK(std::memcmp(a.weights[0]->value().data(), b.weights[0]->value().data(), 16 * 8) == 0);

    // 1e5 draws: empirical variance of the uniform(-bound, bound) law is
    // bound^2/3 = 2/(in+out) within 5%
    std::vector<nn::LayerSpec> wide = {{250, 400, nn::Activation::linear, 0.2, false}};
    nn::Mlp w = nn::xavier_init(wide, 9);
    double mean = 0.0, var = 0.0;
    const Tensor& wt = w.weights[0]->value();
    for (std::size_t i = 0; i < wt.numel(); ++i) mean += wt[i];
    mean /= static_cast<double>(wt.numel());
    for (std::size_t i = 0; i < wt.numel(); ++i) var += (wt[i] - mean) * (wt[i] - mean);
    var /= static_cast<double>(wt.numel());
    CHECK(var == doctest::Approx(2.0 / 650.0).epsilon(0.05));
}

TEST_CASE("layer spec validation") {
    CHECK_THROWS_AS(nn::validate({}), ConfigError);
    CHECK_THROWS_AS(nn::validate({{0, 3, nn::Activation::linear, 0.2, false}}), ConfigError);
    CHECK_THROWS_AS(nn::validate({{3, 3, nn::Activation::leaky_relu, 1.5, false}}), ConfigError);
    CHECK_THROWS_AS(nn::validate({{3, 4, nn::Activation::linear, 0.2, false},
                                  {5, 4, nn::Activation::linear, 0.2, false}}),
                    ConfigError);
}

TEST_CASE("mask sampling") {
    rng::Stream rng(7);
    auto m0 = nn::sample_mask_set(kTinySpec, 0.0, rng);
    for (std::size_t l = 0; l < 2; ++l)
        for (std::size_t j = 0; j < m0.unit_masks[l].numel(); ++j)
            CHECK(m0.unit_masks[l][j] == 1.0);
    CHECK(!m0.layer_masked(2)); // output layer carries the implicit all-ones mask

    rng::Stream r1(99), r2(99);
    auto a = nn::sample_mask_set(kTinySpec, 0.4, r1);
    auto b = nn::sample_mask_set(kTinySpec, 0.4, r2);
    for (std::size_t l = 0; l < 2; ++l)
        CHECK(std::memcmp(a.unit_masks[l].data(), b.unit_masks[l].data(),
                          a.unit_masks[l].numel() * 8) == 0);

    rng::Stream r3(4);
    CHECK_THROWS_AS(nn::sample_mask_set(kTinySpec, 1.0, r3), ConfigError);
    CHECK_THROWS_AS(nn::sample_mask_set(kTinySpec, -0.1, r3), ConfigError);

    // empirical drop rate over 1e5 unit draws
    std::vector<nn::LayerSpec> wide = {{10, 100000, nn::Activation::leaky_relu, 0.2, true}};
    rng::Stream r4(12);
    auto big = nn::sample_mask_set(wide, 0.4, r4);
    double dropped = 0.0;
    for (std::size_t j = 0; j < 100000; ++j) dropped += big.unit_masks[0][j] == 0.0 ? 1.0 : 0.0;
    CHECK(dropped / 100000.0 == doctest::Approx(0.4).epsilon(0.025)); // 0.4 +- 0.01

    // per-layer override
    rng::Stream r5(3);
    auto pl = nn::sample_mask_set(kTinySpec, std::vector<double>{0.0, 0.9, 0.0}, r5);
    for (std::size_t j = 0; j < pl.unit_masks[0].numel(); ++j) CHECK(pl.unit_masks[0][j] == 1.0);
}

TEST_CASE("expected mask converges to (1-p) at binomial rate") {
    std::vector<nn::LayerSpec> spec = {{4, 50, nn::Activation::leaky_relu, 0.2, true}};
    const double p = 0.3;
    const int draws = 4000;
    std::vector<double> sums(50, 0.0);
    rng::Stream rng(21);
    for (int d = 0; d < draws; ++d) {
        auto m = nn::sample_mask_set(spec, p, rng);
        for (std::size_t j = 0; j < 50; ++j) sums[j] += m.unit_masks[0][j];
    }
    const double sigma = std::sqrt(p * (1.0 - p) / draws);
    for (std::size_t j = 0; j < 50; ++j)
        CHECK(std::fabs(sums[j] / draws - (1.0 - p)) <= 4.0 * sigma);
}

TEST_CASE("forward: all-ones masks equal the unmasked network bitwise") {
    nn::Mlp net = nn::xavier_init(kTinySpec, 17);
    Tensor input = random_input(6, 3, 2);
    auto ones = nn::DropoutMaskSet::all_ones(kTinySpec);

    nn::DropoutMaskSet explicit_ones;
    explicit_ones.unit_masks.resize(3);
    explicit_ones.unit_masks[0] = Tensor::ones({5});
    explicit_ones.unit_masks[1] = Tensor::ones({5});

    Tensor a = nn::forward_value(net, ones, input);
    Tensor b = nn::forward_value(net, explicit_ones, input);
    CHECK(std::memcmp(a.data(), b.data(), a.numel() * 8) == 0);

    // p=0 reduction: sampled masks at p=0 are exactly all ones
    rng::Stream rng(5);
    auto p0 = nn::sample_mask_set(kTinySpec, 0.0, rng);
    Tensor c = nn::forward_value(net, p0, input);
    CHECK(std::memcmp(a.data(), c.data(), a.numel() * 8) == 0);

    // graph forward agrees with the plain forward bitwise
    auto node = nn::forward(net, ones, ad::constant(input));
    CHECK(std::memcmp(a.data(), node->value().data(), a.numel() * 8) == 0);
}

TEST_CASE("mask structural zero: dropped unit isolates downstream weights") {
    nn::Mlp net = nn::xavier_init(kTinySpec, 31);
    Tensor input = random_input(4, 3, 8);
    nn::DropoutMaskSet masks = nn::DropoutMaskSet::all_ones(kTinySpec);
    masks.unit_masks[0] = Tensor::ones({5});
    masks.unit_masks[0][2] = 0.0; // drop unit 2 of layer 0

    Tensor base = nn::forward_value(net, masks, input);
    // any change to row 2 of the next layer's weights is invisible
    for (std::size_t j = 0; j < 5; ++j) net.weights[1]->value().at(2, j) += 17.5;
    Tensor after = nn::forward_value(net, masks, input);
    CHECK(std::memcmp(base.data(), after.data(), base.numel() * 8) == 0);

    // and the dropped unit's activation really is zero
    auto acts = nn::forward_layers_value(net, masks, input);
    for (std::size_t r = 0; r < 4; ++r) CHECK(acts[0].at(r, 2) == 0.0);
}

TEST_CASE("hand-computed two-layer forward") {
    std::vector<nn::LayerSpec> spec = {
        {2, 2, nn::Activation::leaky_relu, 0.2, true},
        {2, 1, nn::Activation::linear, 0.2, false},
    };
    nn::Mlp net = nn::xavier_init(spec, 1);
    net.weights[0]->value() = Tensor::from({2, 2}, {0.5, -1.0, 0.25, 0.75});
    net.biases[0]->value() = Tensor::from({2}, {0.1, -2.0});
    net.weights[1]->value() = Tensor::from({2, 1}, {2.0, -0.5});
    net.biases[1]->value() = Tensor::from({1}, {0.3});
    Tensor x = Tensor::from({1, 2}, {1.0, 2.0});

    // z1 = [1*0.5+2*0.25+0.1, 1*(-1)+2*0.75-2.0] = [1.1, -1.5]
    // h1 = [1.1, -0.3] (leaky slope 0.2)
    // out = 1.1*2 - 0.3*(-0.5) + 0.3 = 2.2 + 0.15 + 0.3 = 2.65
    Tensor out = nn::forward_value(net, nn::DropoutMaskSet::all_ones(spec), x);
    CHECK(out.at(0, 0) == doctest::Approx(2.65).epsilon(1e-12));

    nn::DropoutMaskSet masks = nn::DropoutMaskSet::all_ones(spec);
    masks.unit_masks[0] = Tensor::from({2}, {0.0, 1.0});
    Tensor masked = nn::forward_value(net, masks, x);
    // unit 0 zeroed: out = -0.3*(-0.5) + 0.3 = 0.45
    CHECK(masked.at(0, 0) == doctest::Approx(0.45).epsilon(1e-12));

    CHECK_THROWS_AS(nn::forward_value(net, nn::DropoutMaskSet::all_ones(spec),
                                      Tensor::zeros({1, 3})),
                    DimensionError);
}

TEST_CASE("sgd and adam updates") {
    std::vector<nn::LayerSpec> spec = {{2, 2, nn::Activation::linear, 0.2, false}};
    nn::Mlp net = nn::xavier_init(spec, 3);
    net.weights[0]->value() = Tensor::from({2, 2}, {1, 2, 3, 4});
    net.biases[0]->value() = Tensor::from({2}, {0.5, -0.5});

    SUBCASE("sgd: w <- w - lr*g") {
        auto opt = nn::OptimizerState::sgd(0.1, 0.0);
        std::vector<Tensor> grads = {Tensor::from({2, 2}, {1, 1, 1, 1}),
                                     Tensor::from({2}, {0, 0})};
        nn::apply_update(net, grads, opt);
        CHECK(net.weights[0]->value()[0] == doctest::Approx(0.9).epsilon(1e-15));
        CHECK(net.weights[0]->value()[3] == doctest::Approx(3.9).epsilon(1e-15));
        CHECK(net.biases[0]->value()[0] == 0.5);
    }

    SUBCASE("zero gradient, zero decay: parameters unchanged") {
        auto opt = nn::OptimizerState::sgd(0.1, 0.0);
        std::vector<Tensor> grads = {Tensor::zeros({2, 2}), Tensor::zeros({2})};
        Tensor before = net.weights[0]->value();
        nn::apply_update(net, grads, opt);
        CHECK(std::memcmp(before.data(), net.weights[0]->value().data(), 4 * 8) == 0);
    }

    SUBCASE("adam first step: lr * g / (|g| + eps) in sign and magnitude") {
        auto opt = nn::OptimizerState::adam(0.01, 0.0);
        std::vector<Tensor> grads = {Tensor::from({2, 2}, {0.5, -2.0, 0.0, 1e-3}),
                                     Tensor::from({2}, {0, 0})};
        Tensor before = net.weights[0]->value();
        nn::apply_update(net, grads, opt);
        for (std::size_t i = 0; i < 4; ++i) {
            const double g = grads[0][i];
            const double expect = 0.01 * g / (std::fabs(g) + 1e-8);
            CHECK(net.weights[0]->value()[i] ==
                  doctest::Approx(before[i] - expect).epsilon(1e-9));
        }
    }

    SUBCASE("weight decay shrinks ||W||^2 under zero loss gradient") {
        auto opt = nn::OptimizerState::sgd(0.1, 0.01);
        std::vector<Tensor> grads = {Tensor::zeros({2, 2}), Tensor::zeros({2})};
        double norm_before = 0.0, norm_after = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
            norm_before += net.weights[0]->value()[i] * net.weights[0]->value()[i];
        nn::apply_update(net, grads, opt);
        for (std::size_t i = 0; i < 4; ++i)
            norm_after += net.weights[0]->value()[i] * net.weights[0]->value()[i];
        CHECK(norm_after < norm_before);
    }

    SUBCASE("non-finite gradient aborts with parameters unchanged") {
        auto opt = nn::OptimizerState::adam(0.01, 0.0);
        std::vector<Tensor> grads = {Tensor::from({2, 2}, {1, std::nan(""), 1, 1}),
                                     Tensor::from({2}, {0, 0})};
        Tensor before = net.weights[0]->value();
        CHECK_THROWS_AS(nn::apply_update(net, grads, opt), NumericError);
        CHECK(std::memcmp(before.data(), net.weights[0]->value().data(), 4 * 8) == 0);
        CHECK(opt.step_count == 0);
        CHECK(opt.m.empty());
    }
}

TEST_CASE("checkpoint round trip is exact") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "prbgan_ckpt_test.bin").string();

    std::vector<Tensor> tensors;
    tensors.push_back(Tensor::from({2, 3}, {1.0, -2.5, 3.25e-300, 4.0, 5e300, -0.0}));
    tensors.push_back(Tensor::from({4}, {0.1, 0.2, 0.3, 0.4}));
    tensors.push_back(Tensor::scalar(12345.6789));
    nn::save_checkpoint(path, tensors);
    auto back = nn::load_checkpoint(path);
    REQUIRE(back.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        REQUIRE(back[t].shape() == tensors[t].shape());
        CHECK(std::memcmp(back[t].data(), tensors[t].data(), back[t].numel() * 8) == 0);
    }

    nn::Mlp net = nn::xavier_init(kTinySpec, 77);
    nn::save_params(path, net);
    nn::Mlp other = nn::xavier_init(kTinySpec, 78);
    nn::load_params(path, other);
    for (std::size_t l = 0; l < 3; ++l)
        CHECK(std::memcmp(net.weights[l]->value().data(), other.weights[l]->value().data(),
                          net.weights[l]->value().numel() * 8) == 0);

    // botched magic rejected
    FILE* f = std::fopen(path.c_str(), "r+b");
    std::fputc('X', f);
    std::fclose(f);
    CHECK_THROWS_AS(nn::load_checkpoint(path), ContractError);
    fs::remove(path);
}
