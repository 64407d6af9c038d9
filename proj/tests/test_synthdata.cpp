#include <doctest.h>

#include <cmath>
#include <cstring>

#include "prbgan/synthdata.hpp"

using namespace prbgan;
namespace sd = prbgan::synthdata;

TEST_CASE("paper mixture layout") {
    sd::MixtureSpec spec = sd::paper_mixture();
    REQUIRE(spec.components.size() == 5);
    CHECK(spec.dimension == 1);
    const double means[5] = {10, 20, 60, 80, 110};
    const double stds[5] = {3, 3, 2, 2, 1};
    for (int i = 0; i < 5; ++i) {
        CHECK(spec.components[i].mean[0] == means[i]);
        CHECK(spec.components[i].stddev[0] == stds[i]);
        CHECK(spec.components[i].weight == doctest::Approx(0.2).epsilon(1e-15));
    }
    CHECK(spec.components[2].mean[0] == 60.0);
    CHECK(spec.components[2].stddev[0] == 2.0);
}

TEST_CASE("mixture validation") {
    sd::MixtureSpec bad;
    bad.dimension = 1;
    CHECK_THROWS_AS(bad.validate_and_normalize(), ConfigError);
    bad.components.push_back({{1.0}, {-1.0}, 1.0});
    CHECK_THROWS_AS(bad.validate_and_normalize(), ConfigError);
    bad.components[0] = {{1.0, 2.0}, {1.0, 1.0}, 1.0}; // dim mismatch
    CHECK_THROWS_AS(bad.validate_and_normalize(), ConfigError);

    sd::MixtureSpec ok;
    ok.dimension = 1;
    ok.components.push_back({{0.0}, {1.0}, 2.0});
    ok.components.push_back({{5.0}, {1.0}, 6.0});
    ok.validate_and_normalize();
    CHECK(ok.components[0].weight == doctest::Approx(0.25));
    CHECK(ok.components[1].weight == doctest::Approx(0.75));
}

TEST_CASE("degenerate stds collapse to the means") {
    sd::MixtureSpec spec;
    spec.dimension = 2;
    spec.components.push_back({{1.0, -2.0}, {0.0, 0.0}, 1.0});
    spec.components.push_back({{4.0, 9.0}, {0.0, 0.0}, 1.0});
    spec.validate_and_normalize();
    rng::Stream rng(3);
    Tensor s = sd::sample(spec, 50, rng);
    for (std::size_t r = 0; r < 50; ++r) {
        const bool first = s.at(r, 0) == 1.0 && s.at(r, 1) == -2.0;
        const bool second = s.at(r, 0) == 4.0 && s.at(r, 1) == 9.0;
        CHECK((first || second));
    }
}

TEST_CASE("component occupancy and conditional means") {
    sd::MixtureSpec spec = sd::paper_mixture();
    rng::Stream rng(17);
    const std::size_t n = 100000;
    Tensor s = sd::sample(spec, n, rng);
    // modes are >= 10 sigma apart, so nearest-mean assignment is exact
    std::vector<long> occupancy(5, 0);
    std::vector<double> sums(5, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const double x = s.at(r, 0);
        std::size_t best = 0;
        for (std::size_t c = 1; c < 5; ++c)
            if (std::fabs(x - spec.components[c].mean[0]) <
                std::fabs(x - spec.components[best].mean[0]))
                best = c;
        occupancy[best] += 1;
        sums[best] += x;
    }
    for (int c = 0; c < 5; ++c)
        CHECK(static_cast<double>(occupancy[c]) / n == doctest::Approx(0.2).epsilon(0.05));
    CHECK(sums[0] / occupancy[0] == doctest::Approx(10.0).epsilon(0.01)); // 10 +- 0.1

    // overall mean within 3 standard errors of sum(w*mu) = 56
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += s.at(r, 0);
    mean /= static_cast<double>(n);
    // var of the mixture = E[var] + var of means = (9+9+4+4+1)/5 + 1480-56^2...
    double second = 0.0;
    for (int c = 0; c < 5; ++c) {
        const double mu = spec.components[c].mean[0];
        const double sg = spec.components[c].stddev[0];
        second += 0.2 * (mu * mu + sg * sg);
    }
    const double se = std::sqrt((second - 56.0 * 56.0) / static_cast<double>(n));
    CHECK(std::fabs(mean - 56.0) <= 3.0 * se);
}

TEST_CASE("latent noise") {
    rng::Stream rng(31);
    Tensor z = sd::sample_latent(2, 1000, rng);
    for (std::size_t i = 0; i < z.numel(); ++i) {
        CHECK(z[i] > -1.0);
        CHECK(z[i] < 1.0);
    }

    rng::Stream big_rng(32);
    Tensor big = sd::sample_latent(1, 1000000, big_rng);
    double mean = 0.0;
    for (std::size_t i = 0; i < big.numel(); ++i) mean += big[i];
    mean /= static_cast<double>(big.numel());
    CHECK(std::fabs(mean) <= 0.005);

    rng::Stream a(5), b(5);
    Tensor za = sd::sample_latent(3, 7, a);
    Tensor zb = sd::sample_latent(3, 7, b);
    CHECK(std::memcmp(za.data(), zb.data(), za.numel() * 8) == 0);

    rng::Stream g(6);
    Tensor zg = sd::sample_latent(1, 100000, g, sd::LatentPrior::gaussian);
    double gm = 0.0, gv = 0.0;
    for (std::size_t i = 0; i < zg.numel(); ++i) gm += zg[i];
    gm /= static_cast<double>(zg.numel());
    for (std::size_t i = 0; i < zg.numel(); ++i) gv += (zg[i] - gm) * (zg[i] - gm);
    gv /= static_cast<double>(zg.numel());
    CHECK(gv == doctest::Approx(1.0).epsilon(0.03));

    CHECK_THROWS_AS(sd::sample_latent(0, 5, g), ContractError);
}

TEST_CASE("mixture sampling is seed deterministic") {
    sd::MixtureSpec spec = sd::paper_mixture();
    rng::Stream a(77), b(77);
    Tensor sa = sd::sample(spec, 500, a);
    Tensor sb = sd::sample(spec, 500, b);
    CHECK(std::memcmp(sa.data(), sb.data(), sa.numel() * 8) == 0);
}

TEST_CASE("2-D grid mixture") {
    sd::MixtureSpec grid = sd::grid_mixture_2d();
    CHECK(grid.components.size() == 25);
    CHECK(grid.dimension == 2);
    CHECK(grid.components[0].weight == doctest::Approx(0.04));
    rng::Stream rng(9);
    Tensor s = sd::sample(grid, 100, rng);
    CHECK(s.cols() == 2);
}
