#include "prbgan/synthdata.hpp"

#include <cmath>
#include <string>

#include "prbgan/errors.hpp"

namespace prbgan::synthdata {

void MixtureSpec::validate_and_normalize() {
    if (components.empty()) throw ConfigError("mixture: no components");
    if (dimension < 1) throw ConfigError("mixture: dimension must be >= 1");
    double wsum = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) {
        Component& c = components[i];
        if (c.mean.size() != dimension || c.stddev.size() != dimension)
            throw ConfigError("mixture component " + std::to_string(i) +
                              ": mean/std length does not match dimension " +
                              std::to_string(dimension));
        for (double s : c.stddev)
            if (!(s >= 0.0))
                throw ConfigError("mixture component " + std::to_string(i) + ": negative std");
        if (!(c.weight > 0.0))
            throw ConfigError("mixture component " + std::to_string(i) + ": weight must be > 0");
        wsum += c.weight;
    }
    for (Component& c : components) c.weight /= wsum;
}

MixtureSpec paper_mixture() {
    MixtureSpec spec;
    spec.dimension = 1;
    const double means[5] = {10.0, 20.0, 60.0, 80.0, 110.0};
    const double stds[5] = {3.0, 3.0, 2.0, 2.0, 1.0};
    for (int i = 0; i < 5; ++i) spec.components.push_back({{means[i]}, {stds[i]}, 1.0});
    spec.validate_and_normalize();
    return spec;
}

MixtureSpec grid_mixture_2d() {
    MixtureSpec spec;
    spec.dimension = 2;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            spec.components.push_back({{2.0 * i, 2.0 * j}, {0.05, 0.05}, 1.0});
    spec.validate_and_normalize();
    return spec;
}

Tensor sample(const MixtureSpec& spec, std::size_t n, rng::Stream& rng) {
    if (n < 1) throw ContractError("mixture sample: n must be >= 1");
    if (spec.components.empty()) throw ConfigError("mixture sample: unvalidated empty spec");
    Tensor out({n, spec.dimension});
    for (std::size_t r = 0; r < n; ++r) {
        const double u = rng.uniform(0.0, 1.0);
        double acc = 0.0;
        std::size_t pick = spec.components.size() - 1;
        for (std::size_t c = 0; c < spec.components.size(); ++c) {
            acc += spec.components[c].weight;
            if (u < acc) {
                pick = c;
                break;
            }
        }
        const Component& comp = spec.components[pick];
        for (std::size_t d = 0; d < spec.dimension; ++d)
            out.at(r, d) = comp.stddev[d] > 0.0
                               ? rng.gaussian(comp.mean[d], comp.stddev[d])
                               : comp.mean[d];
    }
    return out;
}

Tensor sample_latent(std::size_t dim, std::size_t n, rng::Stream& rng, LatentPrior prior) {
    if (dim < 1) throw ContractError("sample_latent: dim must be >= 1");
    if (n < 1) throw ContractError("sample_latent: n must be >= 1");
    Tensor out({n, dim});
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = prior == LatentPrior::uniform ? rng.uniform(-1.0, 1.0) : rng.gaussian(0.0, 1.0);
    return out;
}

} // namespace prbgan::synthdata
