#pragma once

#include <cstdint>
#include <vector>

#include "prbgan/rng.hpp"
#include "prbgan/tensor.hpp"

namespace prbgan::synthdata {

struct Component {
    std::vector<double> mean;
    std::vector<double> stddev;
    double weight = 1.0;
};

struct MixtureSpec {
    std::vector<Component> components;
    std::size_t dimension = 1;

    // Checks invariants and rescales weights to sum to one.
    void validate_and_normalize();
};

// Five equal-weight 1-D Gaussians at [10, 20, 60, 80, 110] with standard
// deviations [3, 3, 2, 2, 1].
MixtureSpec paper_mixture();

// Auxiliary 5x5 grid of tight 2-D Gaussians (means on the integer grid
// scaled by 2, std 0.05, equal weights) for mode-metric stress tests.
MixtureSpec grid_mixture_2d();

// n rows, one mixture draw each: component chosen by weight, then a
// Gaussian draw per dimension.
Tensor sample(const MixtureSpec& spec, std::size_t n, rng::Stream& rng);

enum class LatentPrior { uniform, gaussian };

// n rows of i.i.d. latent noise; uniform(-1,1) by default, standard normal
// behind the flag.
Tensor sample_latent(std::size_t dim, std::size_t n, rng::Stream& rng,
                     LatentPrior prior = LatentPrior::uniform);

} // namespace prbgan::synthdata
