#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "prbgan/autodiff.hpp"

namespace prbgan::gradcheck {

// |a - n| over max(|a|, |n|, floor); the floor keeps near-zero gradients
// from blowing the ratio up on finite-difference noise.
double relative_error(double analytic, double numeric, double floor = 1e-3);

struct Report {
    double max_rel_err = 0.0;
    std::size_t entries_checked = 0;
};

// Central finite differences (step h) on every entry of every leaf against
// one reverse pass of the graph `build` produces. `build` must be a pure
// function of the leaves' current values.
Report check(const std::function<autodiff::NodePtr()>& build,
             std::span<const autodiff::NodePtr> leaves, double h = 1e-5);

struct SuiteResult {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t entries = 0;
    bool pass = false;
};

// Random 4-layer generator/discriminator pairs (widths <= 32) checked
// through every loss variant: vanilla, prb, v1, v2 and the sliced
// objective. Tolerance applies element-wise.
std::vector<SuiteResult> run_loss_suite(std::uint64_t seed, int n_models, double tol = 1e-4,
                                        double h = 1e-5);

} // namespace prbgan::gradcheck
