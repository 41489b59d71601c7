#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsebm/tensor.hpp"

namespace dsebm {

/// Worst per-coordinate deviation |a - n| / max(1, |a|, |n|).
double max_rel_error(const Tensor& analytic, const Tensor& numeric);

struct GradCheckEntry {
    std::string suite;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool all_pass() const;
};

inline constexpr double kInputGradTolerance = 1e-6;
inline constexpr double kParamGradTolerance = 1e-5;

/// Runs every finite-difference oracle suite on seeded random instances:
/// per architecture, the analytic input gradient against central
/// differences of the energy (the recurrent check freezes the per-step
/// biases, matching its decision rule), and the analytic parameter
/// gradients of the denoising loss against central differences of that
/// loss.
GradCheckReport run_gradient_checks(std::uint64_t seed);

}  // namespace dsebm
