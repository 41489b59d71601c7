#pragma once

#include <string>
#include <variant>
#include <vector>

#include "dsebm/conv_energy.hpp"
#include "dsebm/dense_energy.hpp"
#include "dsebm/recurrent_energy.hpp"
#include "dsebm/tensor.hpp"

namespace dsebm {

/// A scored item: a vector (rank 1), an image (rank 3) or a sequence.
using Sample = std::variant<Tensor, Sequence>;

using EnergyModel =
    std::variant<DenseEnergyParams, RecurrentEnergyParams, ConvEnergyParams>;

const char* architecture_name(const EnergyModel& model);

/// Per-feature affine normalization fitted on the training split and
/// carried with the model; identity when `enabled` is false.
struct NormStats {
    bool enabled = false;
    Tensor mean;    // feature shape: (d) for vectors/sequences, (C x H x W) for images
    Tensor stddev;  // same shape; floored away from zero when fitted

    Sample apply(const Sample& sample) const;
};

/// Feature-shape mean/stddev over samples; sequences pool across steps.
NormStats fit_norm_stats(const std::vector<Sample>& samples);

std::vector<Tensor*> param_tensors(EnergyModel& model);
std::vector<const Tensor*> param_tensors(const EnergyModel& model);
EnergyModel zeros_like(const EnergyModel& model);

// Architecture dispatch over normalized samples (shape or kind mismatches
// throw DataError).
double model_energy(const EnergyModel& model, const Sample& sample);
Sample model_reconstruct(const EnergyModel& model, const Sample& sample);

/// Squared norm of the energy's input gradient, summed over sequence steps;
/// identical to the squared reconstruction residual.
double model_recon_error(const EnergyModel& model, const Sample& sample);

/// Adds the gradient of 0.5*||clean - f(noisy)||^2 (per-step summed for
/// sequences), scaled by `scale`, into `grad`. Returns the loss value.
double model_param_grad(const EnergyModel& model, const Sample& clean,
                        const Sample& noisy, EnergyModel& grad, double scale = 1.0);

/// A trained model: parameters plus the preprocessing baked in at training
/// time. All scoring entry points route raw samples through `norm`.
struct TrainedModel {
    EnergyModel model;
    NormStats norm;
    std::vector<std::pair<std::string, std::string>> config_echo;  // key/value, sorted on save

    double energy(const Sample& raw) const { return model_energy(model, norm.apply(raw)); }
    double recon_error(const Sample& raw) const {
        return model_recon_error(model, norm.apply(raw));
    }
};

// Typed accessors; throw DataError("architecture mismatch ...") when the
// artifact holds a different architecture.
const DenseEnergyParams& expect_dense(const TrainedModel& m);
const RecurrentEnergyParams& expect_recurrent(const TrainedModel& m);
const ConvEnergyParams& expect_conv(const TrainedModel& m);

}  // namespace dsebm
