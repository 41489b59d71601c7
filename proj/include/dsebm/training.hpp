#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dsebm/datasets.hpp"
#include "dsebm/model.hpp"
#include "dsebm/tensor.hpp"

namespace dsebm {

struct TrainConfig {
    double noise_sigma = 0.1;   // stddev of the isotropic corruption
    std::size_t batch_size = 128;
    std::size_t epochs = 100;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    enum class Normalization { zscore, none };
    Normalization normalization = Normalization::zscore;

    void validate() const;
    std::vector<std::pair<std::string, std::string>> echo() const;
};

struct EpochStats {
    double mean_objective = 0.0;
    double seconds = 0.0;
};

struct TrainTrace {
    std::vector<EpochStats> epochs;
    std::uint64_t final_checksum = 0;
};

void write_trace(const TrainTrace& trace, const std::string& path);

/// Adds isotropic Gaussian noise of the given stddev to every coordinate
/// (every step, for sequences), drawn from the replayable stream.
Sample corrupt(const Sample& sample, double sigma, RngStream& rng);

/// Mean over the batch of ||x - f(x + eps)||^2 with one fresh corruption
/// per item; sequence residuals are summed over steps.
double dae_objective(const EnergyModel& model, const std::vector<Sample>& batch,
                     double sigma, RngStream& rng);

/// Same objective for an arbitrary reconstruction map (used to validate the
/// estimator itself against closed-form expectations).
double dae_objective_with(const std::function<Sample(const Sample&)>& reconstruct_fn,
                          const std::vector<Sample>& batch, double sigma, RngStream& rng);

/// Shuffled minibatch SGD with momentum on the denoising objective, using
/// the architecture's analytic parameter gradients. Samples must already be
/// in the model's input space (normalized). Fully deterministic under
/// config.seed. Throws NumericError with a diagnostic if the objective
/// turns non-finite.
TrainTrace train(EnergyModel& model, const std::vector<Sample>& samples,
                 const TrainConfig& config);

struct TrainResult {
    TrainedModel model;
    TrainTrace trace;
};

/// Full training pipeline over a dataset's training split: verifies the
/// split holds inliers only, fits normalization on it, recenters the prior
/// on the (normalized) training mean, and runs `train`.
TrainResult train_on_dataset(EnergyModel initial, const LabeledDataset& dataset,
                             const TrainConfig& config);

}  // namespace dsebm
