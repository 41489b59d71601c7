#include "dsebm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "dsebm/errors.hpp"
#include "dsebm/numerics.hpp"

namespace dsebm {

void TrainConfig::validate() const {
    if (!(noise_sigma >= 0.0)) throw DataError("config: noise sigma must be >= 0");
    if (batch_size == 0) throw DataError("config: batch size must be positive");
    if (epochs == 0) throw DataError("config: epochs must be positive");
    if (!(learning_rate >= 0.0)) throw DataError("config: learning rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw DataError("config: momentum must be in [0, 1)");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::echo() const {
    char buf[40];
    auto real = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    return {{"sigma", real(noise_sigma)},
            {"batch", std::to_string(batch_size)},
            {"epochs", std::to_string(epochs)},
            {"lr", real(learning_rate)},
            {"momentum", real(momentum)},
            {"seed", std::to_string(seed)},
            {"normalization", normalization == Normalization::zscore ? "zscore" : "none"}};
}

void write_trace(const TrainTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "epoch,mean_objective,seconds\n";
    char buf[40];
    for (std::size_t e = 0; e < trace.epochs.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%.17g", trace.epochs[e].mean_objective);
        out << (e + 1) << "," << buf << ",";
        std::snprintf(buf, sizeof buf, "%.6f", trace.epochs[e].seconds);
        out << buf << "\n";
    }
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(trace.final_checksum));
    out << "# final_checksum=" << buf << "\n";
}

Sample corrupt(const Sample& sample, double sigma, RngStream& rng) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("corrupt: sigma must be >= 0");
    if (const Tensor* t = std::get_if<Tensor>(&sample)) {
        Tensor out = *t;
        for (double& v : out.data) v += sigma * rng.next_gaussian();
        return out;
    }
    Sequence out = std::get<Sequence>(sample);
    for (Tensor& step : out.steps) {
        for (double& v : step.data) v += sigma * rng.next_gaussian();
    }
    return out;
}

namespace {

double sample_squared_distance(const Sample& a, const Sample& b) {
    if (const Tensor* ta = std::get_if<Tensor>(&a)) {
        const Tensor& tb = std::get<Tensor>(b);
        double acc = 0.0;
        for (std::size_t i = 0; i < ta->numel(); ++i) {
            const double diff = ta->data[i] - tb.data[i];
            acc += diff * diff;
        }
        return acc;
    }
    const Sequence& sa = std::get<Sequence>(a);
    const Sequence& sb = std::get<Sequence>(b);
    double acc = 0.0;
    for (std::size_t t = 0; t < sa.steps.size(); ++t) {
        for (std::size_t i = 0; i < sa.steps[t].numel(); ++i) {
            const double diff = sa.steps[t].data[i] - sb.steps[t].data[i];
            acc += diff * diff;
        }
    }
    return acc;
}

}  // namespace

namespace {

std::uint64_t sample_content_hash(const Sample& sample) {
    std::vector<const Tensor*> tensors;
    if (const Tensor* t = std::get_if<Tensor>(&sample)) {
        tensors.push_back(t);
    } else {
        for (const Tensor& step : std::get<Sequence>(sample).steps) tensors.push_back(&step);
    }
    return checksum_tensors(tensors);
}

}  // namespace

double dae_objective_with(const std::function<Sample(const Sample&)>& reconstruct_fn,
                          const std::vector<Sample>& batch, double sigma, RngStream& rng) {
    if (batch.empty()) throw std::invalid_argument("dae_objective: empty batch");
    // Each item's corruption stream is keyed on the sample content (plus one
    // fresh word per call), and the terms are combined in sorted order, so
    // the estimate is independent of batch order.
    const std::uint64_t base = rng.next_u64();
    std::vector<double> terms;
    terms.reserve(batch.size());
    for (const Sample& x : batch) {
        RngStream item_rng(base ^ sample_content_hash(x));
        Sample noisy = corrupt(x, sigma, item_rng);
        terms.push_back(sample_squared_distance(x, reconstruct_fn(noisy)));
    }
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double t : terms) total += t;
    const double mean = total / static_cast<double>(batch.size());
    if (!std::isfinite(mean)) throw NumericError("dae_objective: non-finite reconstruction");
    return mean;
}

double dae_objective(const EnergyModel& model, const std::vector<Sample>& batch,
                     double sigma, RngStream& rng) {
    return dae_objective_with(
        [&model](const Sample& noisy) { return model_reconstruct(model, noisy); },
        batch, sigma, rng);
}

TrainTrace train(EnergyModel& model, const std::vector<Sample>& samples,
                 const TrainConfig& config) {
    config.validate();
    if (samples.empty()) throw DataError("train: no training samples");

    RngStream rng(config.seed);
    EnergyModel velocity = zeros_like(model);
    EnergyModel gradient = zeros_like(model);

    TrainTrace trace;
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        rng.shuffle(order);

        double objective_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - begin);

            auto grad_tensors = param_tensors(gradient);
            for (Tensor* g : grad_tensors) std::fill(g->data.begin(), g->data.end(), 0.0);

            // Samples contribute to partial sums in index order; parallel
            // variants must keep this accumulation order for replay.
            for (std::size_t i = begin; i < end; ++i) {
                const Sample& clean = samples[order[i]];
                Sample noisy = corrupt(clean, config.noise_sigma, rng);
                try {
                    objective_sum +=
                        2.0 * model_param_grad(model, clean, noisy, gradient, inv_batch);
                } catch (const NumericError& e) {
                    throw NumericError("train: diverged at epoch " + std::to_string(epoch + 1) +
                                       " (" + e.what() + "); lower the learning rate or noise sigma");
                }
            }

            auto params = param_tensors(model);
            auto vel = param_tensors(velocity);
            for (std::size_t t = 0; t < params.size(); ++t) {
                for (std::size_t i = 0; i < params[t]->numel(); ++i) {
                    double& v = vel[t]->data[i];
                    v = config.momentum * v - config.learning_rate * grad_tensors[t]->data[i];
                    params[t]->data[i] += v;
                }
            }
        }

        const double epoch_objective = objective_sum / static_cast<double>(samples.size());
        if (!std::isfinite(epoch_objective)) {
            throw NumericError("train: objective diverged at epoch " + std::to_string(epoch + 1) +
                               "; lower the learning rate or noise sigma");
        }
        const std::chrono::duration<double> elapsed =
            std::chrono::steady_clock::now() - epoch_start;
        trace.epochs.push_back({epoch_objective, elapsed.count()});
    }

    std::vector<const Tensor*> finals;
    for (Tensor* t : param_tensors(model)) finals.push_back(t);
    trace.final_checksum = checksum_tensors(finals);
    return trace;
}

TrainResult train_on_dataset(EnergyModel initial, const LabeledDataset& dataset,
                             const TrainConfig& config) {
    config.validate();
    std::vector<Sample> raw;
    for (const auto& item : dataset.items) {
        if (item.split != Split::train) continue;
        if (!dataset.inlier_classes.empty() && dataset.is_outlier(item)) {
            throw DataError("train: training split contains outlier item '" + item.id + "'");
        }
        raw.push_back(item.sample);
    }
    if (raw.empty()) throw DataError("train: dataset has no training-split samples");

    TrainResult result;
    result.model.model = std::move(initial);
    if (config.normalization == TrainConfig::Normalization::zscore) {
        result.model.norm = fit_norm_stats(raw);
    }

    std::vector<Sample> prepared;
    prepared.reserve(raw.size());
    for (const Sample& s : raw) prepared.push_back(result.model.norm.apply(s));

    // Prior center = per-feature mean of what the model actually sees.
    Tensor train_mean = fit_norm_stats(prepared).mean;
    std::visit([&](auto& params) { params.prior_center = train_mean; }, result.model.model);

    result.trace = train(result.model.model, prepared, config);
    result.model.config_echo = config.echo();
    result.model.config_echo.emplace_back("arch", architecture_name(result.model.model));
    return result;
}

}  // namespace dsebm
