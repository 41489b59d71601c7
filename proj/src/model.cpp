#include "dsebm/model.hpp"

#include <cmath>

#include "dsebm/errors.hpp"
#include "dsebm/numerics.hpp"

namespace dsebm {

const char* architecture_name(const EnergyModel& model) {
    if (std::holds_alternative<DenseEnergyParams>(model)) return "dense";
    if (std::holds_alternative<RecurrentEnergyParams>(model)) return "recurrent";
    return "conv";
}

namespace {

constexpr double kStddevFloor = 1e-9;

Tensor normalize_tensor(const Tensor& x, const NormStats& stats) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.data[i] = (out.data[i] - stats.mean.data[i]) / stats.stddev.data[i];
    }
    return out;
}

const Tensor& expect_tensor(const Sample& sample, const char* what) {
    const Tensor* t = std::get_if<Tensor>(&sample);
    if (!t) throw DataError(std::string(what) + ": expected a non-sequence sample");
    return *t;
}

const Sequence& expect_sequence(const Sample& sample, const char* what) {
    const Sequence* s = std::get_if<Sequence>(&sample);
    if (!s) throw DataError(std::string(what) + ": expected a sequence sample");
    return *s;
}

}  // namespace

Sample NormStats::apply(const Sample& sample) const {
    if (!enabled) return sample;
    if (const Tensor* t = std::get_if<Tensor>(&sample)) {
        if (t->shape != mean.shape) {
            throw DataError("normalization: sample shape " + shape_string(t->shape) +
                            " does not match fitted shape " + shape_string(mean.shape));
        }
        return normalize_tensor(*t, *this);
    }
    const Sequence& seq = std::get<Sequence>(sample);
    Sequence out = seq;
    for (Tensor& step : out.steps) {
        if (step.shape != mean.shape) {
            throw DataError("normalization: sequence step shape " + shape_string(step.shape) +
                            " does not match fitted shape " + shape_string(mean.shape));
        }
        step = normalize_tensor(step, *this);
    }
    return out;
}

NormStats fit_norm_stats(const std::vector<Sample>& samples) {
    if (samples.empty()) throw DataError("fit_norm_stats: no samples");
    const Tensor* first = nullptr;
    if (const Tensor* t = std::get_if<Tensor>(&samples.front())) {
        first = t;
    } else {
        first = &std::get<Sequence>(samples.front()).steps.front();
    }

    NormStats stats;
    stats.enabled = true;
    stats.mean = Tensor::zeros(first->shape);
    stats.stddev = Tensor::zeros(first->shape);

    std::size_t count = 0;
    auto accumulate = [&](const Tensor& x, Tensor& acc, auto&& fn) {
        if (x.shape != acc.shape) {
            throw DataError("fit_norm_stats: inconsistent sample shape " + shape_string(x.shape));
        }
        for (std::size_t i = 0; i < x.numel(); ++i) acc.data[i] += fn(x.data[i], i);
    };

    for (const Sample& s : samples) {
        if (const Tensor* t = std::get_if<Tensor>(&s)) {
            accumulate(*t, stats.mean, [](double v, std::size_t) { return v; });
            ++count;
        } else {
            for (const Tensor& step : std::get<Sequence>(s).steps) {
                accumulate(step, stats.mean, [](double v, std::size_t) { return v; });
                ++count;
            }
        }
    }
    stats.mean *= 1.0 / static_cast<double>(count);

    for (const Sample& s : samples) {
        auto sq = [&](double v, std::size_t i) {
            const double c = v - stats.mean.data[i];
            return c * c;
        };
        if (const Tensor* t = std::get_if<Tensor>(&s)) {
            accumulate(*t, stats.stddev, sq);
        } else {
            for (const Tensor& step : std::get<Sequence>(s).steps) accumulate(step, stats.stddev, sq);
        }
    }
    for (double& v : stats.stddev.data) {
        v = std::sqrt(v / static_cast<double>(count));
        if (v < kStddevFloor) v = kStddevFloor;  // constant features map to 0
    }
    return stats;
}

std::vector<Tensor*> param_tensors(EnergyModel& model) {
    return std::visit([](auto& params) { return params.tensors(); }, model);
}

std::vector<const Tensor*> param_tensors(const EnergyModel& model) {
    return std::visit([](const auto& params) { return params.tensors(); }, model);
}

EnergyModel zeros_like(const EnergyModel& model) {
    return std::visit(
        [](const auto& params) -> EnergyModel {
            return std::decay_t<decltype(params)>::zeros_like(params);
        },
        model);
}

double model_energy(const EnergyModel& model, const Sample& sample) {
    if (const auto* dense = std::get_if<DenseEnergyParams>(&model)) {
        return dense_forward(*dense, expect_tensor(sample, "dense energy")).energy;
    }
    if (const auto* recurrent = std::get_if<RecurrentEnergyParams>(&model)) {
        return seq_energy(*recurrent, expect_sequence(sample, "recurrent energy")).total;
    }
    const auto& conv = std::get<ConvEnergyParams>(model);
    return conv_energy(conv, expect_tensor(sample, "conv energy")).energy;
}

Sample model_reconstruct(const EnergyModel& model, const Sample& sample) {
    if (const auto* dense = std::get_if<DenseEnergyParams>(&model)) {
        return dense_reconstruct(*dense, expect_tensor(sample, "dense reconstruct"));
    }
    if (const auto* recurrent = std::get_if<RecurrentEnergyParams>(&model)) {
        return seq_reconstruct(*recurrent, expect_sequence(sample, "recurrent reconstruct"));
    }
    const auto& conv = std::get<ConvEnergyParams>(model);
    return conv_reconstruct(conv, expect_tensor(sample, "conv reconstruct"));
}

double model_recon_error(const EnergyModel& model, const Sample& sample) {
    if (const auto* dense = std::get_if<DenseEnergyParams>(&model)) {
        return squared_norm(dense_score(*dense, expect_tensor(sample, "dense score")));
    }
    if (const auto* recurrent = std::get_if<RecurrentEnergyParams>(&model)) {
        double total = 0.0;
        for (const Tensor& s :
             seq_score(*recurrent, expect_sequence(sample, "recurrent score"))) {
            total += squared_norm(s);
        }
        return total;
    }
    const auto& conv = std::get<ConvEnergyParams>(model);
    return squared_norm(conv_score(conv, expect_tensor(sample, "conv score")));
}

double model_param_grad(const EnergyModel& model, const Sample& clean,
                        const Sample& noisy, EnergyModel& grad, double scale) {
    if (const auto* dense = std::get_if<DenseEnergyParams>(&model)) {
        return dense_param_grad(*dense, expect_tensor(clean, "dense gradient"),
                                expect_tensor(noisy, "dense gradient"),
                                std::get<DenseEnergyParams>(grad), scale);
    }
    if (const auto* recurrent = std::get_if<RecurrentEnergyParams>(&model)) {
        return seq_param_grad(*recurrent, expect_sequence(clean, "recurrent gradient"),
                              expect_sequence(noisy, "recurrent gradient"),
                              std::get<RecurrentEnergyParams>(grad), scale);
    }
    const auto& conv = std::get<ConvEnergyParams>(model);
    return conv_param_grad(conv, expect_tensor(clean, "conv gradient"),
                           expect_tensor(noisy, "conv gradient"),
                           std::get<ConvEnergyParams>(grad), scale);
}

const DenseEnergyParams& expect_dense(const TrainedModel& m) {
    const auto* p = std::get_if<DenseEnergyParams>(&m.model);
    if (!p) {
        throw DataError(std::string("architecture mismatch: expected dense, artifact holds ") +
                        architecture_name(m.model));
    }
    return *p;
}

const RecurrentEnergyParams& expect_recurrent(const TrainedModel& m) {
    const auto* p = std::get_if<RecurrentEnergyParams>(&m.model);
    if (!p) {
        throw DataError(std::string("architecture mismatch: expected recurrent, artifact holds ") +
                        architecture_name(m.model));
    }
    return *p;
}

const ConvEnergyParams& expect_conv(const TrainedModel& m) {
    const auto* p = std::get_if<ConvEnergyParams>(&m.model);
    if (!p) {
        throw DataError(std::string("architecture mismatch: expected conv, artifact holds ") +
                        architecture_name(m.model));
    }
    return *p;
}

}  // namespace dsebm
