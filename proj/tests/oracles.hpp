#pragma once

// Test-only oracles: direct scalar-loop reimplementations of the model
// formulas, kept deliberately independent of the library's vectorized
// paths. Expected values in the suites are computed (or frozen) from these.

#include <cmath>
#include <cstddef>
#include <vector>

#include "dsebm/conv_energy.hpp"
#include "dsebm/dense_energy.hpp"
#include "dsebm/recurrent_energy.hpp"
#include "dsebm/tensor.hpp"

namespace oracle {

inline double softplus_ref(double x) { return std::log(1.0 + std::exp(x)); }
inline double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Layer-by-layer scalar evaluation of the fully connected energy.
inline double dense_energy_ref(const dsebm::DenseEnergyParams& params,
                               const dsebm::Tensor& x) {
    std::vector<double> h(x.data.begin(), x.data.end());
    for (const auto& layer : params.layers) {
        const std::size_t in = layer.weight.shape[0], out = layer.weight.shape[1];
        std::vector<double> next(out, 0.0);
        for (std::size_t j = 0; j < out; ++j) {
            double z = layer.bias.data[j];
            for (std::size_t i = 0; i < in; ++i) z += layer.weight.data[i * out + j] * h[i];
            next[j] = softplus_ref(z);
        }
        h = std::move(next);
    }
    double prior = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double c = x.data[i] - params.prior_center.data[i];
        prior += c * c;
    }
    double sum_top = 0.0;
    for (double v : h) sum_top += v;
    return 0.5 * prior - sum_top;
}

/// One-layer reconstruction in closed form: W sigmoid(W^T x + b) + b'.
inline dsebm::Tensor one_layer_dae_ref(const dsebm::Tensor& weight, const dsebm::Tensor& bias,
                                       const dsebm::Tensor& prior, const dsebm::Tensor& x) {
    const std::size_t d = weight.shape[0], k = weight.shape[1];
    std::vector<double> gate(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        double z = bias.data[j];
        for (std::size_t i = 0; i < d; ++i) z += weight.data[i * k + j] * x.data[i];
        gate[j] = sigmoid_ref(z);
    }
    dsebm::Tensor out = prior;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < k; ++j) out.data[i] += weight.data[i * k + j] * gate[j];
    }
    return out;
}

struct RollRef {
    std::vector<std::vector<double>> hidden;        // h^0..h^{T-1}
    std::vector<std::vector<double>> biases;        // b^1..b^T
    std::vector<std::vector<double>> prior_centers; // b'^1..b'^T
};

/// Step-by-step scalar roll of the bias RNN.
inline RollRef rnn_roll_ref(const dsebm::RecurrentEnergyParams& p, const dsebm::Sequence& seq) {
    const std::size_t kr = p.rnn_dim(), ke = p.ebm_dim(), d = p.step_dim();
    const std::size_t steps = seq.length();
    RollRef roll;
    roll.hidden.push_back(
        std::vector<double>(p.initial_hidden.data.begin(), p.initial_hidden.data.end()));
    for (std::size_t t = 0; t + 1 < steps; ++t) {
        std::vector<double> next(kr, 0.0);
        for (std::size_t i = 0; i < kr; ++i) {
            double z = p.hidden_bias.data[i];
            for (std::size_t j = 0; j < kr; ++j) {
                z += p.hidden_hidden.data[i * kr + j] * roll.hidden[t][j];
            }
            for (std::size_t j = 0; j < d; ++j) {
                z += p.hidden_input.data[i * d + j] * seq.steps[t].data[j];
            }
            next[i] = softplus_ref(z);
        }
        roll.hidden.push_back(std::move(next));
    }
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> b(ke, 0.0), bp(d, 0.0);
        for (std::size_t i = 0; i < ke; ++i) {
            double v = p.step_bias.data[i];
            for (std::size_t j = 0; j < kr; ++j) {
                v += p.bias_readout.data[i * kr + j] * roll.hidden[t][j];
            }
            b[i] = v;
        }
        for (std::size_t i = 0; i < d; ++i) {
            double v = p.prior_center.data[i];
            for (std::size_t j = 0; j < kr; ++j) {
                v += p.prior_readout.data[i * kr + j] * roll.hidden[t][j];
            }
            bp[i] = v;
        }
        roll.biases.push_back(std::move(b));
        roll.prior_centers.push_back(std::move(bp));
    }
    return roll;
}

/// Per-step energy with explicit biases (the one-layer form).
inline double step_energy_ref(const dsebm::RecurrentEnergyParams& p, const dsebm::Tensor& x,
                              const std::vector<double>& bias,
                              const std::vector<double>& prior_center) {
    const std::size_t d = p.step_dim(), ke = p.ebm_dim();
    double prior = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double c = x.data[i] - prior_center[i];
        prior += c * c;
    }
    double sum_sp = 0.0;
    for (std::size_t j = 0; j < ke; ++j) {
        double z = bias[j];
        for (std::size_t i = 0; i < d; ++i) z += p.step_weight.data[i * ke + j] * x.data[i];
        sum_sp += softplus_ref(z);
    }
    return 0.5 * prior - sum_sp;
}

/// Quadruple-loop valid cross-correlation with the flipped filter, the way
/// the conv layer consumes it.
inline dsebm::Tensor conv_layer_ref(const dsebm::ConvFilterLayer& layer,
                                    const dsebm::Tensor& input) {
    const std::size_t kout = layer.filters.shape[0], kin = layer.filters.shape[1];
    const std::size_t fs = layer.filters.shape[2];
    const std::size_t h = input.shape[1], w = input.shape[2];
    const std::size_t oh = h - fs + 1, ow = w - fs + 1;
    dsebm::Tensor out = dsebm::Tensor::zeros({kout, oh, ow});
    for (std::size_t j = 0; j < kout; ++j) {
        for (std::size_t p = 0; p < oh; ++p) {
            for (std::size_t q = 0; q < ow; ++q) {
                double acc = layer.bias.data[j];
                for (std::size_t k = 0; k < kin; ++k) {
                    for (std::size_t a = 0; a < fs; ++a) {
                        for (std::size_t b = 0; b < fs; ++b) {
                            const double img = input.data[(k * h + p + a) * w + q + b];
                            const double fil =
                                layer.filters
                                    .data[((j * kin + k) * fs + fs - 1 - a) * fs + fs - 1 - b];
                            acc += img * fil;
                        }
                    }
                }
                out.data[(j * oh + p) * ow + q] = softplus_ref(acc);
            }
        }
    }
    return out;
}

/// Scalar block max over one plane; returns values and flat argmax indices.
inline void maxpool_ref(const dsebm::Tensor& plane, std::size_t window,
                        std::vector<double>& values, std::vector<std::size_t>& argmax) {
    const std::size_t h = plane.shape[0], w = plane.shape[1];
    values.clear();
    argmax.clear();
    for (std::size_t p = 0; p < h / window; ++p) {
        for (std::size_t q = 0; q < w / window; ++q) {
            double best = plane.data[(p * window) * w + q * window];
            std::size_t best_idx = (p * window) * w + q * window;
            for (std::size_t a = 0; a < window; ++a) {
                for (std::size_t b = 0; b < window; ++b) {
                    const std::size_t idx = (p * window + a) * w + q * window + b;
                    if (plane.data[idx] > best) {
                        best = plane.data[idx];
                        best_idx = idx;
                    }
                }
            }
            values.push_back(best);
            argmax.push_back(best_idx);
        }
    }
}

}  // namespace oracle
