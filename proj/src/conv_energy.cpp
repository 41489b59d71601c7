#include "dsebm/conv_energy.hpp"

#include <cmath>
#include <stdexcept>

#include "dsebm/errors.hpp"
#include "dsebm/numerics.hpp"

namespace dsebm {

namespace {

Tensor channel_of(const Tensor& t, std::size_t c) {
    const std::size_t h = t.shape[1], w = t.shape[2];
    Tensor out = Tensor::zeros({h, w});
    const double* src = &t.data[c * h * w];
    std::copy(src, src + h * w, out.data.begin());
    return out;
}

void add_channel(Tensor& t, std::size_t c, const Tensor& plane) {
    const std::size_t h = t.shape[1], w = t.shape[2];
    double* dst = &t.data[c * h * w];
    for (std::size_t i = 0; i < h * w; ++i) dst[i] += plane.data[i];
}

Tensor filter_of(const Tensor& filters, std::size_t j, std::size_t k) {
    const std::size_t kin = filters.shape[1], fh = filters.shape[2], fw = filters.shape[3];
    Tensor out = Tensor::zeros({fh, fw});
    const double* src = &filters.data[(j * kin + k) * fh * fw];
    std::copy(src, src + fh * fw, out.data.begin());
    return out;
}

void add_filter(Tensor& filters, std::size_t j, std::size_t k, const Tensor& plane) {
    const std::size_t kin = filters.shape[1], fh = filters.shape[2], fw = filters.shape[3];
    double* dst = &filters.data[(j * kin + k) * fh * fw];
    for (std::size_t i = 0; i < fh * fw; ++i) dst[i] += plane.data[i];
}

Tensor reshaped(Tensor t, std::vector<std::size_t> shape) {
    if (shape_numel(shape) != t.numel()) {
        throw std::invalid_argument("reshape: element count mismatch");
    }
    t.shape = std::move(shape);
    return t;
}

Tensor flattened(const Tensor& t) { return reshaped(t, {t.numel()}); }

std::vector<std::size_t> layer_output_shape(const ConvStackLayer& layer,
                                            const std::vector<std::size_t>& in,
                                            std::size_t index) {
    const std::string where = "conv stack layer " + std::to_string(index);
    if (const auto* conv = std::get_if<ConvFilterLayer>(&layer)) {
        if (in.size() != 3) throw std::invalid_argument(where + ": conv needs image input");
        if (conv->filters.rank() != 4) {
            throw std::invalid_argument(where + ": filters must be rank 4");
        }
        const std::size_t kout = conv->filters.shape[0], kin = conv->filters.shape[1];
        const std::size_t fh = conv->filters.shape[2], fw = conv->filters.shape[3];
        require_shape(conv->bias, {kout}, where.c_str());
        if (kin != in[0]) {
            throw std::invalid_argument(where + ": filter channels " + std::to_string(kin) +
                                        " != input channels " + std::to_string(in[0]));
        }
        if (fh > in[1] || fw > in[2]) {
            throw std::invalid_argument(where + ": filter larger than input plane");
        }
        return {kout, in[1] - fh + 1, in[2] - fw + 1};
    }
    if (const auto* pool = std::get_if<MaxPoolLayer>(&layer)) {
        if (in.size() != 3) throw std::invalid_argument(where + ": pool needs image input");
        if (pool->window == 0) throw std::invalid_argument(where + ": pool window must be positive");
        if (in[1] % pool->window != 0 || in[2] % pool->window != 0) {
            throw std::invalid_argument(where + ": side " + std::to_string(in[1]) + "x" +
                                        std::to_string(in[2]) + " not divisible by window " +
                                        std::to_string(pool->window));
        }
        return {in[0], in[1] / pool->window, in[2] / pool->window};
    }
    const auto& dense = std::get<FlatDenseLayer>(layer);
    if (dense.weight.rank() != 2) throw std::invalid_argument(where + ": dense weight must be rank 2");
    require_shape(dense.bias, {dense.weight.shape[1]}, where.c_str());
    if (dense.weight.shape[0] != shape_numel(in)) {
        throw std::invalid_argument(where + ": dense width " + std::to_string(dense.weight.shape[0]) +
                                    " != flattened input " + std::to_string(shape_numel(in)));
    }
    return {dense.weight.shape[1]};
}

}  // namespace

std::vector<std::vector<std::size_t>> conv_stack_shapes(const ConvEnergyParams& params) {
    std::vector<std::vector<std::size_t>> shapes;
    shapes.push_back(params.input_shape());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        shapes.push_back(layer_output_shape(params.layers[l], shapes.back(), l));
    }
    return shapes;
}

void ConvEnergyParams::validate() const {
    if (prior_center.rank() != 3) {
        throw std::invalid_argument("conv params: prior center must have image shape, got " +
                                    shape_string(prior_center.shape));
    }
    conv_stack_shapes(*this);
}

std::vector<Tensor*> ConvEnergyParams::tensors() {
    std::vector<Tensor*> out;
    for (auto& layer : layers) {
        if (auto* conv = std::get_if<ConvFilterLayer>(&layer)) {
            out.push_back(&conv->filters);
            out.push_back(&conv->bias);
        } else if (auto* dense = std::get_if<FlatDenseLayer>(&layer)) {
            out.push_back(&dense->weight);
            out.push_back(&dense->bias);
        }
    }
    out.push_back(&prior_center);
    return out;
}

std::vector<const Tensor*> ConvEnergyParams::tensors() const {
    std::vector<const Tensor*> out;
    for (const auto& layer : layers) {
        if (const auto* conv = std::get_if<ConvFilterLayer>(&layer)) {
            out.push_back(&conv->filters);
            out.push_back(&conv->bias);
        } else if (const auto* dense = std::get_if<FlatDenseLayer>(&layer)) {
            out.push_back(&dense->weight);
            out.push_back(&dense->bias);
        }
    }
    out.push_back(&prior_center);
    return out;
}

ConvEnergyParams ConvEnergyParams::zeros_like(const ConvEnergyParams& other) {
    ConvEnergyParams out;
    for (const auto& layer : other.layers) {
        if (const auto* conv = std::get_if<ConvFilterLayer>(&layer)) {
            out.layers.push_back(ConvFilterLayer{Tensor::zeros(conv->filters.shape),
                                                 Tensor::zeros(conv->bias.shape)});
        } else if (const auto* pool = std::get_if<MaxPoolLayer>(&layer)) {
            out.layers.push_back(*pool);
        } else {
            const auto& dense = std::get<FlatDenseLayer>(layer);
            out.layers.push_back(FlatDenseLayer{Tensor::zeros(dense.weight.shape),
                                                Tensor::zeros(dense.bias.shape)});
        }
    }
    out.prior_center = Tensor::zeros(other.prior_center.shape);
    return out;
}

namespace {

Tensor conv_layer_preactivation(const ConvFilterLayer& layer, const Tensor& input) {
    const std::size_t kout = layer.filters.shape[0], kin = layer.filters.shape[1];
    const std::size_t fh = layer.filters.shape[2];
    const std::size_t oh = input.shape[1] - fh + 1, ow = input.shape[2] - layer.filters.shape[3] + 1;
    Tensor pre = Tensor::zeros({kout, oh, ow});
    for (std::size_t j = 0; j < kout; ++j) {
        Tensor acc = Tensor::filled({oh, ow}, layer.bias.data[j]);
        for (std::size_t k = 0; k < kin; ++k) {
            acc += conv_valid(channel_of(input, k), flip2d(filter_of(layer.filters, j, k)));
        }
        add_channel(pre, j, acc);
    }
    return pre;
}

}  // namespace

Tensor conv_layer_forward(const ConvFilterLayer& layer, const Tensor& input) {
    if (input.rank() != 3) {
        throw std::invalid_argument("conv_layer_forward: expected (C x H x W) input, got " +
                                    shape_string(input.shape));
    }
    if (layer.filters.shape[1] != input.shape[0]) {
        throw std::invalid_argument("conv_layer_forward: channel mismatch");
    }
    return softplus(conv_layer_preactivation(layer, input));
}

MaxPoolResult maxpool_forward(std::size_t window, const Tensor& input) {
    const bool planar = input.rank() == 2;
    if (!planar && input.rank() != 3) {
        throw std::invalid_argument("maxpool_forward: expected 2-D or 3-D input");
    }
    const std::size_t channels = planar ? 1 : input.shape[0];
    const std::size_t h = planar ? input.shape[0] : input.shape[1];
    const std::size_t w = planar ? input.shape[1] : input.shape[2];
    if (window == 0 || h % window != 0 || w % window != 0) {
        throw std::invalid_argument("maxpool_forward: input " + std::to_string(h) + "x" +
                                    std::to_string(w) + " not divisible by window " +
                                    std::to_string(window));
    }
    const std::size_t oh = h / window, ow = w / window;
    MaxPoolResult result;
    result.output = planar ? Tensor::zeros({oh, ow}) : Tensor::zeros({channels, oh, ow});
    result.argmax.reserve(channels * oh * ow);
    for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t base = c * h * w;
        for (std::size_t p = 0; p < oh; ++p) {
            for (std::size_t q = 0; q < ow; ++q) {
                std::size_t best = base + (p * window) * w + q * window;
                double best_value = input.data[best];
                for (std::size_t i = 0; i < window; ++i) {
                    for (std::size_t j = 0; j < window; ++j) {
                        const std::size_t idx = base + (p * window + i) * w + (q * window + j);
                        if (input.data[idx] > best_value) {  // ties keep the first in scan order
                            best_value = input.data[idx];
                            best = idx;
                        }
                    }
                }
                result.output.data[(c * oh + p) * ow + q] = best_value;
                result.argmax.push_back(best);
            }
        }
    }
    return result;
}

ConvForward conv_energy(const ConvEnergyParams& params, const Tensor& image) {
    params.validate();
    require_shape(image, params.input_shape(), "conv_energy input");

    ConvForward fwd;
    fwd.activations.push_back(image);
    fwd.preactivations.resize(params.layers.size());
    fwd.pool_argmax.resize(params.layers.size());

    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const Tensor& in = fwd.activations.back();
        if (const auto* conv = std::get_if<ConvFilterLayer>(&params.layers[l])) {
            fwd.preactivations[l] = conv_layer_preactivation(*conv, in);
            fwd.activations.push_back(softplus(fwd.preactivations[l]));
        } else if (const auto* pool = std::get_if<MaxPoolLayer>(&params.layers[l])) {
            MaxPoolResult pooled = maxpool_forward(pool->window, in);
            fwd.pool_argmax[l] = std::move(pooled.argmax);
            fwd.activations.push_back(std::move(pooled.output));
        } else {
            const auto& dense = std::get<FlatDenseLayer>(params.layers[l]);
            Tensor z = matvec_transposed(dense.weight, flattened(in));
            z += dense.bias;
            fwd.preactivations[l] = z;
            fwd.activations.push_back(softplus(z));
        }
    }

    Tensor centered = image;
    centered -= params.prior_center;
    fwd.energy = 0.5 * squared_norm(centered) - sum(fwd.activations.back());
    return fwd;
}

namespace {

/// One backward step of the input-gradient sweep: maps the adjoint-like
/// carry at layer l's output to layer l's input. For conv/dense layers the
/// gated carry is also returned (needed by the parameter-gradient sweep).
Tensor score_backward_layer(const ConvStackLayer& layer, const ConvForward& fwd,
                            std::size_t l, const Tensor& carry, Tensor* gated_out) {
    const Tensor& in = fwd.activations[l];
    if (const auto* conv = std::get_if<ConvFilterLayer>(&layer)) {
        Tensor gated = hadamard(sigmoid(fwd.preactivations[l]), carry);
        Tensor prev = Tensor::zeros(in.shape);
        const std::size_t kout = conv->filters.shape[0], kin = conv->filters.shape[1];
        for (std::size_t k = 0; k < kin; ++k) {
            Tensor acc = Tensor::zeros({in.shape[1], in.shape[2]});
            for (std::size_t j = 0; j < kout; ++j) {
                acc += conv_full(channel_of(gated, j), filter_of(conv->filters, j, k));
            }
            add_channel(prev, k, acc);
        }
        if (gated_out) *gated_out = std::move(gated);
        return prev;
    }
    if (std::get_if<MaxPoolLayer>(&layer)) {
        Tensor prev = Tensor::zeros(in.shape);
        const auto& argmax = fwd.pool_argmax[l];
        for (std::size_t i = 0; i < argmax.size(); ++i) {
            prev.data[argmax[i]] += carry.data[i];
        }
        return prev;
    }
    const auto& dense = std::get<FlatDenseLayer>(layer);
    Tensor gated = hadamard(sigmoid(fwd.preactivations[l]), carry);
    Tensor prev = reshaped(matvec(dense.weight, gated), in.shape);
    if (gated_out) *gated_out = std::move(gated);
    return prev;
}

}  // namespace

Tensor conv_score(const ConvEnergyParams& params, const ConvForward& fwd) {
    Tensor carry = Tensor::ones(fwd.activations.back().shape);
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        carry = score_backward_layer(params.layers[l], fwd, l, carry, nullptr);
    }
    Tensor score = fwd.activations[0];
    score -= params.prior_center;
    score -= carry;
    return score;
}

Tensor conv_score(const ConvEnergyParams& params, const Tensor& image) {
    return conv_score(params, conv_energy(params, image));
}

Tensor conv_reconstruct(const ConvEnergyParams& params, const Tensor& image) {
    Tensor out = image;
    out -= conv_score(params, image);
    return out;
}

double conv_param_grad(const ConvEnergyParams& params, const Tensor& x_clean,
                       const Tensor& x_noisy, ConvEnergyParams& grad,
                       double scale) {
    require_shape(x_clean, params.input_shape(), "conv_param_grad clean input");
    const std::size_t depth = params.layers.size();
    ConvForward fwd = conv_energy(params, x_noisy);

    // Score-backward chain, keeping every carry u_l and gated tensor.
    std::vector<Tensor> u(depth + 1), gated(depth);
    u[depth] = Tensor::ones(fwd.activations[depth].shape);
    for (std::size_t l = depth; l-- > 0;) {
        u[l] = score_backward_layer(params.layers[l], fwd, l, u[l + 1], &gated[l]);
    }

    Tensor residual = params.prior_center;
    residual += u[0];
    residual -= x_clean;  // f(x_noisy) - x_clean
    const double loss = 0.5 * squared_norm(residual);
    if (!std::isfinite(loss)) {
        throw NumericError("conv_param_grad: non-finite reconstruction loss");
    }

    Tensor seed = residual;
    seed *= scale;
    grad.prior_center += seed;

    // Upward sweep through the score-backward chain. gate_adjoint[l] holds
    // the adjoint of sigmoid(z_l) for conv/dense layers.
    std::vector<Tensor> gate_adjoint(depth);
    Tensor u_bar = seed;
    for (std::size_t l = 0; l < depth; ++l) {
        const bool top = (l + 1 == depth);  // u[depth] is constant ones, no adjoint
        if (const auto* conv = std::get_if<ConvFilterLayer>(&params.layers[l])) {
            auto* conv_grad = &std::get<ConvFilterLayer>(grad.layers[l]);
            const std::size_t kout = conv->filters.shape[0], kin = conv->filters.shape[1];
            Tensor gated_bar = Tensor::zeros(gated[l].shape);
            for (std::size_t k = 0; k < kin; ++k) {
                Tensor u_bar_k = channel_of(u_bar, k);
                for (std::size_t j = 0; j < kout; ++j) {
                    add_filter(conv_grad->filters, j, k,
                               flip2d(conv_valid(u_bar_k, channel_of(gated[l], j))));
                    add_channel(gated_bar, j,
                                conv_valid(u_bar_k, flip2d(filter_of(conv->filters, j, k))));
                }
            }
            gate_adjoint[l] = hadamard(u[l + 1], gated_bar);
            if (!top) u_bar = hadamard(sigmoid(fwd.preactivations[l]), gated_bar);
        } else if (std::get_if<MaxPoolLayer>(&params.layers[l])) {
            if (!top) {
                const auto& argmax = fwd.pool_argmax[l];
                Tensor next = Tensor::zeros(u[l + 1].shape);
                for (std::size_t i = 0; i < argmax.size(); ++i) {
                    next.data[i] = u_bar.data[argmax[i]];
                }
                u_bar = std::move(next);
            }
        } else {
            const auto& dense = std::get<FlatDenseLayer>(params.layers[l]);
            auto* dense_grad = &std::get<FlatDenseLayer>(grad.layers[l]);
            Tensor u_bar_flat = flattened(u_bar);
            add_outer(dense_grad->weight, u_bar_flat, gated[l]);
            Tensor gated_bar = matvec_transposed(dense.weight, u_bar_flat);
            gate_adjoint[l] = hadamard(u[l + 1], gated_bar);
            if (!top) u_bar = hadamard(sigmoid(fwd.preactivations[l]), gated_bar);
        }
    }

    // Downward sweep through the forward chain; h_bar is the adjoint of
    // activations[l+1] (zero at the top: h_L feeds only the energy term).
    Tensor h_bar;
    for (std::size_t l = depth; l-- > 0;) {
        if (const auto* conv = std::get_if<ConvFilterLayer>(&params.layers[l])) {
            auto* conv_grad = &std::get<ConvFilterLayer>(grad.layers[l]);
            const Tensor& z = fwd.preactivations[l];
            Tensor z_bar = Tensor::zeros(z.shape);
            for (std::size_t i = 0; i < z.numel(); ++i) {
                const double s = sigmoid(z.data[i]);
                double acc = s * (1.0 - s) * gate_adjoint[l].data[i];
                if (h_bar.numel() > 0) acc += s * h_bar.data[i];
                z_bar.data[i] = acc;
            }
            const std::size_t kout = conv->filters.shape[0], kin = conv->filters.shape[1];
            const std::size_t oh = z.shape[1], ow = z.shape[2];
            for (std::size_t j = 0; j < kout; ++j) {
                double bias_acc = 0.0;
                for (std::size_t i = 0; i < oh * ow; ++i) bias_acc += z_bar.data[j * oh * ow + i];
                conv_grad->bias.data[j] += bias_acc;
            }
            Tensor prev_bar = Tensor::zeros(fwd.activations[l].shape);
            for (std::size_t j = 0; j < kout; ++j) {
                Tensor z_bar_j = channel_of(z_bar, j);
                for (std::size_t k = 0; k < kin; ++k) {
                    add_filter(conv_grad->filters, j, k,
                               flip2d(conv_valid(channel_of(fwd.activations[l], k), z_bar_j)));
                    add_channel(prev_bar, k, conv_full(z_bar_j, filter_of(conv->filters, j, k)));
                }
            }
            h_bar = std::move(prev_bar);
        } else if (std::get_if<MaxPoolLayer>(&params.layers[l])) {
            Tensor prev_bar = Tensor::zeros(fwd.activations[l].shape);
            if (h_bar.numel() > 0) {
                const auto& argmax = fwd.pool_argmax[l];
                for (std::size_t i = 0; i < argmax.size(); ++i) {
                    prev_bar.data[argmax[i]] += h_bar.data[i];
                }
            }
            h_bar = std::move(prev_bar);
        } else {
            const auto& dense = std::get<FlatDenseLayer>(params.layers[l]);
            auto* dense_grad = &std::get<FlatDenseLayer>(grad.layers[l]);
            const Tensor& z = fwd.preactivations[l];
            Tensor z_bar = Tensor::zeros(z.shape);
            for (std::size_t i = 0; i < z.numel(); ++i) {
                const double s = sigmoid(z.data[i]);
                double acc = s * (1.0 - s) * gate_adjoint[l].data[i];
                if (h_bar.numel() > 0) acc += s * h_bar.data[i];
                z_bar.data[i] = acc;
            }
            dense_grad->bias += z_bar;
            add_outer(dense_grad->weight, flattened(fwd.activations[l]), z_bar);
            h_bar = reshaped(matvec(dense.weight, z_bar), fwd.activations[l].shape);
        }
    }
    return loss;
}

}  // namespace dsebm
