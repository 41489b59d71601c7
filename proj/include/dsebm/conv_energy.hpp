#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "dsebm/tensor.hpp"

namespace dsebm {

/// Convolution layer: filters (K_out x K_in x dw x dw) applied in valid
/// mode with a per-filter bias, softplus activation.
struct ConvFilterLayer {
    Tensor filters;
    Tensor bias;  // (K_out)
};

/// Disjoint-window max pooling; the input side must divide evenly.
struct MaxPoolLayer {
    std::size_t window = 2;
};

/// Fully connected layer over the flattened input, softplus activation.
struct FlatDenseLayer {
    Tensor weight;  // (in x out)
    Tensor bias;    // (out)
};

using ConvStackLayer = std::variant<ConvFilterLayer, MaxPoolLayer, FlatDenseLayer>;

/// Convolutional energy model over images (channels x height x width):
/// energy(x) = 0.5*||x - prior_center||^2 - sum(h_L) with h_L the output of
/// the layer stack. The prior center has the full input shape.
struct ConvEnergyParams {
    std::vector<ConvStackLayer> layers;
    Tensor prior_center;  // (C x H x W)

    std::vector<std::size_t> input_shape() const { return prior_center.shape; }
    void validate() const;  // checks the whole shape chain

    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    static ConvEnergyParams zeros_like(const ConvEnergyParams& other);
};

/// Descriptor-level shapes of every layer output, computed without running
/// the stack: conv maps side s -> s - dw + 1, pool maps s -> s / window,
/// dense flattens. Throws on an invalid chain (filter too large, pool side
/// not divisible, dense width mismatch).
std::vector<std::vector<std::size_t>> conv_stack_shapes(const ConvEnergyParams& params);

/// Single conv layer: out_j = softplus(sum_k conv_valid(in_k, flip(W_jk)) + b_j).
Tensor conv_layer_forward(const ConvFilterLayer& layer, const Tensor& input);

/// Block max over disjoint window x window tiles. `argmax` records, per
/// output cell in row-major order, the flat input index of the maximum
/// (first occurrence in row-major scan on ties).
struct MaxPoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;
};
MaxPoolResult maxpool_forward(std::size_t window, const Tensor& input);

/// Forward pass with per-layer caches reused by the backward sweeps.
struct ConvForward {
    double energy = 0.0;
    std::vector<Tensor> activations;      // h_0..h_L
    std::vector<Tensor> preactivations;   // z_l for conv/dense layers, empty for pool
    std::vector<std::vector<std::size_t>> pool_argmax;  // per layer, empty unless pool
};

ConvForward conv_energy(const ConvEnergyParams& params, const Tensor& image);

/// Input gradient of the energy. Conv layers gate the incoming gradient by
/// sigmoid(z) and route it back through a full convolution with the
/// unflipped filter; pool layers scatter to the recorded argmax positions.
Tensor conv_score(const ConvEnergyParams& params, const ConvForward& fwd);
Tensor conv_score(const ConvEnergyParams& params, const Tensor& image);

Tensor conv_reconstruct(const ConvEnergyParams& params, const Tensor& image);

/// Accumulates into `grad` the gradient of 0.5*||x_clean - f(x_noisy)||^2
/// over the conv stack's reconstruction graph. Returns the loss value.
double conv_param_grad(const ConvEnergyParams& params, const Tensor& x_clean,
                       const Tensor& x_noisy, ConvEnergyParams& grad,
                       double scale = 1.0);

}  // namespace dsebm
