#pragma once

#include <cstddef>
#include <vector>

#include "dsebm/tensor.hpp"

namespace dsebm {

struct DenseLayerParams {
    Tensor weight;  // (K_prev x K)
    Tensor bias;    // (K)
};

/// L-layer fully connected energy model over vectors in R^d.
/// energy(x) = 0.5*||x - prior_center||^2 - sum_j h_{L,j}
/// with h_0 = x and h_l = softplus(W_l^T h_{l-1} + b_l).
struct DenseEnergyParams {
    std::vector<DenseLayerParams> layers;
    Tensor prior_center;  // (d)

    std::size_t input_dim() const { return prior_center.shape[0]; }
    std::vector<std::size_t> hidden_dims() const;
    void validate() const;

    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    static DenseEnergyParams zeros_like(const DenseEnergyParams& other);
};

/// Random initialization: weights uniform in +-sqrt(6/(fan_in+fan_out)),
/// biases and prior center zero (the trainer recenters the prior on the
/// training mean before descending).
DenseEnergyParams make_dense_params(std::size_t input_dim,
                                    const std::vector<std::size_t>& hidden_dims,
                                    RngStream& rng);

struct DenseForward {
    double energy = 0.0;
    std::vector<Tensor> activations;     // h_0..h_L
    std::vector<Tensor> preactivations;  // z_1..z_L
};

DenseForward dense_forward(const DenseEnergyParams& params, const Tensor& x);

/// Input gradient of the energy, reusing a forward cache:
/// grad = (x - prior_center) - u_0 with u_L = 1 and
/// u_{l-1} = W_l (sigmoid(z_l) .* u_l).
Tensor dense_score(const DenseEnergyParams& params, const DenseForward& fwd);
Tensor dense_score(const DenseEnergyParams& params, const Tensor& x);

/// Reconstruction x - dense_score(x). At L=1 this is exactly
/// W sigmoid(W^T x + b) + prior_center.
Tensor dense_reconstruct(const DenseEnergyParams& params, const Tensor& x);

/// Accumulates into `grad` the gradient of 0.5*||x_clean - f(x_noisy)||^2
/// with respect to every parameter (reverse accumulation through the whole
/// reconstruction graph, scaled by `scale`). Returns the loss value.
double dense_param_grad(const DenseEnergyParams& params, const Tensor& x_clean,
                        const Tensor& x_noisy, DenseEnergyParams& grad,
                        double scale = 1.0);

}  // namespace dsebm
