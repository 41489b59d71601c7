#include "dsebm/dense_energy.hpp"

#include <cmath>
#include <stdexcept>

#include "dsebm/errors.hpp"
#include "dsebm/numerics.hpp"

namespace dsebm {

std::vector<std::size_t> DenseEnergyParams::hidden_dims() const {
    std::vector<std::size_t> dims;
    dims.reserve(layers.size());
    for (const auto& layer : layers) dims.push_back(layer.weight.shape[1]);
    return dims;
}

void DenseEnergyParams::validate() const {
    if (prior_center.rank() != 1) {
        throw std::invalid_argument("dense params: prior center must be rank 1");
    }
    std::size_t prev = input_dim();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.weight.rank() != 2 || layer.weight.shape[0] != prev) {
            throw std::invalid_argument("dense params: layer " + std::to_string(l) +
                                        " weight shape " + shape_string(layer.weight.shape) +
                                        " does not chain from width " + std::to_string(prev));
        }
        require_shape(layer.bias, {layer.weight.shape[1]}, "dense layer bias");
        prev = layer.weight.shape[1];
    }
}

std::vector<Tensor*> DenseEnergyParams::tensors() {
    std::vector<Tensor*> out;
    for (auto& layer : layers) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    out.push_back(&prior_center);
    return out;
}

std::vector<const Tensor*> DenseEnergyParams::tensors() const {
    std::vector<const Tensor*> out;
    for (const auto& layer : layers) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    out.push_back(&prior_center);
    return out;
}

DenseEnergyParams DenseEnergyParams::zeros_like(const DenseEnergyParams& other) {
    DenseEnergyParams out;
    out.layers.reserve(other.layers.size());
    for (const auto& layer : other.layers) {
        out.layers.push_back({Tensor::zeros(layer.weight.shape), Tensor::zeros(layer.bias.shape)});
    }
    out.prior_center = Tensor::zeros(other.prior_center.shape);
    return out;
}

DenseEnergyParams make_dense_params(std::size_t input_dim,
                                    const std::vector<std::size_t>& hidden_dims,
                                    RngStream& rng) {
    if (hidden_dims.empty()) {
        throw std::invalid_argument("make_dense_params: at least one hidden layer required");
    }
    DenseEnergyParams params;
    params.prior_center = Tensor::zeros({input_dim});
    std::size_t prev = input_dim;
    for (std::size_t width : hidden_dims) {
        DenseLayerParams layer{Tensor::zeros({prev, width}), Tensor::zeros({width})};
        const double bound = std::sqrt(6.0 / static_cast<double>(prev + width));
        for (double& v : layer.weight.data) v = bound * (2.0 * rng.next_uniform01() - 1.0);
        params.layers.push_back(std::move(layer));
        prev = width;
    }
    return params;
}

DenseForward dense_forward(const DenseEnergyParams& params, const Tensor& x) {
    params.validate();
    require_shape(x, {params.input_dim()}, "dense_forward input");

    DenseForward fwd;
    fwd.activations.push_back(x);
    for (const auto& layer : params.layers) {
        Tensor z = matvec_transposed(layer.weight, fwd.activations.back());
        z += layer.bias;
        fwd.preactivations.push_back(z);
        fwd.activations.push_back(softplus(z));
    }

    Tensor centered = x;
    centered -= params.prior_center;
    fwd.energy = 0.5 * squared_norm(centered) - sum(fwd.activations.back());
    return fwd;
}

Tensor dense_score(const DenseEnergyParams& params, const DenseForward& fwd) {
    const std::size_t depth = params.layers.size();
    Tensor carry = Tensor::ones(fwd.activations[depth].shape);
    for (std::size_t l = depth; l-- > 0;) {
        carry = matvec(params.layers[l].weight,
                       hadamard(sigmoid(fwd.preactivations[l]), carry));
    }
    Tensor score = fwd.activations[0];
    score -= params.prior_center;
    score -= carry;
    return score;
}

Tensor dense_score(const DenseEnergyParams& params, const Tensor& x) {
    return dense_score(params, dense_forward(params, x));
}

Tensor dense_reconstruct(const DenseEnergyParams& params, const Tensor& x) {
    Tensor out = x;
    out -= dense_score(params, x);
    return out;
}

double dense_param_grad(const DenseEnergyParams& params, const Tensor& x_clean,
                        const Tensor& x_noisy, DenseEnergyParams& grad,
                        double scale) {
    require_shape(x_clean, {params.input_dim()}, "dense_param_grad clean input");

    const std::size_t depth = params.layers.size();
    DenseForward fwd = dense_forward(params, x_noisy);

    // Gate vectors s_l = sigmoid(z_l) and the score-backward chain
    // u_L = 1, v_l = s_l .* u_l, u_{l-1} = W_l v_l; reconstruction is
    // f = prior_center + u_0.
    std::vector<Tensor> gates(depth);
    for (std::size_t l = 0; l < depth; ++l) gates[l] = sigmoid(fwd.preactivations[l]);

    std::vector<Tensor> u(depth + 1), v(depth);
    u[depth] = Tensor::ones(fwd.activations[depth].shape);
    for (std::size_t l = depth; l-- > 0;) {
        v[l] = hadamard(gates[l], u[l + 1]);
        u[l] = matvec(params.layers[l].weight, v[l]);
    }

    Tensor residual = params.prior_center;
    residual += u[0];
    residual -= x_clean;  // f(x_noisy) - x_clean
    const double loss = 0.5 * squared_norm(residual);
    if (!std::isfinite(loss)) {
        throw NumericError("dense_param_grad: non-finite reconstruction loss");
    }

    Tensor seed = residual;
    seed *= scale;

    // Adjoint of the reconstruction output.
    grad.prior_center += seed;

    // Sweep the score-backward chain upward: from u_{l-1} = W_l v_l obtain
    // the weight contribution and the gate adjoints.
    std::vector<Tensor> gate_adjoint(depth);
    Tensor u_bar = seed;  // adjoint of u_0
    for (std::size_t l = 0; l < depth; ++l) {
        add_outer(grad.layers[l].weight, u_bar, v[l]);
        Tensor v_bar = matvec_transposed(params.layers[l].weight, u_bar);
        gate_adjoint[l] = hadamard(u[l + 1], v_bar);
        if (l + 1 < depth) u_bar = hadamard(gates[l], v_bar);  // u_L is constant
    }

    // Sweep the forward chain downward: z_l collects sigma'(z_l) from the
    // gate use and sigma(z_l) from the activation use of the layer above.
    Tensor h_bar;  // adjoint of h_l flowing down; empty means zero
    for (std::size_t l = depth; l-- > 0;) {
        Tensor z_bar = Tensor::zeros(fwd.preactivations[l].shape);
        for (std::size_t j = 0; j < z_bar.numel(); ++j) {
            const double s = gates[l].data[j];
            double acc = s * (1.0 - s) * gate_adjoint[l].data[j];
            if (h_bar.numel() > 0) acc += s * h_bar.data[j];
            z_bar.data[j] = acc;
        }
        grad.layers[l].bias += z_bar;
        add_outer(grad.layers[l].weight, fwd.activations[l], z_bar);
        if (l > 0) h_bar = matvec(params.layers[l].weight, z_bar);
    }
    return loss;
}

}  // namespace dsebm
