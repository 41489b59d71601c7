#include "dsebm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dsebm/conv_energy.hpp"
#include "dsebm/dense_energy.hpp"
#include "dsebm/numerics.hpp"
#include "dsebm/recurrent_energy.hpp"

namespace dsebm {

double max_rel_error(const Tensor& analytic, const Tensor& numeric) {
    require_shape(numeric, analytic.shape, "max_rel_error");
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.numel(); ++i) {
        const double a = analytic.data[i], n = numeric.data[i];
        const double denom = std::max({1.0, std::abs(a), std::abs(n)});
        worst = std::max(worst, std::abs(a - n) / denom);
    }
    return worst;
}

bool GradCheckReport::all_pass() const {
    for (const auto& e : entries) {
        if (!e.pass) return false;
    }
    return true;
}

namespace {

constexpr double kStep = 1e-5;

template <typename Params>
void randomize(Params& params, RngStream& rng, double scale) {
    for (Tensor* t : params.tensors()) {
        for (double& v : t->data) v = scale * rng.next_gaussian();
    }
}

/// Central differences of `loss` with respect to every parameter tensor,
/// compared against the analytic record. Returns the worst deviation.
template <typename Params, typename LossFn>
double param_fd_error(const Params& params, const Params& analytic, LossFn&& loss) {
    Params probe = params;
    auto probe_tensors = probe.tensors();
    auto analytic_tensors = analytic.tensors();
    double worst = 0.0;
    for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
        Tensor numeric = Tensor::zeros(probe_tensors[t]->shape);
        for (std::size_t i = 0; i < probe_tensors[t]->numel(); ++i) {
            const double saved = probe_tensors[t]->data[i];
            probe_tensors[t]->data[i] = saved + kStep;
            const double above = loss(probe);
            probe_tensors[t]->data[i] = saved - kStep;
            const double below = loss(probe);
            probe_tensors[t]->data[i] = saved;
            numeric.data[i] = (above - below) / (2.0 * kStep);
        }
        worst = std::max(worst, max_rel_error(*analytic_tensors[t], numeric));
    }
    return worst;
}

double dense_input_suite(RngStream& rng) {
    const std::vector<std::vector<std::size_t>> nets = {
        {4, 3}, {3, 5, 2}, {6, 5, 4, 3}, {10, 8, 4, 6}};
    double worst = 0.0;
    for (const auto& dims : nets) {
        DenseEnergyParams params = make_dense_params(
            dims[0], std::vector<std::size_t>(dims.begin() + 1, dims.end()), rng);
        randomize(params, rng, 0.7);
        for (int trial = 0; trial < 5; ++trial) {
            Tensor x = rng.gaussian_tensor({dims[0]}, 1.0);
            Tensor analytic = dense_score(params, x);
            Tensor numeric = finite_diff_grad(
                [&](const Tensor& p) { return dense_forward(params, p).energy; }, x, kStep);
            worst = std::max(worst, max_rel_error(analytic, numeric));
        }
    }
    return worst;
}

double dense_param_suite(RngStream& rng) {
    const std::vector<std::vector<std::size_t>> nets = {{4, 3}, {3, 5, 2}, {6, 4, 3, 2}};
    double worst = 0.0;
    for (const auto& dims : nets) {
        DenseEnergyParams params = make_dense_params(
            dims[0], std::vector<std::size_t>(dims.begin() + 1, dims.end()), rng);
        randomize(params, rng, 0.7);
        Tensor clean = rng.gaussian_tensor({dims[0]}, 1.0);
        Tensor noisy = rng.gaussian_tensor({dims[0]}, 1.0);
        DenseEnergyParams analytic = DenseEnergyParams::zeros_like(params);
        dense_param_grad(params, clean, noisy, analytic);
        worst = std::max(worst, param_fd_error(params, analytic, [&](const DenseEnergyParams& p) {
            Tensor residual = dense_reconstruct(p, noisy);
            residual -= clean;
            return 0.5 * squared_norm(residual);
        }));
    }
    return worst;
}

double recurrent_input_suite(RngStream& rng) {
    double worst = 0.0;
    for (const auto& [d, ke, kr, steps] :
         std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>>{
             {3, 4, 3, 3}, {4, 3, 2, 4}, {2, 5, 4, 1}}) {
        RecurrentEnergyParams params = make_recurrent_params(d, ke, kr, rng);
        randomize(params, rng, 0.6);
        Sequence seq;
        for (std::size_t t = 0; t < steps; ++t) seq.steps.push_back(rng.gaussian_tensor({d}, 1.0));

        RecurrentRoll roll = rnn_roll(params, seq);
        std::vector<Tensor> scores = seq_score(params, seq);
        for (std::size_t t = 0; t < steps; ++t) {
            // The decision rule holds the step parameters fixed, so the
            // oracle differentiates the step energy with frozen biases.
            Tensor numeric = finite_diff_grad(
                [&](const Tensor& x) {
                    Tensor z = matvec_transposed(params.step_weight, x);
                    z += roll.step_biases[t];
                    Tensor centered = x;
                    centered -= roll.step_prior_centers[t];
                    return 0.5 * squared_norm(centered) - sum(softplus(z));
                },
                seq.steps[t], kStep);
            worst = std::max(worst, max_rel_error(scores[t], numeric));
        }
    }
    return worst;
}

double recurrent_param_suite(RngStream& rng) {
    double worst = 0.0;
    for (const auto& [d, ke, kr, steps] :
         std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>>{
             {3, 4, 3, 3}, {4, 3, 4, 4}}) {
        RecurrentEnergyParams params = make_recurrent_params(d, ke, kr, rng);
        randomize(params, rng, 0.6);
        Sequence clean, noisy;
        for (std::size_t t = 0; t < steps; ++t) {
            clean.steps.push_back(rng.gaussian_tensor({d}, 1.0));
            noisy.steps.push_back(rng.gaussian_tensor({d}, 1.0));
        }
        RecurrentEnergyParams analytic = RecurrentEnergyParams::zeros_like(params);
        seq_param_grad(params, clean, noisy, analytic);
        worst = std::max(worst,
                         param_fd_error(params, analytic, [&](const RecurrentEnergyParams& p) {
                             Sequence rec = seq_reconstruct(p, noisy);
                             double loss = 0.0;
                             for (std::size_t t = 0; t < steps; ++t) {
                                 Tensor residual = rec.steps[t];
                                 residual -= clean.steps[t];
                                 loss += 0.5 * squared_norm(residual);
                             }
                             return loss;
                         }));
    }
    return worst;
}

ConvFilterLayer random_conv_layer(std::size_t out_channels, std::size_t in_channels,
                                  std::size_t kernel, RngStream& rng) {
    return ConvFilterLayer{rng.gaussian_tensor({out_channels, in_channels, kernel, kernel}, 0.5),
                           rng.gaussian_tensor({out_channels}, 0.3)};
}

FlatDenseLayer random_flat_dense(std::size_t in, std::size_t out, RngStream& rng) {
    return FlatDenseLayer{rng.gaussian_tensor({in, out}, 0.5), rng.gaussian_tensor({out}, 0.3)};
}

std::vector<ConvEnergyParams> conv_instances(RngStream& rng) {
    std::vector<ConvEnergyParams> instances;
    {
        // conv 3x3, pool 2, dense: 1x6x6 -> 2x4x4 -> 2x2x2 -> 3
        ConvEnergyParams p;
        p.prior_center = rng.gaussian_tensor({1, 6, 6}, 0.5);
        p.layers.push_back(random_conv_layer(2, 1, 3, rng));
        p.layers.push_back(MaxPoolLayer{2});
        p.layers.push_back(random_flat_dense(8, 3, rng));
        instances.push_back(std::move(p));
    }
    {
        // two conv layers and a pool: 2x8x8 -> 2x6x6 -> 1x4x4 -> 1x2x2
        ConvEnergyParams p;
        p.prior_center = rng.gaussian_tensor({2, 8, 8}, 0.5);
        p.layers.push_back(random_conv_layer(2, 2, 3, rng));
        p.layers.push_back(random_conv_layer(1, 2, 3, rng));
        p.layers.push_back(MaxPoolLayer{2});
        instances.push_back(std::move(p));
    }
    {
        // conv only: 1x5x5 -> 2x4x4
        ConvEnergyParams p;
        p.prior_center = rng.gaussian_tensor({1, 5, 5}, 0.5);
        p.layers.push_back(random_conv_layer(2, 1, 2, rng));
        instances.push_back(std::move(p));
    }
    {
        // dense only on the flattened image: 1x4x4 -> 5
        ConvEnergyParams p;
        p.prior_center = rng.gaussian_tensor({1, 4, 4}, 0.5);
        p.layers.push_back(random_flat_dense(16, 5, rng));
        instances.push_back(std::move(p));
    }
    return instances;
}

double conv_input_suite(RngStream& rng) {
    double worst = 0.0;
    for (const ConvEnergyParams& params : conv_instances(rng)) {
        for (int trial = 0; trial < 3; ++trial) {
            Tensor x = rng.gaussian_tensor(params.input_shape(), 1.0);
            Tensor analytic = conv_score(params, x);
            Tensor numeric = finite_diff_grad(
                [&](const Tensor& p) { return conv_energy(params, p).energy; }, x, kStep);
            worst = std::max(worst, max_rel_error(analytic, numeric));
        }
    }
    return worst;
}

double conv_param_suite(RngStream& rng) {
    double worst = 0.0;
    for (const ConvEnergyParams& params : conv_instances(rng)) {
        Tensor clean = rng.gaussian_tensor(params.input_shape(), 1.0);
        Tensor noisy = rng.gaussian_tensor(params.input_shape(), 1.0);
        ConvEnergyParams analytic = ConvEnergyParams::zeros_like(params);
        conv_param_grad(params, clean, noisy, analytic);
        worst = std::max(worst, param_fd_error(params, analytic, [&](const ConvEnergyParams& p) {
            Tensor residual = conv_reconstruct(p, noisy);
            residual -= clean;
            return 0.5 * squared_norm(residual);
        }));
    }
    return worst;
}

}  // namespace

GradCheckReport run_gradient_checks(std::uint64_t seed) {
    GradCheckReport report;
    auto add = [&report](std::string name, double err, double tol) {
        report.entries.push_back({std::move(name), err, tol, err <= tol});
    };
    {
        RngStream rng(seed);
        add("dense/input-gradient", dense_input_suite(rng), kInputGradTolerance);
    }
    {
        RngStream rng(seed + 1);
        add("dense/param-gradient", dense_param_suite(rng), kParamGradTolerance);
    }
    {
        RngStream rng(seed + 2);
        add("recurrent/input-gradient", recurrent_input_suite(rng), kInputGradTolerance);
    }
    {
        RngStream rng(seed + 3);
        add("recurrent/param-gradient", recurrent_param_suite(rng), kParamGradTolerance);
    }
    {
        RngStream rng(seed + 4);
        add("conv/input-gradient", conv_input_suite(rng), kInputGradTolerance);
    }
    {
        RngStream rng(seed + 5);
        add("conv/param-gradient", conv_param_suite(rng), kParamGradTolerance);
    }
    return report;
}

}  // namespace dsebm
