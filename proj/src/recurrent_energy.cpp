#include "dsebm/recurrent_energy.hpp"

#include <cmath>
#include <stdexcept>

#include "dsebm/errors.hpp"
#include "dsebm/numerics.hpp"

namespace dsebm {

void Sequence::validate() const {
    if (steps.empty()) throw std::invalid_argument("sequence must have length >= 1");
    const std::size_t d = steps[0].shape.empty() ? 0 : steps[0].shape[0];
    for (std::size_t t = 0; t < steps.size(); ++t) {
        if (steps[t].rank() != 1 || steps[t].shape[0] != d) {
            throw std::invalid_argument("sequence step " + std::to_string(t) +
                                        " has shape " + shape_string(steps[t].shape) +
                                        ", expected (" + std::to_string(d) + ")");
        }
    }
}

void RecurrentEnergyParams::validate() const {
    const std::size_t d = step_dim(), ke = ebm_dim(), kr = rnn_dim();
    require_shape(step_weight, {d, ke}, "recurrent step weight");
    require_shape(step_bias, {ke}, "recurrent step bias");
    require_shape(prior_center, {d}, "recurrent prior center");
    require_shape(hidden_hidden, {kr, kr}, "recurrent hidden-hidden weight");
    require_shape(hidden_input, {kr, d}, "recurrent hidden-input weight");
    require_shape(hidden_bias, {kr}, "recurrent hidden bias");
    require_shape(bias_readout, {ke, kr}, "recurrent bias readout");
    require_shape(prior_readout, {d, kr}, "recurrent prior readout");
    require_shape(initial_hidden, {kr}, "recurrent initial hidden state");
}

std::vector<Tensor*> RecurrentEnergyParams::tensors() {
    return {&step_weight, &step_bias, &prior_center, &hidden_hidden, &hidden_input,
            &hidden_bias, &bias_readout, &prior_readout, &initial_hidden};
}

std::vector<const Tensor*> RecurrentEnergyParams::tensors() const {
    return {&step_weight, &step_bias, &prior_center, &hidden_hidden, &hidden_input,
            &hidden_bias, &bias_readout, &prior_readout, &initial_hidden};
}

RecurrentEnergyParams RecurrentEnergyParams::zeros_like(const RecurrentEnergyParams& other) {
    RecurrentEnergyParams out;
    Tensor* dst[] = {&out.step_weight, &out.step_bias, &out.prior_center,
                     &out.hidden_hidden, &out.hidden_input, &out.hidden_bias,
                     &out.bias_readout, &out.prior_readout, &out.initial_hidden};
    auto src = other.tensors();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = Tensor::zeros(src[i]->shape);
    return out;
}

namespace {

Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in,
                    std::size_t fan_out, RngStream& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = bound * (2.0 * rng.next_uniform01() - 1.0);
    return t;
}

}  // namespace

RecurrentEnergyParams make_recurrent_params(std::size_t step_dim, std::size_t ebm_dim,
                                            std::size_t rnn_dim, RngStream& rng) {
    RecurrentEnergyParams p;
    p.step_weight = uniform_init({step_dim, ebm_dim}, step_dim, ebm_dim, rng);
    p.step_bias = Tensor::zeros({ebm_dim});
    p.prior_center = Tensor::zeros({step_dim});
    p.hidden_hidden = uniform_init({rnn_dim, rnn_dim}, rnn_dim, rnn_dim, rng);
    p.hidden_input = uniform_init({rnn_dim, step_dim}, step_dim, rnn_dim, rng);
    p.hidden_bias = Tensor::zeros({rnn_dim});
    p.bias_readout = uniform_init({ebm_dim, rnn_dim}, rnn_dim, ebm_dim, rng);
    p.prior_readout = uniform_init({step_dim, rnn_dim}, rnn_dim, step_dim, rng);
    p.initial_hidden = Tensor::zeros({rnn_dim});
    return p;
}

RecurrentRoll rnn_roll(const RecurrentEnergyParams& params, const Sequence& seq) {
    params.validate();
    seq.validate();
    if (seq.step_dim() != params.step_dim()) {
        throw std::invalid_argument("rnn_roll: sequence dimensionality " +
                                    std::to_string(seq.step_dim()) + " does not match model " +
                                    std::to_string(params.step_dim()));
    }
    const std::size_t steps = seq.length();

    RecurrentRoll roll;
    roll.hidden.push_back(params.initial_hidden);
    // h^T is never consumed (step-t biases read h^{t-1}), so stop early.
    for (std::size_t t = 0; t + 1 < steps; ++t) {
        Tensor pre = matvec(params.hidden_hidden, roll.hidden.back());
        pre += matvec(params.hidden_input, seq.steps[t]);
        pre += params.hidden_bias;
        roll.hidden_pre.push_back(pre);
        roll.hidden.push_back(softplus(pre));
    }
    for (std::size_t t = 0; t < steps; ++t) {
        Tensor b = matvec(params.bias_readout, roll.hidden[t]);
        b += params.step_bias;
        roll.step_biases.push_back(std::move(b));
        Tensor bp = matvec(params.prior_readout, roll.hidden[t]);
        bp += params.prior_center;
        roll.step_prior_centers.push_back(std::move(bp));
    }
    return roll;
}

namespace {

double step_energy(const RecurrentEnergyParams& params, const Tensor& x,
                   const Tensor& bias, const Tensor& prior) {
    Tensor z = matvec_transposed(params.step_weight, x);
    z += bias;
    Tensor centered = x;
    centered -= prior;
    return 0.5 * squared_norm(centered) - sum(softplus(z));
}

Tensor step_score(const RecurrentEnergyParams& params, const Tensor& x,
                  const Tensor& bias, const Tensor& prior) {
    Tensor z = matvec_transposed(params.step_weight, x);
    z += bias;
    Tensor score = x;
    score -= prior;
    score -= matvec(params.step_weight, sigmoid(z));
    return score;
}

}  // namespace

SequenceEnergy seq_energy(const RecurrentEnergyParams& params, const Sequence& seq) {
    RecurrentRoll roll = rnn_roll(params, seq);
    SequenceEnergy result;
    for (std::size_t t = 0; t < seq.length(); ++t) {
        double e = step_energy(params, seq.steps[t], roll.step_biases[t],
                               roll.step_prior_centers[t]);
        result.per_step.push_back(e);
        result.total += e;
    }
    return result;
}

std::vector<Tensor> seq_score(const RecurrentEnergyParams& params, const Sequence& seq) {
    RecurrentRoll roll = rnn_roll(params, seq);
    std::vector<Tensor> scores;
    scores.reserve(seq.length());
    for (std::size_t t = 0; t < seq.length(); ++t) {
        scores.push_back(step_score(params, seq.steps[t], roll.step_biases[t],
                                    roll.step_prior_centers[t]));
    }
    return scores;
}

Sequence seq_reconstruct(const RecurrentEnergyParams& params, const Sequence& seq) {
    std::vector<Tensor> scores = seq_score(params, seq);
    Sequence out = seq;
    for (std::size_t t = 0; t < seq.length(); ++t) out.steps[t] -= scores[t];
    return out;
}

double seq_param_grad(const RecurrentEnergyParams& params, const Sequence& seq_clean,
                      const Sequence& seq_noisy, RecurrentEnergyParams& grad,
                      double scale) {
    seq_clean.validate();
    if (seq_clean.length() != seq_noisy.length() ||
        seq_clean.step_dim() != seq_noisy.step_dim()) {
        throw std::invalid_argument("seq_param_grad: clean/noisy sequences disagree");
    }
    RecurrentRoll roll = rnn_roll(params, seq_noisy);
    const std::size_t steps = seq_noisy.length();

    double loss = 0.0;
    // Adjoints of the consumed hidden states h^0..h^{T-1}.
    std::vector<Tensor> hidden_bar(steps, Tensor::zeros({params.rnn_dim()}));

    for (std::size_t t = 0; t < steps; ++t) {
        const Tensor& y = seq_noisy.steps[t];
        Tensor z = matvec_transposed(params.step_weight, y);
        z += roll.step_biases[t];
        Tensor gate = sigmoid(z);

        Tensor residual = roll.step_prior_centers[t];
        residual += matvec(params.step_weight, gate);
        residual -= seq_clean.steps[t];  // f_t - x_clean^t
        loss += 0.5 * squared_norm(residual);
        residual *= scale;

        // f_t = prior_center_t + W gate
        grad.prior_center += residual;
        add_outer(grad.prior_readout, residual, roll.hidden[t]);
        hidden_bar[t] += matvec_transposed(params.prior_readout, residual);
        add_outer(grad.step_weight, residual, gate);

        // gate = sigmoid(W^T y + bias_t)
        Tensor gate_bar = matvec_transposed(params.step_weight, residual);
        Tensor z_bar = Tensor::zeros(z.shape);
        for (std::size_t j = 0; j < z.numel(); ++j) {
            z_bar.data[j] = gate.data[j] * (1.0 - gate.data[j]) * gate_bar.data[j];
        }
        add_outer(grad.step_weight, y, z_bar);
        grad.step_bias += z_bar;
        add_outer(grad.bias_readout, z_bar, roll.hidden[t]);
        hidden_bar[t] += matvec_transposed(params.bias_readout, z_bar);
    }
    if (!std::isfinite(loss)) {
        throw NumericError("seq_param_grad: non-finite reconstruction loss");
    }

    // Backpropagation through time over h^t = softplus(pre^t).
    for (std::size_t t = steps; t-- > 1;) {
        const Tensor& pre = roll.hidden_pre[t - 1];
        Tensor pre_bar = Tensor::zeros(pre.shape);
        for (std::size_t j = 0; j < pre.numel(); ++j) {
            pre_bar.data[j] = sigmoid(pre.data[j]) * hidden_bar[t].data[j];
        }
        add_outer(grad.hidden_hidden, pre_bar, roll.hidden[t - 1]);
        add_outer(grad.hidden_input, pre_bar, seq_noisy.steps[t - 1]);
        grad.hidden_bias += pre_bar;
        hidden_bar[t - 1] += matvec_transposed(params.hidden_hidden, pre_bar);
    }
    grad.initial_hidden += hidden_bar[0];
    return loss;
}

}  // namespace dsebm
