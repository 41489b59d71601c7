#pragma once

#include <cstddef>
#include <vector>

#include "dsebm/tensor.hpp"

namespace dsebm {

/// Ordered steps of uniform dimensionality d, length T >= 1.
struct Sequence {
    std::vector<Tensor> steps;

    std::size_t length() const { return steps.size(); }
    std::size_t step_dim() const { return steps.empty() ? 0 : steps[0].shape[0]; }
    void validate() const;
};

/// One-layer step energy with biases driven by an RNN over the earlier
/// steps. The step-t energy is
///   E_t(x) = 0.5*||x - prior_center_t||^2 - sum_j softplus(W_j^T x + bias_t_j)
/// where (bias_t, prior_center_t) are affine in the hidden state that has
/// consumed x^1..x^{t-1} only.
struct RecurrentEnergyParams {
    Tensor step_weight;     // W (d x K_ebm), shared across steps
    Tensor step_bias;       // b (K_ebm)
    Tensor prior_center;    // b' (d)
    Tensor hidden_hidden;   // W_hh (K_rnn x K_rnn)
    Tensor hidden_input;    // W_hx (K_rnn x d)
    Tensor hidden_bias;     // b_h (K_rnn)
    Tensor bias_readout;    // W_bh (K_ebm x K_rnn)
    Tensor prior_readout;   // W_b'h (d x K_rnn)
    Tensor initial_hidden;  // h0 (K_rnn), learned

    std::size_t step_dim() const { return prior_center.shape[0]; }
    std::size_t ebm_dim() const { return step_bias.shape[0]; }
    std::size_t rnn_dim() const { return hidden_bias.shape[0]; }
    void validate() const;

    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    static RecurrentEnergyParams zeros_like(const RecurrentEnergyParams& other);
};

RecurrentEnergyParams make_recurrent_params(std::size_t step_dim, std::size_t ebm_dim,
                                            std::size_t rnn_dim, RngStream& rng);

/// Hidden-state roll over a sequence, producing the per-step bias pair.
/// hidden[t] is the state before consuming step t (hidden[0] = h0), so the
/// step-t parameters never depend on x^t itself.
struct RecurrentRoll {
    std::vector<Tensor> hidden;      // h^0..h^{T-1}
    std::vector<Tensor> hidden_pre;  // RNN preactivations for h^1..h^{T-1}
    std::vector<Tensor> step_biases;        // b^1..b^T
    std::vector<Tensor> step_prior_centers; // b'^1..b'^T
};

RecurrentRoll rnn_roll(const RecurrentEnergyParams& params, const Sequence& seq);

struct SequenceEnergy {
    double total = 0.0;
    std::vector<double> per_step;
};

SequenceEnergy seq_energy(const RecurrentEnergyParams& params, const Sequence& seq);

/// Per-step input gradients of E_t with the step parameters held fixed
/// (the cross-step gradient terms are omitted by construction).
std::vector<Tensor> seq_score(const RecurrentEnergyParams& params, const Sequence& seq);

Sequence seq_reconstruct(const RecurrentEnergyParams& params, const Sequence& seq);

/// Accumulates into `grad` the gradient of
///   sum_t 0.5*||x_clean^t - f_t(seq_noisy)||^2
/// with respect to every parameter. The bias dependence on earlier noisy
/// steps is differentiated through the RNN (backpropagation through time);
/// only the in-step score keeps its parameters frozen. Returns the loss.
double seq_param_grad(const RecurrentEnergyParams& params, const Sequence& seq_clean,
                      const Sequence& seq_noisy, RecurrentEnergyParams& grad,
                      double scale = 1.0);

}  // namespace dsebm
