#pragma once

// Stochastic recurrent sequence model.
//
//   forward state   h[t+1] = LSTM(concat(x[t], z[t]), h[t])
//   prior           p(z[t] | h[t])          = N(prior_net(h[t]))
//   backward state  b[t]   = LSTM_back(x[t+1], b[t+1])
//   posterior       q(z[t] | h[t], b[t])    = N(posterior_net(h[t], b[t]))
//   output          p(x[t+1] | h[t+1])        from output_net(h[t+1]); never reads z[t] directly
//   auxiliary       p(b[t] | z[t])          = N(auxiliary_net(z[t]))
//   backward output p(x[t] | b[t])            from backward_output_net(b[t])
//
// Indices are 0-based positions; a sequence of N positions has N-1 prediction steps.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latentseq/autodiff.hpp"
#include "latentseq/data.hpp"
#include "latentseq/distributions.hpp"
#include "latentseq/parameters.hpp"
#include "latentseq/recurrent.hpp"
#include "latentseq/rng.hpp"

namespace latentseq {

inline constexpr double kHeadLeakiness = 1.0 / 3.0;
inline constexpr double kHeadClip = 3.0;

struct ModelConfig {
    ObservationKind kind = ObservationKind::frames;
    std::size_t observation_width = 1;  // frame width, or vocabulary size for tokens
    std::size_t embed_dim = 16;         // tokens only
    std::size_t hidden_size = 32;
    std::size_t backward_hidden_size = 32;
    std::size_t z_dim = 4;
    std::size_t head_hidden = 32;
    std::int32_t end_id = -1;  // tokens only

    void validate() const;
};

// affine -> leaky_relu(1/3) -> clip(+-3) -> affine
template <std::floating_point Real>
struct HeadNet {
    ad::Tensor<Real> hidden_weights;  // [in, hidden]
    ad::Tensor<Real> hidden_bias;     // [hidden]
    ad::Tensor<Real> output_weights;  // [hidden, out]
    ad::Tensor<Real> output_bias;     // [out]

    static HeadNet create(ParameterSet<Real>& params, const std::string& prefix, std::size_t input_size,
                          std::size_t hidden_size, std::size_t output_size, Rng& rng);

    ad::Tensor<Real> operator()(const ad::Tensor<Real>& x) const;
};

template <std::floating_point Real>
class SequenceModel {
public:
    SequenceModel(const ModelConfig& config, std::uint64_t init_seed);
    SequenceModel(const SequenceModel&) = delete;
    SequenceModel& operator=(const SequenceModel&) = delete;
    SequenceModel(SequenceModel&&) noexcept = default;
    SequenceModel& operator=(SequenceModel&&) noexcept = default;

    [[nodiscard]] const ModelConfig& config() const { return config_; }
    [[nodiscard]] ParameterSet<Real>& parameters() { return params_; }
    [[nodiscard]] const ParameterSet<Real>& parameters() const { return params_; }

    // Parameters of the right-to-left recognition LSTM (its cell, embedding and terminal state).
    [[nodiscard]] static bool is_backward_network_parameter(std::string_view name);

    [[nodiscard]] std::size_t input_width() const;
    // Width of the output head: 2F for frames, F for bits, vocabulary size for tokens.
    [[nodiscard]] std::size_t output_width() const;

    [[nodiscard]] ad::Tensor<Real> forward_input(const SequenceBatch& batch, std::size_t position) const;
    [[nodiscard]] ad::Tensor<Real> backward_input(const SequenceBatch& batch, std::size_t position) const;
    [[nodiscard]] LstmState<Real> initial_forward_state(std::size_t rows) const;
    [[nodiscard]] LstmState<Real> initial_backward_state(std::size_t rows) const;

    // Sum over the event axis of log p(target at `position` | head output).
    [[nodiscard]] ad::Tensor<Real> observation_log_prob(const ad::Tensor<Real>& head_output,
                                                        const SequenceBatch& batch, std::size_t position) const;

    LstmCell<Real> forward_cell;
    LstmCell<Real> backward_cell;
    HeadNet<Real> prior_net;
    HeadNet<Real> posterior_net;
    HeadNet<Real> output_net;
    HeadNet<Real> auxiliary_net;
    HeadNet<Real> backward_output_net;
    ad::Tensor<Real> forward_h0, forward_c0;
    ad::Tensor<Real> backward_h0, backward_c0;
    ad::Tensor<Real> forward_embedding, backward_embedding;  // tokens only

private:
    ModelConfig config_;
    ParameterSet<Real> params_;
};

// Copies parameter values between precisions (configs must match).
template <std::floating_point To, std::floating_point From>
SequenceModel<To> convert_model(const SequenceModel<From>& source);

template <std::floating_point Real>
struct UnrolledState {
    std::size_t steps = 0;
    ForwardStatePath<Real> forward;    // h[0..T]
    BackwardStatePath<Real> backward;  // b[0..N-1]
    std::vector<StepMask> step_masks;  // step t valid iff position t+1 valid
    std::vector<ad::Tensor<Real>> z;
    std::vector<DiagGaussian<Real>> prior;
    std::vector<DiagGaussian<Real>> posterior;
    std::vector<ad::Tensor<Real>> output_params;
    std::vector<DiagGaussian<Real>> auxiliary;
    std::vector<ad::Tensor<Real>> backward_output_params;
    // Per-step [B] terms, unmasked.
    std::vector<ad::Tensor<Real>> rec;  // log p(x[t+1] | h[t+1])
    std::vector<ad::Tensor<Real>> kl;   // KL(q(z[t]) || p(z[t]))
    std::vector<ad::Tensor<Real>> aux;  // log p(b[t] | z[t]) with b[t] held constant
    std::vector<ad::Tensor<Real>> bwd;  // log p(x[t] | b[t])
};

// Standard normal draws, one [rows, dim] array per step.
template <std::floating_point Real>
std::vector<ad::Array<Real>> standard_normal_noise(Rng& rng, std::size_t steps, std::size_t rows, std::size_t dim);

// With isolate_auxiliary set and gradients enabled, the auxiliary term is computed on
// a second forward track whose posteriors read stop_gradient(b), so it has exactly
// zero gradient with respect to the backward network. Clearing it skips that track.
template <std::floating_point Real>
UnrolledState<Real> unroll_posterior(const SequenceModel<Real>& model, const SequenceBatch& batch,
                                     const std::vector<ad::Array<Real>>& noise, bool isolate_auxiliary = true);

struct LossWeights {
    double alpha = 0.0;      // auxiliary backward-state reconstruction
    double beta = 0.0;       // backward-network output prediction
    double kl_weight = 1.0;  // annealing temperature on the KL term
};

// Masked sums over valid steps, averaged over the batch (nats per sequence).
// objective = -(rec + alpha*aux + beta*bwd - kl_weight*kl), the quantity minimized.
template <std::floating_point Real>
struct LossBreakdown {
    double reconstruction = 0.0;
    double kl = 0.0;
    double aux = 0.0;
    double backward_recon = 0.0;
    double weighted_total = 0.0;
    // Per valid step averages.
    double reconstruction_per_step = 0.0;
    double kl_per_step = 0.0;
    double aux_per_step = 0.0;
    double backward_recon_per_step = 0.0;
    std::size_t valid_steps = 0;
    std::size_t sequences = 0;
    // Per-sequence ELBO, rec - kl, in nats.
    std::vector<double> sequence_elbo;
    ad::Tensor<Real> objective;  // scalar, differentiable
};

template <std::floating_point Real>
LossBreakdown<Real> compute_loss(const UnrolledState<Real>& state, const LossWeights& weights);

// Per-sequence log importance weight: sum over valid steps of
// log p(x[t+1] | .) + log p(z[t] | h[t]) - log q(z[t] | h[t], b[t]).
template <std::floating_point Real>
std::vector<double> log_importance_weights(const SequenceModel<Real>& model, const SequenceBatch& batch,
                                           const std::vector<ad::Array<Real>>& noise);

// Max-shifted log-mean-exp across replicas; weights[k][b].
std::vector<double> log_mean_exp(const std::vector<std::vector<double>>& weights);

// Importance-weighted bound per sequence with `samples` posterior replicas. Replica k
// draws its noise from (seed, eval_noise, k); replicas may run on up to `threads` threads.
template <std::floating_point Real>
std::vector<double> iwae_bound(const SequenceModel<Real>& model, const SequenceBatch& batch, std::size_t samples,
                               std::uint64_t seed, std::size_t threads = 1);

enum class Decode { argmax, sample };

struct GenerationOptions {
    std::size_t steps = 16;           // new positions to generate after the prefix
    Decode decode = Decode::sample;
    double latent_noise_scale = 1.0;  // 0 uses prior means
};

// Ancestral sampling from the prior. Each row of `prefix` is fed as given; z at every
// step comes from the prior. Token rows stop after emitting the end id.
template <std::floating_point Real>
std::vector<Sequence> unroll_prior(const SequenceModel<Real>& model, const SequenceBatch& prefix,
                                   const GenerationOptions& options, Rng& rng);

// Per-step latent vectors concatenated in step order.
struct LatentEncoding {
    std::size_t z_dim = 0;
    std::vector<double> values;

    [[nodiscard]] std::size_t steps() const { return z_dim == 0 ? 0 : values.size() / z_dim; }
};

// Posterior means of z for every prediction step of one sequence.
template <std::floating_point Real>
LatentEncoding encode_posterior_means(const SequenceModel<Real>& model, const Sequence& sequence);

// Runs the forward network from the first position of `start` with z fixed to the
// encoding; steps beyond the encoding reuse its final vector. Stops at the end id or
// after max_steps predictions.
template <std::floating_point Real>
Sequence decode_latents(const SequenceModel<Real>& model, const LatentEncoding& encoding, const Sequence& start,
                        std::size_t max_steps, Decode decode, Rng& rng);

}  // namespace latentseq
