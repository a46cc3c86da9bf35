#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latentseq/autodiff.hpp"
#include "latentseq/parameters.hpp"
#include "latentseq/rng.hpp"

namespace latentseq {

// One entry per batch row; 1 marks a valid step.
using StepMask = std::vector<std::uint8_t>;

// Single-layer LSTM cell. Gate blocks are laid out as [input, forget, cell, output]
// along the 4*hidden axis of both weight matrices and the bias.
template <std::floating_point Real>
struct LstmCell {
    ad::Tensor<Real> input_weights;   // [input_size, 4H]
    ad::Tensor<Real> hidden_weights;  // [H, 4H]
    ad::Tensor<Real> bias;            // [4H]
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;

    // Uniform(-k, k) with k = 1/sqrt(hidden), forget-gate bias set to +1.
    static LstmCell create(ParameterSet<Real>& params, const std::string& prefix, std::size_t input_size,
                           std::size_t hidden_size, Rng& rng);
};

template <std::floating_point Real>
struct LstmState {
    ad::Tensor<Real> h;
    ad::Tensor<Real> c;
};

template <std::floating_point Real>
LstmState<Real> lstm_step(const LstmCell<Real>& cell, const ad::Tensor<Real>& input, const LstmState<Real>& prev);

// lstm_step on concat(input, latent); rows with mask 0 carry prev through unchanged.
// An undefined latent means the cell reads the input alone.
template <std::floating_point Real>
LstmState<Real> forward_step(const LstmCell<Real>& cell, const ad::Tensor<Real>& input,
                             const ad::Tensor<Real>& latent, const LstmState<Real>& prev, const StepMask& mask);

// h[0], c[0] are the initial state; h[t+1] follows step t. Length T+1.
template <std::floating_point Real>
struct ForwardStatePath {
    std::vector<ad::Tensor<Real>> h;
    std::vector<ad::Tensor<Real>> c;
};

// b[p] summarizes positions p+1..N-1; b[N-1] is the terminal initial state.
template <std::floating_point Real>
struct BackwardStatePath {
    std::vector<ad::Tensor<Real>> b;
    std::vector<ad::Tensor<Real>> c;
};

// latents is either empty (unconditioned unroll) or holds one tensor per step.
template <std::floating_point Real>
ForwardStatePath<Real> forward_unroll(const LstmCell<Real>& cell, std::span<const ad::Tensor<Real>> inputs,
                                      std::span<const ad::Tensor<Real>> latents, std::span<const StepMask> masks,
                                      const LstmState<Real>& initial);

// Right-to-left: b[p] = f(x[p+1], b[p+1]) when position p+1 is valid, else b[p+1].
// masks[p] marks validity of position p.
template <std::floating_point Real>
BackwardStatePath<Real> backward_unroll(const LstmCell<Real>& cell, std::span<const ad::Tensor<Real>> inputs,
                                        std::span<const StepMask> masks, const LstmState<Real>& terminal);

}  // namespace latentseq
