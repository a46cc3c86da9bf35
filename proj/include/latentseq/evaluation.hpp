#pragma once

#include <cstddef>
#include <cstdint>

#include "latentseq/data.hpp"
#include "latentseq/model.hpp"

namespace latentseq {

struct EvalOptions {
    std::size_t iwae_samples = 25;  // 0 skips the importance-weighted bound
    std::size_t batch_size = 64;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::size_t max_length = 0;  // 0: full length
};

// Bounds are mean nats per sequence, in the units of the (normalized) data.
// Perplexities are filled in for token data only: exp(-total bound / predicted tokens).
struct EvalResult {
    std::size_t sequences = 0;
    std::size_t predicted_steps = 0;
    double elbo = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
    double iwae = 0.0;
    std::size_t iwae_samples = 0;
    double elbo_perplexity = 0.0;
    double iwae_perplexity = 0.0;
};

// The ELBO uses the analytic KL and one posterior sample per step. Batch i draws
// its noise from a seed derived from (seed, i); the ELBO shares replica 0's noise.
template <std::floating_point Real>
EvalResult evaluate(const SequenceModel<Real>& model, const Dataset& data, const EvalOptions& options);

std::uint64_t batch_seed(std::uint64_t seed, std::size_t batch_index);

}  // namespace latentseq
