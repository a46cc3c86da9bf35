#include "latentseq/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace latentseq {

std::uint64_t batch_seed(std::uint64_t seed, std::size_t batch_index) {
    // splitmix64 finalizer over the pair
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(batch_index) + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

template <std::floating_point Real>
EvalResult evaluate(const SequenceModel<Real>& model, const Dataset& data, const EvalOptions& options) {
    if (options.batch_size < 1) throw std::invalid_argument("evaluate: batch_size must be >= 1");
    ad::NoGradGuard no_grad;
    EvalResult result;
    result.iwae_samples = options.iwae_samples;
    double elbo_sum = 0.0, rec_sum = 0.0, kl_sum = 0.0, iwae_sum = 0.0;
    const std::size_t z_dim = model.config().z_dim;

    std::vector<std::size_t> indices;
    for (std::size_t start = 0, batch_index = 0; start < data.size(); start += options.batch_size, ++batch_index) {
        const std::size_t end = std::min(data.size(), start + options.batch_size);
        indices.resize(end - start);
        std::iota(indices.begin(), indices.end(), start);
        const auto batch = make_batch(data, indices, options.max_length);
        const std::uint64_t seed = batch_seed(options.seed, batch_index);

        Rng rng = make_rng(seed, Stream::eval_noise, 0);
        const auto noise = standard_normal_noise<Real>(rng, batch.steps(), batch.batch_size, z_dim);
        const auto state = unroll_posterior(model, batch, noise, false);
        const auto loss = compute_loss(state, LossWeights{0.0, 0.0, 1.0});
        const double n = static_cast<double>(batch.batch_size);
        elbo_sum += std::accumulate(loss.sequence_elbo.begin(), loss.sequence_elbo.end(), 0.0);
        rec_sum += loss.reconstruction * n;
        kl_sum += loss.kl * n;
        result.predicted_steps += loss.valid_steps;

        if (options.iwae_samples > 0) {
            const auto bound = iwae_bound(model, batch, options.iwae_samples, seed, options.threads);
            iwae_sum += std::accumulate(bound.begin(), bound.end(), 0.0);
        }
        result.sequences += batch.batch_size;
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double count = result.sequences > 0 ? static_cast<double>(result.sequences) : nan;
    result.elbo = elbo_sum / count;
    result.reconstruction = rec_sum / count;
    result.kl = kl_sum / count;
    result.iwae = options.iwae_samples > 0 ? iwae_sum / count : nan;
    result.elbo_perplexity = nan;
    result.iwae_perplexity = nan;
    if (model.config().kind == ObservationKind::tokens && result.predicted_steps > 0) {
        const double steps = static_cast<double>(result.predicted_steps);
        result.elbo_perplexity = std::exp(-elbo_sum / steps);
        if (options.iwae_samples > 0) result.iwae_perplexity = std::exp(-iwae_sum / steps);
    }
    return result;
}

template EvalResult evaluate<float>(const SequenceModel<float>&, const Dataset&, const EvalOptions&);
template EvalResult evaluate<double>(const SequenceModel<double>&, const Dataset&, const EvalOptions&);

}  // namespace latentseq
