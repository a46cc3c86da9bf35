#include "latentseq/interpolation.hpp"

#include <algorithm>
#include <stdexcept>

namespace latentseq {

LatentEncoding pad_encoding(const LatentEncoding& encoding, std::size_t steps) {
    if (encoding.steps() == 0) throw std::invalid_argument("pad_encoding: empty encoding");
    LatentEncoding out = encoding;
    const std::size_t d = encoding.z_dim;
    while (out.steps() < steps) {
        out.values.insert(out.values.end(), encoding.values.end() - static_cast<std::ptrdiff_t>(d),
                          encoding.values.end());
    }
    return out;
}

LatentEncoding blend(const LatentEncoding& from, const LatentEncoding& to, double a) {
    if (from.z_dim != to.z_dim) throw std::invalid_argument("blend: z_dim mismatch");
    const std::size_t steps = std::max(from.steps(), to.steps());
    const auto x = pad_encoding(from, steps);
    const auto y = pad_encoding(to, steps);
    LatentEncoding out;
    out.z_dim = from.z_dim;
    out.values.resize(x.values.size());
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = (1.0 - a) * x.values[i] + a * y.values[i];
    return out;
}

template <std::floating_point Real>
std::vector<InterpolationStep> interpolate_latents(const SequenceModel<Real>& model, const Sequence& from,
                                                   const Sequence& to, std::size_t steps, Decode decode,
                                                   std::size_t max_length, Rng& rng) {
    if (steps < 1) throw std::invalid_argument("interpolate_latents: steps must be >= 1");
    const auto za = encode_posterior_means(model, from);
    const auto zb = encode_posterior_means(model, to);
    std::vector<InterpolationStep> out;
    for (std::size_t i = 0; i <= steps; ++i) {
        // The endpoints are set exactly rather than computed as i / steps.
        const double a = i == steps ? 1.0 : static_cast<double>(i) / static_cast<double>(steps);
        out.push_back({a, decode_latents(model, blend(za, zb, a), from, max_length, decode, rng)});
    }
    return out;
}

template std::vector<InterpolationStep> interpolate_latents<float>(const SequenceModel<float>&, const Sequence&,
                                                                   const Sequence&, std::size_t, Decode, std::size_t,
                                                                   Rng&);
template std::vector<InterpolationStep> interpolate_latents<double>(const SequenceModel<double>&, const Sequence&,
                                                                    const Sequence&, std::size_t, Decode, std::size_t,
                                                                    Rng&);

}  // namespace latentseq
