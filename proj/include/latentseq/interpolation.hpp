#pragma once

#include <cstddef>
#include <vector>

#include "latentseq/data.hpp"
#include "latentseq/model.hpp"
#include "latentseq/rng.hpp"

namespace latentseq {

// Pads `encoding` to `steps` steps by repeating its final vector.
LatentEncoding pad_encoding(const LatentEncoding& encoding, std::size_t steps);

// (1 - a) * from + a * to per element, after padding the shorter encoding.
LatentEncoding blend(const LatentEncoding& from, const LatentEncoding& to, double a);

struct InterpolationStep {
    double a = 0.0;
    Sequence sequence;
};

// Encodes both sequences by their posterior means, blends at a = 0, 1/steps, ..., 1
// and decodes each blend with the forward network starting from `from`'s first
// position. Decoding stops at the end id or after max_length predictions.
template <std::floating_point Real>
std::vector<InterpolationStep> interpolate_latents(const SequenceModel<Real>& model, const Sequence& from,
                                                   const Sequence& to, std::size_t steps, Decode decode,
                                                   std::size_t max_length, Rng& rng);

}  // namespace latentseq
