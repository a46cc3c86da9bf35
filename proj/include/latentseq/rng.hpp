#pragma once

#include <cstdint>
#include <random>

namespace latentseq {

// Independent random streams derived from one run seed. A generator is keyed by
// (seed, stream, counter), so any update or replica can be reproduced without
// replaying the ones before it.
enum class Stream : std::uint32_t {
    data = 1,
    init = 2,
    train_noise = 3,
    eval_noise = 4,
    sample = 5,
    synthetic = 6,
};

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t counter = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(counter),
                      static_cast<std::uint32_t>(counter >> 32)};
    return Rng(seq);
}

}  // namespace latentseq
