#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "latentseq/data.hpp"

namespace latentseq {

enum class SyntheticKind { sine_mixture, two_mode_hmm, parity_tokens };

std::string_view to_string(SyntheticKind kind);
// Accepts "sine-mixture", "two-mode-hmm", "parity-tokens"; throws ConfigError otherwise.
SyntheticKind parse_synthetic_kind(std::string_view text);

struct SineMixtureOptions {
    std::size_t width = 1;
    std::vector<double> frequencies{0.05, 0.15};  // cycles per step; one mode per sequence
    double amplitude = 1.0;
    double noise_std = 0.05;
};

// Per-sequence generating parameters of a sine-mixture set.
struct SineParameters {
    std::size_t mode = 0;
    double frequency = 0.0;
    double phase = 0.0;
};

// Width-1 binary sequences. transition[i][j] = P(state j | state i);
// emission[i] = P(bit 1 | state i).
struct HmmOptions {
    std::array<std::array<double, 2>, 2> transition{{{0.95, 0.05}, {0.05, 0.95}}};
    std::array<double, 2> emission{0.1, 0.9};
    std::array<double, 2> initial{0.5, 0.5};
};

struct ParityOptions {
    std::size_t filler_words = 6;
};

struct SyntheticResult {
    Dataset data;
    std::vector<SineParameters> sine;               // sine-mixture only
    std::vector<std::vector<std::uint8_t>> states;  // two-mode-hmm only
    std::vector<std::uint8_t> prefix_bits;          // parity-tokens only
};

// `length` counts positions, delimiters included for tokens. Deterministic given the seed.
SyntheticResult make_sine_mixture(std::size_t count, std::size_t length, std::uint64_t seed,
                                  const SineMixtureOptions& options = {});
SyntheticResult make_two_mode_hmm(std::size_t count, std::size_t length, std::uint64_t seed,
                                  const HmmOptions& options = {});
// <s> bit filler... suffix </s>, where the suffix is "even even" after zero and "odd" after one.
// Filler runs are 1 to length-5 words, so no sequence exceeds `length` positions (length >= 6).
SyntheticResult make_parity_tokens(std::size_t count, std::size_t length, std::uint64_t seed,
                                   const ParityOptions& options = {});

SyntheticResult make_synthetic(SyntheticKind kind, std::size_t count, std::size_t length, std::uint64_t seed);

}  // namespace latentseq
