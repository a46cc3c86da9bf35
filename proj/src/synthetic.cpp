#include "latentseq/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "latentseq/errors.hpp"
#include "latentseq/rng.hpp"

namespace latentseq {

std::string_view to_string(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::sine_mixture: return "sine-mixture";
        case SyntheticKind::two_mode_hmm: return "two-mode-hmm";
        case SyntheticKind::parity_tokens: return "parity-tokens";
    }
    return "unknown";
}

SyntheticKind parse_synthetic_kind(std::string_view text) {
    for (auto k : {SyntheticKind::sine_mixture, SyntheticKind::two_mode_hmm, SyntheticKind::parity_tokens}) {
        if (text == to_string(k)) return k;
    }
    throw ConfigError("unknown synthetic dataset kind '" + std::string(text) +
                      "' (expected sine-mixture, two-mode-hmm or parity-tokens)");
}

namespace {

void require_positive(std::size_t count, std::size_t length) {
    if (count < 1 || length < 1) throw ConfigError("synthetic data needs count >= 1 and length >= 1");
}

}  // namespace

SyntheticResult make_sine_mixture(std::size_t count, std::size_t length, std::uint64_t seed,
                                  const SineMixtureOptions& options) {
    require_positive(count, length);
    if (options.frequencies.empty()) throw ConfigError("sine-mixture needs at least one frequency");
    if (options.width < 1) throw ConfigError("sine-mixture width must be >= 1");
    Rng rng = make_rng(seed, Stream::synthetic);
    std::uniform_int_distribution<std::size_t> pick_mode(0, options.frequencies.size() - 1);
    std::uniform_real_distribution<double> pick_phase(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 1.0);

    SyntheticResult out;
    out.data.kind = ObservationKind::frames;
    out.data.width = options.width;
    for (std::size_t n = 0; n < count; ++n) {
        SineParameters p;
        p.mode = pick_mode(rng);
        p.frequency = options.frequencies[p.mode];
        p.phase = pick_phase(rng);
        Sequence s;
        s.values.reserve(length * options.width);
        for (std::size_t t = 0; t < length; ++t) {
            for (std::size_t f = 0; f < options.width; ++f) {
                // Each feature is the same wave delayed by f steps.
                const double angle = 2.0 * std::numbers::pi * p.frequency * static_cast<double>(t + f) + p.phase;
                double v = options.amplitude * std::sin(angle);
                if (options.noise_std > 0.0) v += options.noise_std * noise(rng);
                s.values.push_back(static_cast<float>(v));
            }
        }
        out.data.sequences.push_back(std::move(s));
        out.sine.push_back(p);
    }
    return out;
}

SyntheticResult make_two_mode_hmm(std::size_t count, std::size_t length, std::uint64_t seed,
                                  const HmmOptions& options) {
    require_positive(count, length);
    Rng rng = make_rng(seed, Stream::synthetic);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    SyntheticResult out;
    out.data.kind = ObservationKind::bits;
    out.data.width = 1;
    for (std::size_t n = 0; n < count; ++n) {
        std::vector<std::uint8_t> states(length);
        Sequence s;
        s.values.reserve(length);
        std::uint8_t state = uniform(rng) < options.initial[0] ? 0 : 1;
        for (std::size_t t = 0; t < length; ++t) {
            if (t > 0) state = uniform(rng) < options.transition[state][0] ? 0 : 1;
            states[t] = state;
            s.values.push_back(uniform(rng) < options.emission[state] ? 1.0f : 0.0f);
        }
        out.data.sequences.push_back(std::move(s));
        out.states.push_back(std::move(states));
    }
    return out;
}

SyntheticResult make_parity_tokens(std::size_t count, std::size_t length, std::uint64_t seed,
                                   const ParityOptions& options) {
    require_positive(count, length);
    if (options.filler_words < 1) throw ConfigError("parity-tokens needs at least one filler word");
    // <s> bit filler even even </s> is the longest layout with one filler word.
    if (length < 6) throw ConfigError("parity-tokens needs length >= 6");
    Rng rng = make_rng(seed, Stream::synthetic);

    SyntheticResult out;
    Dataset& d = out.data;
    d.kind = ObservationKind::tokens;
    d.width = 1;
    d.vocabulary = {std::string(kStartToken), std::string(kEndToken), "zero", "one"};
    for (std::size_t w = 0; w < options.filler_words; ++w) d.vocabulary.push_back("w" + std::to_string(w));
    d.vocabulary.push_back("even");
    d.vocabulary.push_back("odd");
    d.start_id = 0;
    d.end_id = 1;
    const auto zero_id = 2, one_id = 3;
    const auto first_filler = 4;
    const auto even_id = static_cast<std::int32_t>(4 + options.filler_words);
    const auto odd_id = even_id + 1;

    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<std::int32_t> filler(0, static_cast<std::int32_t>(options.filler_words) - 1);
    const std::size_t max_filler = length - 5;
    std::uniform_int_distribution<std::size_t> filler_len(1, max_filler);
    for (std::size_t n = 0; n < count; ++n) {
        const bool bit = coin(rng);
        Sequence s;
        s.ids.push_back(d.start_id);
        s.ids.push_back(bit ? one_id : zero_id);
        const std::size_t k = filler_len(rng);
        for (std::size_t i = 0; i < k; ++i) s.ids.push_back(first_filler + filler(rng));
        if (bit) {
            s.ids.push_back(odd_id);
        } else {
            s.ids.push_back(even_id);
            s.ids.push_back(even_id);
        }
        s.ids.push_back(d.end_id);
        d.sequences.push_back(std::move(s));
        out.prefix_bits.push_back(bit ? 1 : 0);
    }
    return out;
}

SyntheticResult make_synthetic(SyntheticKind kind, std::size_t count, std::size_t length, std::uint64_t seed) {
    switch (kind) {
        case SyntheticKind::sine_mixture: return make_sine_mixture(count, length, seed);
        case SyntheticKind::two_mode_hmm: return make_two_mode_hmm(count, length, seed);
        case SyntheticKind::parity_tokens: return make_parity_tokens(count, length, seed);
    }
    throw std::logic_error("unreachable synthetic kind");
}

}  // namespace latentseq
