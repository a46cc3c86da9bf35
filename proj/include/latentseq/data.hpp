#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latentseq/autodiff.hpp"
#include "latentseq/recurrent.hpp"

namespace latentseq {

// frames: real-valued vectors with a Gaussian output head.
// bits:   0/1 vectors with a Bernoulli output head.
// tokens: integer ids with a Categorical output head.
enum class ObservationKind { frames, bits, tokens };

std::string_view to_string(ObservationKind kind);
ObservationKind parse_observation_kind(std::string_view text);

// One sequence. frames/bits use `values` (length * width, row-major);
// tokens use `ids`.
struct Sequence {
    std::vector<float> values;
    std::vector<std::int32_t> ids;
};

struct Dataset {
    ObservationKind kind = ObservationKind::frames;
    std::size_t width = 1;  // feature width for frames/bits, 1 for tokens
    std::vector<Sequence> sequences;
    std::vector<std::string> vocabulary;  // tokens only
    std::int32_t start_id = -1;
    std::int32_t end_id = -1;

    [[nodiscard]] std::size_t size() const { return sequences.size(); }
    [[nodiscard]] std::size_t length(std::size_t i) const;
    // Observation width seen by the model: vocabulary size for tokens.
    [[nodiscard]] std::size_t observation_width() const;
};

struct Normalization {
    double mean = 0.0;
    double std = 1.0;
};

// Global scalar mean/std over every value of a frame dataset.
Normalization compute_normalization(const Dataset& data);
void apply_normalization(Dataset& data, const Normalization& norm);
void remove_normalization(Dataset& data, const Normalization& norm);

// Padded batch. mask[b * max_length + t] == 1 iff t < lengths[b].
struct SequenceBatch {
    ObservationKind kind = ObservationKind::frames;
    std::size_t batch_size = 0;
    std::size_t max_length = 0;
    std::size_t width = 1;
    std::vector<float> values;       // [B, T, width], frames/bits
    std::vector<std::int32_t> ids;   // [B, T], tokens
    std::vector<std::size_t> lengths;
    std::vector<std::uint8_t> mask;  // [B, T]

    [[nodiscard]] StepMask position_mask(std::size_t position) const;
    [[nodiscard]] std::vector<std::int32_t> ids_at(std::size_t position) const;
    template <std::floating_point Real>
    [[nodiscard]] ad::Array<Real> values_at(std::size_t position) const;
    // Number of prediction steps of the longest row.
    [[nodiscard]] std::size_t steps() const { return max_length > 0 ? max_length - 1 : 0; }
};

// Sequences longer than max_length are truncated to it (0 disables the cap).
SequenceBatch make_batch(const Dataset& data, std::span<const std::size_t> indices, std::size_t max_length = 0);
SequenceBatch make_batch(ObservationKind kind, std::size_t width, std::span<const Sequence> sequences,
                         std::size_t max_length = 0);
// Appends `extra` fully padded positions to every row.
SequenceBatch pad_batch(const SequenceBatch& batch, std::size_t extra);

// Frame file: "ZSEQF1", u32 width, u32 count, then per sequence u32 length and
// length*width little-endian float32 values.
void write_frame_file(const std::filesystem::path& path, const Dataset& data);
Dataset read_frame_file(const std::filesystem::path& path, ObservationKind kind = ObservationKind::frames);

// Vocabulary: one token per line, id = line index.
void write_vocabulary(const std::filesystem::path& path, const std::vector<std::string>& vocabulary);
std::vector<std::string> read_vocabulary(const std::filesystem::path& path);
// Sequences: one line of space-separated decimal ids per sequence, delimiters included.
void write_token_sequences(const std::filesystem::path& path, const Dataset& data);
Dataset read_token_dataset(const std::filesystem::path& sequences_path, const std::filesystem::path& vocabulary_path);

inline constexpr std::string_view kStartToken = "<s>";
inline constexpr std::string_view kEndToken = "</s>";

// Splits on whitespace, maps words to ids and wraps them in the start/end delimiters.
Sequence tokenize(const Dataset& vocab_source, std::string_view sentence);
std::string detokenize(const Dataset& vocab_source, std::span<const std::int32_t> ids, bool strip_delimiters = true);

}  // namespace latentseq
