#include "latentseq/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "latentseq/binary_io.hpp"
#include "latentseq/errors.hpp"

namespace latentseq {

namespace {

constexpr char kFrameMagic[6] = {'Z', 'S', 'E', 'Q', 'F', '1'};

}  // namespace

std::string_view to_string(ObservationKind kind) {
    switch (kind) {
        case ObservationKind::frames: return "frames";
        case ObservationKind::bits: return "bits";
        case ObservationKind::tokens: return "tokens";
    }
    return "unknown";
}

ObservationKind parse_observation_kind(std::string_view text) {
    if (text == "frames") return ObservationKind::frames;
    if (text == "bits") return ObservationKind::bits;
    if (text == "tokens") return ObservationKind::tokens;
    throw ConfigError("unknown observation kind '" + std::string(text) + "' (expected frames, bits or tokens)");
}

std::size_t Dataset::length(std::size_t i) const {
    const auto& s = sequences.at(i);
    return kind == ObservationKind::tokens ? s.ids.size() : s.values.size() / width;
}

std::size_t Dataset::observation_width() const {
    return kind == ObservationKind::tokens ? vocabulary.size() : width;
}

Normalization compute_normalization(const Dataset& data) {
    if (data.kind != ObservationKind::frames) return {};
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : data.sequences) {
        for (float v : s.values) sum += v;
        n += s.values.size();
    }
    if (n == 0) throw DataError("cannot normalize an empty dataset");
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (const auto& s : data.sequences) {
        for (float v : s.values) sq += (v - mean) * (v - mean);
    }
    const double std = std::sqrt(sq / static_cast<double>(n));
    if (!(std > 0.0)) throw DataError("training data has zero variance; cannot normalize");
    return {mean, std};
}

void apply_normalization(Dataset& data, const Normalization& norm) {
    if (data.kind != ObservationKind::frames) return;
    for (auto& s : data.sequences) {
        for (float& v : s.values) v = static_cast<float>((v - norm.mean) / norm.std);
    }
}

void remove_normalization(Dataset& data, const Normalization& norm) {
    if (data.kind != ObservationKind::frames) return;
    for (auto& s : data.sequences) {
        for (float& v : s.values) v = static_cast<float>(v * norm.std + norm.mean);
    }
}

StepMask SequenceBatch::position_mask(std::size_t position) const {
    StepMask m(batch_size, 0);
    if (position >= max_length) return m;
    for (std::size_t b = 0; b < batch_size; ++b) m[b] = mask[b * max_length + position];
    return m;
}

std::vector<std::int32_t> SequenceBatch::ids_at(std::size_t position) const {
    std::vector<std::int32_t> out(batch_size, 0);
    if (position >= max_length) return out;
    for (std::size_t b = 0; b < batch_size; ++b) out[b] = ids[b * max_length + position];
    return out;
}

template <std::floating_point Real>
ad::Array<Real> SequenceBatch::values_at(std::size_t position) const {
    ad::Array<Real> out(ad::Shape{batch_size, width});
    if (position >= max_length) return out;
    for (std::size_t b = 0; b < batch_size; ++b) {
        const std::size_t base = (b * max_length + position) * width;
        for (std::size_t f = 0; f < width; ++f) out.data[b * width + f] = static_cast<Real>(values[base + f]);
    }
    return out;
}

template ad::Array<float> SequenceBatch::values_at<float>(std::size_t) const;
template ad::Array<double> SequenceBatch::values_at<double>(std::size_t) const;

SequenceBatch make_batch(ObservationKind kind, std::size_t width, std::span<const Sequence> sequences,
                         std::size_t max_length) {
    SequenceBatch batch;
    batch.kind = kind;
    batch.width = kind == ObservationKind::tokens ? 1 : width;
    batch.batch_size = sequences.size();
    for (const auto& s : sequences) {
        std::size_t len = kind == ObservationKind::tokens ? s.ids.size() : s.values.size() / batch.width;
        if (max_length > 0) len = std::min(len, max_length);
        batch.lengths.push_back(len);
        batch.max_length = std::max(batch.max_length, len);
    }
    const std::size_t b_count = batch.batch_size, t_count = batch.max_length;
    batch.mask.assign(b_count * t_count, 0);
    if (kind == ObservationKind::tokens) {
        batch.ids.assign(b_count * t_count, 0);
    } else {
        batch.values.assign(b_count * t_count * batch.width, 0.0f);
    }
    for (std::size_t b = 0; b < b_count; ++b) {
        const auto& s = sequences[b];
        for (std::size_t t = 0; t < batch.lengths[b]; ++t) {
            batch.mask[b * t_count + t] = 1;
            if (kind == ObservationKind::tokens) {
                batch.ids[b * t_count + t] = s.ids[t];
            } else {
                std::copy_n(s.values.begin() + t * batch.width, batch.width,
                            batch.values.begin() + (b * t_count + t) * batch.width);
            }
        }
    }
    return batch;
}

SequenceBatch make_batch(const Dataset& data, std::span<const std::size_t> indices, std::size_t max_length) {
    std::vector<Sequence> picked;
    picked.reserve(indices.size());
    for (std::size_t i : indices) picked.push_back(data.sequences.at(i));
    return make_batch(data.kind, data.width, picked, max_length);
}

SequenceBatch pad_batch(const SequenceBatch& batch, std::size_t extra) {
    SequenceBatch out = batch;
    const std::size_t old_t = batch.max_length;
    const std::size_t new_t = old_t + extra;
    out.max_length = new_t;
    out.mask.assign(batch.batch_size * new_t, 0);
    if (batch.kind == ObservationKind::tokens) {
        out.ids.assign(batch.batch_size * new_t, 0);
    } else {
        out.values.assign(batch.batch_size * new_t * batch.width, 0.0f);
    }
    for (std::size_t b = 0; b < batch.batch_size; ++b) {
        for (std::size_t t = 0; t < old_t; ++t) {
            out.mask[b * new_t + t] = batch.mask[b * old_t + t];
            if (batch.kind == ObservationKind::tokens) {
                out.ids[b * new_t + t] = batch.ids[b * old_t + t];
            } else {
                std::copy_n(batch.values.begin() + (b * old_t + t) * batch.width, batch.width,
                            out.values.begin() + (b * new_t + t) * batch.width);
            }
        }
    }
    return out;
}

void write_frame_file(const std::filesystem::path& path, const Dataset& data) {
    if (data.kind == ObservationKind::tokens) throw DataError("write_frame_file: token datasets use token files");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os.write(kFrameMagic, sizeof(kFrameMagic));
    binary::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(data.width));
    binary::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(data.sequences.size()));
    for (const auto& s : data.sequences) {
        binary::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(s.values.size() / data.width));
        for (float v : s.values) binary::write_f32(os, v);
    }
    if (!os) throw DataError("write failed: " + path.string());
}

Dataset read_frame_file(const std::filesystem::path& path, ObservationKind kind) {
    if (kind == ObservationKind::tokens) throw DataError("read_frame_file: token datasets use token files");
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open frame file " + path.string());
    char magic[sizeof(kFrameMagic)];
    if (!is.read(magic, sizeof(magic)) || !std::equal(magic, magic + sizeof(magic), kFrameMagic)) {
        throw DataError(path.string() + ": not a frame file (bad magic)");
    }
    Dataset data;
    data.kind = kind;
    try {
        data.width = binary::read_uint<std::uint32_t>(is);
        if (data.width == 0) throw DataError("frame width is zero");
        const auto count = binary::read_uint<std::uint32_t>(is);
        data.sequences.resize(count);
        for (auto& s : data.sequences) {
            const auto length = binary::read_uint<std::uint32_t>(is);
            s.values.resize(static_cast<std::size_t>(length) * data.width);
            for (float& v : s.values) v = binary::read_f32(is);
            if (kind == ObservationKind::bits) {
                for (float v : s.values) {
                    if (v != 0.0f && v != 1.0f) throw DataError("bit dataset holds a value other than 0/1");
                }
            }
        }
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return data;
}

void write_vocabulary(const std::filesystem::path& path, const std::vector<std::string>& vocabulary) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    for (const auto& w : vocabulary) os << w << '\n';
}

std::vector<std::string> read_vocabulary(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open vocabulary " + path.string());
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        vocab.push_back(line);
    }
    return vocab;
}

void write_token_sequences(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    for (const auto& s : data.sequences) {
        for (std::size_t i = 0; i < s.ids.size(); ++i) {
            if (i) os << ' ';
            os << s.ids[i];
        }
        os << '\n';
    }
}

Dataset read_token_dataset(const std::filesystem::path& sequences_path,
                           const std::filesystem::path& vocabulary_path) {
    Dataset data;
    data.kind = ObservationKind::tokens;
    data.width = 1;
    data.vocabulary = read_vocabulary(vocabulary_path);
    for (std::size_t i = 0; i < data.vocabulary.size(); ++i) {
        if (data.vocabulary[i] == kStartToken) data.start_id = static_cast<std::int32_t>(i);
        if (data.vocabulary[i] == kEndToken) data.end_id = static_cast<std::int32_t>(i);
    }
    if (data.start_id < 0 || data.end_id < 0) {
        throw DataError(vocabulary_path.string() + ": vocabulary must contain " + std::string(kStartToken) +
                        " and " + std::string(kEndToken));
    }
    std::ifstream is(sequences_path);
    if (!is) throw DataError("cannot open token sequences " + sequences_path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::istringstream ls(line);
        Sequence s;
        std::string word;
        while (ls >> word) {
            std::size_t used = 0;
            long long id = -1;
            try {
                id = std::stoll(word, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != word.size() || id < 0 || static_cast<std::size_t>(id) >= data.vocabulary.size()) {
                throw DataError(sequences_path.string() + ":" + std::to_string(line_no) + ": invalid token id '" +
                                word + "' for vocabulary of size " + std::to_string(data.vocabulary.size()));
            }
            s.ids.push_back(static_cast<std::int32_t>(id));
        }
        if (s.ids.empty()) continue;  // blank line
        data.sequences.push_back(std::move(s));
    }
    return data;
}

Sequence tokenize(const Dataset& vocab_source, std::string_view sentence) {
    Sequence s;
    s.ids.push_back(vocab_source.start_id);
    std::istringstream is{std::string(sentence)};
    std::string word;
    while (is >> word) {
        const auto it = std::find(vocab_source.vocabulary.begin(), vocab_source.vocabulary.end(), word);
        if (it == vocab_source.vocabulary.end()) throw DataError("token '" + word + "' is not in the vocabulary");
        s.ids.push_back(static_cast<std::int32_t>(it - vocab_source.vocabulary.begin()));
    }
    s.ids.push_back(vocab_source.end_id);
    return s;
}

std::string detokenize(const Dataset& vocab_source, std::span<const std::int32_t> ids, bool strip_delimiters) {
    std::string out;
    for (std::int32_t id : ids) {
        if (strip_delimiters && (id == vocab_source.start_id || id == vocab_source.end_id)) continue;
        if (!out.empty()) out += ' ';
        out += vocab_source.vocabulary.at(static_cast<std::size_t>(id));
    }
    return out;
}

}  // namespace latentseq
