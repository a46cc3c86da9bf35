#pragma once

// Checkpoint container, all integers and reals little-endian:
//   "LSEQCKPT" | u32 version | string config (key = value text)
//   u64 next_update | f64 best_valid_elbo
//   u32 parameter count, then per parameter:
//     string name | u32 rank | u64 extents[rank] | f32 values
//   Adam: u64 step | f64 beta1 | f64 beta2 | f64 epsilon | u32 count,
//     then per parameter f32 first moments followed by f32 second moments
// Strings are a u32 byte length followed by the bytes.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "latentseq/config.hpp"
#include "latentseq/model.hpp"
#include "latentseq/optimizer.hpp"

namespace latentseq {

inline constexpr std::string_view kCheckpointMagic = "LSEQCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    TrainConfig config;
    std::uint64_t next_update = 0;
    double best_valid_elbo = -std::numeric_limits<double>::infinity();
    std::vector<std::pair<std::string, ad::Array<float>>> parameters;
    AdamState<float> adam;
};

Checkpoint make_checkpoint(const TrainConfig& config, const SequenceModel<float>& model, const AdamState<float>& adam,
                           std::uint64_t next_update, double best_valid_elbo);

void write_checkpoint(std::ostream& os, const Checkpoint& checkpoint);
// Throws DataError on malformed input.
Checkpoint read_checkpoint(std::istream& is);

// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Builds a model from the checkpoint's config and copies in its parameters.
// Throws DataError naming any missing, unexpected or mis-shaped parameter.
SequenceModel<float> restore_model(const Checkpoint& checkpoint);

}  // namespace latentseq
