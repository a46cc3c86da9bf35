#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string_view>
#include <vector>

#include "latentseq/checkpoint.hpp"
#include "latentseq/config.hpp"
#include "latentseq/data.hpp"
#include "latentseq/metrics.hpp"
#include "latentseq/model.hpp"
#include "latentseq/optimizer.hpp"

namespace latentseq {

struct TrainData {
    Dataset train;
    Dataset valid;  // may be empty; validation is then skipped
};

// Reads the train and valid splits named in `config`, fits frame normalization on
// the training split, applies it to both and stores the constants and the
// observation width/end id back into `config`.
TrainData load_training_data(TrainConfig& config);

// Reads one split ("train", "valid" or "test") and applies the normalization
// constants already stored in `config`.
Dataset load_split(const TrainConfig& config, std::string_view split);

// Copies observation width and end id from a dataset into the config.
void bind_dataset(TrainConfig& config, const Dataset& train);

// Output directory layout.
inline constexpr std::string_view kConfigFile = "config.txt";
inline constexpr std::string_view kUpdateCsvFile = "metrics.csv";
inline constexpr std::string_view kEvalCsvFile = "eval.csv";
inline constexpr std::string_view kBestCheckpointFile = "best.ckpt";
inline constexpr std::string_view kLastCheckpointFile = "last.ckpt";

struct TrainOptions {
    std::filesystem::path output_dir;  // empty: nothing is written
    const Checkpoint* resume = nullptr;
    MetricLog resume_log;              // records written before the resume point
    std::function<void(const UpdateRecord&)> on_update;
};

struct TrainResult {
    SequenceModel<float> model;
    AdamState<float> adam;
    MetricLog log;
    std::uint64_t next_update = 0;
    double best_valid_elbo = -std::numeric_limits<double>::infinity();
    std::vector<ad::Array<float>> best_parameters;  // empty when no validation ran
};

// Update u draws its batch from (seed, data, u) and its posterior noise from
// (seed, train_noise, u), so a resumed run replays the same updates.
// A non-finite loss or gradient writes last.ckpt (state before the failing update)
// when an output directory is set, then throws NumericalError.
TrainResult train(const TrainConfig& config, const TrainData& data, const TrainOptions& options = {});

std::vector<std::size_t> sample_batch_indices(std::size_t dataset_size, std::size_t batch_size, Rng& rng);

}  // namespace latentseq
