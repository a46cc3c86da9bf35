#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "latentseq/data.hpp"
#include "latentseq/model.hpp"

namespace latentseq {

struct KlAnneal {
    bool enabled = false;
    double start = 0.2;
    double increment = 0.00005;
    double cap = 1.0;
};

// Every hyperparameter, schedule and ablation switch of a run. Serialized as a flat
// `key = value` text file; see config_keys() for the accepted keys.
struct TrainConfig {
    ObservationKind data_kind = ObservationKind::frames;
    std::string train_data;
    std::string valid_data;
    std::string test_data;
    std::string vocabulary;

    std::size_t embed_dim = 16;
    std::size_t hidden_size = 32;
    std::size_t backward_hidden_size = 32;
    std::size_t z_dim = 4;
    std::size_t head_hidden = 32;

    double learning_rate = 0.001;
    std::size_t batch_size = 32;
    double alpha = 0.0025;
    double beta = 0.0025;
    KlAnneal kl_anneal;
    double grad_clip_norm = 5.0;
    std::size_t max_updates = 1000;
    std::size_t eval_interval = 100;
    std::size_t eval_iwae_samples = 0;  // IWAE during training evals; 0 skips it
    std::size_t eval_batch_size = 64;
    std::size_t max_seq_len = 256;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string output_dir;

    // Filled in from the training data when a run starts.
    std::size_t observation_width = 0;
    std::int32_t end_id = -1;
    double norm_mean = 0.0;
    double norm_std = 1.0;

    // Throws ConfigError naming the offending key.
    void validate() const;
};

const std::vector<std::string>& config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const TrainConfig& config, std::string_view key);

TrainConfig parse_config(std::string_view text);
TrainConfig read_config_file(const std::string& path);
std::string to_text(const TrainConfig& config);

ModelConfig model_config(const TrainConfig& config);

}  // namespace latentseq
