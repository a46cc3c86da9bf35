#include "latentseq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "latentseq/errors.hpp"
#include "latentseq/evaluation.hpp"

namespace latentseq {

namespace {

Dataset read_dataset(const TrainConfig& config, const std::string& path, std::string_view split) {
    if (path.empty()) throw ConfigError("config key '" + std::string(split) + "_data' is not set");
    if (!std::filesystem::exists(path)) throw DataError(std::string(split) + " data file not found: " + path);
    if (config.data_kind == ObservationKind::tokens) {
        if (config.vocabulary.empty()) throw ConfigError("config key 'vocabulary' is required for token data");
        if (!std::filesystem::exists(config.vocabulary)) {
            throw DataError("vocabulary file not found: " + config.vocabulary);
        }
        return read_token_dataset(path, config.vocabulary);
    }
    return read_frame_file(path, config.data_kind);
}

const std::string& split_path(const TrainConfig& config, std::string_view split) {
    if (split == "train") return config.train_data;
    if (split == "valid") return config.valid_data;
    if (split == "test") return config.test_data;
    throw ConfigError("unknown split '" + std::string(split) + "' (expected train, valid or test)");
}

void append_line(const std::filesystem::path& path, const std::string& line) {
    std::ofstream os(path, std::ios::app);
    if (!os) throw DataError("cannot append to " + path.string());
    os << line << '\n';
}

}  // namespace

void bind_dataset(TrainConfig& config, const Dataset& train) {
    if (train.kind != config.data_kind) throw ConfigError("dataset kind does not match config key 'data_kind'");
    config.observation_width = train.observation_width();
    config.end_id = train.end_id;
}

Dataset load_split(const TrainConfig& config, std::string_view split) {
    Dataset d = read_dataset(config, split_path(config, split), split);
    if (config.data_kind == ObservationKind::frames) {
        apply_normalization(d, Normalization{config.norm_mean, config.norm_std});
    }
    if (config.observation_width != 0 && d.observation_width() != config.observation_width) {
        throw DataError(std::string(split) + " data has observation width " + std::to_string(d.observation_width()) +
                        ", expected " + std::to_string(config.observation_width));
    }
    return d;
}

TrainData load_training_data(TrainConfig& config) {
    TrainData data;
    data.train = read_dataset(config, config.train_data, "train");
    if (data.train.size() == 0) throw DataError("training split is empty: " + config.train_data);
    if (config.data_kind == ObservationKind::frames) {
        const auto norm = compute_normalization(data.train);
        config.norm_mean = norm.mean;
        config.norm_std = norm.std;
        apply_normalization(data.train, norm);
    }
    bind_dataset(config, data.train);
    if (!config.valid_data.empty()) data.valid = load_split(config, "valid");
    return data;
}

std::vector<std::size_t> sample_batch_indices(std::size_t dataset_size, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> all(dataset_size);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const std::size_t n = std::min(dataset_size, batch_size);
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, dataset_size - 1);
        std::swap(all[i], all[pick(rng)]);
    }
    all.resize(n);
    return all;
}

TrainResult train(const TrainConfig& config, const TrainData& data, const TrainOptions& options) {
    config.validate();
    if (data.train.size() == 0) throw DataError("training split is empty");
    if (config.observation_width == 0) throw ConfigError("config key 'observation_width' is unset; bind a dataset");

    TrainResult result{
        options.resume ? restore_model(*options.resume) : SequenceModel<float>(model_config(config), config.seed),
        {}, {}, 0, -std::numeric_limits<double>::infinity(), {}};
    auto& model = result.model;
    auto& params = model.parameters();
    if (options.resume) {
        result.adam = options.resume->adam;
        result.next_update = options.resume->next_update;
        result.best_valid_elbo = options.resume->best_valid_elbo;
        result.log = options.resume_log;
        result.log.truncate(result.next_update);
    } else {
        result.adam = AdamState<float>::for_parameters(params);
    }

    const auto& dir = options.output_dir;
    const bool writing = !dir.empty();
    if (writing) {
        std::filesystem::create_directories(dir);
        std::ofstream(dir / kConfigFile) << to_text(config);
        // Rewrite the logs so they hold exactly the records before the resume point.
        std::ofstream(dir / kUpdateCsvFile, std::ios::trunc) << [&] {
            std::ostringstream os;
            write_update_csv(os, result.log);
            return os.str();
        }();
        std::ofstream(dir / kEvalCsvFile, std::ios::trunc) << [&] {
            std::ostringstream os;
            write_eval_csv(os, result.log);
            return os.str();
        }();
    }
    auto checkpoint = [&](std::uint64_t next_update) {
        return make_checkpoint(config, model, result.adam, next_update, result.best_valid_elbo);
    };

    EvalOptions eval_options;
    eval_options.iwae_samples = config.eval_iwae_samples;
    eval_options.batch_size = config.eval_batch_size;
    eval_options.seed = config.seed;
    eval_options.threads = config.threads;
    eval_options.max_length = config.max_seq_len;

    for (std::uint64_t u = result.next_update; u < config.max_updates; ++u) {
        const double kl_weight = kl_weight_at(u, config.kl_anneal);
        Rng batch_rng = make_rng(config.seed, Stream::data, u);
        const auto indices = sample_batch_indices(data.train.size(), config.batch_size, batch_rng);
        const auto batch = make_batch(data.train, indices, config.max_seq_len);
        Rng noise_rng = make_rng(config.seed, Stream::train_noise, u);
        const auto noise = standard_normal_noise<float>(noise_rng, batch.steps(), batch.batch_size, config.z_dim);

        params.zero_grad();
        const auto state = unroll_posterior(model, batch, noise, config.alpha != 0.0);
        const auto loss = compute_loss(state, LossWeights{config.alpha, config.beta, kl_weight});
        const double objective = loss.objective.item();
        try {
            if (!std::isfinite(objective) || !std::isfinite(loss.weighted_total)) {
                throw NumericalError("non-finite loss at update " + std::to_string(u));
            }
            ad::backward(loss.objective);
            if (config.grad_clip_norm > 0.0) params.clip_grad_norm(config.grad_clip_norm);
            adam_step(params, result.adam, config.learning_rate);
        } catch (const NumericalError& e) {
            if (writing) save_checkpoint(dir / kLastCheckpointFile, checkpoint(u));
            throw NumericalError(std::string(e.what()) + " (update " + std::to_string(u) +
                                 (writing ? "; last good state saved to " + (dir / kLastCheckpointFile).string() : "") +
                                 ")");
        }

        const UpdateRecord record{u, loss.reconstruction, loss.kl, loss.aux, loss.backward_recon, kl_weight,
                                  loss.weighted_total};
        result.log.add(record);
        result.next_update = u + 1;
        if (writing) append_line(dir / kUpdateCsvFile, csv_row(record));
        if (options.on_update) options.on_update(record);

        const bool eval_due = config.eval_interval > 0 &&
                              ((u + 1) % config.eval_interval == 0 || u + 1 == config.max_updates);
        if (eval_due && data.valid.size() > 0) {
            const auto r = evaluate(model, data.valid, eval_options);
            const EvalRecord eval{u + 1, "valid", r.elbo, r.iwae, r.iwae_samples};
            result.log.add(eval);
            if (writing) append_line(dir / kEvalCsvFile, csv_row(eval));
            if (r.elbo > result.best_valid_elbo) {
                result.best_valid_elbo = r.elbo;
                result.best_parameters = params.snapshot();
                if (writing) save_checkpoint(dir / kBestCheckpointFile, checkpoint(u + 1));
            }
        }
    }
    if (writing) save_checkpoint(dir / kLastCheckpointFile, checkpoint(result.next_update));
    return result;
}

}  // namespace latentseq
