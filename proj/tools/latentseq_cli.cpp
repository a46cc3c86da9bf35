// Command-line front end: make-data, train, eval, sample, interpolate, grad-check.
//
// Exit status: 0 success, 2 configuration error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "latentseq/checkpoint.hpp"
#include "latentseq/config.hpp"
#include "latentseq/errors.hpp"
#include "latentseq/evaluation.hpp"
#include "latentseq/gradcheck.hpp"
#include "latentseq/interpolation.hpp"
#include "latentseq/synthetic.hpp"
#include "latentseq/trainer.hpp"

namespace fs = std::filesystem;
using namespace latentseq;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// Flags shared by commands that resolve a TrainConfig.
struct Overrides {
    std::vector<std::string> set;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<std::string> kl_anneal;
    std::optional<std::size_t> iwae_samples;
    std::optional<std::string> output_dir;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--set", set, "Override a config key, key=value (repeatable)");
        cmd.add_option("--alpha", alpha, "Auxiliary cost weight");
        cmd.add_option("--beta", beta, "Backward reconstruction weight");
        cmd.add_option("--kl-anneal", kl_anneal, "KL annealing on|off");
        cmd.add_option("--iwae-samples", iwae_samples, "Importance samples for validation IWAE");
        cmd.add_option("--output", output_dir, "Output directory");
    }

    void apply(TrainConfig& config) const {
        for (const auto& kv : set) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (alpha) config.alpha = *alpha;
        if (beta) config.beta = *beta;
        if (kl_anneal) set_config_value(config, "kl_anneal", *kl_anneal);
        if (iwae_samples) config.eval_iwae_samples = *iwae_samples;
        if (output_dir) config.output_dir = *output_dir;
    }
};

void print_eval(const std::string& split, const EvalResult& r, ObservationKind kind) {
    std::printf("split=%s sequences=%zu elbo=%.6f iwae=%.6f k=%zu kl=%.6f", split.c_str(), r.sequences, r.elbo, r.iwae,
                r.iwae_samples, r.kl);
    if (kind == ObservationKind::tokens) {
        std::printf(" ppl_elbo=%.4f ppl_iwae=%.4f", r.elbo_perplexity, r.iwae_perplexity);
    }
    std::printf("\n");
}

// Keys that fix parameter shapes; a resumed run may not change them.
void check_same_shape(const TrainConfig& stored, const TrainConfig& requested) {
    for (const char* key : {"data_kind", "embed_dim", "hidden_size", "backward_hidden_size", "z_dim", "head_hidden",
                            "observation_width"}) {
        if (get_config_value(stored, key) != get_config_value(requested, key)) {
            throw ConfigError("config key '" + std::string(key) + "' = " + get_config_value(requested, key) +
                              " does not match the checkpoint (" + get_config_value(stored, key) + ")");
        }
    }
}

Dataset vocabulary_source(const TrainConfig& config) {
    if (config.data_kind != ObservationKind::tokens) throw ConfigError("this command needs token data");
    Dataset d;
    d.kind = ObservationKind::tokens;
    d.vocabulary = read_vocabulary(config.vocabulary);
    for (std::size_t i = 0; i < d.vocabulary.size(); ++i) {
        if (d.vocabulary[i] == kStartToken) d.start_id = static_cast<std::int32_t>(i);
        if (d.vocabulary[i] == kEndToken) d.end_id = static_cast<std::int32_t>(i);
    }
    if (d.start_id < 0 || d.end_id < 0) throw DataError("vocabulary lacks the <s> or </s> delimiter");
    return d;
}

int run_make_data(const std::string& kind_name, std::size_t count, std::size_t valid, std::size_t test,
                  std::size_t length, std::uint64_t seed, const fs::path& out) {
    const auto kind = parse_synthetic_kind(kind_name);
    auto all = make_synthetic(kind, count + valid + test, length, seed).data;
    fs::create_directories(out);

    auto split = [&](std::size_t begin, std::size_t n) {
        Dataset d = all;
        d.sequences.assign(all.sequences.begin() + static_cast<std::ptrdiff_t>(begin),
                           all.sequences.begin() + static_cast<std::ptrdiff_t>(begin + n));
        return d;
    };
    TrainConfig config;
    config.data_kind = all.kind;
    const std::string ext = all.kind == ObservationKind::tokens ? ".ids" : ".frames";
    const std::pair<const char*, std::size_t> parts[] = {{"train", count}, {"valid", valid}, {"test", test}};
    std::size_t begin = 0;
    for (const auto& [name, n] : parts) {
        const fs::path path = out / (std::string(name) + ext);
        const Dataset d = split(begin, n);
        begin += n;
        if (n == 0) continue;
        if (all.kind == ObservationKind::tokens) {
            write_token_sequences(path, d);
        } else {
            write_frame_file(path, d);
        }
        set_config_value(config, std::string(name) + "_data", path.string());
    }
    if (all.kind == ObservationKind::tokens) {
        const fs::path vocab = out / "vocab.txt";
        write_vocabulary(vocab, all.vocabulary);
        config.vocabulary = vocab.string();
    }
    config.output_dir = (out / "run").string();
    std::ofstream(out / "config.txt") << to_text(config);
    std::printf("wrote %zu/%zu/%zu %s sequences to %s\n", count, valid, test, std::string(to_string(kind)).c_str(),
                out.string().c_str());
    return 0;
}

int run_train(const std::string& config_path, const std::string& resume_path, const Overrides& overrides) {
    TrainConfig config;
    TrainData data;
    std::optional<Checkpoint> resume;
    TrainOptions options;
    if (!resume_path.empty()) {
        resume = load_checkpoint(resume_path);
        config = resume->config;
        if (!config_path.empty()) {
            TrainConfig from_file = read_config_file(config_path);
            from_file.observation_width = config.observation_width;
            from_file.end_id = config.end_id;
            from_file.norm_mean = config.norm_mean;
            from_file.norm_std = config.norm_std;
            check_same_shape(config, from_file);
            config = from_file;
        }
        overrides.apply(config);
        check_same_shape(resume->config, config);
        config.validate();
        data.train = load_split(config, "train");
        if (!config.valid_data.empty()) data.valid = load_split(config, "valid");
        options.resume = &*resume;
        if (!config.output_dir.empty()) {
            options.resume_log = read_metric_csv(fs::path(config.output_dir) / kUpdateCsvFile,
                                                 fs::path(config.output_dir) / kEvalCsvFile);
        }
    } else {
        if (config_path.empty()) throw ConfigError("train needs --config or --resume");
        config = read_config_file(config_path);
        overrides.apply(config);
        config.validate();
        data = load_training_data(config);
    }
    options.output_dir = config.output_dir;
    options.on_update = [&](const UpdateRecord& r) {
        if (config.eval_interval > 0 && (r.update + 1) % config.eval_interval == 0) {
            std::printf("update %llu: total=%.4f rec=%.4f kl=%.4f aux=%.4f bwd=%.4f kl_weight=%.5f\n",
                        static_cast<unsigned long long>(r.update + 1), r.total, r.rec, r.kl, r.aux, r.bwd,
                        r.kl_weight);
            std::fflush(stdout);
        }
    };
    const auto result = train(config, data, options);
    if (!result.log.evals().empty()) {
        const auto& e = result.log.evals().back();
        std::printf("final valid elbo=%.6f (best %.6f)\n", e.elbo, result.best_valid_elbo);
    }
    if (!config.output_dir.empty()) std::printf("outputs in %s\n", config.output_dir.c_str());
    return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& split, const Overrides& overrides,
             std::size_t iwae_samples, const std::string& csv_path) {
    const auto checkpoint = load_checkpoint(checkpoint_path);
    TrainConfig config = checkpoint.config;
    overrides.apply(config);
    check_same_shape(checkpoint.config, config);
    // Normalization always comes from the checkpoint.
    config.norm_mean = checkpoint.config.norm_mean;
    config.norm_std = checkpoint.config.norm_std;
    const auto model = restore_model(checkpoint);
    const Dataset data = load_split(config, split);
    EvalOptions options;
    options.iwae_samples = iwae_samples;
    options.batch_size = config.eval_batch_size;
    options.seed = config.seed;
    options.threads = config.threads;
    options.max_length = config.max_seq_len;
    const auto r = evaluate(model, data, options);
    print_eval(split, r, config.data_kind);

    fs::path csv = csv_path;
    if (csv.empty() && !config.output_dir.empty()) csv = fs::path(config.output_dir) / kEvalCsvFile;
    if (!csv.empty()) {
        const bool fresh = !fs::exists(csv) || fs::file_size(csv) == 0;
        if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
        std::ofstream os(csv, std::ios::app);
        if (!os) throw DataError("cannot append to " + csv.string());
        if (fresh) os << kEvalCsvHeader << '\n';
        os << csv_row(EvalRecord{checkpoint.next_update, split, r.elbo, r.iwae, r.iwae_samples}) << '\n';
    }
    return 0;
}

Decode parse_decode(const std::string& s) {
    if (s == "argmax") return Decode::argmax;
    if (s == "sample") return Decode::sample;
    throw ConfigError("unknown decode mode '" + s + "' (expected argmax or sample)");
}

int run_sample(const std::string& checkpoint_path, std::size_t count, std::size_t steps, const std::string& decode,
               const std::string& prefix, std::uint64_t seed, const std::string& out_path) {
    const auto checkpoint = load_checkpoint(checkpoint_path);
    const auto& config = checkpoint.config;
    const auto model = restore_model(checkpoint);
    if (count < 1) throw ConfigError("--count must be >= 1");

    std::vector<Sequence> starts(count);
    std::optional<Dataset> vocab;
    if (config.data_kind == ObservationKind::tokens) {
        vocab = vocabulary_source(config);
        Sequence s = tokenize(*vocab, prefix);
        s.ids.pop_back();  // continue after the prefix instead of ending it
        starts.assign(count, s);
    } else {
        if (!prefix.empty()) throw ConfigError("--prefix is only supported for token data");
        // One observation of zeros in normalized units (the training mean).
        starts.assign(count, Sequence{std::vector<float>(config.observation_width, 0.0f), {}});
    }
    const auto batch = make_batch(config.data_kind, config.observation_width, starts);
    GenerationOptions options;
    options.steps = steps;
    options.decode = parse_decode(decode);
    Rng rng = make_rng(seed, Stream::sample);
    auto samples = unroll_prior(model, batch, options, rng);

    if (config.data_kind == ObservationKind::tokens) {
        std::ofstream os(out_path);
        if (!os) throw DataError("cannot write " + out_path);
        for (const auto& s : samples) os << detokenize(*vocab, s.ids) << '\n';
    } else {
        Dataset d;
        d.kind = config.data_kind;
        d.width = config.observation_width;
        d.sequences = std::move(samples);
        if (d.kind == ObservationKind::frames) remove_normalization(d, Normalization{config.norm_mean, config.norm_std});
        write_frame_file(out_path, d);
    }
    std::printf("wrote %zu samples to %s\n", count, out_path.c_str());
    return 0;
}

int run_interpolate(const std::string& checkpoint_path, const std::string& from, const std::string& to,
                    std::size_t steps, const std::string& decode, std::size_t max_length, std::uint64_t seed,
                    const std::string& csv_path) {
    const auto checkpoint = load_checkpoint(checkpoint_path);
    const auto model = restore_model(checkpoint);
    const Dataset vocab = vocabulary_source(checkpoint.config);
    Rng rng = make_rng(seed, Stream::sample);
    const auto rows = interpolate_latents(model, tokenize(vocab, from), tokenize(vocab, to), steps,
                                          parse_decode(decode), max_length, rng);
    std::ofstream csv;
    if (!csv_path.empty()) {
        csv.open(csv_path);
        if (!csv) throw DataError("cannot write " + csv_path);
        csv << "a,sentence\n";
    }
    for (const auto& r : rows) {
        const std::string text = detokenize(vocab, r.sequence.ids);
        std::printf("%.4f\t%s\n", r.a, text.c_str());
        if (csv.is_open()) csv << r.a << ",\"" << text << "\"\n";
    }
    return 0;
}

int run_grad_check(std::uint64_t seed) {
    auto results = op_gradient_suite(seed);
    auto model_results = model_gradient_suite(seed);
    results.insert(results.end(), model_results.begin(), model_results.end());
    bool ok = true;
    for (const auto& r : results) {
        std::printf("%s %-28s checked=%-4zu max_rel_error=%.3e", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.checked,
                    r.max_rel_error);
        if (!r.passed) std::printf("  worst %s", r.worst.c_str());
        std::printf("\n");
        ok = ok && r.passed;
    }
    std::printf("%s\n", ok ? "gradient check passed" : "gradient check FAILED");
    return ok ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latentseq: stochastic recurrent sequence models"};
    app.require_subcommand(1);

    auto* make_data = app.add_subcommand("make-data", "Write a synthetic dataset and a starter config");
    std::string kind = "sine-mixture";
    std::size_t count = 64, valid = 16, test = 16, length = 32;
    std::uint64_t seed = 1;
    std::string out_dir;
    make_data->add_option("--kind", kind, "sine-mixture | two-mode-hmm | parity-tokens")->capture_default_str();
    make_data->add_option("--count", count, "Training sequences")->capture_default_str();
    make_data->add_option("--valid", valid, "Validation sequences")->capture_default_str();
    make_data->add_option("--test", test, "Test sequences")->capture_default_str();
    make_data->add_option("--length", length, "Positions per sequence")->capture_default_str();
    make_data->add_option("--seed", seed)->capture_default_str();
    make_data->add_option("--out", out_dir, "Output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "Train a model");
    std::string config_path, resume_path;
    Overrides train_overrides;
    train_cmd->add_option("--config", config_path, "key = value config file");
    train_cmd->add_option("--resume", resume_path, "Checkpoint to continue from");
    train_overrides.add_to(*train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate ELBO and IWAE on a split");
    std::string checkpoint_path, split = "test", csv_path;
    std::size_t eval_samples = 25;
    Overrides eval_overrides;
    eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
    eval_cmd->add_option("--split", split, "train | valid | test")->capture_default_str();
    eval_cmd->add_option("--iwae-samples", eval_samples, "Importance samples K")->capture_default_str();
    eval_cmd->add_option("--csv", csv_path, "Eval CSV to append to (default: output_dir/eval.csv)");
    eval_cmd->add_option("--set", eval_overrides.set, "Override a config key, key=value (repeatable)");

    auto* sample_cmd = app.add_subcommand("sample", "Generate sequences from the prior");
    std::size_t sample_count = 4, sample_steps = 32;
    std::string decode = "sample", prefix, sample_out;
    sample_cmd->add_option("--checkpoint", checkpoint_path)->required();
    sample_cmd->add_option("--count", sample_count)->capture_default_str();
    sample_cmd->add_option("--steps", sample_steps, "Positions to generate")->capture_default_str();
    sample_cmd->add_option("--decode", decode, "argmax | sample")->capture_default_str();
    sample_cmd->add_option("--prefix", prefix, "Token prefix (tokens only)");
    sample_cmd->add_option("--seed", seed)->capture_default_str();
    sample_cmd->add_option("--out", sample_out, "Frame file or text file")->required();

    auto* interp_cmd = app.add_subcommand("interpolate", "Decode linear blends of two sentence encodings");
    std::string from, to;
    std::size_t interp_steps = 4, max_length = 40;
    std::string interp_decode = "argmax";
    interp_cmd->add_option("--checkpoint", checkpoint_path)->required();
    interp_cmd->add_option("--from", from)->required();
    interp_cmd->add_option("--to", to)->required();
    interp_cmd->add_option("--steps", interp_steps, "Blends between the endpoints")->capture_default_str();
    interp_cmd->add_option("--decode", interp_decode, "argmax | sample")->capture_default_str();
    interp_cmd->add_option("--max-length", max_length)->capture_default_str();
    interp_cmd->add_option("--seed", seed)->capture_default_str();
    interp_cmd->add_option("--csv", csv_path);

    auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference gradient suite");
    grad_cmd->add_option("--seed", seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*make_data) return run_make_data(kind, count, valid, test, length, seed, out_dir);
        if (*train_cmd) return run_train(config_path, resume_path, train_overrides);
        if (*eval_cmd) return run_eval(checkpoint_path, split, eval_overrides, eval_samples, csv_path);
        if (*sample_cmd) {
            return run_sample(checkpoint_path, sample_count, sample_steps, decode, prefix, seed, sample_out);
        }
        if (*interp_cmd) {
            return run_interpolate(checkpoint_path, from, to, interp_steps, interp_decode, max_length, seed, csv_path);
        }
        if (*grad_cmd) return run_grad_check(seed);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
