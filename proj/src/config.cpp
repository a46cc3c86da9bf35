#include "latentseq/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "latentseq/errors.hpp"

namespace latentseq {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                      expected);
}

std::size_t parse_size(std::string_view key, std::string_view v) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
    return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
    return out;
}

std::int32_t parse_i32(std::string_view key, std::string_view v) {
    std::int32_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
    return out;
}

double parse_double(std::string_view key, std::string_view v) {
    const std::string s(v);
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(s, &used);
    } catch (const std::exception&) {
        bad_value(key, v, "a number");
    }
    if (used != s.size()) bad_value(key, v, "a number");
    return out;
}

bool parse_switch(std::string_view key, std::string_view v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    bad_value(key, v, "on/off");
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Field {
    std::function<void(TrainConfig&, std::string_view key, std::string_view value)> set;
    std::function<std::string(const TrainConfig&)> get;
};

#define SIZE_FIELD(member)                                                                                 \
    {                                                                                                      \
        #member, Field {                                                                                   \
            [](TrainConfig& c, std::string_view k, std::string_view v) { c.member = parse_size(k, v); },   \
                [](const TrainConfig& c) { return std::to_string(c.member); }                              \
        }                                                                                                  \
    }
#define DOUBLE_FIELD(name, member)                                                                         \
    {                                                                                                      \
        name, Field {                                                                                      \
            [](TrainConfig& c, std::string_view k, std::string_view v) { c.member = parse_double(k, v); }, \
                [](const TrainConfig& c) { return format_double(c.member); }                               \
        }                                                                                                  \
    }
#define STRING_FIELD(member)                                                                               \
    {                                                                                                      \
        #member, Field {                                                                                   \
            [](TrainConfig& c, std::string_view, std::string_view v) { c.member = std::string(v); },       \
                [](const TrainConfig& c) { return c.member; }                                              \
        }                                                                                                  \
    }

// Ordered as written to disk.
const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = {
        {"data_kind",
         Field{[](TrainConfig& c, std::string_view, std::string_view v) { c.data_kind = parse_observation_kind(v); },
               [](const TrainConfig& c) { return std::string(to_string(c.data_kind)); }}},
        STRING_FIELD(train_data),
        STRING_FIELD(valid_data),
        STRING_FIELD(test_data),
        STRING_FIELD(vocabulary),
        SIZE_FIELD(embed_dim),
        SIZE_FIELD(hidden_size),
        SIZE_FIELD(backward_hidden_size),
        SIZE_FIELD(z_dim),
        SIZE_FIELD(head_hidden),
        DOUBLE_FIELD("learning_rate", learning_rate),
        SIZE_FIELD(batch_size),
        DOUBLE_FIELD("alpha", alpha),
        DOUBLE_FIELD("beta", beta),
        {"kl_anneal",
         Field{[](TrainConfig& c, std::string_view k, std::string_view v) { c.kl_anneal.enabled = parse_switch(k, v); },
               [](const TrainConfig& c) { return std::string(c.kl_anneal.enabled ? "on" : "off"); }}},
        DOUBLE_FIELD("kl_anneal_start", kl_anneal.start),
        DOUBLE_FIELD("kl_anneal_increment", kl_anneal.increment),
        DOUBLE_FIELD("kl_anneal_cap", kl_anneal.cap),
        DOUBLE_FIELD("grad_clip_norm", grad_clip_norm),
        SIZE_FIELD(max_updates),
        SIZE_FIELD(eval_interval),
        SIZE_FIELD(eval_iwae_samples),
        SIZE_FIELD(eval_batch_size),
        SIZE_FIELD(max_seq_len),
        {"seed", Field{[](TrainConfig& c, std::string_view k, std::string_view v) { c.seed = parse_u64(k, v); },
                       [](const TrainConfig& c) { return std::to_string(c.seed); }}},
        SIZE_FIELD(threads),
        STRING_FIELD(output_dir),
        SIZE_FIELD(observation_width),
        {"end_id", Field{[](TrainConfig& c, std::string_view k, std::string_view v) { c.end_id = parse_i32(k, v); },
                         [](const TrainConfig& c) { return std::to_string(c.end_id); }}},
        DOUBLE_FIELD("norm_mean", norm_mean),
        DOUBLE_FIELD("norm_std", norm_std),
    };
    return table;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef STRING_FIELD

const Field& field(std::string_view key) {
    for (const auto& [name, f] : fields()) {
        if (name == key) return f;
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

void TrainConfig::validate() const {
    auto at_least_one = [](std::size_t v, const char* key) {
        if (v < 1) throw ConfigError(std::string("config key '") + key + "' must be >= 1");
    };
    at_least_one(hidden_size, "hidden_size");
    at_least_one(backward_hidden_size, "backward_hidden_size");
    at_least_one(z_dim, "z_dim");
    at_least_one(head_hidden, "head_hidden");
    at_least_one(batch_size, "batch_size");
    at_least_one(eval_batch_size, "eval_batch_size");
    if (data_kind == ObservationKind::tokens) at_least_one(embed_dim, "embed_dim");
    if (!(learning_rate > 0.0)) throw ConfigError("config key 'learning_rate' must be > 0");
    if (alpha < 0.0) throw ConfigError("config key 'alpha' must be >= 0");
    if (beta < 0.0) throw ConfigError("config key 'beta' must be >= 0");
    if (!(0.0 <= kl_anneal.start && kl_anneal.start <= kl_anneal.cap && kl_anneal.cap <= 1.0)) {
        throw ConfigError("config keys 'kl_anneal_start'/'kl_anneal_cap' must satisfy 0 <= start <= cap <= 1");
    }
    if (kl_anneal.increment < 0.0) throw ConfigError("config key 'kl_anneal_increment' must be >= 0");
    if (grad_clip_norm < 0.0) throw ConfigError("config key 'grad_clip_norm' must be >= 0");
    if (!(norm_std > 0.0)) throw ConfigError("config key 'norm_std' must be > 0");
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, f] : fields()) k.push_back(name);
        return k;
    }();
    return keys;
}

void set_config_value(TrainConfig& config, std::string_view key, std::string_view value) {
    field(key).set(config, key, trim(value));
}

std::string get_config_value(const TrainConfig& config, std::string_view key) { return field(key).get(config); }

TrainConfig parse_config(std::string_view text) {
    TrainConfig config;
    std::istringstream is{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value, got '" + stripped + "'");
        }
        const std::string key = trim(std::string_view(stripped).substr(0, eq));
        const std::string value = trim(std::string_view(stripped).substr(eq + 1));
        try {
            set_config_value(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return config;
}

TrainConfig read_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::string to_text(const TrainConfig& config) {
    std::string out;
    for (const auto& [name, f] : fields()) out += name + " = " + f.get(config) + "\n";
    return out;
}

ModelConfig model_config(const TrainConfig& config) {
    ModelConfig m;
    m.kind = config.data_kind;
    m.observation_width = config.observation_width;
    m.embed_dim = config.embed_dim;
    m.hidden_size = config.hidden_size;
    m.backward_hidden_size = config.backward_hidden_size;
    m.z_dim = config.z_dim;
    m.head_hidden = config.head_hidden;
    m.end_id = config.end_id;
    return m;
}

}  // namespace latentseq
