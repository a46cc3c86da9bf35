#include "latentseq/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "latentseq/binary_io.hpp"
#include "latentseq/errors.hpp"

namespace latentseq {

namespace {

constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

void write_values(std::ostream& os, const ad::Array<float>& a) {
    for (float v : a.data) binary::write_f32(os, v);
}

ad::Array<float> read_values(std::istream& is, const ad::Shape& shape) {
    ad::Array<float> a(shape);
    for (auto& v : a.data) v = binary::read_f32(is);
    return a;
}

}  // namespace

Checkpoint make_checkpoint(const TrainConfig& config, const SequenceModel<float>& model, const AdamState<float>& adam,
                           std::uint64_t next_update, double best_valid_elbo) {
    Checkpoint c;
    c.config = config;
    c.next_update = next_update;
    c.best_valid_elbo = best_valid_elbo;
    for (const auto& e : model.parameters().entries()) c.parameters.emplace_back(e.name, e.tensor.value());
    c.adam = adam;
    return c;
}

void write_checkpoint(std::ostream& os, const Checkpoint& c) {
    os.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
    binary::write_uint<std::uint32_t>(os, kCheckpointVersion);
    binary::write_string(os, to_text(c.config));
    binary::write_uint<std::uint64_t>(os, c.next_update);
    binary::write_f64(os, c.best_valid_elbo);

    binary::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(c.parameters.size()));
    for (const auto& [name, value] : c.parameters) {
        binary::write_string(os, name);
        binary::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(value.shape.size()));
        for (auto extent : value.shape) binary::write_uint<std::uint64_t>(os, extent);
        write_values(os, value);
    }

    const auto& adam = c.adam;
    if (adam.first_moment.size() != c.parameters.size() || adam.second_moment.size() != c.parameters.size()) {
        throw std::invalid_argument("write_checkpoint: optimizer state does not match the parameters");
    }
    binary::write_uint<std::uint64_t>(os, adam.step);
    binary::write_f64(os, adam.beta1);
    binary::write_f64(os, adam.beta2);
    binary::write_f64(os, adam.epsilon);
    binary::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(adam.first_moment.size()));
    for (std::size_t i = 0; i < adam.first_moment.size(); ++i) {
        if (adam.first_moment[i].shape != c.parameters[i].second.shape ||
            adam.second_moment[i].shape != c.parameters[i].second.shape) {
            throw std::invalid_argument("write_checkpoint: moment shape mismatch for '" + c.parameters[i].first + "'");
        }
        write_values(os, adam.first_moment[i]);
        write_values(os, adam.second_moment[i]);
    }
    if (!os) throw DataError("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& is) {
    std::string magic(kCheckpointMagic.size(), '\0');
    if (!is.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kCheckpointMagic) {
        throw DataError("not a checkpoint file (bad magic)");
    }
    const auto version = binary::read_uint<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    try {
        c.config = parse_config(binary::read_string(is));
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint config: ") + e.what());
    }
    c.next_update = binary::read_uint<std::uint64_t>(is);
    c.best_valid_elbo = binary::read_f64(is);

    const auto count = binary::read_uint<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = binary::read_string(is, 4096);
        const auto rank = binary::read_uint<std::uint32_t>(is);
        if (rank > kMaxRank) throw DataError("checkpoint parameter '" + name + "' has rank " + std::to_string(rank));
        ad::Shape shape;
        std::uint64_t elements = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            const auto extent = binary::read_uint<std::uint64_t>(is);
            elements *= extent;
            if (elements > kMaxElements) throw DataError("checkpoint parameter '" + name + "' is too large");
            shape.push_back(static_cast<std::size_t>(extent));
        }
        c.parameters.emplace_back(std::move(name), read_values(is, shape));
    }

    c.adam.step = binary::read_uint<std::uint64_t>(is);
    c.adam.beta1 = binary::read_f64(is);
    c.adam.beta2 = binary::read_f64(is);
    c.adam.epsilon = binary::read_f64(is);
    const auto moments = binary::read_uint<std::uint32_t>(is);
    if (moments != count) throw DataError("checkpoint optimizer state does not match the parameter count");
    for (std::uint32_t i = 0; i < moments; ++i) {
        const auto& shape = c.parameters[i].second.shape;
        c.adam.first_moment.push_back(read_values(is, shape));
        c.adam.second_moment.push_back(read_values(is, shape));
    }
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("cannot write checkpoint " + tmp.string());
        write_checkpoint(os, checkpoint);
        os.flush();
        if (!os) throw DataError("cannot write checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint " + path.string());
    try {
        return read_checkpoint(is);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

SequenceModel<float> restore_model(const Checkpoint& checkpoint) {
    SequenceModel<float> model(model_config(checkpoint.config), checkpoint.config.seed);
    auto& entries = model.parameters().entries();
    if (checkpoint.parameters.size() != entries.size()) {
        throw DataError("checkpoint holds " + std::to_string(checkpoint.parameters.size()) + " parameters, model has " +
                        std::to_string(entries.size()));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& [name, value] = checkpoint.parameters[i];
        if (name != entries[i].name) {
            throw DataError("checkpoint parameter '" + name + "' where the model expects '" + entries[i].name + "'");
        }
        if (value.shape != entries[i].tensor.shape()) {
            throw DataError("checkpoint parameter '" + name + "' has shape " + ad::to_string(value.shape) +
                            ", model expects " + ad::to_string(entries[i].tensor.shape()));
        }
        entries[i].tensor.mutable_value() = value;
    }
    return model;
}

}  // namespace latentseq
