#include "ohprl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ohprl/errors.hpp"

namespace ohprl {

namespace {

constexpr char kMagic[8] = {'O', 'H', 'P', 'R', 'L', 'C', 'K', '1'};

void put_u64(std::string& out, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + k])) << (8 * k);
    return v;
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }
double get_f64(const std::string& in, std::size_t pos) { return std::bit_cast<double>(get_u64(in, pos)); }

struct Named {
    const char* name;
    const ParamSet* params;
};

nlohmann::json manifest_entry(const std::string& name, const ParamSet& p, std::size_t offset) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : p.layers) {
        layers.push_back({{"out", l.weight.rows()}, {"in", l.weight.cols()},
                          {"activation", std::string(to_string(l.activation))}});
    }
    return {{"name", name},
            {"head", std::string(to_string(p.head))},
            {"version", p.version},
            {"layers", layers},
            {"offset", offset},
            {"count", p.parameter_count()}};
}

ParamSet read_param_set(const nlohmann::json& entry, const std::string& bytes, std::size_t payload_start) {
    ParamSet p;
    p.head = head_from_string(entry.at("head").get<std::string>());
    p.version = entry.at("version").get<std::uint64_t>();
    std::size_t cursor = payload_start + 8 * entry.at("offset").get<std::size_t>();
    const std::size_t count = entry.at("count").get<std::size_t>();
    if (cursor + 8 * count > bytes.size()) throw CheckpointError("checkpoint payload truncated");
    std::size_t seen = 0;
    for (const auto& lj : entry.at("layers")) {
        Layer l;
        const auto out = lj.at("out").get<Eigen::Index>();
        const auto in = lj.at("in").get<Eigen::Index>();
        if (out <= 0 || in <= 0) throw CheckpointError("invalid layer shape in checkpoint");
        l.activation = activation_from_string(lj.at("activation").get<std::string>());
        l.weight.resize(out, in);
        l.bias.resize(out);
        for (Eigen::Index r = 0; r < out; ++r) {
            for (Eigen::Index c = 0; c < in; ++c, cursor += 8) l.weight(r, c) = get_f64(bytes, cursor);
        }
        for (Eigen::Index r = 0; r < out; ++r, cursor += 8) l.bias(r) = get_f64(bytes, cursor);
        seen += static_cast<std::size_t>(out * in + out);
        p.layers.push_back(std::move(l));
    }
    if (seen != count) throw CheckpointError("checkpoint manifest count mismatch");
    return p;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
    std::vector<Named> sets{{"policy", &ck.nets.policy},
                            {"critic_first", &ck.nets.critic.first},
                            {"critic_second", &ck.nets.critic.second},
                            {"target_first", &ck.nets.target.first},
                            {"target_second", &ck.nets.target.second}};
    if (ck.has_gate) sets.push_back({"gate", &ck.nets.gate});

    nlohmann::json manifest;
    manifest["format"] = "ohprl-checkpoint";
    manifest["format_version"] = 1;
    manifest["env_id"] = std::string(to_string(ck.env_id));
    manifest["observation_dim"] = ck.nets.policy.input_dim();
    manifest["mode"] = std::string(to_string(ck.mode));
    manifest["ablation"] = std::string(to_string(ck.ablation));
    // Stored as a string: JSON numbers lose precision above 2^53 in other readers.
    manifest["config_hash"] = std::to_string(ck.config_hash);
    manifest["env_steps"] = ck.env_steps;
    manifest["learner_steps"] = ck.learner_steps;
    manifest["byte_order"] = "little";
    manifest["dtype"] = "float64";
    nlohmann::json params = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& s : sets) {
        params.push_back(manifest_entry(s.name, *s.params, offset));
        offset += s.params->parameter_count();
    }
    manifest["param_sets"] = params;

    const std::string text = manifest.dump();
    std::string out(kMagic, sizeof kMagic);
    put_u64(out, text.size());
    out += text;
    out.reserve(out.size() + 8 * offset);
    for (const auto& s : sets) {
        for (const auto& l : s.params->layers) {
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
                for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put_f64(out, l.weight(r, c));
            }
            for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_f64(out, l.bias(r));
        }
    }
    return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw CheckpointError("not an ohprl checkpoint");
    }
    const std::uint64_t len = get_u64(bytes, 8);
    if (16 + len > bytes.size()) throw CheckpointError("checkpoint manifest truncated");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.substr(16, len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("bad checkpoint manifest: ") + e.what());
    }
    const std::size_t payload = 16 + len;

    Checkpoint ck;
    try {
        ck.env_id = env_id_from_string(manifest.at("env_id").get<std::string>());
        ck.mode = learner_mode_from_string(manifest.at("mode").get<std::string>());
        ck.ablation = ablation_from_string(manifest.at("ablation").get<std::string>());
        ck.config_hash = std::stoull(manifest.at("config_hash").get<std::string>());
        ck.env_steps = manifest.at("env_steps").get<std::uint64_t>();
        ck.learner_steps = manifest.at("learner_steps").get<std::uint64_t>();
        bool have_policy = false;
        for (const auto& entry : manifest.at("param_sets")) {
            const auto name = entry.at("name").get<std::string>();
            ParamSet p = read_param_set(entry, bytes, payload);
            if (name == "policy") {
                ck.nets.policy = std::move(p);
                have_policy = true;
            } else if (name == "critic_first") {
                ck.nets.critic.first = std::move(p);
            } else if (name == "critic_second") {
                ck.nets.critic.second = std::move(p);
            } else if (name == "target_first") {
                ck.nets.target.first = std::move(p);
            } else if (name == "target_second") {
                ck.nets.target.second = std::move(p);
            } else if (name == "gate") {
                ck.nets.gate = std::move(p);
                ck.has_gate = true;
            } else {
                throw CheckpointError("unknown parameter set in checkpoint: " + name);
            }
        }
        if (!have_policy) throw CheckpointError("checkpoint has no policy parameters");
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("bad checkpoint manifest: ") + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("bad checkpoint manifest: ") + e.what());
    }
    return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint: " + path);
    const std::string bytes = serialize_checkpoint(checkpoint);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str());
}

}  // namespace ohprl
