#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ohprl/learner.hpp"
#include "ohprl/sim_envs.hpp"

namespace ohprl {

/// What a checkpoint holds. The gate is absent for modes that never train one.
struct Checkpoint {
    Nets nets;
    bool has_gate = false;
    EnvId env_id = EnvId::PressButton;
    LearnerMode mode = LearnerMode::Ohprl;
    Ablation ablation = Ablation::None;
    std::uint64_t config_hash = 0;
    std::uint64_t env_steps = 0;
    std::uint64_t learner_steps = 0;

    int observation_dim() const { return static_cast<int>(nets.policy.input_dim()); }
};

/// File layout:
///   8 bytes   magic "OHPRLCK1"
///   8 bytes   manifest length L (little-endian u64)
///   L bytes   JSON manifest: run metadata plus, per parameter set, its name,
///             head tag, version, layer shapes/activations, and the offset and
///             count of its values in the payload
///   payload   little-endian IEEE-754 doubles; per layer the weight matrix in
///             row-major order followed by the bias
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);

/// Throws CheckpointError for missing files or malformed content.
Checkpoint load_checkpoint(const std::string& path);

/// Byte image of a checkpoint (what save_checkpoint writes).
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

}  // namespace ohprl
