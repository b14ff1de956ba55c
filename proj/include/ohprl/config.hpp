#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ohprl/intervention.hpp"
#include "ohprl/learner.hpp"
#include "ohprl/sim_envs.hpp"

namespace ohprl {

/// Everything that describes one training run. Serialized as flat
/// `dotted.key = value` text; see configs/README in the repo for every key.
struct RunConfig {
    EnvId env_id = EnvId::PressButton;
    EnvParams env;
    LearnerConfig learner;
    InterventionMode intervention = InterventionMode::Oracle;
    OracleParams oracle;

    int prefill_demos = 20;
    int prefill_rollouts = 10;
    std::size_t online_capacity = 100000;
    std::size_t pref_capacity = 100000;

    std::uint64_t total_env_steps = 20000;
    /// Stop after this many completed episodes (0: no episode limit).
    std::uint64_t max_episodes = 0;
    std::uint64_t eval_every = 5000;
    std::uint64_t seed = 0;
    bool lockstep = true;

    int rolling_window = 20;
    double ema_k = 0.1;

    std::string run_dir = "runs/default";
    bool write_trace = true;

    std::string serve_bind = "127.0.0.1";
    int serve_port = 8765;
    double frame_rate = 20.0;
    /// When > 0, the actor loop sleeps so that it runs at most this many
    /// environment steps per second (used when a human drives the console).
    double pace_steps_per_second = 0.0;
};

/// Throws ConfigError on invalid values or combinations.
void validate(const RunConfig& config);

/// Applies one `key=value` assignment. Throws ConfigError on unknown keys or
/// unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses `key = value` lines; `#` starts a comment; blank lines ignored.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig load_config_file(const std::string& path);

/// Canonical text form (every key, sorted). parse_config_text(to_text(c)) == c.
std::string to_text(const RunConfig& config);

/// FNV-1a 64-bit hash of to_text(config).
std::uint64_t config_hash(const RunConfig& config);

/// All known keys with their current values.
std::map<std::string, std::string> to_key_values(const RunConfig& config);

}  // namespace ohprl
