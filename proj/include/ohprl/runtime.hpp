#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ohprl/checkpoint.hpp"
#include "ohprl/config.hpp"
#include "ohprl/intervention.hpp"
#include "ohprl/learner.hpp"
#include "ohprl/metrics.hpp"
#include "ohprl/replay.hpp"
#include "ohprl/sim_envs.hpp"
#include "ohprl/trace.hpp"

namespace ohprl {

/// Single-slot published policy. The learner publishes, the actor reads;
/// last write wins. Snapshots are immutable.
class ParamMailbox {
public:
    void publish(ParamSet policy);
    std::shared_ptr<const ParamSet> latest() const;
    std::uint64_t version() const;

private:
    mutable std::mutex mutex_;
    std::shared_ptr<const ParamSet> current_;
};

/// Latest state frame and metrics row, shared with the console service.
struct LiveFrame {
    std::uint64_t sequence = 0;  // bumps on every actor step
    EnvId env_id = EnvId::PressButton;
    std::uint64_t episode = 0;
    int t = 0;
    Vec2 agent = Vec2::Zero();
    Vec2 ball = Vec2::Zero();
    Vec2 goal = Vec2::Zero();
    Vec2 action = Vec2::Zero();
    bool success = false;
    bool unsafe_contact = false;
    bool truncated = false;
    bool intervened = false;
    TriggerReason reason = TriggerReason::None;
    std::uint64_t param_version = 0;
    std::uint64_t pref_inserted = 0;
};

class LiveState {
public:
    void set_frame(const LiveFrame& frame);
    LiveFrame frame() const;
    void set_metrics(const std::string& csv_row);
    /// Latest metrics row and a counter that bumps with every new row.
    std::pair<std::string, std::uint64_t> metrics() const;
    void set_finished();
    bool finished() const;

private:
    mutable std::mutex mutex_;
    LiveFrame frame_;
    std::string metrics_row_;
    std::uint64_t metrics_count_ = 0;
    bool finished_ = false;
};

/// Pluggable per-step override source.
using Intervenor =
    std::function<InterventionDecision(const EnvState& state, const Vector& policy_action, const EpisodeHistory&)>;

/// Builds the intervenor for config.intervention (oracle variants, human bridge, none).
Intervenor make_intervenor(const RunConfig& config, OverrideMailbox* mailbox);

/// Seed of the k-th episode for a purpose stream (training, demos, rollouts).
enum class SeedStream : std::uint64_t { Training = 7, Demos = 8, Rollouts = 9 };
std::uint64_t episode_seed(std::uint64_t run_seed, SeedStream stream, std::uint64_t k);

/// Runs the scripted oracle alone for one episode.
Episode run_oracle_episode(EnvId id, const EnvParams& env, const OracleParams& oracle, std::uint64_t seed);

/// Runs a stochastic policy without intervention for one episode.
Episode run_policy_episode(EnvId id, const EnvParams& env, const ParamSet& policy, std::uint64_t seed, Rng& noise);

/// Successful oracle demonstrations; failed attempts are skipped.
std::vector<Episode> generate_demos(const RunConfig& config, int count);
std::vector<Episode> generate_rollouts(const RunConfig& config, const ParamSet& policy, int count);

/// Per-step actor: refresh the policy snapshot, propose, ask the intervenor,
/// execute, store one Transition or one PreferenceTuple, emit an
/// EpisodeRecord at episode end.
class ActorLoop {
public:
    ActorLoop(const RunConfig& config, BufferPair& buffers, const ParamMailbox& params, Intervenor intervenor,
              TraceWriter* trace = nullptr, LiveState* live = nullptr);

    std::optional<EpisodeRecord> step();

    std::uint64_t env_steps() const { return env_steps_; }
    std::uint64_t episodes() const { return episode_; }
    std::uint64_t policy_version() const { return policy_->version; }
    const Env& env() const { return env_; }

private:
    void begin_episode();

    const RunConfig& config_;
    BufferPair& buffers_;
    const ParamMailbox& params_;
    Intervenor intervenor_;
    TraceWriter* trace_;
    LiveState* live_;

    Env env_;
    std::shared_ptr<const ParamSet> policy_;
    Rng noise_rng_;
    Rng prior_rng_;
    EpisodeHistory history_;
    Vector obs_;
    std::uint64_t episode_ = 0;
    std::uint64_t episode_seed_ = 0;
    std::uint64_t env_steps_ = 0;
    int ep_len_ = 0;
    int ep_intervened_ = 0;
    std::chrono::steady_clock::time_point ep_start_;
    std::chrono::steady_clock::time_point next_tick_;
};

struct TrainHooks {
    OverrideMailbox* overrides = nullptr;  // required for human_bridge
    LiveState* live = nullptr;
    const std::atomic<bool>* stop = nullptr;
    /// Replaces the configured intervenor (tests use this for forced overrides).
    Intervenor intervenor;
};

struct TrainResult {
    std::string run_dir;  // empty when no files were written
    Nets nets;
    BufferPair buffers;
    std::vector<EpisodeRecord> episodes;
    double final_rolling_success = 0.0;
    double final_intervention_ema = 0.0;
    std::uint64_t env_steps = 0;
    std::uint64_t learner_steps = 0;
    std::size_t prefill_online = 0;
    std::size_t prefill_pref = 0;
    std::optional<UpdateReport> last_report;
};

/// Prefill, then run actor and learner (lockstep: exactly utd learner steps
/// after every env step on one thread; otherwise two threads) until
/// total_env_steps. Writes config.txt, metrics.csv, updates.csv, trace.jsonl,
/// periodic and final checkpoints into run_dir unless run_dir is empty.
/// A non-finite loss aborts with a NumericalError naming stage and step.
TrainResult train(const RunConfig& config, const TrainHooks& hooks = {});

Checkpoint make_checkpoint(const RunConfig& config, const Nets& nets, std::uint64_t env_steps,
                           std::uint64_t learner_steps);

struct EvalResult {
    double success_rate = 0.0;
    double mean_episode_length = 0.0;
    double mean_wall_seconds = 0.0;
    int episodes = 0;
};

using PolicyFn = std::function<Vector(const Env& env, const Vector& observation)>;

/// Runs one episode per seed without intervention. Throws ValidationError when seeds is empty.
EvalResult evaluate_policy(EnvId id, const EnvParams& env, std::span<const std::uint64_t> seeds,
                           const PolicyFn& policy);

/// Deterministic evaluation (a = tanh(mean)) of a checkpoint's policy. Throws
/// ShapeError when the checkpoint was trained on a different observation width.
EvalResult evaluate(const Checkpoint& checkpoint, EnvId id, const EnvParams& env,
                    std::span<const std::uint64_t> seeds);

/// Seeds disjoint from every training/demo/rollout stream.
std::vector<std::uint64_t> held_out_seeds(int n, std::uint64_t base = 1000000);

struct GateFieldRow {
    double x = 0.0;
    double y = 0.0;
    double beta = 0.0;
};

/// beta over a resolution x resolution lattice of agent positions (cell
/// centers); the other observation features come from the seed-0 reset state.
/// Throws CheckpointError when the checkpoint has no gate.
std::vector<GateFieldRow> export_gate_field(const Checkpoint& checkpoint, EnvId id, const EnvParams& env,
                                            int resolution);

void write_gate_field_csv(const std::string& path, const std::vector<GateFieldRow>& rows);

}  // namespace ohprl
