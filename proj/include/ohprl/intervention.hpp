#pragma once

#include <mutex>
#include <optional>
#include <string_view>

#include "ohprl/rng.hpp"
#include "ohprl/sim_envs.hpp"
#include "ohprl/transition.hpp"

namespace ohprl {

enum class InterventionMode { None, Oracle, OracleSafeRegion, HumanBridge };
enum class TriggerReason { None, UnsafeEntry, Stall, Human };

std::string_view to_string(InterventionMode mode);
InterventionMode intervention_mode_from_string(std::string_view name);
std::string_view to_string(TriggerReason reason);

struct InterventionDecision {
    bool active = false;
    std::optional<Vec2> override_action;
    TriggerReason reason = TriggerReason::None;
};

struct OracleParams {
    int stall_steps = 15;        // M: steps without a new best task distance
    double progress_tol = 1e-3;  // improvement needed to count as progress
    double kp = 2.0;
    int release_steps = 3;       // consecutive in-corridor steps before hand-back
    Vec2 press_safe_pose{0.5, 0.6};
    Vec2 push_safe_pose{0.5, 0.5};
    double safe_radius = 0.05;

    const Vec2& safe_pose(EnvId id) const { return id == EnvId::PressButton ? press_safe_pose : push_safe_pose; }
};

/// Per-episode bookkeeping the oracle needs. Reset at every episode start.
struct EpisodeHistory {
    double best_distance = 0.0;
    int steps_since_progress = 0;
    bool latched = false;
    TriggerReason latched_reason = TriggerReason::None;
    int release_streak = 0;

    static EpisodeHistory start(const EnvParams& params, const EnvState& state);
};

/// Single-slot override mailbox written by the console service and read by
/// the actor loop. Last write wins; each posted override is consumed once.
class OverrideMailbox {
public:
    /// Stores the action clamped to [-1, 1]^2.
    void post(const Vec2& action);
    void end();
    std::optional<Vec2> take();
    bool pending() const;

private:
    mutable std::mutex mutex_;
    std::optional<Vec2> slot_;
};

/// Proportional command toward a point, kp * (target - p) / a_max, scaled
/// down (direction kept) when any component exceeds 1.
Vec2 steer_toward(const EnvParams& env, const OracleParams& oracle, const Vec2& from, const Vec2& to);

/// Safe-region command: unit(safe_pose - p) scaled by min(1, kp * dist / a_max).
Vec2 steer_to_safe_pose(const EnvParams& env, const OracleParams& oracle, const EnvState& state);

/// The oracle's override command for the current state (ignores triggers).
Vec2 oracle_action(const EnvParams& env, const OracleParams& oracle, InterventionMode mode,
                   const EnvState& state);

/// Decides whether to override this step. Pure except for HumanBridge, which
/// consumes the mailbox slot.
InterventionDecision decide(InterventionMode mode, const OracleParams& oracle, const EnvParams& env,
                            const EnvState& state, const Vector& policy_action, const EpisodeHistory& history,
                            OverrideMailbox* mailbox = nullptr);

/// Updates progress/latch bookkeeping after the step was executed.
void advance_history(EpisodeHistory& history, InterventionMode mode, const OracleParams& oracle,
                     const EnvParams& env, const InterventionDecision& decision, const EnvState& next_state);

/// a_p is the intervenor action; a_w the policy proposal, or a uniform draw
/// from the action box when there is no proposal.
PreferenceTuple make_preference_tuple(const Vector& state, const Vector& preferred,
                                      const std::optional<Vector>& policy_action, double reward, double done,
                                      const Vector& next_state, Rng& rng);

}  // namespace ohprl
