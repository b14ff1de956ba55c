#include "ohprl/intervention.hpp"

#include <algorithm>

#include "ohprl/errors.hpp"

namespace ohprl {

namespace {

Vec2 box_clamp(const Vec2& v) { return v.cwiseMax(-1.0).cwiseMin(1.0); }

bool release_region(InterventionMode mode, const OracleParams& oracle, const EnvParams& env,
                    const EnvState& state) {
    if (mode == InterventionMode::OracleSafeRegion) {
        return !unsafe(env, state) && (state.agent - oracle.safe_pose(state.id)).norm() <= oracle.safe_radius;
    }
    return in_safe_corridor(env, state);
}

}  // namespace

std::string_view to_string(InterventionMode mode) {
    switch (mode) {
        case InterventionMode::None: return "none";
        case InterventionMode::Oracle: return "oracle";
        case InterventionMode::OracleSafeRegion: return "oracle_safe_region";
        case InterventionMode::HumanBridge: return "human_bridge";
    }
    return "none";
}

InterventionMode intervention_mode_from_string(std::string_view name) {
    if (name == "none") return InterventionMode::None;
    if (name == "oracle") return InterventionMode::Oracle;
    if (name == "oracle_safe_region") return InterventionMode::OracleSafeRegion;
    if (name == "human_bridge") return InterventionMode::HumanBridge;
    throw ConfigError("unknown intervention mode: " + std::string(name));
}

std::string_view to_string(TriggerReason reason) {
    switch (reason) {
        case TriggerReason::None: return "none";
        case TriggerReason::UnsafeEntry: return "unsafe_entry";
        case TriggerReason::Stall: return "stall";
        case TriggerReason::Human: return "human";
    }
    return "none";
}

EpisodeHistory EpisodeHistory::start(const EnvParams& params, const EnvState& state) {
    EpisodeHistory h;
    h.best_distance = task_distance(params, state);
    return h;
}

void OverrideMailbox::post(const Vec2& action) {
    std::lock_guard lock(mutex_);
    slot_ = box_clamp(action);
}

void OverrideMailbox::end() {
    std::lock_guard lock(mutex_);
    slot_.reset();
}

std::optional<Vec2> OverrideMailbox::take() {
    std::lock_guard lock(mutex_);
    std::optional<Vec2> out;
    out.swap(slot_);
    return out;
}

bool OverrideMailbox::pending() const {
    std::lock_guard lock(mutex_);
    return slot_.has_value();
}

Vec2 steer_toward(const EnvParams& env, const OracleParams& oracle, const Vec2& from, const Vec2& to) {
    const Vec2 command = oracle.kp * (to - from) / env.a_max;
    // Saturate onto the box by scaling so the heading is kept.
    const double peak = command.cwiseAbs().maxCoeff();
    return peak > 1.0 ? Vec2(command / peak) : command;
}

Vec2 steer_to_safe_pose(const EnvParams& env, const OracleParams& oracle, const EnvState& state) {
    const Vec2 delta = oracle.safe_pose(state.id) - state.agent;
    const double dist = delta.norm();
    if (dist < 1e-12) return Vec2::Zero();
    return box_clamp(delta / dist * std::min(1.0, oracle.kp * dist / env.a_max));
}

Vec2 oracle_action(const EnvParams& env, const OracleParams& oracle, InterventionMode mode,
                   const EnvState& state) {
    if (mode == InterventionMode::OracleSafeRegion) return steer_to_safe_pose(env, oracle, state);
    return steer_toward(env, oracle, state.agent, reference_waypoint(env, state));
}

InterventionDecision decide(InterventionMode mode, const OracleParams& oracle, const EnvParams& env,
                            const EnvState& state, const Vector& policy_action, const EpisodeHistory& history,
                            OverrideMailbox* mailbox) {
    if (policy_action.size() != kActionDim) throw ShapeError("policy action must be 2-D");
    InterventionDecision d;
    switch (mode) {
        case InterventionMode::None:
            return d;
        case InterventionMode::HumanBridge: {
            if (mailbox == nullptr) return d;
            if (auto action = mailbox->take()) {
                d.active = true;
                d.override_action = box_clamp(*action);
                d.reason = TriggerReason::Human;
            }
            return d;
        }
        case InterventionMode::Oracle:
        case InterventionMode::OracleSafeRegion: {
            if (history.latched) {
                d.reason = history.latched_reason;
            } else if (unsafe(env, state)) {
                d.reason = TriggerReason::UnsafeEntry;
            } else if (history.steps_since_progress >= oracle.stall_steps) {
                d.reason = TriggerReason::Stall;
            } else {
                return d;
            }
            d.active = true;
            d.override_action = oracle_action(env, oracle, mode, state);
            return d;
        }
    }
    throw ConfigError("unknown intervention mode");
}

void advance_history(EpisodeHistory& history, InterventionMode mode, const OracleParams& oracle,
                     const EnvParams& env, const InterventionDecision& decision, const EnvState& next_state) {
    const double dist = task_distance(env, next_state);
    if (dist < history.best_distance - oracle.progress_tol) {
        history.best_distance = dist;
        history.steps_since_progress = 0;
    } else {
        ++history.steps_since_progress;
    }

    const bool oracle_mode = mode == InterventionMode::Oracle || mode == InterventionMode::OracleSafeRegion;
    if (!oracle_mode || !decision.active) return;

    history.latched = true;
    history.latched_reason = decision.reason;
    if (release_region(mode, oracle, env, next_state)) {
        ++history.release_streak;
    } else {
        history.release_streak = 0;
    }
    if (history.release_streak >= oracle.release_steps) {
        history.latched = false;
        history.latched_reason = TriggerReason::None;
        history.release_streak = 0;
        history.steps_since_progress = 0;
        history.best_distance = dist;
    }
}

PreferenceTuple make_preference_tuple(const Vector& state, const Vector& preferred,
                                      const std::optional<Vector>& policy_action, double reward, double done,
                                      const Vector& next_state, Rng& rng) {
    PreferenceTuple t;
    t.state = state;
    t.preferred = preferred;
    if (policy_action) {
        t.weak = *policy_action;
    } else {
        t.weak.resize(preferred.size());
        for (Eigen::Index i = 0; i < t.weak.size(); ++i) t.weak(i) = uniform(rng, -1.0, 1.0);
    }
    t.reward = reward;
    t.done = done;
    t.next_state = next_state;
    return t;
}

}  // namespace ohprl
