#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "ohprl/nets.hpp"
#include "ohprl/rng.hpp"

namespace ohprl {

using Vec2 = Eigen::Vector2d;

enum class EnvId { PressButton, PushBall };

std::string_view to_string(EnvId id);
/// Throws ConfigError for anything other than press_button / push_ball.
EnvId env_id_from_string(std::string_view name);

/// Geometry and dynamics constants. All lengths in workspace units ([0,1]^2).
struct EnvParams {
    double a_max = 0.03;  // displacement per step at |action| = 1

    // press_button: the button is a block [bx - w/2, bx + w/2] x [0, top].
    int press_horizon = 100;
    double button_x = 0.5;
    double button_top = 0.2;
    double button_width = 0.12;
    double side_band_width = 0.08;
    double side_band_margin = 0.05;  // bands extend this far above the top face
    double approach_clearance = 0.07;
    double approach_lookahead = 0.05;

    // push_ball
    int push_horizon = 200;
    double agent_radius = 0.03;
    double ball_radius = 0.04;
    double goal_radius = 0.06;
    double wall_band = 0.06;  // agent closer than this to a wall is unsafe
    double mu_lo = 0.05;
    double mu_hi = 0.25;
    double wall_restitution = 0.5;

    int horizon(EnvId id) const { return id == EnvId::PressButton ? press_horizon : push_horizon; }
};

struct EnvState {
    EnvId id = EnvId::PressButton;
    Vec2 agent = Vec2::Zero();
    Vec2 velocity = Vec2::Zero();  // last displacement / a_max
    Vec2 ball = Vec2::Zero();
    Vec2 ball_velocity = Vec2::Zero();  // workspace units per step
    Vec2 goal = Vec2::Zero();
    double mu = 0.0;
    int t = 0;
};

struct StepResult {
    Vector observation;
    double reward = 0.0;
    double done = 0.0;
    bool success = false;
    bool unsafe_contact = false;
    bool truncated = false;
};

/// Observation width for an environment.
///   press_button: [px, py, vx, vy, bx - px, top - py, t/T]
///   push_ball:    [px, py, vx, vy, ox - px, oy - py, ovx, ovy, gx - ox, gy - oy, t/T]
int observation_dim(EnvId id);
inline constexpr int kActionDim = 2;

/// Builds the observation vector for a state.
Vector observe(const EnvParams& params, const EnvState& state);

/// Strict-interior unsafe predicate.
///   press_button: lateral bands beside the button, up to margin above its top.
///   push_ball:    agent within wall_band of any wall, where it pins the ball.
bool unsafe(const EnvParams& params, const EnvState& state);

/// Target point for the scripted intervenor.
///   press_button: nearest point of the vertical approach line above the
///                 button; descends along it once aligned, lifts first when
///                 the agent is low and beside the button.
///   push_ball:    behind the ball on the ball->goal line (with a sidestep
///                 when the agent is on the wrong side); the agent itself when
///                 the ball is already at the goal.
Vec2 reference_waypoint(const EnvParams& params, const EnvState& state);

/// Distance-to-completion used for stall detection.
double task_distance(const EnvParams& params, const EnvState& state);

/// Where the oracle hands control back.
bool in_safe_corridor(const EnvParams& params, const EnvState& state);

/// Deterministic 2-D point-mass environment. One instance per actor loop.
class Env {
public:
    Env(EnvId id, EnvParams params = {});

    StepResult reset(std::uint64_t seed);
    /// Throws ProtocolError after a terminal or truncated step until reset().
    StepResult step(const Vector& action);

    /// Places the agent (velocity zeroed) and recomputes nothing else; for tests and grids.
    void set_agent(const Vec2& position);
    void set_state(const EnvState& state);

    EnvId id() const { return id_; }
    const EnvParams& params() const { return params_; }
    const EnvState& state() const { return state_; }
    int horizon() const { return params_.horizon(id_); }
    bool episode_active() const { return active_; }
    Vector observation() const { return observe(params_, state_); }

private:
    StepResult step_press(const Vec2& action);
    StepResult step_push(const Vec2& action);

    EnvId id_;
    EnvParams params_;
    EnvState state_;
    bool active_ = false;
};

}  // namespace ohprl
