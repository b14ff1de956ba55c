#include "ohprl/sim_envs.hpp"

#include <algorithm>
#include <cmath>

#include "ohprl/errors.hpp"

namespace ohprl {

namespace {

Vec2 clamp_unit_box(const Vec2& p) {
    return p.cwiseMax(0.0).cwiseMin(1.0);
}

// Geometry of the agent relative to the ball along the ball->goal line.
struct PushFrame {
    Vec2 dir;      // unit ball->goal
    Vec2 side;     // unit perpendicular pointing toward the agent
    double along;  // agent offset along dir (negative = behind the ball)
    double perp;   // agent distance from the line
};

PushFrame push_frame(const EnvState& s) {
    PushFrame f;
    const Vec2 to_goal = s.goal - s.ball;
    const double n = to_goal.norm();
    f.dir = n > 1e-12 ? Vec2(to_goal / n) : Vec2(1.0, 0.0);
    const Vec2 rel = s.agent - s.ball;
    f.along = rel.dot(f.dir);
    const Vec2 perp_vec = rel - f.along * f.dir;
    f.perp = perp_vec.norm();
    f.side = f.perp > 1e-9 ? Vec2(perp_vec / f.perp) : Vec2(-f.dir.y(), f.dir.x());
    return f;
}

double contact_distance(const EnvParams& p) { return p.agent_radius + p.ball_radius; }
double standoff(const EnvParams& p) { return contact_distance(p) + 0.02; }

bool ball_at_goal(const EnvParams& p, const EnvState& s) {
    return (s.ball - s.goal).norm() <= p.goal_radius;
}

// Smallest distance from point c to the segment a-b.
double segment_clearance(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((c - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + t * ab - c).norm();
}

constexpr double kPi = 3.14159265358979323846;

bool aligned_behind(const EnvParams& p, const EnvState&, const PushFrame& f) {
    return f.along < -0.5 * contact_distance(p) && f.perp < 0.6 * contact_distance(p);
}

}  // namespace

std::string_view to_string(EnvId id) {
    return id == EnvId::PressButton ? "press_button" : "push_ball";
}

EnvId env_id_from_string(std::string_view name) {
    if (name == "press_button") return EnvId::PressButton;
    if (name == "push_ball") return EnvId::PushBall;
    throw ConfigError("unknown env_id: " + std::string(name));
}

int observation_dim(EnvId id) { return id == EnvId::PressButton ? 7 : 11; }

Vector observe(const EnvParams& params, const EnvState& s) {
    const double time = static_cast<double>(s.t) / params.horizon(s.id);
    Vector obs(observation_dim(s.id));
    if (s.id == EnvId::PressButton) {
        obs << s.agent.x(), s.agent.y(), s.velocity.x(), s.velocity.y(), params.button_x - s.agent.x(),
            params.button_top - s.agent.y(), time;
    } else {
        // Ball velocity is rescaled to roughly unit range.
        const Vec2 bv = s.ball_velocity / params.a_max;
        const Vec2 to_ball = s.ball - s.agent;
        const Vec2 to_goal = s.goal - s.ball;
        obs << s.agent.x(), s.agent.y(), s.velocity.x(), s.velocity.y(), to_ball.x(), to_ball.y(), bv.x(), bv.y(),
            to_goal.x(), to_goal.y(), time;
    }
    return obs;
}

bool unsafe(const EnvParams& p, const EnvState& s) {
    if (s.id == EnvId::PressButton) {
        const double dx = std::abs(s.agent.x() - p.button_x);
        const double half = 0.5 * p.button_width;
        return dx > half && dx < half + p.side_band_width && s.agent.y() < p.button_top + p.side_band_margin;
    }
    const double wall = std::min({s.agent.x(), s.agent.y(), 1.0 - s.agent.x(), 1.0 - s.agent.y()});
    return wall < p.wall_band;
}

Vec2 reference_waypoint(const EnvParams& p, const EnvState& s) {
    if (s.id == EnvId::PressButton) {
        const double dx = std::abs(s.agent.x() - p.button_x);
        const double half = 0.5 * p.button_width;
        if (dx > half && s.agent.y() < p.button_top + p.approach_clearance) {
            return {s.agent.x(), p.button_top + p.approach_clearance};
        }
        if (dx <= 0.5 * half) return {p.button_x, s.agent.y() - p.approach_lookahead};
        return {p.button_x, s.agent.y()};
    }

    if (ball_at_goal(p, s)) return s.agent;
    const PushFrame f = push_frame(s);
    const double contact = contact_distance(p);
    const Vec2 behind = s.ball - standoff(p) * f.dir;
    // Push once lined up. The gain-2 controller mirrors around a fixed point
    // instead of settling on it, so reaching the behind point within 0.02 counts.
    const bool lined_up = f.along < -0.5 * contact && f.perp < 0.015;
    if (lined_up || (s.agent - behind).norm() < 0.02) return s.ball + 0.1 * f.dir;
    if (segment_clearance(s.agent, behind, s.ball) > contact + 0.01) return behind;

    // Orbit the ball at a safe radius, turning toward the behind point.
    const double radius = standoff(p) + 0.03;
    const Vec2 rel = s.agent - s.ball;
    const double angle = std::atan2(rel.y(), rel.x());
    const double goal_angle = std::atan2(-f.dir.y(), -f.dir.x());
    const double turn = std::clamp(std::remainder(goal_angle - angle, 2.0 * kPi), -0.6, 0.6);
    return s.ball + radius * Vec2(std::cos(angle + turn), std::sin(angle + turn));
}

double task_distance(const EnvParams& p, const EnvState& s) {
    if (s.id == EnvId::PressButton) {
        return (s.agent - Vec2(p.button_x, p.button_top)).norm();
    }
    const double gap = std::max(0.0, (s.agent - s.ball).norm() - contact_distance(p));
    return (s.ball - s.goal).norm() + 0.5 * gap;
}

bool in_safe_corridor(const EnvParams& p, const EnvState& s) {
    if (unsafe(p, s)) return false;
    if (s.id == EnvId::PressButton) {
        return std::abs(s.agent.x() - p.button_x) <= 0.5 * p.button_width && s.agent.y() > p.button_top;
    }
    return ball_at_goal(p, s) || aligned_behind(p, s, push_frame(s));
}

// ---------------------------------------------------------------------------

Env::Env(EnvId id, EnvParams params) : id_(id), params_(params) {
    state_.id = id;
}

StepResult Env::reset(std::uint64_t seed) {
    Rng rng(seed);
    state_ = EnvState{};
    state_.id = id_;
    if (id_ == EnvId::PressButton) {
        state_.agent = {uniform(rng, 0.1, 0.9), uniform(rng, 0.65, 0.9)};
    } else {
        state_.ball = {uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7)};
        do {
            state_.goal = {uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8)};
        } while ((state_.goal - state_.ball).norm() < 0.25);
        do {
            state_.agent = {uniform(rng, 0.15, 0.85), uniform(rng, 0.15, 0.85)};
        } while ((state_.agent - state_.ball).norm() < 0.15);
        state_.mu = uniform(rng, params_.mu_lo, params_.mu_hi);
    }
    active_ = true;
    StepResult r;
    r.observation = observe(params_, state_);
    return r;
}

void Env::set_agent(const Vec2& position) {
    state_.agent = clamp_unit_box(position);
    state_.velocity.setZero();
}

void Env::set_state(const EnvState& state) {
    if (state.id != id_) throw ConfigError("state belongs to a different environment");
    state_ = state;
    active_ = true;
}

StepResult Env::step(const Vector& action) {
    if (!active_) throw ProtocolError("step() called on a finished episode; call reset() first");
    if (action.size() != kActionDim) throw ShapeError("actions are 2-D");
    if (!action.allFinite()) throw NumericalError("env.step.action");
    const Vec2 a = Vec2(action(0), action(1)).cwiseMax(-1.0).cwiseMin(1.0);
    StepResult r = id_ == EnvId::PressButton ? step_press(a) : step_push(a);
    if (r.done > 0.0 || r.truncated) active_ = false;
    return r;
}

StepResult Env::step_press(const Vec2& a) {
    const EnvParams& p = params_;
    const Vec2 prev = state_.agent;
    Vec2 next = clamp_unit_box(prev + p.a_max * a);
    const double half = 0.5 * p.button_width;

    bool success = false;
    if (prev.y() > p.button_top && next.y() <= p.button_top) {
        const double frac = (prev.y() - p.button_top) / (prev.y() - next.y());
        const double x_cross = prev.x() + frac * (next.x() - prev.x());
        success = std::abs(x_cross - p.button_x) <= half;
    }
    if (!success && std::abs(next.x() - p.button_x) < half && next.y() < p.button_top) {
        // Side collision with the button body: stopped at its wall, inside the band.
        const double side = prev.x() < p.button_x ? -1.0 : 1.0;
        next.x() = p.button_x + side * (half + 1e-3);
    }

    state_.velocity = (next - prev) / p.a_max;
    state_.agent = next;
    state_.t += 1;

    StepResult r;
    r.success = success;
    r.reward = success ? 1.0 : 0.0;
    r.done = success ? 1.0 : 0.0;
    r.unsafe_contact = unsafe(p, state_);
    r.truncated = !success && state_.t >= p.press_horizon;
    r.observation = observe(p, state_);
    return r;
}

StepResult Env::step_push(const Vec2& a) {
    const EnvParams& p = params_;
    const Vec2 prev = state_.agent;
    const Vec2 next = clamp_unit_box(prev + p.a_max * a);
    const Vec2 disp = next - prev;
    const double contact = contact_distance(p);

    Vec2 ball = state_.ball;
    Vec2 bv = state_.ball_velocity;
    const Vec2 gap = ball - next;
    if (gap.norm() < contact) {
        Vec2 normal = gap.norm() > 1e-12 ? Vec2(gap.normalized())
                                         : (disp.norm() > 1e-12 ? Vec2(disp.normalized()) : Vec2(1.0, 0.0));
        const double push = disp.dot(normal);
        const double current = bv.dot(normal);
        if (push > current) bv += (push - current) * normal;
        ball = next + contact * normal;
    }

    ball += bv;
    bv *= (1.0 - state_.mu);
    if (bv.norm() < 1e-6) bv.setZero();
    for (int k = 0; k < 2; ++k) {
        if (ball(k) < p.ball_radius) {
            ball(k) = p.ball_radius;
            bv(k) = -p.wall_restitution * bv(k);
        } else if (ball(k) > 1.0 - p.ball_radius) {
            ball(k) = 1.0 - p.ball_radius;
            bv(k) = -p.wall_restitution * bv(k);
        }
    }

    state_.velocity = disp / p.a_max;
    state_.agent = next;
    state_.ball = ball;
    state_.ball_velocity = bv;
    state_.t += 1;

    const bool success = ball_at_goal(p, state_);
    StepResult r;
    r.success = success;
    r.reward = success ? 1.0 : 0.0;
    r.done = success ? 1.0 : 0.0;
    r.unsafe_contact = unsafe(p, state_);
    r.truncated = !success && state_.t >= p.push_horizon;
    r.observation = observe(p, state_);
    return r;
}

}  // namespace ohprl
