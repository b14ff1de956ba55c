#pragma once

// Learner fixtures shared by the unit tests and the acceptance runner.

#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "ohprl/learner.hpp"
#include "ohprl/replay.hpp"
#include "ohprl/rng.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace ohprl;

inline constexpr int kObs = 4;
inline constexpr int kAct = 2;

inline Nets small_nets(std::uint64_t seed, std::vector<int> hidden = {8, 8}) {
    return make_nets(kObs, kAct, hidden, seed);
}

inline Vector uniform_vector(Rng& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, lo, hi);
    return v;
}

inline std::vector<Transition> transitions(Rng& rng, int n) {
    std::vector<Transition> out;
    for (int k = 0; k < n; ++k) {
        const double r = uniform01(rng) < 0.3 ? 1.0 : 0.0;
        out.push_back({uniform_vector(rng, kObs), uniform_vector(rng, kAct, -0.9, 0.9), r, r,
                       uniform_vector(rng, kObs)});
    }
    return out;
}

inline std::vector<PreferenceTuple> tuples(Rng& rng, int n) {
    std::vector<PreferenceTuple> out;
    for (int k = 0; k < n; ++k) {
        out.push_back({uniform_vector(rng, kObs), uniform_vector(rng, kAct, -0.9, 0.9),
                       uniform_vector(rng, kAct, -0.9, 0.9), 0.0, 0.0, uniform_vector(rng, kObs)});
    }
    return out;
}

inline bool bit_equal(const ParamSet& a, const ParamSet& b) {
    if (!same_manifest(a, b)) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        const auto& wa = a.layers[k].weight;
        const auto& ba = a.layers[k].bias;
        if (std::memcmp(wa.data(), b.layers[k].weight.data(), sizeof(double) * wa.size()) != 0) return false;
        if (std::memcmp(ba.data(), b.layers[k].bias.data(), sizeof(double) * ba.size()) != 0) return false;
    }
    return true;
}

inline bool bit_equal(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || std::memcmp(&*a, &*b, sizeof(double)) == 0;
}

// ---------------------------------------------------------------------------
// Finite-difference checks of the five learner losses. Each returns the max
// relative error between analytic and central-difference gradients.

struct GradientCase {
    const char* name;
    double max_relative_error;
    std::size_t entries;
};

inline std::vector<GradientCase> gradient_cases(std::uint64_t seed, double h = 1e-5) {
    Rng rng(seed);
    Nets nets = small_nets(seed);
    const int n = 6;
    const TransitionBatch batch = stack(transitions(rng, n));
    const PreferenceBatch pref = stack(tuples(rng, n));
    const Matrix noise = normal_matrix(rng, kAct, n);
    const double alpha = 0.1;
    std::vector<GradientCase> out;

    {
        const Vector y = uniform_vector(rng, n, -1.0, 2.0);
        const CriticLossGrad cl = critic_loss(batch, nets.critic, y, true);
        CriticPair probe = nets.critic;
        auto loss = [&] { return critic_loss(batch, probe, y, true).loss; };
        auto fd1 = oracle::finite_difference(probe.first, loss, h);
        auto fd2 = oracle::finite_difference(probe.second, loss, h);
        auto g1 = oracle::flatten(cl.first);
        auto g2 = oracle::flatten(cl.second);
        fd1.insert(fd1.end(), fd2.begin(), fd2.end());
        g1.insert(g1.end(), g2.begin(), g2.end());
        out.push_back({"critic_loss", oracle::max_relative_error(g1, fd1), g1.size()});
    }
    {
        const LossGrad al = actor_loss(batch.states, nets.policy, nets.critic, alpha, true, noise);
        ParamSet probe = nets.policy;
        const auto fd = oracle::finite_difference(
            probe, [&] { return actor_loss(batch.states, probe, nets.critic, alpha, true, noise).loss; }, h);
        const auto g = oracle::flatten(al.grad);
        out.push_back({"actor_loss", oracle::max_relative_error(g, fd), g.size()});
    }
    {
        const LossGrad og = online_gate_loss(batch.states, nets.gate);
        ParamSet probe = nets.gate;
        const auto fd =
            oracle::finite_difference(probe, [&] { return online_gate_loss(batch.states, probe).loss; }, h);
        const auto g = oracle::flatten(og.grad);
        out.push_back({"online_gate_loss", oracle::max_relative_error(g, fd), g.size()});
    }
    {
        const Vector targets = uniform_vector(rng, n, 0.05, 0.95);
        const LossGrad pg = preference_gate_loss(pref.states, nets.gate, targets);
        ParamSet probe = nets.gate;
        const auto fd = oracle::finite_difference(
            probe, [&] { return preference_gate_loss(pref.states, probe, targets).loss; }, h);
        const auto g = oracle::flatten(pg.grad);
        out.push_back({"preference_gate_loss", oracle::max_relative_error(g, fd), g.size()});
    }
    {
        const Vector beta = uniform_vector(rng, n, 0.1, 0.9);
        const LossGrad pa = preference_actor_loss(pref, nets.policy, beta, noise);
        ParamSet probe = nets.policy;
        const auto fd = oracle::finite_difference(
            probe, [&] { return preference_actor_loss(pref, probe, beta, noise).loss; }, h);
        const auto g = oracle::flatten(pa.grad);
        out.push_back({"preference_actor_loss", oracle::max_relative_error(g, fd), g.size()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Closed-form values.

inline ParamSet constant_critic(double value, int in = kObs + kAct) {
    ParamSet q = init_params(std::vector<int>{in, 1}, Head::Critic, 0);
    q.layers[0].weight.setZero();
    q.layers[0].bias(0) = value;
    return q;
}

/// Single-layer policy with zero weights: mean and log_std come from the bias.
inline ParamSet constant_policy(double mean0, double mean1, double log_std) {
    ParamSet p = init_params(std::vector<int>{kObs, 2 * kAct}, Head::Policy, 0);
    p.layers[0].weight.setZero();
    p.layers[0].bias << mean0, mean1, log_std, log_std;
    return p;
}

/// log_std that makes log pi(a~|s) = -1 at zero noise and zero mean.
inline double log_std_for_unit_log_prob() {
    return 0.5 * (1.0 - std::log(2.0 * std::numbers::pi) - 2.0 * std::log(1.0 + kTanhEpsilon));
}

struct ClosedForm {
    const char* name;
    double value;
    double expected;
};

inline std::vector<ClosedForm> closed_forms() {
    std::vector<ClosedForm> out;
    const Vector s = Vector::Constant(kObs, 0.3);
    const Vector a = Vector::Constant(kAct, 0.1);

    {
        // r = 0, d = 0, gamma 0.99, Q_target 2.0, log pi = -1.0, alpha 0.1.
        const TransitionBatch b = stack(std::vector<Transition>{{s, a, 0.0, 0.0, s}});
        const ParamSet policy = constant_policy(0.0, 0.0, log_std_for_unit_log_prob());
        const CriticPair target{constant_critic(2.0), constant_critic(2.0)};
        const Vector y = critic_target(b, policy, target, 0.99, 0.1, true, Matrix::Zero(kAct, 1));
        out.push_back({"critic_target y = 2.079", y(0), 2.079});
        const double log_prob = policy_sample(policy, s, Vector::Zero(kAct)).log_prob;
        out.push_back({"critic_target fixture log pi = -1", log_prob, -1.0});
    }
    {
        Rng rng(3);
        const TransitionBatch b = stack(std::vector<Transition>{{s, a, 1.0, 1.0, uniform_vector(rng, kObs)}});
        const Nets nets = small_nets(5);
        const Vector y = critic_target(b, nets.policy, nets.target, 0.99, 0.1, true, normal_matrix(rng, kAct, 1));
        out.push_back({"critic_target terminal y = 1", y(0), 1.0});
    }
    {
        const TransitionBatch b = stack(std::vector<Transition>{{s, a, 0.0, 0.0, s}});
        const CriticPair critic{constant_critic(0.0), constant_critic(0.0)};
        out.push_back({"critic_loss Q = 0, y = 2", critic_loss(b, critic, Vector::Constant(1, 2.0), false).loss, 4.0});
        const CriticPair fit{constant_critic(1.5), constant_critic(1.5)};
        out.push_back({"critic_loss perfect fit", critic_loss(b, fit, Vector::Constant(1, 1.5), true).loss, 0.0});
    }
    {
        // tanh(20) rounds to exactly 1, so a~ = (1, 0).
        const PreferenceBatch b = stack(std::vector<PreferenceTuple>{
            {s, (Vector(2) << 1.0, 0.0).finished(), Vector::Zero(kAct), 0.0, 0.0, s}});
        const ParamSet policy = constant_policy(20.0, 0.0, kLogStdMin);
        out.push_back({"preference_actor_loss = -0.5",
                       preference_actor_loss(b, policy, Vector::Constant(1, 0.5), Matrix::Zero(kAct, 1)).loss, -0.5});
    }
    out.push_back({"gate_target(0)", gate_target(0.0), 0.5});
    out.push_back({"gate_target(ln 3)", gate_target(std::log(3.0)), 0.75});
    out.push_back({"gate_target(-ln 3)", gate_target(-std::log(3.0)), 0.25});
    {
        const ParamSet gate = [] {
            ParamSet g = init_params(std::vector<int>{kObs, 1}, Head::Gate, 0);
            g.layers[0].weight.setZero();
            return g;
        }();
        Matrix states(kObs, 2);
        states << Vector::Constant(kObs, 0.2), Vector::Constant(kObs, -0.7);
        out.push_back({"online_gate_loss beta = 0.5", online_gate_loss(states, gate).loss, 0.25});
        out.push_back({"preference_gate_loss 0.5 vs 0.75",
                       preference_gate_loss(states.leftCols(1), gate, Vector::Constant(1, 0.75)).loss, 0.0625});
    }
    {
        // Q(s, a) = a_0: Q(s, a_p = (1, 0)) = 1 and the policy always proposes a~ = (-1, 0).
        ParamSet q = init_params(std::vector<int>{kObs + kAct, 1}, Head::Critic, 0);
        q.layers[0].weight.setZero();
        q.layers[0].weight(0, kObs) = 1.0;
        const CriticPair critic{q, q};
        const ParamSet policy = constant_policy(-20.0, 0.0, kLogStdMin);
        Matrix states = s;
        const Matrix preferred = (Vector(2) << 1.0, 0.0).finished();
        const Vector adv = advantage(states, preferred, policy, critic, true, Matrix::Zero(kAct, 1));
        out.push_back({"advantage 1 - (-1)", adv(0), 2.0});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gate regression on a frozen synthetic critic.

struct GateRegression {
    double beta_positive = 0.0;  // mean beta over states with A >= +1
    double beta_negative = 0.0;  // mean beta over states with A <= -1
    double mse = 0.0;
    double min_abs_advantage = 0.0;
};

struct GateProblem {
    Matrix states;
    Matrix preferred;
    CriticPair critic;
    ParamSet policy;
};

/// 16 states: the first 8 prefer a_0 = +1, the rest a_0 = -1; Q(s, a) = 2 a_0.
inline GateProblem gate_problem(std::uint64_t seed) {
    Rng rng(seed);
    GateProblem g;
    g.states.resize(kObs, 16);
    g.preferred.resize(kAct, 16);
    for (int k = 0; k < 16; ++k) {
        Vector s = uniform_vector(rng, kObs);
        s(0) = k < 8 ? uniform(rng, 0.2, 1.0) : uniform(rng, -1.0, -0.2);
        g.states.col(k) = s;
        g.preferred.col(k) << (k < 8 ? 1.0 : -1.0), uniform(rng, -1.0, 1.0);
    }
    ParamSet q = init_params(std::vector<int>{kObs + kAct, 1}, Head::Critic, 0);
    q.layers[0].weight.setZero();
    q.layers[0].weight(0, kObs) = 2.0;
    g.critic = {q, q};
    g.policy = constant_policy(0.0, 0.0, kLogStdMin);
    return g;
}

inline GateRegression run_gate_regression(std::uint64_t seed, int steps, double lr = 3e-4) {
    const GateProblem g = gate_problem(seed);
    ParamSet gate = init_params(std::vector<int>{kObs, 64, 64, 1}, Head::Gate, derive_seed(seed, 1));
    Adam opt(gate, AdamConfig{.learning_rate = lr});
    Rng noise(derive_seed(seed, 2));
    for (int k = 0; k < steps; ++k) {
        const Vector adv = advantage(g.states, g.preferred, g.policy, g.critic, true, normal_matrix(noise, kAct, 16));
        const LossGrad pg = preference_gate_loss(g.states, gate, gate_target(adv));
        gate = opt.step(gate, pg.grad, "preference_gate.update");
    }
    const Vector adv = advantage(g.states, g.preferred, g.policy, g.critic, true, normal_matrix(noise, kAct, 16));
    const Vector beta = gate_batch(gate, g.states);
    GateRegression r;
    r.beta_positive = beta.head(8).mean();
    r.beta_negative = beta.tail(8).mean();
    r.mse = (beta - gate_target(adv)).squaredNorm() / 16.0;
    r.min_abs_advantage = adv.cwiseAbs().minCoeff();
    return r;
}

/// Mean beta over online states before each of `steps` online-gate-only steps, plus the final value.
inline std::vector<double> run_online_gate_only(std::uint64_t seed, int steps, double lr = 3e-4) {
    Rng rng(seed);
    Matrix states(kObs, 32);
    for (int k = 0; k < 32; ++k) states.col(k) = uniform_vector(rng, kObs);
    ParamSet gate = init_params(std::vector<int>{kObs, 64, 64, 1}, Head::Gate, derive_seed(seed, 1));
    Adam opt(gate, AdamConfig{.learning_rate = lr});
    std::vector<double> means;
    for (int k = 0; k < steps; ++k) {
        means.push_back(gate_batch(gate, states).mean());
        gate = opt.step(gate, online_gate_loss(states, gate).grad, "online_gate.update");
    }
    means.push_back(gate_batch(gate, states).mean());
    return means;
}

// ---------------------------------------------------------------------------
// Property runs on the full learner step.

/// Runs one learner step twice with the stored weak actions perturbed in the
/// second copy; true when everything produced by steps 1-3 is bit-identical.
inline bool weak_action_isolated(std::uint64_t seed, std::string* detail = nullptr) {
    Rng rng(seed);
    const Nets nets = small_nets(seed, {16, 16});
    LearnerConfig config;
    config.seed = seed;
    config.hidden = {16, 16};
    const auto online = transitions(rng, 12);
    const auto pref = tuples(rng, 12);
    auto perturbed = pref;
    for (auto& t : perturbed) t.weak = uniform_vector(rng, kAct, -0.9, 0.9);

    Learner a(config, nets);
    Learner b(config, nets);
    const UpdateReport ra = a.step_on(online, pref);
    const UpdateReport rb = b.step_on(online, perturbed);
    auto fail = [&](const char* what) {
        if (detail != nullptr) *detail = what;
        return false;
    };
    if (!bit_equal(ra.loss_critic, rb.loss_critic)) return fail("loss_critic");
    if (!bit_equal(ra.loss_actor, rb.loss_actor)) return fail("loss_actor");
    if (!bit_equal(ra.loss_online_gate, rb.loss_online_gate)) return fail("loss_online_gate");
    if (!bit_equal(ra.loss_pref_gate, rb.loss_pref_gate)) return fail("loss_pref_gate");
    if (!bit_equal(ra.mean_advantage, rb.mean_advantage)) return fail("mean_advantage");
    if (!bit_equal(ra.mean_beta_online, rb.mean_beta_online)) return fail("mean_beta_online");
    if (!bit_equal(ra.mean_beta_pref, rb.mean_beta_pref)) return fail("mean_beta_pref");
    if (!bit_equal(a.nets().critic.first, b.nets().critic.first)) return fail("critic.first");
    if (!bit_equal(a.nets().critic.second, b.nets().critic.second)) return fail("critic.second");
    if (!bit_equal(a.nets().target.first, b.nets().target.first)) return fail("target");
    if (!bit_equal(a.nets().gate, b.nets().gate)) return fail("gate");
    if (bit_equal(ra.loss_pref_actor, rb.loss_pref_actor)) return fail("step 4 ignored the weak action");
    return true;
}

/// ohprl with lambda_pref = 0 against replay_only over `steps` learner steps
/// on the same buffers; true when policy and critics match bit for bit after every step.
inline bool lambda_zero_matches_replay_only(std::uint64_t seed, int steps, std::string* detail = nullptr) {
    Rng rng(seed);
    BufferPair buffers(1000, 1000);
    for (const auto& t : transitions(rng, 64)) buffers.online.push(t);
    for (const auto& t : tuples(rng, 64)) buffers.pref.push(t);
    const Nets nets = small_nets(seed, {16, 16});

    LearnerConfig base;
    base.seed = seed;
    base.hidden = {16, 16};
    base.batch_n = 16;
    LearnerConfig ohprl = base;
    ohprl.mode = LearnerMode::Ohprl;
    ohprl.lambda_pref = 0.0;
    LearnerConfig replay = base;
    replay.mode = LearnerMode::ReplayOnly;

    Learner a(ohprl, nets);
    Learner b(replay, nets);
    for (int k = 0; k < steps; ++k) {
        const UpdateReport ra = a.step(buffers);
        const UpdateReport rb = b.step(buffers);
        // Versions differ (step 4 still runs with a zero gradient); values must not.
        const bool same = bit_equal(a.nets().policy, b.nets().policy) &&
                          bit_equal(a.nets().critic.first, b.nets().critic.first) &&
                          bit_equal(a.nets().critic.second, b.nets().critic.second) &&
                          bit_equal(a.nets().target.first, b.nets().target.first) &&
                          bit_equal(ra.loss_critic, rb.loss_critic) && bit_equal(ra.loss_actor, rb.loss_actor);
        if (!same) {
            if (detail != nullptr) *detail = "diverged at learner step " + std::to_string(k + 1);
            return false;
        }
    }
    return true;
}

}  // namespace fixture
