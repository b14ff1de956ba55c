#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ohprl/nets.hpp"
#include "ohprl/replay.hpp"
#include "ohprl/rng.hpp"

namespace ohprl {

/// ohprl: full gated-preference learner.
/// replay_only: base RL on B_base only (interventions enter through value updates).
/// bc: regress the policy mean onto a_p over B_p.
/// sil_ri: base RL plus an imitation penalty toward a_p.
enum class LearnerMode { Ohprl, ReplayOnly, Bc, SilRi };
enum class Ablation { None, FixedBeta, OffTarget, WithoutRl };

std::string_view to_string(LearnerMode mode);
LearnerMode learner_mode_from_string(std::string_view name);
std::string_view to_string(Ablation ablation);
Ablation ablation_from_string(std::string_view name);

struct LearnerConfig {
    double gamma = 0.99;
    double alpha = 0.1;
    double lambda_pref = 1.0;
    double lr_theta = 3e-4;
    double lr_phi = 3e-4;
    double lr_beta = 3e-4;
    double tau = 0.005;
    int utd = 4;
    int batch_n = 128;
    LearnerMode mode = LearnerMode::Ohprl;
    Ablation ablation = Ablation::None;
    double fixed_beta_value = 0.5;
    bool twin_critic = true;
    int sync_every = 50;
    std::uint64_t seed = 0;
    std::vector<int> hidden{64, 64};
    /// Apply L_actor + lambda_pref * L_prefer-actor as one gradient step
    /// instead of the two sequential steps.
    bool combined_actor_update = false;
};

/// Throws ConfigError on out-of-range values or conflicting mode/ablation.
void validate(const LearnerConfig& config);

/// Whether this configuration trains a gate network.
bool uses_gate(const LearnerConfig& config);

struct Nets {
    ParamSet policy;
    CriticPair critic;
    CriticPair target;
    ParamSet gate;
};

/// Seeded initialization; targets start equal to the online critics.
Nets make_nets(int obs_dim, int action_dim, const std::vector<int>& hidden, std::uint64_t seed);

struct LossGrad {
    double loss = 0.0;
    Gradient grad;
};

struct CriticLossGrad {
    double loss = 0.0;
    Gradient first;
    Gradient second;
};

// --- individual losses; noise matrices are standard-normal draws held fixed ---

/// y = r + gamma * (1 - d) * (Q_target(s', a~') - alpha * log pi(a~'|s')), no gradient.
Vector critic_target(const TransitionBatch& batch, const ParamSet& policy, const CriticPair& target, double gamma,
                     double alpha, bool twin, const Matrix& next_noise);

/// mean (Q(s,a) - y)^2 per head, summed over heads when twin.
CriticLossGrad critic_loss(const TransitionBatch& batch, const CriticPair& critic, const Vector& y, bool twin);

/// mean(alpha * log pi(a~|s) - Q(s, a~)) with a~ reparameterized; critic fixed.
LossGrad actor_loss(const Matrix& states, const ParamSet& policy, const CriticPair& critic, double alpha, bool twin,
                    const Matrix& noise);

/// A(s) = Q(s, a_p) - Q(s, a~_w) with a~_w freshly drawn from the policy.
Vector advantage(const Matrix& states, const Matrix& preferred, const ParamSet& policy, const CriticPair& critic,
                 bool twin, const Matrix& noise);

double gate_target(double advantage);
Vector gate_target(const Vector& advantages);

/// mean beta(s)^2 over online states.
LossGrad online_gate_loss(const Matrix& states, const ParamSet& gate);

/// mean (beta(s) - target)^2; targets are constants.
LossGrad preference_gate_loss(const Matrix& states, const ParamSet& gate, const Vector& targets);

/// mean beta(s) * (|a~ - a_p| - |a~ - a_w|); beta is a constant per item.
/// Subgradient 0 where a~ coincides with a_p or a_w.
LossGrad preference_actor_loss(const PreferenceBatch& batch, const ParamSet& policy, const Vector& beta,
                               const Matrix& noise);

/// Same, with beta read from the gate network (no gradient into the gate).
LossGrad preference_actor_loss(const PreferenceBatch& batch, const ParamSet& policy, const ParamSet& gate,
                               const Matrix& noise);

/// mean |a~ - a_p| (the sil_ri imitation penalty before lambda scaling).
LossGrad imitation_loss(const PreferenceBatch& batch, const ParamSet& policy, const Matrix& noise);

/// mean |tanh(mean(s)) - a_p|^2.
LossGrad behavior_cloning_loss(const PreferenceBatch& batch, const ParamSet& policy);

struct UpdateReport {
    std::optional<double> loss_critic;
    std::optional<double> loss_actor;
    std::optional<double> loss_online_gate;
    std::optional<double> loss_pref_gate;
    std::optional<double> loss_pref_actor;
    std::optional<double> mean_beta_online;
    std::optional<double> mean_beta_pref;
    std::optional<double> mean_advantage;
    /// beta values applied in the gate-guided actor step, one per item.
    Vector step4_beta;
    double grad_norm_critic = 0.0;
    double grad_norm_actor = 0.0;
    double grad_norm_gate_online = 0.0;
    double grad_norm_gate_pref = 0.0;
    double grad_norm_pref_actor = 0.0;
    std::uint64_t policy_version = 0;
    std::uint64_t critic_version = 0;
    std::uint64_t target_version = 0;
    std::uint64_t gate_version = 0;
};

/// Owns the networks, optimizer state and rng streams of one run.
class Learner {
public:
    Learner(LearnerConfig config, Nets nets);

    /// One learner step: base RL update, online gate update, preference gate
    /// update, gate-guided actor update, then the polyak target update. Which
    /// stages run depends on mode and ablation.
    UpdateReport step(const BufferPair& buffers);

    /// Same, on an explicit symmetric sample (skips buffer sampling).
    UpdateReport step_on(const std::vector<Transition>& online, const std::vector<PreferenceTuple>& pref);

    const Nets& nets() const { return nets_; }
    const LearnerConfig& config() const { return config_; }
    std::uint64_t steps() const { return steps_; }

private:
    LearnerConfig config_;
    Nets nets_;
    Adam critic_first_opt_;
    Adam critic_second_opt_;
    Adam actor_opt_;
    Adam pref_actor_opt_;
    Adam gate_opt_;
    Rng sample_rng_;
    Rng critic_rng_;
    Rng actor_rng_;
    Rng gate_rng_;
    Rng pref_rng_;
    std::uint64_t steps_ = 0;
};

}  // namespace ohprl
