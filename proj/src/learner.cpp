#include "ohprl/learner.hpp"

#include <algorithm>
#include <cmath>

#include "ohprl/errors.hpp"

namespace ohprl {

namespace {

void require_finite(double v, std::string_view stage) {
    if (!std::isfinite(v)) throw NumericalError(std::string(stage));
}

void require_finite(const Matrix& m, std::string_view stage) {
    if (!m.allFinite()) throw NumericalError(std::string(stage));
}

// Per-column min over the two critic heads, remembering which head won.
struct TwinEval {
    ForwardCache first_cache;
    ForwardCache second_cache;
    Vector first;
    Vector second;
    Vector value;
    std::vector<bool> first_wins;
};

TwinEval eval_twin(const CriticPair& critic, const Matrix& states, const Matrix& actions, bool twin) {
    TwinEval e;
    e.first = q_batch(critic.first, states, actions, &e.first_cache);
    e.first_wins.assign(static_cast<std::size_t>(states.cols()), true);
    if (!twin) {
        e.value = e.first;
        return e;
    }
    e.second = q_batch(critic.second, states, actions, &e.second_cache);
    e.value.resize(e.first.size());
    for (Eigen::Index c = 0; c < e.first.size(); ++c) {
        const bool first = e.first(c) <= e.second(c);
        e.first_wins[static_cast<std::size_t>(c)] = first;
        e.value(c) = first ? e.first(c) : e.second(c);
    }
    return e;
}

// d(sum_c w_c * Qmin(s_c, a_c)) / d(a) through whichever head was selected.
Matrix twin_action_gradient(const CriticPair& critic, const TwinEval& e, const Vector& weights, Eigen::Index state_dim,
                            bool twin) {
    const auto n = weights.size();
    Matrix d_first = Matrix::Zero(1, n);
    Matrix d_second = Matrix::Zero(1, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        if (!twin || e.first_wins[static_cast<std::size_t>(c)]) {
            d_first(0, c) = weights(c);
        } else {
            d_second(0, c) = weights(c);
        }
    }
    Matrix d_input = backward_raw(critic.first, e.first_cache, d_first, nullptr);
    if (twin) d_input += backward_raw(critic.second, e.second_cache, d_second, nullptr);
    return d_input.bottomRows(d_input.rows() - state_dim);
}

// Gradient of |x| in R^d with subgradient zero at the origin.
Vector unit_or_zero(const Vector& v) {
    const double n = v.norm();
    if (n == 0.0) return Vector::Zero(v.size());
    return v / n;
}

LossGrad gate_regression(const Matrix& states, const ParamSet& gate, const Vector* targets, std::string_view stage) {
    ForwardCache cache;
    const Matrix raw = forward_raw(gate, states, &cache);
    const Matrix beta = apply_head(Head::Gate, raw);
    require_finite(beta, std::string(stage) + ".forward");
    const auto n = static_cast<double>(states.cols());
    Matrix d_beta(1, states.cols());
    double loss = 0.0;
    for (Eigen::Index c = 0; c < states.cols(); ++c) {
        const double r = targets ? beta(0, c) - (*targets)(c) : beta(0, c);
        loss += r * r;
        d_beta(0, c) = 2.0 * r / n;
    }
    LossGrad out;
    out.loss = loss / n;
    require_finite(out.loss, stage);
    out.grad = Gradient::zeros_like(gate);
    backward_raw(gate, cache, head_backward(Head::Gate, raw, beta, d_beta), &out.grad);
    if (!out.grad.all_finite()) throw NumericalError(std::string(stage) + ".backward");
    return out;
}

double mean_of(const Vector& v) { return v.size() == 0 ? 0.0 : v.mean(); }

}  // namespace

std::string_view to_string(LearnerMode mode) {
    switch (mode) {
        case LearnerMode::Ohprl: return "ohprl";
        case LearnerMode::ReplayOnly: return "replay_only";
        case LearnerMode::Bc: return "bc";
        case LearnerMode::SilRi: return "sil_ri";
    }
    return "ohprl";
}

LearnerMode learner_mode_from_string(std::string_view name) {
    if (name == "ohprl") return LearnerMode::Ohprl;
    if (name == "replay_only") return LearnerMode::ReplayOnly;
    if (name == "bc") return LearnerMode::Bc;
    if (name == "sil_ri") return LearnerMode::SilRi;
    throw ConfigError("unknown learner mode: " + std::string(name));
}

std::string_view to_string(Ablation ablation) {
    switch (ablation) {
        case Ablation::None: return "none";
        case Ablation::FixedBeta: return "fixed_beta";
        case Ablation::OffTarget: return "off_target";
        case Ablation::WithoutRl: return "without_rl";
    }
    return "none";
}

Ablation ablation_from_string(std::string_view name) {
    if (name == "none") return Ablation::None;
    if (name == "fixed_beta") return Ablation::FixedBeta;
    if (name == "off_target") return Ablation::OffTarget;
    if (name == "without_rl") return Ablation::WithoutRl;
    throw ConfigError("unknown ablation: " + std::string(name));
}

void validate(const LearnerConfig& c) {
    if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw ConfigError("learner.gamma must lie in (0, 1)");
    if (!(c.alpha >= 0.0)) throw ConfigError("learner.alpha must be non-negative");
    if (!(c.lambda_pref >= 0.0)) throw ConfigError("learner.lambda_pref must be non-negative");
    if (c.utd < 1) throw ConfigError("learner.utd must be at least 1");
    if (c.batch_n < 1) throw ConfigError("learner.batch_n must be at least 1");
    if (!(c.tau >= 0.0 && c.tau <= 1.0)) throw ConfigError("learner.tau must lie in [0, 1]");
    if (!(c.fixed_beta_value > 0.0 && c.fixed_beta_value < 1.0)) {
        throw ConfigError("learner.fixed_beta_value must lie in (0, 1)");
    }
    if (!(c.lr_theta > 0.0 && c.lr_phi > 0.0 && c.lr_beta > 0.0)) throw ConfigError("learning rates must be positive");
    if (c.sync_every < 1) throw ConfigError("learner.sync_every must be at least 1");
    if (c.hidden.empty()) throw ConfigError("learner.hidden needs at least one layer");
    for (int h : c.hidden) {
        if (h <= 0) throw ConfigError("zero-width hidden layer");
    }
    if (c.ablation != Ablation::None && c.mode != LearnerMode::Ohprl) {
        throw ConfigError("ablation '" + std::string(to_string(c.ablation)) + "' only applies to mode ohprl, not " +
                          std::string(to_string(c.mode)));
    }
    if (c.combined_actor_update && c.mode != LearnerMode::Ohprl) {
        throw ConfigError("combined_actor_update only applies to mode ohprl");
    }
    if (c.combined_actor_update && c.ablation == Ablation::WithoutRl) {
        throw ConfigError("combined_actor_update conflicts with ablation without_rl");
    }
}

bool uses_gate(const LearnerConfig& c) {
    return c.mode == LearnerMode::Ohprl && c.ablation != Ablation::FixedBeta;
}

Nets make_nets(int obs_dim, int action_dim, const std::vector<int>& hidden, std::uint64_t seed) {
    auto widths = [&](int in, int out) {
        std::vector<int> w{in};
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(out);
        return w;
    };
    Nets n;
    n.policy = init_params(widths(obs_dim, 2 * action_dim), Head::Policy, derive_seed(seed, 11));
    n.critic.first = init_params(widths(obs_dim + action_dim, 1), Head::Critic, derive_seed(seed, 12));
    n.critic.second = init_params(widths(obs_dim + action_dim, 1), Head::Critic, derive_seed(seed, 13));
    n.gate = init_params(widths(obs_dim, 1), Head::Gate, derive_seed(seed, 14));
    n.target = n.critic;
    return n;
}

// ---------------------------------------------------------------------------

Vector critic_target(const TransitionBatch& batch, const ParamSet& policy, const CriticPair& target, double gamma,
                     double alpha, bool twin, const Matrix& next_noise) {
    const PolicyBatch next = policy_sample_batch(policy, batch.next_states, next_noise);
    const TwinEval q = eval_twin(target, batch.next_states, next.action, twin);
    Vector y(batch.size());
    for (Eigen::Index c = 0; c < batch.size(); ++c) {
        y(c) = batch.rewards(c) + gamma * (1.0 - batch.dones(c)) * (q.value(c) - alpha * next.log_prob(c));
    }
    require_finite(y, "critic_target");
    return y;
}

CriticLossGrad critic_loss(const TransitionBatch& batch, const CriticPair& critic, const Vector& y, bool twin) {
    const auto n = static_cast<double>(batch.size());
    CriticLossGrad out;
    auto head = [&](const ParamSet& q, Gradient& grad) {
        ForwardCache cache;
        const Vector values = q_batch(q, batch.states, batch.actions, &cache);
        const Vector residual = values - y;
        grad = Gradient::zeros_like(q);
        const Matrix d_raw = (2.0 / n) * residual.transpose();
        backward_raw(q, cache, d_raw, &grad);
        return residual.squaredNorm() / n;
    };
    out.loss = head(critic.first, out.first);
    if (twin) {
        out.loss += head(critic.second, out.second);
    } else {
        out.second = Gradient::zeros_like(critic.second);
    }
    require_finite(out.loss, "critic_loss");
    if (!out.first.all_finite() || !out.second.all_finite()) throw NumericalError("critic_loss.backward");
    return out;
}

LossGrad actor_loss(const Matrix& states, const ParamSet& policy, const CriticPair& critic, double alpha, bool twin,
                    const Matrix& noise) {
    const auto n = static_cast<double>(states.cols());
    const PolicyBatch pb = policy_sample_batch(policy, states, noise);
    const TwinEval q = eval_twin(critic, states, pb.action, twin);
    LossGrad out;
    out.loss = (alpha * pb.log_prob - q.value).sum() / n;
    require_finite(out.loss, "actor_loss");
    const Vector weights = Vector::Constant(states.cols(), -1.0 / n);
    const Matrix d_action = twin_action_gradient(critic, q, weights, states.rows(), twin);
    const Vector d_log_prob = Vector::Constant(states.cols(), alpha / n);
    out.grad = Gradient::zeros_like(policy);
    policy_backward(policy, pb, d_action, d_log_prob, out.grad);
    if (!out.grad.all_finite()) throw NumericalError("actor_loss.backward");
    return out;
}

Vector advantage(const Matrix& states, const Matrix& preferred, const ParamSet& policy, const CriticPair& critic,
                 bool twin, const Matrix& noise) {
    const PolicyBatch pb = policy_sample_batch(policy, states, noise);
    const Vector q_pref = eval_twin(critic, states, preferred, twin).value;
    const Vector q_weak = eval_twin(critic, states, pb.action, twin).value;
    Vector a = q_pref - q_weak;
    require_finite(a, "advantage");
    return a;
}

double gate_target(double advantage) {
    if (advantage >= 0.0) return 1.0 / (1.0 + std::exp(-advantage));
    const double e = std::exp(advantage);
    return e / (1.0 + e);
}

Vector gate_target(const Vector& advantages) {
    return advantages.unaryExpr([](double a) { return gate_target(a); });
}

LossGrad online_gate_loss(const Matrix& states, const ParamSet& gate) {
    return gate_regression(states, gate, nullptr, "online_gate_loss");
}

LossGrad preference_gate_loss(const Matrix& states, const ParamSet& gate, const Vector& targets) {
    if (targets.size() != states.cols()) throw ShapeError("one gate target per state is required");
    return gate_regression(states, gate, &targets, "preference_gate_loss");
}

LossGrad preference_actor_loss(const PreferenceBatch& batch, const ParamSet& policy, const Vector& beta,
                               const Matrix& noise) {
    if (beta.size() != batch.size()) throw ShapeError("one beta per preference tuple is required");
    const auto n = static_cast<double>(batch.size());
    const PolicyBatch pb = policy_sample_batch(policy, batch.states, noise);
    Matrix d_action(pb.action.rows(), pb.action.cols());
    double loss = 0.0;
    for (Eigen::Index c = 0; c < batch.size(); ++c) {
        const Vector to_pref = pb.action.col(c) - batch.preferred.col(c);
        const Vector to_weak = pb.action.col(c) - batch.weak.col(c);
        loss += beta(c) * (to_pref.norm() - to_weak.norm());
        d_action.col(c) = beta(c) / n * (unit_or_zero(to_pref) - unit_or_zero(to_weak));
    }
    LossGrad out;
    out.loss = loss / n;
    require_finite(out.loss, "preference_actor_loss");
    out.grad = Gradient::zeros_like(policy);
    policy_backward(policy, pb, d_action, Vector::Zero(batch.size()), out.grad);
    if (!out.grad.all_finite()) throw NumericalError("preference_actor_loss.backward");
    return out;
}

LossGrad preference_actor_loss(const PreferenceBatch& batch, const ParamSet& policy, const ParamSet& gate,
                               const Matrix& noise) {
    return preference_actor_loss(batch, policy, gate_batch(gate, batch.states), noise);
}

LossGrad imitation_loss(const PreferenceBatch& batch, const ParamSet& policy, const Matrix& noise) {
    const auto n = static_cast<double>(batch.size());
    const PolicyBatch pb = policy_sample_batch(policy, batch.states, noise);
    Matrix d_action(pb.action.rows(), pb.action.cols());
    double loss = 0.0;
    for (Eigen::Index c = 0; c < batch.size(); ++c) {
        const Vector to_pref = pb.action.col(c) - batch.preferred.col(c);
        loss += to_pref.norm();
        d_action.col(c) = unit_or_zero(to_pref) / n;
    }
    LossGrad out;
    out.loss = loss / n;
    require_finite(out.loss, "imitation_loss");
    out.grad = Gradient::zeros_like(policy);
    policy_backward(policy, pb, d_action, Vector::Zero(batch.size()), out.grad);
    if (!out.grad.all_finite()) throw NumericalError("imitation_loss.backward");
    return out;
}

LossGrad behavior_cloning_loss(const PreferenceBatch& batch, const ParamSet& policy) {
    const auto n = static_cast<double>(batch.size());
    const Matrix zero = Matrix::Zero(policy.output_dim() / 2, batch.size());
    const PolicyBatch pb = policy_sample_batch(policy, batch.states, zero);
    const Matrix diff = pb.action - batch.preferred;
    LossGrad out;
    out.loss = diff.squaredNorm() / n;
    require_finite(out.loss, "behavior_cloning_loss");
    out.grad = Gradient::zeros_like(policy);
    policy_backward(policy, pb, (2.0 / n) * diff, Vector::Zero(batch.size()), out.grad);
    if (!out.grad.all_finite()) throw NumericalError("behavior_cloning_loss.backward");
    return out;
}

// ---------------------------------------------------------------------------

Learner::Learner(LearnerConfig config, Nets nets)
    : config_(std::move(config)),
      nets_(std::move(nets)),
      critic_first_opt_(nets_.critic.first, AdamConfig{.learning_rate = config_.lr_theta}),
      critic_second_opt_(nets_.critic.second, AdamConfig{.learning_rate = config_.lr_theta}),
      actor_opt_(nets_.policy, AdamConfig{.learning_rate = config_.lr_phi}),
      pref_actor_opt_(nets_.policy, AdamConfig{.learning_rate = config_.lr_phi}),
      gate_opt_(nets_.gate, AdamConfig{.learning_rate = config_.lr_beta}),
      sample_rng_(derive_seed(config_.seed, 101)),
      critic_rng_(derive_seed(config_.seed, 102)),
      actor_rng_(derive_seed(config_.seed, 103)),
      gate_rng_(derive_seed(config_.seed, 104)),
      pref_rng_(derive_seed(config_.seed, 105)) {
    validate(config_);
}

UpdateReport Learner::step(const BufferPair& buffers) {
    const auto n = static_cast<std::size_t>(config_.batch_n);
    if (config_.mode == LearnerMode::Bc) {
        return step_on({}, buffers.pref.sample(n, sample_rng_, "preference buffer"));
    }
    SymmetricSample s = sample_symmetric(buffers, n, sample_rng_);
    return step_on(s.online, s.pref);
}

UpdateReport Learner::step_on(const std::vector<Transition>& online, const std::vector<PreferenceTuple>& pref) {
    const LearnerConfig& c = config_;
    const bool twin = c.twin_critic;
    const Eigen::Index action_dim = nets_.policy.output_dim() / 2;
    UpdateReport report;

    const PreferenceBatch pref_batch = stack(pref);

    if (c.mode == LearnerMode::Bc) {
        if (pref.empty()) throw SamplingError("preference buffer empty");
        LossGrad bc = behavior_cloning_loss(pref_batch, nets_.policy);
        nets_.policy = actor_opt_.step(nets_.policy, bc.grad, "bc.update");
        report.loss_actor = bc.loss;
        report.grad_norm_actor = bc.grad.norm();
    } else {
        if (online.empty()) throw SamplingError("online buffer empty");
        if (pref.empty()) throw SamplingError("preference buffer empty");
        const TransitionBatch base = stack(build_base_batch(online, pref));
        const Eigen::Index base_n = base.size();

        // 1. Base RL update on B_base.
        const Matrix next_noise = normal_matrix(critic_rng_, action_dim, base_n);
        const Vector y = critic_target(base, nets_.policy, nets_.target, c.gamma, c.alpha, twin, next_noise);
        CriticLossGrad cl = critic_loss(base, nets_.critic, y, twin);
        nets_.critic.first = critic_first_opt_.step(nets_.critic.first, cl.first, "critic.update");
        if (twin) nets_.critic.second = critic_second_opt_.step(nets_.critic.second, cl.second, "critic.update");
        report.loss_critic = cl.loss;
        report.grad_norm_critic = std::sqrt(cl.first.squared_norm() + cl.second.squared_norm());

        const Matrix actor_noise = normal_matrix(actor_rng_, action_dim, base_n);
        std::optional<LossGrad> deferred_actor;
        if (c.ablation != Ablation::WithoutRl) {
            LossGrad al = actor_loss(base.states, nets_.policy, nets_.critic, c.alpha, twin, actor_noise);
            report.loss_actor = al.loss;
            report.grad_norm_actor = al.grad.norm();
            if (c.combined_actor_update) {
                deferred_actor = std::move(al);
            } else {
                nets_.policy = actor_opt_.step(nets_.policy, al.grad, "actor.update");
            }
        }

        if (c.mode == LearnerMode::SilRi) {
            const Matrix noise = normal_matrix(pref_rng_, action_dim, pref_batch.size());
            LossGrad im = imitation_loss(pref_batch, nets_.policy, noise);
            im.grad *= c.lambda_pref;
            report.loss_pref_actor = c.lambda_pref * im.loss;
            report.grad_norm_pref_actor = im.grad.norm();
            nets_.policy = pref_actor_opt_.step(nets_.policy, im.grad, "imitation.update");
        }

        if (c.mode == LearnerMode::Ohprl) {
            const std::size_t online_n = online.size();
            Matrix online_states(base.states.rows(), static_cast<Eigen::Index>(online_n));
            online_states = base.states.leftCols(static_cast<Eigen::Index>(online_n));

            Vector beta;
            if (c.ablation == Ablation::FixedBeta) {
                beta = Vector::Constant(pref_batch.size(), c.fixed_beta_value);
            } else {
                // 2. Online gate update.
                LossGrad og = online_gate_loss(online_states, nets_.gate);
                report.mean_beta_online = mean_of(gate_batch(nets_.gate, online_states));
                nets_.gate = gate_opt_.step(nets_.gate, og.grad, "online_gate.update");
                report.loss_online_gate = og.loss;
                report.grad_norm_gate_online = og.grad.norm();

                // 3. Preference gate update with a fresh a~_w per state.
                const Matrix weak_noise = normal_matrix(gate_rng_, action_dim, pref_batch.size());
                const Vector adv =
                    advantage(pref_batch.states, pref_batch.preferred, nets_.policy, nets_.critic, twin, weak_noise);
                report.mean_advantage = mean_of(adv);
                const Vector targets = c.ablation == Ablation::OffTarget ? Vector::Constant(adv.size(), 0.5)
                                                                         : gate_target(adv);
                LossGrad pg = preference_gate_loss(pref_batch.states, nets_.gate, targets);
                report.mean_beta_pref = mean_of(gate_batch(nets_.gate, pref_batch.states));
                nets_.gate = gate_opt_.step(nets_.gate, pg.grad, "preference_gate.update");
                report.loss_pref_gate = pg.loss;
                report.grad_norm_gate_pref = pg.grad.norm();

                beta = gate_batch(nets_.gate, pref_batch.states);
            }

            // 4. Gate-guided actor update.
            const Matrix noise = normal_matrix(pref_rng_, action_dim, pref_batch.size());
            LossGrad pa = preference_actor_loss(pref_batch, nets_.policy, beta, noise);
            pa.grad *= c.lambda_pref;
            report.loss_pref_actor = c.lambda_pref * pa.loss;
            report.grad_norm_pref_actor = pa.grad.norm();
            report.step4_beta = beta;
            if (deferred_actor) {
                deferred_actor->grad += pa.grad;
                nets_.policy = actor_opt_.step(nets_.policy, deferred_actor->grad, "actor_total.update");
            } else {
                nets_.policy = pref_actor_opt_.step(nets_.policy, pa.grad, "preference_actor.update");
            }
        }

        nets_.target.first = polyak_update(nets_.target.first, nets_.critic.first, c.tau);
        if (twin) nets_.target.second = polyak_update(nets_.target.second, nets_.critic.second, c.tau);
    }

    ++steps_;
    report.policy_version = nets_.policy.version;
    report.critic_version = nets_.critic.first.version;
    report.target_version = nets_.target.first.version;
    report.gate_version = nets_.gate.version;
    return report;
}

}  // namespace ohprl
