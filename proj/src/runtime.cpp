#include "ohprl/runtime.hpp"

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

#include "ohprl/errors.hpp"

namespace ohprl {

namespace fs = std::filesystem;

void ParamMailbox::publish(ParamSet policy) {
    auto snapshot = std::make_shared<const ParamSet>(std::move(policy));
    std::lock_guard lock(mutex_);
    current_ = std::move(snapshot);
}

std::shared_ptr<const ParamSet> ParamMailbox::latest() const {
    std::lock_guard lock(mutex_);
    return current_;
}

std::uint64_t ParamMailbox::version() const {
    std::lock_guard lock(mutex_);
    return current_ ? current_->version : 0;
}

void LiveState::set_frame(const LiveFrame& frame) {
    std::lock_guard lock(mutex_);
    frame_ = frame;
}

LiveFrame LiveState::frame() const {
    std::lock_guard lock(mutex_);
    return frame_;
}

void LiveState::set_metrics(const std::string& csv_row) {
    std::lock_guard lock(mutex_);
    metrics_row_ = csv_row;
    ++metrics_count_;
}

std::pair<std::string, std::uint64_t> LiveState::metrics() const {
    std::lock_guard lock(mutex_);
    return {metrics_row_, metrics_count_};
}

void LiveState::set_finished() {
    std::lock_guard lock(mutex_);
    finished_ = true;
}

bool LiveState::finished() const {
    std::lock_guard lock(mutex_);
    return finished_;
}

Intervenor make_intervenor(const RunConfig& config, OverrideMailbox* mailbox) {
    if (config.intervention == InterventionMode::HumanBridge && mailbox == nullptr) {
        throw ConfigError("intervention mode human_bridge needs an override mailbox");
    }
    const InterventionMode mode = config.intervention;
    const OracleParams oracle = config.oracle;
    const EnvParams env = config.env;
    return [mode, oracle, env, mailbox](const EnvState& state, const Vector& proposal, const EpisodeHistory& history) {
        return decide(mode, oracle, env, state, proposal, history, mailbox);
    };
}

std::uint64_t episode_seed(std::uint64_t run_seed, SeedStream stream, std::uint64_t k) {
    return derive_seed(derive_seed(run_seed, static_cast<std::uint64_t>(stream)), k);
}

namespace {

Episode run_episode(Env& env, std::uint64_t seed, const std::function<Vector(const Env&, const Vector&)>& act) {
    Episode episode;
    Vector obs = env.reset(seed).observation;
    while (env.episode_active()) {
        Vector action = act(env, obs);
        StepResult r = env.step(action);
        episode.steps.push_back({obs, action, r.reward, r.done, r.observation});
        episode.success = r.success;
        obs = std::move(r.observation);
    }
    return episode;
}

}  // namespace

Episode run_oracle_episode(EnvId id, const EnvParams& params, const OracleParams& oracle, std::uint64_t seed) {
    Env env(id, params);
    return run_episode(env, seed, [&](const Env& e, const Vector&) -> Vector {
        return oracle_action(params, oracle, InterventionMode::Oracle, e.state());
    });
}

Episode run_policy_episode(EnvId id, const EnvParams& params, const ParamSet& policy, std::uint64_t seed,
                           Rng& noise) {
    Env env(id, params);
    return run_episode(env, seed, [&](const Env&, const Vector& obs) {
        return policy_sample(policy, obs, normal_matrix(noise, kActionDim, 1).col(0)).action;
    });
}

std::vector<Episode> generate_demos(const RunConfig& config, int count) {
    std::vector<Episode> demos;
    const std::uint64_t max_attempts = 20 * static_cast<std::uint64_t>(std::max(count, 1));
    for (std::uint64_t k = 0; static_cast<int>(demos.size()) < count && k < max_attempts; ++k) {
        Episode ep = run_oracle_episode(config.env_id, config.env, config.oracle,
                                        episode_seed(config.seed, SeedStream::Demos, k));
        if (ep.success) demos.push_back(std::move(ep));
    }
    if (static_cast<int>(demos.size()) < count) {
        throw ValidationError("oracle produced only " + std::to_string(demos.size()) + " successful demos out of " +
                              std::to_string(count) + " requested");
    }
    return demos;
}

std::vector<Episode> generate_rollouts(const RunConfig& config, const ParamSet& policy, int count) {
    Rng noise(derive_seed(config.seed, 2));
    std::vector<Episode> rollouts;
    for (int k = 0; k < count; ++k) {
        rollouts.push_back(run_policy_episode(config.env_id, config.env, policy,
                                              episode_seed(config.seed, SeedStream::Rollouts, k), noise));
    }
    return rollouts;
}

ActorLoop::ActorLoop(const RunConfig& config, BufferPair& buffers, const ParamMailbox& params, Intervenor intervenor,
                     TraceWriter* trace, LiveState* live)
    : config_(config),
      buffers_(buffers),
      params_(params),
      intervenor_(std::move(intervenor)),
      trace_(trace),
      live_(live),
      env_(config.env_id, config.env),
      policy_(params.latest()),
      noise_rng_(derive_seed(config.seed, 3)),
      prior_rng_(derive_seed(config.seed, 4)) {
    if (!policy_) throw ConfigError("actor loop started before any policy was published");
    if (!intervenor_) throw ConfigError("actor loop needs an intervenor");
    next_tick_ = std::chrono::steady_clock::now();
}

void ActorLoop::begin_episode() {
    episode_seed_ = episode_seed(config_.seed, SeedStream::Training, episode_);
    obs_ = env_.reset(episode_seed_).observation;
    history_ = EpisodeHistory::start(config_.env, env_.state());
    ep_len_ = 0;
    ep_intervened_ = 0;
    ep_start_ = std::chrono::steady_clock::now();
}

std::optional<EpisodeRecord> ActorLoop::step() {
    if (config_.pace_steps_per_second > 0.0) {
        std::this_thread::sleep_until(next_tick_);
        next_tick_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / config_.pace_steps_per_second));
    }
    if (!env_.episode_active()) begin_episode();
    if (auto latest = params_.latest(); latest && latest->version != policy_->version) policy_ = std::move(latest);

    const PolicyOutput proposal = policy_sample(*policy_, obs_, normal_matrix(noise_rng_, kActionDim, 1).col(0));
    const InterventionDecision decision = intervenor_(env_.state(), proposal.action, history_);
    const bool overridden = decision.active && decision.override_action.has_value();
    const Vector executed = overridden ? Vector(*decision.override_action) : proposal.action;

    StepResult r = env_.step(executed);
    if (overridden) {
        buffers_.pref.push(
            make_preference_tuple(obs_, executed, proposal.action, r.reward, r.done, r.observation, prior_rng_));
        ++ep_intervened_;
    } else {
        buffers_.online.push({obs_, executed, r.reward, r.done, r.observation});
    }
    advance_history(history_, config_.intervention, config_.oracle, config_.env, decision, env_.state());
    ++ep_len_;
    ++env_steps_;

    const EnvState& s = env_.state();
    if (trace_ != nullptr) {
        TraceStep ts;
        ts.env_id = config_.env_id;
        ts.episode = episode_;
        ts.seed = episode_seed_;
        ts.t = s.t - 1;
        ts.agent = s.agent;
        ts.ball = s.ball;
        ts.action = executed;
        ts.reward = r.reward;
        ts.done = r.done;
        ts.success = r.success;
        ts.unsafe_contact = r.unsafe_contact;
        ts.truncated = r.truncated;
        ts.intervened = overridden;
        ts.reason = overridden ? decision.reason : TriggerReason::None;
        trace_->write(ts);
    }
    if (live_ != nullptr) {
        LiveFrame f = live_->frame();
        ++f.sequence;
        f.env_id = config_.env_id;
        f.episode = episode_;
        f.t = s.t;
        f.agent = s.agent;
        f.ball = s.ball;
        f.goal = s.goal;
        f.action = executed;
        f.success = r.success;
        f.unsafe_contact = r.unsafe_contact;
        f.truncated = r.truncated;
        f.intervened = overridden;
        f.reason = overridden ? decision.reason : TriggerReason::None;
        f.param_version = policy_->version;
        f.pref_inserted = buffers_.pref.inserted();
        live_->set_frame(f);
    }

    obs_ = std::move(r.observation);
    if (env_.episode_active()) return std::nullopt;

    EpisodeRecord rec;
    rec.episode = episode_;
    rec.seed = episode_seed_;
    rec.end_step = env_steps_;
    rec.success = r.success;
    rec.length = ep_len_;
    rec.intervened_steps = ep_intervened_;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - ep_start_).count();
    rec.param_version = policy_->version;
    ++episode_;
    return rec;
}

Checkpoint make_checkpoint(const RunConfig& config, const Nets& nets, std::uint64_t env_steps,
                           std::uint64_t learner_steps) {
    Checkpoint ck;
    ck.nets = nets;
    ck.has_gate = uses_gate(config.learner);
    ck.env_id = config.env_id;
    ck.mode = config.learner.mode;
    ck.ablation = config.learner.ablation;
    ck.config_hash = config_hash(config);
    ck.env_steps = env_steps;
    ck.learner_steps = learner_steps;
    return ck;
}

namespace {

bool can_learn(const LearnerConfig& config, const BufferPair& buffers) {
    if (config.mode == LearnerMode::Bc) return !buffers.pref.empty();
    return !buffers.online.empty() && !buffers.pref.empty();
}

struct RunFiles {
    CsvWriter metrics;
    CsvWriter updates;
    std::unique_ptr<TraceWriter> trace;
};

std::string checkpoint_name(std::uint64_t step) { return "checkpoint_" + std::to_string(step) + ".ckpt"; }

}  // namespace

TrainResult train(const RunConfig& config, const TrainHooks& hooks) {
    validate(config);

    LearnerConfig lc = config.learner;
    lc.seed = derive_seed(config.seed, 5);
    const int obs_dim = observation_dim(config.env_id);
    Nets nets = make_nets(obs_dim, kActionDim, lc.hidden, derive_seed(config.seed, 1));

    TrainResult result{.run_dir = config.run_dir,
                       .nets = nets,
                       .buffers = BufferPair(config.online_capacity, config.pref_capacity),
                       .episodes = {},
                       .last_report = std::nullopt};
    BufferPair& buffers = result.buffers;
    {
        const auto demos = generate_demos(config, config.prefill_demos);
        const auto rollouts = generate_rollouts(config, nets.policy, config.prefill_rollouts);
        Rng prior(derive_seed(config.seed, 6));
        prefill(buffers, demos, rollouts, prior);
    }
    result.prefill_online = buffers.online.size();
    result.prefill_pref = buffers.pref.size();

    RunFiles files;
    if (!config.run_dir.empty()) {
        fs::create_directories(config.run_dir);
        std::ofstream(fs::path(config.run_dir) / "config.txt") << to_text(config);
        files.metrics = CsvWriter((fs::path(config.run_dir) / "metrics.csv").string(), kMetricsColumns);
        files.updates = CsvWriter((fs::path(config.run_dir) / "updates.csv").string(), kUpdateColumns);
        if (config.write_trace) {
            files.trace = std::make_unique<TraceWriter>((fs::path(config.run_dir) / "trace.jsonl").string());
        }
    }

    Learner learner(lc, std::move(nets));
    std::mutex learner_mutex;  // guards learner and last_report across threads
    std::optional<UpdateReport> last_report;

    ParamMailbox mailbox;
    mailbox.publish(learner.nets().policy);

    Intervenor intervenor = hooks.intervenor ? hooks.intervenor : make_intervenor(config, hooks.overrides);
    ActorLoop actor(config, buffers, mailbox, std::move(intervenor), files.trace.get(), hooks.live);
    RunMetrics metrics(config.rolling_window, config.ema_k);

    auto learner_step = [&] {
        UpdateReport report = learner.step(buffers);
        const std::uint64_t n = learner.steps();
        if (n % static_cast<std::uint64_t>(lc.sync_every) == 0 && files.updates.is_open()) {
            files.updates.write(update_row(n, report));
        }
        last_report = std::move(report);
    };

    auto save = [&](const std::string& name) {
        if (config.run_dir.empty()) return;
        std::lock_guard lock(learner_mutex);
        save_checkpoint((fs::path(config.run_dir) / name).string(),
                        make_checkpoint(config, learner.nets(), actor.env_steps(), learner.steps()));
    };

    auto on_episode = [&](const EpisodeRecord& rec) {
        metrics.record(rec);
        std::optional<UpdateReport> report;
        {
            std::lock_guard lock(learner_mutex);
            report = last_report;
        }
        const std::string row = metrics_row(rec, metrics, report);
        if (files.metrics.is_open()) files.metrics.write(row);
        if (hooks.live != nullptr) hooks.live->set_metrics(row);
    };

    auto stop_requested = [&] {
        if (config.max_episodes > 0 && actor.episodes() >= config.max_episodes) return true;
        return hooks.stop != nullptr && hooks.stop->load();
    };

    auto rethrow_with_step = [&](const NumericalError& e) {
        throw NumericalError(e.stage() + " (env step " + std::to_string(actor.env_steps()) + ", learner step " +
                             std::to_string(learner.steps()) + ")");
    };

    const std::uint64_t utd = static_cast<std::uint64_t>(lc.utd);
    if (config.lockstep) {
        try {
            for (std::uint64_t step = 0; step < config.total_env_steps && !stop_requested(); ++step) {
                auto rec = actor.step();
                if (can_learn(lc, buffers)) {
                    for (std::uint64_t u = 0; u < utd; ++u) learner_step();
                }
                mailbox.publish(learner.nets().policy);
                if (rec) on_episode(*rec);
                if (config.eval_every > 0 && (step + 1) % config.eval_every == 0) save(checkpoint_name(step + 1));
            }
        } catch (const NumericalError& e) {
            rethrow_with_step(e);
        }
    } else {
        std::atomic<std::uint64_t> actor_steps{0};
        std::atomic<bool> finished{false};
        std::exception_ptr learner_error;
        std::thread worker([&] {
            try {
                while (!finished.load()) {
                    bool stepped = false;
                    {
                        std::lock_guard lock(learner_mutex);
                        if (learner.steps() < utd * actor_steps.load() && can_learn(lc, buffers)) {
                            learner_step();
                            stepped = true;
                            if (learner.steps() % static_cast<std::uint64_t>(lc.sync_every) == 0) {
                                mailbox.publish(learner.nets().policy);
                            }
                        }
                    }
                    if (!stepped) std::this_thread::sleep_for(std::chrono::microseconds(200));
                }
            } catch (...) {
                learner_error = std::current_exception();
                finished.store(true);
            }
        });
        try {
            for (std::uint64_t step = 0; step < config.total_env_steps && !stop_requested() && !finished.load();
                 ++step) {
                auto rec = actor.step();
                actor_steps.store(step + 1);
                if (rec) on_episode(*rec);
                if (config.eval_every > 0 && (step + 1) % config.eval_every == 0) save(checkpoint_name(step + 1));
            }
        } catch (...) {
            finished.store(true);
            worker.join();
            throw;
        }
        finished.store(true);
        worker.join();
        if (learner_error) {
            try {
                std::rethrow_exception(learner_error);
            } catch (const NumericalError& e) {
                rethrow_with_step(e);
            }
        }
    }

    save("final.ckpt");
    if (hooks.live != nullptr) hooks.live->set_finished();

    result.nets = learner.nets();
    result.episodes = metrics.episodes();
    result.final_rolling_success = metrics.rolling_success();
    result.final_intervention_ema = metrics.intervention_ema();
    result.env_steps = actor.env_steps();
    result.learner_steps = learner.steps();
    result.last_report = last_report;
    return result;
}

EvalResult evaluate_policy(EnvId id, const EnvParams& params, std::span<const std::uint64_t> seeds,
                           const PolicyFn& policy) {
    if (seeds.empty()) throw ValidationError("evaluation needs at least one episode");
    Env env(id, params);
    EvalResult out;
    double successes = 0.0;
    double length = 0.0;
    double wall = 0.0;
    for (std::uint64_t seed : seeds) {
        const auto start = std::chrono::steady_clock::now();
        const Episode ep = run_episode(env, seed, policy);
        wall += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        successes += ep.success ? 1.0 : 0.0;
        length += static_cast<double>(ep.steps.size());
    }
    const double n = static_cast<double>(seeds.size());
    out.episodes = static_cast<int>(seeds.size());
    out.success_rate = successes / n;
    out.mean_episode_length = length / n;
    out.mean_wall_seconds = wall / n;
    return out;
}

EvalResult evaluate(const Checkpoint& checkpoint, EnvId id, const EnvParams& params,
                    std::span<const std::uint64_t> seeds) {
    if (checkpoint.observation_dim() != observation_dim(id)) {
        throw ShapeError("checkpoint expects observations of width " + std::to_string(checkpoint.observation_dim()) +
                         " but " + std::string(to_string(id)) + " produces " + std::to_string(observation_dim(id)));
    }
    const ParamSet& policy = checkpoint.nets.policy;
    return evaluate_policy(id, params, seeds,
                           [&](const Env&, const Vector& obs) { return policy_mean_action(policy, obs); });
}

std::vector<std::uint64_t> held_out_seeds(int n, std::uint64_t base) {
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < n; ++k) seeds.push_back(base + static_cast<std::uint64_t>(k));
    return seeds;
}

std::vector<GateFieldRow> export_gate_field(const Checkpoint& checkpoint, EnvId id, const EnvParams& params,
                                            int resolution) {
    if (!checkpoint.has_gate) throw CheckpointError("checkpoint has no gate network to export");
    if (resolution < 1) throw ValidationError("gate field resolution must be at least 1");
    if (checkpoint.observation_dim() != observation_dim(id)) {
        throw ShapeError("checkpoint observation width does not match " + std::string(to_string(id)));
    }
    Env env(id, params);
    env.reset(0);
    const EnvState base = env.state();

    const auto n = static_cast<Eigen::Index>(resolution) * resolution;
    Matrix states(observation_dim(id), n);
    std::vector<GateFieldRow> rows(static_cast<std::size_t>(n));
    Eigen::Index col = 0;
    for (int j = 0; j < resolution; ++j) {
        for (int i = 0; i < resolution; ++i, ++col) {
            EnvState s = base;
            s.agent = Vec2((i + 0.5) / resolution, (j + 0.5) / resolution);
            s.velocity.setZero();
            states.col(col) = observe(params, s);
            rows[static_cast<std::size_t>(col)].x = s.agent.x();
            rows[static_cast<std::size_t>(col)].y = s.agent.y();
        }
    }
    const Vector beta = gate_batch(checkpoint.nets.gate, states);
    for (Eigen::Index k = 0; k < n; ++k) rows[static_cast<std::size_t>(k)].beta = beta(k);
    return rows;
}

void write_gate_field_csv(const std::string& path, const std::vector<GateFieldRow>& rows) {
    std::ofstream out(path);
    if (!out) throw CheckpointError("cannot write gate field to " + path);
    out << "x,y,beta\n";
    for (const auto& r : rows) out << format_number(r.x) << ',' << format_number(r.y) << ',' << format_number(r.beta) << '\n';
}

}  // namespace ohprl
