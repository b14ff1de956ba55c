#include <atomic>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ohprl/checkpoint.hpp"
#include "ohprl/config.hpp"
#include "ohprl/errors.hpp"
#include "ohprl/runtime.hpp"
#include "ohprl/serve.hpp"
#include "ohprl/trace.hpp"

using namespace ohprl;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

struct ConfigArgs {
    std::string file;
    std::vector<std::string> sets;
    bool lockstep = false;

    void attach(CLI::App* cmd, bool with_lockstep) {
        cmd->add_option("-c,--config", file, "config file (key = value lines)");
        cmd->add_option("--set", sets, "override one setting, key=value (repeatable)");
        if (with_lockstep) cmd->add_flag("--lockstep", lockstep, "single-threaded deterministic interleaving");
    }

    RunConfig load() const {
        RunConfig config = file.empty() ? RunConfig{} : load_config_file(file);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
        }
        if (lockstep) config.lockstep = true;
        return config;
    }
};

void print_train_summary(const TrainResult& r) {
    nlohmann::json j = {{"run_dir", r.run_dir},
                        {"env_steps", r.env_steps},
                        {"learner_steps", r.learner_steps},
                        {"episodes", r.episodes.size()},
                        {"rolling_success", r.final_rolling_success},
                        {"intervention_ema", r.final_intervention_ema},
                        {"online_size", r.buffers.online.size()},
                        {"pref_size", r.buffers.pref.size()}};
    std::cout << j.dump(2) << "\n";
}

int run_train(const ConfigArgs& args) {
    const RunConfig config = args.load();
    TrainHooks hooks;
    hooks.stop = &g_stop;
    OverrideMailbox mailbox;
    hooks.overrides = &mailbox;
    print_train_summary(train(config, hooks));
    return 0;
}

int run_serve(const ConfigArgs& args) {
    RunConfig config = args.load();
    if (config.pace_steps_per_second <= 0.0) config.pace_steps_per_second = config.frame_rate;
    LiveState live;
    OverrideMailbox mailbox;
    ConsoleServer server({config.serve_bind, config.serve_port, config.frame_rate}, live, mailbox, config.env);
    server.start();
    std::fprintf(stderr, "console endpoint ws://%s:%d (intervention mode %s)\n", config.serve_bind.c_str(),
                 server.port(), std::string(to_string(config.intervention)).c_str());
    TrainHooks hooks;
    hooks.stop = &g_stop;
    hooks.overrides = &mailbox;
    hooks.live = &live;
    const TrainResult result = train(config, hooks);
    server.stop();
    print_train_summary(result);
    return 0;
}

int run_eval(const ConfigArgs& args, const std::string& checkpoint_path, const std::string& env_name, int episodes,
             std::uint64_t seed_base) {
    const RunConfig config = args.load();
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const EnvId id = env_name.empty() ? ck.env_id : env_id_from_string(env_name);
    if (episodes <= 0) throw ValidationError("--episodes must be positive");
    const auto seeds = held_out_seeds(episodes, seed_base);
    const EvalResult r = evaluate(ck, id, config.env, seeds);
    nlohmann::json j = {{"checkpoint", checkpoint_path},
                        {"env", std::string(to_string(id))},
                        {"mode", std::string(to_string(ck.mode))},
                        {"episodes", r.episodes},
                        {"success_rate", r.success_rate},
                        {"mean_episode_length", r.mean_episode_length},
                        {"mean_wall_seconds", r.mean_wall_seconds}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_export(const ConfigArgs& args, const std::string& checkpoint_path, const std::string& out, int resolution) {
    const RunConfig config = args.load();
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const auto rows = export_gate_field(ck, ck.env_id, config.env, resolution);
    write_gate_field_csv(out, rows);
    std::fprintf(stderr, "wrote %zu gate values to %s\n", rows.size(), out.c_str());
    return 0;
}

int run_replay(const ConfigArgs& args, const std::string& trace_path) {
    const RunConfig config = args.load();
    const ReplaySummary s = replay_trace(read_trace(trace_path), config.env);
    nlohmann::json j = {{"episodes", s.episodes},
                        {"steps", s.steps},
                        {"successes", s.successes},
                        {"intervened_steps", s.intervened_steps},
                        {"mismatches", s.mismatches}};
    std::cout << j.dump(2) << "\n";
    return s.mismatches == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ohprl: intervention-driven preference RL trainer"};
    app.require_subcommand(1);

    ConfigArgs train_args, serve_args, eval_args, export_args, replay_args;

    auto* train_cmd = app.add_subcommand("train", "prefill, then train until run.total_env_steps");
    train_args.attach(train_cmd, true);

    auto* serve_cmd = app.add_subcommand("serve", "train with the WebSocket console attached");
    serve_args.attach(serve_cmd, true);

    std::string checkpoint, env_name, out = "gate_field.csv", trace;
    int episodes = 100, resolution = 50;
    std::uint64_t seed_base = 1000000;

    auto* eval_cmd = app.add_subcommand("eval", "deterministic evaluation of a checkpoint on held-out seeds");
    eval_args.attach(eval_cmd, false);
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--env", env_name, "press_button or push_ball (default: the checkpoint's env)");
    eval_cmd->add_option("-n,--episodes", episodes, "number of evaluation episodes");
    eval_cmd->add_option("--seed-base", seed_base, "first evaluation seed");

    auto* export_cmd = app.add_subcommand("export-gate-field", "write beta over a grid of agent positions as CSV");
    export_args.attach(export_cmd, false);
    export_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    export_cmd->add_option("-o,--out", out, "output CSV path");
    export_cmd->add_option("-r,--resolution", resolution, "grid points per axis");

    auto* replay_cmd = app.add_subcommand("replay-trace", "re-simulate a trace.jsonl and report mismatches");
    replay_args.attach(replay_cmd, false);
    replay_cmd->add_option("trace", trace, "trace.jsonl path")->required();

    CLI11_PARSE(app, argc, argv);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    try {
        if (train_cmd->parsed()) return run_train(train_args);
        if (serve_cmd->parsed()) return run_serve(serve_args);
        if (eval_cmd->parsed()) return run_eval(eval_args, checkpoint, env_name, episodes, seed_base);
        if (export_cmd->parsed()) return run_export(export_args, checkpoint, out, resolution);
        if (replay_cmd->parsed()) return run_replay(replay_args, trace);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "training aborted: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
