// Acceptance harness: one PASS/FAIL line per criterion on stdout, details on stderr.
// Exits 0 once every selected criterion has been reported.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "fixtures.hpp"
#include "ohprl/runtime.hpp"

using namespace ohprl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string summary;
};

std::ofstream report_file;

void report(int criterion, const Verdict& v) {
    const std::string line =
        std::string(v.pass ? "PASS" : "FAIL") + " criterion " + std::to_string(criterion) + ": " + v.summary;
    std::cout << line << std::endl;
    if (report_file.is_open()) report_file << line << std::endl;
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::string fmt(double v, int precision = 3) {
    std::ostringstream out;
    out.precision(precision);
    out << v;
    return out.str();
}

std::string list(const std::vector<double>& xs) {
    std::string s = "[";
    for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? " " : "") + fmt(xs[k]);
    return s + "]";
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

Verdict gradient_soundness() {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_name = "-";
    bool finite = true;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        for (const auto& c : fixture::gradient_cases(seed, 1e-5)) {
            if (!std::isfinite(c.max_relative_error)) {
                finite = false;
                worst_name = c.name;
            } else if (c.max_relative_error > worst) {
                worst = c.max_relative_error;
                worst_name = c.name;
            }
        }
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {finite && worst <= 1e-4 && seconds < 60.0,
            "max relative error " + fmt(worst) + " (" + worst_name + ") over 5 losses x 5 seeds, " + fmt(seconds) +
                " s"};
}

Verdict closed_forms() {
    double worst = 0.0;
    std::string worst_name = "-";
    const auto forms = fixture::closed_forms();
    for (const auto& c : forms) {
        const double err = std::abs(c.value - c.expected);
        if (!(err <= worst)) {  // NaN counts as worse
            worst = err;
            worst_name = c.name;
        }
    }
    return {worst <= 1e-12, std::to_string(forms.size()) + " closed forms, max abs error " + fmt(worst) + " (" +
                                worst_name + ")"};
}

Verdict gate_regression() {
    bool pass = true;
    std::string detail;
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        const fixture::GateRegression r = fixture::run_gate_regression(seed, 2000, 1e-3);
        const auto means = fixture::run_online_gate_only(seed, 100);
        bool strictly_down = true;
        for (std::size_t k = 1; k < means.size(); ++k) strictly_down = strictly_down && means[k] < means[k - 1];
        const bool ok = r.min_abs_advantage >= 1.0 && r.beta_positive >= 0.7 && r.beta_negative <= 0.3 &&
                        r.mse < 1e-3 && strictly_down;
        pass = pass && ok;
        detail += " seed " + std::to_string(seed) + ": beta+ " + fmt(r.beta_positive) + " beta- " +
                  fmt(r.beta_negative) + " mse " + fmt(r.mse) + " online " + fmt(means.front()) + "->" +
                  fmt(means.back()) + (strictly_down ? "" : " (not monotone)") + ";";
    }
    return {pass, detail.substr(1)};
}

Verdict no_leakage() {
    bool pass = true;
    std::string failure;
    int checks = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::string detail;
        ++checks;
        if (!fixture::weak_action_isolated(seed, &detail)) {
            pass = false;
            failure += " a_w seed " + std::to_string(seed) + ": " + detail;
        }
    }
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        std::string detail;
        ++checks;
        if (!fixture::lambda_zero_matches_replay_only(seed, 25, &detail)) {
            pass = false;
            failure += " lambda0 seed " + std::to_string(seed) + ": " + detail;
        }
    }
    return {pass, std::to_string(checks) + " bitwise checks" + (pass ? ", all identical" : ";" + failure)};
}

RunConfig press_config(const fs::path& dir, std::uint64_t seed) {
    RunConfig c;
    c.env_id = EnvId::PressButton;
    c.intervention = InterventionMode::Oracle;
    c.learner.mode = LearnerMode::Ohprl;
    c.learner.alpha = 0.001;
    c.learner.utd = 4;
    c.learner.batch_n = 64;
    c.total_env_steps = 300 * 100;
    c.max_episodes = 300;
    c.eval_every = 1000000;
    c.write_trace = false;
    c.lockstep = true;
    c.seed = seed;
    c.run_dir = dir.string();
    return c;
}

RunConfig push_config(const fs::path& dir, std::uint64_t seed, LearnerMode mode, InterventionMode intervention,
                      std::uint64_t steps) {
    RunConfig c;
    c.env_id = EnvId::PushBall;
    c.intervention = intervention;
    c.learner.mode = mode;
    c.learner.alpha = 0.001;
    c.learner.utd = 2;
    c.learner.batch_n = 64;
    c.total_env_steps = steps;
    c.eval_every = 1000000;
    c.write_trace = false;
    c.lockstep = true;
    c.seed = seed;
    c.run_dir = dir.string();
    return c;
}

struct PressRun {
    double rolling_success = 0.0;
    double intervention_ema = 0.0;
    double cpu = 0.0;
    double eval_success = 0.0;
    double gate_contrast = 0.0;
    std::size_t episodes = 0;
};

double mean_beta(const ParamSet& gate, const Matrix& states) { return gate_batch(gate, states).mean(); }

PressRun run_press(const RunConfig& config, bool with_gate) {
    const double t0 = cpu_seconds();
    const TrainResult r = train(config);
    PressRun out;
    out.cpu = cpu_seconds() - t0;
    out.rolling_success = r.final_rolling_success;
    out.intervention_ema = r.final_intervention_ema;
    out.episodes = r.episodes.size();
    const Checkpoint ckpt = make_checkpoint(config, r.nets, r.env_steps, r.learner_steps);
    const auto seeds = held_out_seeds(50);
    out.eval_success = evaluate(ckpt, config.env_id, config.env, seeds).success_rate;
    if (with_gate) {
        std::vector<Transition> online = r.buffers.online.snapshot();
        std::vector<PreferenceTuple> pref = r.buffers.pref.snapshot();
        out.gate_contrast = mean_beta(r.nets.gate, stack(pref).states) - mean_beta(r.nets.gate, stack(online).states);
    }
    std::cerr << "  " << to_string(config.learner.mode) << "/" << to_string(config.learner.ablation) << " seed "
              << config.seed << ": episodes " << out.episodes << " rolling " << fmt(out.rolling_success) << " ema "
              << fmt(out.intervention_ema) << " eval " << fmt(out.eval_success) << " cpu " << fmt(out.cpu, 4)
              << " s" << (with_gate ? " beta(D_p)-beta(D_online) " + fmt(out.gate_contrast) : std::string()) << "\n";
    return out;
}

Verdict determinism(const fs::path& work) {
    auto run = [&](const std::string& name) {
        RunConfig c = press_config(work / name, 5);
        c.total_env_steps = 1500;
        c.max_episodes = 0;
        c.write_trace = true;
        train(c);
        return read_file(work / name / "metrics.csv");
    };
    const std::string a = run("determinism_a");
    const std::string b = run("determinism_b");
    const auto rows = std::count(a.begin(), a.end(), '\n');
    return {!a.empty() && a == b, std::to_string(rows) + " metrics lines, " + std::to_string(a.size()) + " bytes, " +
                                      (a == b ? "byte-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria for the ohprl trainer"};
    std::vector<int> only;
    std::string work_dir = (fs::temp_directory_path() / "ohprl_acceptance").string();
    int seeds = 5;
    std::uint64_t push_steps = 24000;
    app.add_option("--only", only, "Criteria to run (default: 1-9)");
    app.add_option("--work-dir", work_dir, "Directory for run outputs");
    app.add_option("--seeds", seeds, "Training seeds per configuration")->check(CLI::PositiveNumber);
    app.add_option("--push-steps", push_steps, "Environment steps per push_ball run");
    std::string report_path;
    app.add_option("--report", report_path, "Also write the PASS/FAIL lines to this file");
    CLI11_PARSE(app, argc, argv);
    if (!report_path.empty()) report_file.open(report_path);

    std::set<int> selected(only.begin(), only.end());
    if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    auto wanted = [&](int k) { return selected.count(k) > 0; };
    const fs::path work(work_dir);
    fs::create_directories(work);

    if (wanted(1)) report(1, gradient_soundness());
    if (wanted(2)) report(2, closed_forms());
    if (wanted(3)) report(3, gate_regression());

    if (wanted(4) || wanted(5) || wanted(7)) {
        std::vector<PressRun> full;
        for (int s = 0; s < seeds; ++s) {
            full.push_back(run_press(press_config(work / ("press_ohprl_" + std::to_string(s)), s), true));
        }
        std::vector<double> rolling, ema, cpu, eval, contrast;
        for (const auto& r : full) {
            rolling.push_back(r.rolling_success);
            ema.push_back(r.intervention_ema);
            cpu.push_back(r.cpu / 60.0);
            eval.push_back(r.eval_success);
            contrast.push_back(r.gate_contrast);
        }
        if (wanted(4)) {
            const bool ok = median(rolling) >= 0.9 && median(ema) <= 0.1 &&
                            *std::max_element(cpu.begin(), cpu.end()) <= 10.0;
            report(4, {ok, "median rolling success " + fmt(median(rolling)) + " " + list(rolling) +
                               ", median final EMA " + fmt(median(ema)) + " " + list(ema) + ", CPU min/seed " +
                               list(cpu)});
        }
        if (wanted(5)) {
            std::vector<double> without_rl, fixed;
            for (int s = 0; s < seeds; ++s) {
                RunConfig c = press_config(work / ("press_without_rl_" + std::to_string(s)), s);
                c.learner.ablation = Ablation::WithoutRl;
                without_rl.push_back(run_press(c, false).eval_success);
                c = press_config(work / ("press_fixed_beta_" + std::to_string(s)), s);
                c.learner.ablation = Ablation::FixedBeta;
                fixed.push_back(run_press(c, false).eval_success);
            }
            const double base = median(eval);
            const bool ok = median(without_rl) <= base - 0.2 && median(fixed) <= base;
            report(5, {ok, "median eval success: ohprl " + fmt(base) + " " + list(eval) + ", without_rl " +
                               fmt(median(without_rl)) + " " + list(without_rl) + ", fixed_beta " +
                               fmt(median(fixed)) + " " + list(fixed)});
        }
        if (wanted(7)) {
            report(7, {median(contrast) >= 0.2,
                       "median beta(D_p) - beta(D_online) " + fmt(median(contrast)) + " " + list(contrast)});
        }
    }

    if (wanted(6)) {
        std::vector<double> drop_ohprl, drop_sil;
        const auto eval_seeds = held_out_seeds(50);
        for (int s = 0; s < seeds; ++s) {
            for (LearnerMode mode : {LearnerMode::Ohprl, LearnerMode::SilRi}) {
                double success[2] = {0.0, 0.0};
                int k = 0;
                for (InterventionMode iv : {InterventionMode::Oracle, InterventionMode::OracleSafeRegion}) {
                    const std::string name = "push_" + std::string(to_string(mode)) + "_" +
                                             std::string(to_string(iv)) + "_" + std::to_string(s);
                    const RunConfig c = push_config(work / name, s, mode, iv, push_steps);
                    const TrainResult r = train(c);
                    const Checkpoint ckpt = make_checkpoint(c, r.nets, r.env_steps, r.learner_steps);
                    success[k++] = evaluate(ckpt, c.env_id, c.env, eval_seeds).success_rate;
                }
                (mode == LearnerMode::Ohprl ? drop_ohprl : drop_sil).push_back(success[0] - success[1]);
                std::cerr << "  push " << to_string(mode) << " seed " << s << ": oracle " << fmt(success[0])
                          << " safe_region " << fmt(success[1]) << "\n";
            }
        }
        report(6, {median(drop_sil) > median(drop_ohprl), "median success drop under safe-region: sil_ri " +
                                                              fmt(median(drop_sil)) + " " + list(drop_sil) +
                                                              ", ohprl " + fmt(median(drop_ohprl)) + " " +
                                                              list(drop_ohprl)});
    }

    if (wanted(8)) report(8, no_leakage());
    if (wanted(9)) report(9, determinism(work));
    return 0;
}
