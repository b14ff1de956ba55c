#include "ohprl/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "ohprl/errors.hpp"

namespace ohprl {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) {
        throw ConfigError("invalid number for " + key + ": '" + v + "'");
    }
    return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError("invalid integer for " + key + ": '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

std::vector<std::string> split_commas(const std::string& v) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(trim(item));
    return parts;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& p : split_commas(v)) out.push_back(parse_int<int>(key, p));
    return out;
}

Vec2 parse_vec2(const std::string& key, const std::string& v) {
    const auto parts = split_commas(v);
    if (parts.size() != 2) throw ConfigError("expected two comma-separated numbers for " + key);
    return {parse_double(key, parts[0]), parse_double(key, parts[1])};
}

struct Field {
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename Member>
Field double_field(Member member) {
    return {[member](const RunConfig& c) { return fmt_double(member(c)); },
            [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_double(k, v); }};
}

template <typename Int, typename Member>
Field int_field(Member member) {
    return {[member](const RunConfig& c) { return std::to_string(member(c)); },
            [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_int<Int>(k, v); }};
}

template <typename Member>
Field bool_field(Member member) {
    return {[member](const RunConfig& c) { return std::string(member(c) ? "true" : "false"); },
            [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_bool(k, v); }};
}

template <typename Member>
Field string_field(Member member) {
    return {[member](const RunConfig& c) { return member(c); },
            [member](RunConfig& c, const std::string&, const std::string& v) { member(c) = v; }};
}

template <typename Member>
Field vec2_field(Member member) {
    return {[member](const RunConfig& c) {
                const Vec2& p = member(c);
                return fmt_double(p.x()) + "," + fmt_double(p.y());
            },
            [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_vec2(k, v); }};
}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> t;
        // env
        t["env.id"] = {[](const RunConfig& c) { return std::string(to_string(c.env_id)); },
                       [](RunConfig& c, const std::string&, const std::string& v) { c.env_id = env_id_from_string(v); }};
        t["env.a_max"] = double_field([](auto& c) -> auto& { return c.env.a_max; });
        t["env.press.horizon"] = int_field<int>([](auto& c) -> auto& { return c.env.press_horizon; });
        t["env.press.button_x"] = double_field([](auto& c) -> auto& { return c.env.button_x; });
        t["env.press.button_top"] = double_field([](auto& c) -> auto& { return c.env.button_top; });
        t["env.press.button_width"] = double_field([](auto& c) -> auto& { return c.env.button_width; });
        t["env.press.side_band_width"] = double_field([](auto& c) -> auto& { return c.env.side_band_width; });
        t["env.press.side_band_margin"] = double_field([](auto& c) -> auto& { return c.env.side_band_margin; });
        t["env.press.approach_clearance"] =
            double_field([](auto& c) -> auto& { return c.env.approach_clearance; });
        t["env.press.approach_lookahead"] =
            double_field([](auto& c) -> auto& { return c.env.approach_lookahead; });
        t["env.push.horizon"] = int_field<int>([](auto& c) -> auto& { return c.env.push_horizon; });
        t["env.push.agent_radius"] = double_field([](auto& c) -> auto& { return c.env.agent_radius; });
        t["env.push.ball_radius"] = double_field([](auto& c) -> auto& { return c.env.ball_radius; });
        t["env.push.goal_radius"] = double_field([](auto& c) -> auto& { return c.env.goal_radius; });
        t["env.push.wall_band"] = double_field([](auto& c) -> auto& { return c.env.wall_band; });
        t["env.push.mu_lo"] = double_field([](auto& c) -> auto& { return c.env.mu_lo; });
        t["env.push.mu_hi"] = double_field([](auto& c) -> auto& { return c.env.mu_hi; });
        t["env.push.wall_restitution"] = double_field([](auto& c) -> auto& { return c.env.wall_restitution; });
        // learner
        t["learner.gamma"] = double_field([](auto& c) -> auto& { return c.learner.gamma; });
        t["learner.alpha"] = double_field([](auto& c) -> auto& { return c.learner.alpha; });
        t["learner.lambda_pref"] = double_field([](auto& c) -> auto& { return c.learner.lambda_pref; });
        t["learner.lr_theta"] = double_field([](auto& c) -> auto& { return c.learner.lr_theta; });
        t["learner.lr_phi"] = double_field([](auto& c) -> auto& { return c.learner.lr_phi; });
        t["learner.lr_beta"] = double_field([](auto& c) -> auto& { return c.learner.lr_beta; });
        t["learner.tau"] = double_field([](auto& c) -> auto& { return c.learner.tau; });
        t["learner.utd"] = int_field<int>([](auto& c) -> auto& { return c.learner.utd; });
        t["learner.batch_n"] = int_field<int>([](auto& c) -> auto& { return c.learner.batch_n; });
        t["learner.mode"] = {[](const RunConfig& c) { return std::string(to_string(c.learner.mode)); },
                             [](RunConfig& c, const std::string&, const std::string& v) {
                                 c.learner.mode = learner_mode_from_string(v);
                             }};
        t["learner.ablation"] = {[](const RunConfig& c) { return std::string(to_string(c.learner.ablation)); },
                                 [](RunConfig& c, const std::string&, const std::string& v) {
                                     c.learner.ablation = ablation_from_string(v);
                                 }};
        t["learner.fixed_beta_value"] =
            double_field([](auto& c) -> auto& { return c.learner.fixed_beta_value; });
        t["learner.twin_critic"] = bool_field([](auto& c) -> auto& { return c.learner.twin_critic; });
        t["learner.sync_every"] = int_field<int>([](auto& c) -> auto& { return c.learner.sync_every; });
        t["learner.combined_actor_update"] =
            bool_field([](auto& c) -> auto& { return c.learner.combined_actor_update; });
        t["learner.hidden"] = {[](const RunConfig& c) {
                                   std::string s;
                                   for (std::size_t k = 0; k < c.learner.hidden.size(); ++k) {
                                       if (k) s += ",";
                                       s += std::to_string(c.learner.hidden[k]);
                                   }
                                   return s;
                               },
                               [](RunConfig& c, const std::string& k, const std::string& v) {
                                   c.learner.hidden = parse_int_list(k, v);
                               }};
        // intervention
        t["intervention.mode"] = {[](const RunConfig& c) { return std::string(to_string(c.intervention)); },
                                  [](RunConfig& c, const std::string&, const std::string& v) {
                                      c.intervention = intervention_mode_from_string(v);
                                  }};
        t["intervention.stall_steps"] = int_field<int>([](auto& c) -> auto& { return c.oracle.stall_steps; });
        t["intervention.progress_tol"] = double_field([](auto& c) -> auto& { return c.oracle.progress_tol; });
        t["intervention.kp"] = double_field([](auto& c) -> auto& { return c.oracle.kp; });
        t["intervention.release_steps"] = int_field<int>([](auto& c) -> auto& { return c.oracle.release_steps; });
        t["intervention.press_safe_pose"] = vec2_field([](auto& c) -> auto& { return c.oracle.press_safe_pose; });
        t["intervention.push_safe_pose"] = vec2_field([](auto& c) -> auto& { return c.oracle.push_safe_pose; });
        t["intervention.safe_radius"] = double_field([](auto& c) -> auto& { return c.oracle.safe_radius; });
        // prefill / replay
        t["prefill.demos"] = int_field<int>([](auto& c) -> auto& { return c.prefill_demos; });
        t["prefill.rollouts"] = int_field<int>([](auto& c) -> auto& { return c.prefill_rollouts; });
        t["replay.online_capacity"] =
            int_field<std::size_t>([](auto& c) -> auto& { return c.online_capacity; });
        t["replay.pref_capacity"] = int_field<std::size_t>([](auto& c) -> auto& { return c.pref_capacity; });
        // run
        t["run.total_env_steps"] =
            int_field<std::uint64_t>([](auto& c) -> auto& { return c.total_env_steps; });
        t["run.max_episodes"] = int_field<std::uint64_t>([](auto& c) -> auto& { return c.max_episodes; });
        t["run.eval_every"] = int_field<std::uint64_t>([](auto& c) -> auto& { return c.eval_every; });
        t["run.seed"] = int_field<std::uint64_t>([](auto& c) -> auto& { return c.seed; });
        t["run.lockstep"] = bool_field([](auto& c) -> auto& { return c.lockstep; });
        t["run.dir"] = string_field([](auto& c) -> auto& { return c.run_dir; });
        t["run.write_trace"] = bool_field([](auto& c) -> auto& { return c.write_trace; });
        t["run.pace_steps_per_second"] =
            double_field([](auto& c) -> auto& { return c.pace_steps_per_second; });
        // metrics
        t["metrics.window"] = int_field<int>([](auto& c) -> auto& { return c.rolling_window; });
        t["metrics.ema_k"] = double_field([](auto& c) -> auto& { return c.ema_k; });
        // serve
        t["serve.bind"] = string_field([](auto& c) -> auto& { return c.serve_bind; });
        t["serve.port"] = int_field<int>([](auto& c) -> auto& { return c.serve_port; });
        t["serve.frame_rate"] = double_field([](auto& c) -> auto& { return c.frame_rate; });
        return t;
    }();
    return table;
}

}  // namespace

void validate(const RunConfig& c) {
    validate(c.learner);
    if (c.total_env_steps == 0) throw ConfigError("run.total_env_steps must be positive");
    if (c.prefill_demos < 0 || c.prefill_rollouts < 0) throw ConfigError("prefill counts must be non-negative");
    if (c.rolling_window < 1) throw ConfigError("metrics.window must be at least 1");
    if (!(c.ema_k > 0.0 && c.ema_k <= 1.0)) throw ConfigError("metrics.ema_k must lie in (0, 1]");
    if (c.online_capacity == 0 || c.pref_capacity == 0) throw ConfigError("buffer capacities must be positive");
    if (!(c.env.a_max > 0.0)) throw ConfigError("env.a_max must be positive");
    if (c.env.press_horizon < 1 || c.env.push_horizon < 1) throw ConfigError("horizons must be positive");
    if (!(c.env.mu_lo >= 0.0 && c.env.mu_lo <= c.env.mu_hi && c.env.mu_hi < 1.0)) {
        throw ConfigError("friction range must satisfy 0 <= mu_lo <= mu_hi < 1");
    }
    if (c.oracle.stall_steps < 1 || c.oracle.release_steps < 1) throw ConfigError("oracle step counts must be >= 1");
    if (!(c.frame_rate > 0.0)) throw ConfigError("serve.frame_rate must be positive");
    if (c.learner.mode == LearnerMode::Ohprl && c.prefill_demos == 0) {
        throw ConfigError("mode ohprl requires at least one demo episode (prefill.demos >= 1)");
    }
    if (c.prefill_demos == 0 && c.intervention == InterventionMode::None) {
        throw ConfigError("mode " + std::string(to_string(c.learner.mode)) +
                          " with zero demos and no intervenor never fills the preference buffer");
    }
}

void apply_setting(RunConfig& config, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    const auto& table = fields();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key: " + key);
    it->second.set(config, key, value);
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::map<std::string, std::string> to_key_values(const RunConfig& config) {
    std::map<std::string, std::string> kv;
    for (const auto& [key, field] : fields()) kv[key] = field.get(config);
    return kv;
}

std::string to_text(const RunConfig& config) {
    std::string out;
    for (const auto& [key, value] : to_key_values(config)) out += key + " = " + value + "\n";
    return out;
}

std::uint64_t config_hash(const RunConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_text(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace ohprl
