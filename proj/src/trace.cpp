#include "ohprl/trace.hpp"

#include <map>

#include <json.hpp>

#include "ohprl/errors.hpp"

namespace ohprl {

namespace {

using nlohmann::json;

json vec_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec2_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

TriggerReason reason_from_string(const std::string& s) {
    if (s == "none") return TriggerReason::None;
    if (s == "unsafe_entry") return TriggerReason::UnsafeEntry;
    if (s == "stall") return TriggerReason::Stall;
    if (s == "human") return TriggerReason::Human;
    throw ValidationError("unknown trigger reason in trace: " + s);
}

// Groups consecutive lines by episode index, preserving order.
std::vector<std::vector<const TraceStep*>> group_episodes(const std::vector<TraceStep>& steps) {
    std::vector<std::vector<const TraceStep*>> groups;
    for (const auto& s : steps) {
        if (groups.empty() || groups.back().front()->episode != s.episode) groups.emplace_back();
        groups.back().push_back(&s);
    }
    return groups;
}

}  // namespace

std::string to_jsonl(const TraceStep& s) {
    json j;
    j["env"] = std::string(to_string(s.env_id));
    j["episode"] = s.episode;
    j["seed"] = s.seed;
    j["t"] = s.t;
    j["p"] = vec2_json(s.agent);
    if (s.env_id == EnvId::PushBall) j["ball"] = vec2_json(s.ball);
    j["a"] = vec2_json(s.action);
    j["r"] = s.reward;
    j["d"] = s.done;
    j["flags"] = {{"success", s.success},
                  {"unsafe_contact", s.unsafe_contact},
                  {"truncated", s.truncated},
                  {"intervened", s.intervened},
                  {"reason", std::string(to_string(s.reason))}};
    return j.dump();
}

TraceStep trace_step_from_json(const std::string& line) {
    try {
        const json j = json::parse(line);
        TraceStep s;
        s.env_id = env_id_from_string(j.at("env").get<std::string>());
        s.episode = j.at("episode").get<std::uint64_t>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.t = j.at("t").get<int>();
        s.agent = vec2_from(j.at("p"));
        if (j.contains("ball")) s.ball = vec2_from(j.at("ball"));
        s.action = vec2_from(j.at("a"));
        s.reward = j.at("r").get<double>();
        s.done = j.value("d", s.reward);
        const auto& f = j.at("flags");
        s.success = f.at("success").get<bool>();
        s.unsafe_contact = f.at("unsafe_contact").get<bool>();
        s.truncated = f.at("truncated").get<bool>();
        s.intervened = f.value("intervened", false);
        s.reason = reason_from_string(f.value("reason", std::string("none")));
        return s;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed trace line: ") + e.what());
    }
}

TraceWriter::TraceWriter(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw ConfigError("cannot open trace file " + path);
}

void TraceWriter::write(const TraceStep& step) { out_ << to_jsonl(step) << '\n'; }

std::vector<TraceStep> read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open trace file " + path);
    std::vector<TraceStep> steps;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        steps.push_back(trace_step_from_json(line));
    }
    return steps;
}

ReplaySummary replay_trace(const std::vector<TraceStep>& steps, const EnvParams& params) {
    ReplaySummary summary;
    for (const auto& group : group_episodes(steps)) {
        Env env(group.front()->env_id, params);
        env.reset(group.front()->seed);
        ++summary.episodes;
        for (const TraceStep* s : group) {
            ++summary.steps;
            if (s->intervened) ++summary.intervened_steps;
            if (!env.episode_active()) {
                ++summary.mismatches;
                continue;
            }
            Vector a(2);
            a << s->action.x(), s->action.y();
            const StepResult r = env.step(a);
            const bool same = env.state().agent == s->agent && r.reward == s->reward && r.success == s->success &&
                              r.unsafe_contact == s->unsafe_contact && r.truncated == s->truncated &&
                              (s->env_id != EnvId::PushBall || env.state().ball == s->ball);
            if (!same) ++summary.mismatches;
            if (r.success) ++summary.successes;
        }
    }
    return summary;
}

std::vector<Episode> episodes_from_trace(const std::vector<TraceStep>& steps, const EnvParams& params) {
    std::vector<Episode> episodes;
    for (const auto& group : group_episodes(steps)) {
        Env env(group.front()->env_id, params);
        Vector obs = env.reset(group.front()->seed).observation;
        Episode ep;
        for (const TraceStep* s : group) {
            if (!env.episode_active()) throw ValidationError("trace continues past the end of an episode");
            Vector a(2);
            a << s->action.x(), s->action.y();
            const StepResult r = env.step(a);
            ep.steps.push_back(EpisodeStep{obs, a, r.reward, r.done, r.observation});
            ep.success = ep.success || r.success;
            obs = r.observation;
        }
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

void write_buffers_jsonl(const std::string& path, const BufferPair& buffers) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path);
    for (const auto& t : buffers.online.snapshot()) {
        json j{{"buffer", "online"}, {"s", vec_json(t.state)},  {"a", vec_json(t.action)},
               {"r", t.reward},      {"d", t.done},             {"s2", vec_json(t.next_state)}};
        out << j.dump() << '\n';
    }
    for (const auto& t : buffers.pref.snapshot()) {
        json j{{"buffer", "pref"},        {"s", vec_json(t.state)}, {"a_p", vec_json(t.preferred)},
               {"a_w", vec_json(t.weak)}, {"r", t.reward},          {"d", t.done},
               {"s2", vec_json(t.next_state)}};
        out << j.dump() << '\n';
    }
}

}  // namespace ohprl
