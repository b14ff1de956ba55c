#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ohprl/intervention.hpp"
#include "ohprl/replay.hpp"
#include "ohprl/sim_envs.hpp"

namespace ohprl {

/// One line of an episode trace.
struct TraceStep {
    EnvId env_id = EnvId::PressButton;
    std::uint64_t episode = 0;
    std::uint64_t seed = 0;
    int t = 0;           // step index within the episode, from 0
    Vec2 agent;          // agent position after the step
    Vec2 ball;           // push_ball only
    Vec2 action;         // executed action
    double reward = 0.0;
    double done = 0.0;
    bool success = false;
    bool unsafe_contact = false;
    bool truncated = false;
    bool intervened = false;
    TriggerReason reason = TriggerReason::None;
};

std::string to_jsonl(const TraceStep& step);
TraceStep trace_step_from_json(const std::string& line);

/// Writes one JSON object per line.
class TraceWriter {
public:
    TraceWriter() = default;
    explicit TraceWriter(const std::string& path);

    void write(const TraceStep& step);
    bool is_open() const { return out_.is_open(); }

private:
    std::ofstream out_;
};

std::vector<TraceStep> read_trace(const std::string& path);

struct ReplaySummary {
    std::size_t episodes = 0;
    std::size_t steps = 0;
    std::size_t successes = 0;
    std::size_t intervened_steps = 0;
    std::size_t mismatches = 0;  // steps whose re-simulated outcome differs from the trace
};

/// Re-executes every traced episode from its seed and checks positions,
/// rewards and flags against the recorded values.
ReplaySummary replay_trace(const std::vector<TraceStep>& steps, const EnvParams& params);

/// Rebuilds full episodes (observations included) by re-simulating a trace.
std::vector<Episode> episodes_from_trace(const std::vector<TraceStep>& steps, const EnvParams& params);

/// Dumps both buffers, oldest first, one JSON object per item.
void write_buffers_jsonl(const std::string& path, const BufferPair& buffers);

}  // namespace ohprl
