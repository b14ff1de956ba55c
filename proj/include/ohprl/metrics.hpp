#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ohprl/learner.hpp"

namespace ohprl {

struct EpisodeRecord {
    std::uint64_t episode = 0;
    std::uint64_t seed = 0;
    std::uint64_t end_step = 0;  // global env step count when the episode ended
    bool success = false;
    int length = 0;
    int intervened_steps = 0;
    double wall_seconds = 0.0;
    std::uint64_t param_version = 0;
};

/// Mean of the most recent min(window, n) flags; 0 for no flags.
double rolling_success(std::span<const bool> flags, int window);

/// First episode seeds the average; afterwards (1 - k) * prev + k * rate.
double ema_intervention(std::optional<double> previous, double episode_rate, double k);

/// Rolling success and intervention EMA, updated once per episode.
class RunMetrics {
public:
    RunMetrics(int window, double ema_k);

    void record(const EpisodeRecord& episode);

    double rolling_success() const;
    double intervention_ema() const { return ema_.value_or(0.0); }
    const std::vector<EpisodeRecord>& episodes() const { return episodes_; }

private:
    int window_;
    double ema_k_;
    std::vector<EpisodeRecord> episodes_;
    std::vector<bool> flags_;
    std::optional<double> ema_;
};

/// Column order of metrics.csv. Stable; absent learner values are empty fields.
inline constexpr const char* kMetricsColumns =
    "step,episode,rolling_success,interv_ema,ep_len,loss_critic,loss_actor,loss_online_gate,"
    "loss_pref_gate,loss_pref_actor,mean_beta_online,mean_beta_pref,mean_A,param_version";

/// One metrics.csv row (without trailing newline).
std::string metrics_row(const EpisodeRecord& episode, const RunMetrics& metrics,
                        const std::optional<UpdateReport>& report);

/// Column order of updates.csv (one row every sync_every learner steps).
inline constexpr const char* kUpdateColumns =
    "learner_step,loss_critic,loss_actor,loss_online_gate,loss_pref_gate,loss_pref_actor,mean_beta_online,"
    "mean_beta_pref,mean_A,grad_critic,grad_actor,grad_gate_online,grad_gate_pref,grad_pref_actor,"
    "policy_version,critic_version,target_version,gate_version";

std::string update_row(std::uint64_t learner_step, const UpdateReport& report);

/// Formats a double so that identical values always produce identical text.
std::string format_number(double v);

/// Appends header-first CSV rows to a file.
class CsvWriter {
public:
    CsvWriter() = default;
    CsvWriter(const std::string& path, const char* header);

    void write(const std::string& row);
    bool is_open() const { return out_.is_open(); }

private:
    std::ofstream out_;
};

}  // namespace ohprl
