#include "ohprl/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "ohprl/errors.hpp"

namespace ohprl {

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace

double rolling_success(std::span<const bool> flags, int window) {
    if (window < 1) throw ConfigError("rolling window must be at least 1");
    if (flags.empty()) return 0.0;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(window), flags.size());
    const auto recent = flags.last(count);
    const auto hits = std::count(recent.begin(), recent.end(), true);
    return static_cast<double>(hits) / static_cast<double>(count);
}

double ema_intervention(std::optional<double> previous, double episode_rate, double k) {
    if (!(k > 0.0 && k <= 1.0)) throw ConfigError("EMA factor must lie in (0, 1]");
    if (!previous) return episode_rate;
    return (1.0 - k) * *previous + k * episode_rate;
}

RunMetrics::RunMetrics(int window, double ema_k) : window_(window), ema_k_(ema_k) {}

void RunMetrics::record(const EpisodeRecord& episode) {
    episodes_.push_back(episode);
    flags_.push_back(episode.success);
    const double rate = episode.length > 0 ? static_cast<double>(episode.intervened_steps) / episode.length : 0.0;
    ema_ = ema_intervention(ema_, rate, ema_k_);
}

double RunMetrics::rolling_success() const {
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(window_), flags_.size());
    if (count == 0) return 0.0;
    const auto hits = std::count(flags_.end() - static_cast<std::ptrdiff_t>(count), flags_.end(), true);
    return static_cast<double>(hits) / static_cast<double>(count);
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string metrics_row(const EpisodeRecord& ep, const RunMetrics& metrics, const std::optional<UpdateReport>& r) {
    std::string row = std::to_string(ep.end_step) + "," + std::to_string(ep.episode) + "," +
                      format_number(metrics.rolling_success()) + "," + format_number(metrics.intervention_ema()) +
                      "," + std::to_string(ep.length);
    if (r) {
        row += "," + opt(r->loss_critic) + "," + opt(r->loss_actor) + "," + opt(r->loss_online_gate) + "," +
               opt(r->loss_pref_gate) + "," + opt(r->loss_pref_actor) + "," + opt(r->mean_beta_online) + "," +
               opt(r->mean_beta_pref) + "," + opt(r->mean_advantage);
    } else {
        row += ",,,,,,,,";
    }
    row += "," + std::to_string(ep.param_version);
    return row;
}

std::string update_row(std::uint64_t learner_step, const UpdateReport& r) {
    return std::to_string(learner_step) + "," + opt(r.loss_critic) + "," + opt(r.loss_actor) + "," +
           opt(r.loss_online_gate) + "," + opt(r.loss_pref_gate) + "," + opt(r.loss_pref_actor) + "," +
           opt(r.mean_beta_online) + "," + opt(r.mean_beta_pref) + "," + opt(r.mean_advantage) + "," +
           format_number(r.grad_norm_critic) + "," + format_number(r.grad_norm_actor) + "," +
           format_number(r.grad_norm_gate_online) + "," + format_number(r.grad_norm_gate_pref) + "," +
           format_number(r.grad_norm_pref_actor) + "," + std::to_string(r.policy_version) + "," +
           std::to_string(r.critic_version) + "," + std::to_string(r.target_version) + "," +
           std::to_string(r.gate_version);
}

CsvWriter::CsvWriter(const std::string& path, const char* header) : out_(path, std::ios::trunc) {
    if (!out_) throw ConfigError("cannot open " + path + " for writing");
    out_ << header << '\n';
}

void CsvWriter::write(const std::string& row) {
    out_ << row << '\n';
    out_.flush();
}

}  // namespace ohprl
