#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vilas::eval {

struct TrialRecord {
  int trial_id = 0;
  std::uint64_t seed = 0;
  std::vector<bool> attempt_outcomes;
  int grasp_count = 0;
  double wall_time_s = 0;
  double sim_time_s = 0;
  bool aborted = false;
  std::string abort_reason;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

/// At least two consecutive successes, or with any2 any two successes.
bool multi_success(const std::vector<bool>& outcomes, bool any2 = false);

struct SuccessRates {
  double single = 0;
  double multi = 0;
  std::optional<double> multi_any2;
  int trials_used = 0;
  int trials_aborted = 0;
};

/// Aborted trials are excluded and counted separately. Throws undefined_rate
/// when no usable trial remains.
SuccessRates success_rates(const std::vector<TrialRecord>& records, bool with_any2 = false);

struct LatencyStats {
  double mean_ms = 0;
  double median_ms = 0;
  double std_ms = 0;  // population
  double p95_ms = 0;  // nearest rank
  int horizon = 0;
  double per_step_ms = 0;
  std::size_t samples = 0;
};

LatencyStats latency_stats(std::vector<double> samples_ms, int horizon);

/// Two-decimal display rounding used by every report: round(x * 100) / 100.
double display_round(double x);
std::string format_ms(double x);
std::string format_percent(double fraction);

nlohmann::json to_json(const TrialRecord& r);
TrialRecord trial_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LatencyStats& s);
LatencyStats stats_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SuccessRates& r);

struct Report {
  std::string label;
  std::string generated_at;  // the only time-dependent field
  std::vector<TrialRecord> records;
  std::optional<LatencyStats> latency;
  SuccessRates rates;
  nlohmann::json settings = nlohmann::json::object();
};

nlohmann::json report_json(const Report& r);
Report report_from_json(const nlohmann::json& j);

/// Plain-text table with the columns Mean, Median, Std, P95, Horizon,
/// Per-step, Single, Multi.
std::string report_table(const Report& r);

/// Writes report.json and report.txt into dir.
void write_report(const Report& r, const std::string& dir);

}  // namespace vilas::eval
