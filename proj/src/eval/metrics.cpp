#include "vilas/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "vilas/error.hpp"

namespace vilas::eval {

using nlohmann::json;

bool multi_success(const std::vector<bool>& outcomes, bool any2) {
  if (any2) return std::count(outcomes.begin(), outcomes.end(), true) >= 2;
  for (std::size_t i = 1; i < outcomes.size(); ++i) {
    if (outcomes[i] && outcomes[i - 1]) return true;
  }
  return false;
}

SuccessRates success_rates(const std::vector<TrialRecord>& records, bool with_any2) {
  SuccessRates r;
  int single = 0, multi = 0, any2 = 0;
  for (const auto& t : records) {
    if (t.aborted) {
      ++r.trials_aborted;
      continue;
    }
    ++r.trials_used;
    single += t.grasp_count >= 1;
    multi += multi_success(t.attempt_outcomes);
    any2 += multi_success(t.attempt_outcomes, true);
  }
  if (r.trials_used == 0) throw Error(Errc::undefined_rate, "success rates are undefined without usable trials");
  const double n = r.trials_used;
  r.single = single / n;
  r.multi = multi / n;
  if (with_any2) r.multi_any2 = any2 / n;
  return r;
}

LatencyStats latency_stats(std::vector<double> s, int horizon) {
  if (s.empty()) throw Error(Errc::empty_samples, "latency statistics need at least one sample");
  if (horizon < 1) throw Error(Errc::invalid_argument, "horizon must be at least 1");
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  LatencyStats st;
  st.samples = n;
  st.horizon = horizon;
  st.mean_ms = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
  st.median_ms = n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;
  double ss = 0;
  for (double v : s) ss += (v - st.mean_ms) * (v - st.mean_ms);
  st.std_ms = std::sqrt(ss / static_cast<double>(n));
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  st.p95_ms = s[std::max<std::size_t>(rank, 1) - 1];
  st.per_step_ms = st.mean_ms / horizon;
  return st;
}

double display_round(double x) { return std::round(x * 100.0) / 100.0; }

std::string format_ms(double x) { return fmt::format("{:.2f} ms", display_round(x)); }

std::string format_percent(double fraction) { return fmt::format("{:.0f}%", std::round(fraction * 100.0)); }

json to_json(const TrialRecord& r) {
  json j = {{"trial_id", r.trial_id},
            {"seed", r.seed},
            {"attempt_outcomes", r.attempt_outcomes},
            {"grasp_count", r.grasp_count},
            {"wall_time_s", r.wall_time_s},
            {"sim_time_s", r.sim_time_s},
            {"aborted", r.aborted}};
  if (r.aborted) j["abort_reason"] = r.abort_reason;
  return j;
}

TrialRecord trial_from_json(const json& j) {
  TrialRecord r;
  r.trial_id = j.at("trial_id").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.attempt_outcomes = j.at("attempt_outcomes").get<std::vector<bool>>();
  r.grasp_count = j.at("grasp_count").get<int>();
  r.wall_time_s = j.value("wall_time_s", 0.0);
  r.sim_time_s = j.value("sim_time_s", 0.0);
  r.aborted = j.value("aborted", false);
  r.abort_reason = j.value("abort_reason", "");
  return r;
}

json to_json(const LatencyStats& s) {
  return {{"mean_ms", s.mean_ms},
          {"median_ms", s.median_ms},
          {"std_ms", s.std_ms},
          {"p95_ms", s.p95_ms},
          {"horizon", s.horizon},
          {"per_step_ms", s.per_step_ms},
          {"samples", s.samples}};
}

LatencyStats stats_from_json(const json& j) {
  LatencyStats s;
  s.mean_ms = j.at("mean_ms").get<double>();
  s.median_ms = j.at("median_ms").get<double>();
  s.std_ms = j.at("std_ms").get<double>();
  s.p95_ms = j.at("p95_ms").get<double>();
  s.horizon = j.at("horizon").get<int>();
  s.per_step_ms = j.at("per_step_ms").get<double>();
  s.samples = j.at("samples").get<std::size_t>();
  return s;
}

json to_json(const SuccessRates& r) {
  json j = {{"single", r.single}, {"multi", r.multi}, {"trials_used", r.trials_used},
            {"trials_aborted", r.trials_aborted}};
  if (r.multi_any2) j["multi_any2"] = *r.multi_any2;
  return j;
}

json report_json(const Report& r) {
  json trials = json::array();
  for (const auto& t : r.records) trials.push_back(to_json(t));
  json j = {{"header", {{"label", r.label}, {"generated_at", r.generated_at}}},
            {"settings", r.settings},
            {"rates", to_json(r.rates)},
            {"trials", trials}};
  j["latency"] = r.latency ? to_json(*r.latency) : json(nullptr);
  return j;
}

Report report_from_json(const json& j) {
  Report r;
  r.label = j.at("header").value("label", "");
  r.generated_at = j.at("header").value("generated_at", "");
  r.settings = j.value("settings", json::object());
  for (const auto& t : j.at("trials")) r.records.push_back(trial_from_json(t));
  if (!j.at("latency").is_null()) r.latency = stats_from_json(j.at("latency"));
  const auto& rates = j.at("rates");
  r.rates.single = rates.at("single").get<double>();
  r.rates.multi = rates.at("multi").get<double>();
  r.rates.trials_used = rates.at("trials_used").get<int>();
  r.rates.trials_aborted = rates.at("trials_aborted").get<int>();
  if (rates.contains("multi_any2")) r.rates.multi_any2 = rates.at("multi_any2").get<double>();
  return r;
}

std::string report_table(const Report& r) {
  const std::vector<std::string> head{"Policy", "Mean", "Median", "Std", "P95", "Horizon", "Per-step", "Single",
                                      "Multi"};
  std::vector<std::string> row{r.label.empty() ? "-" : r.label};
  if (r.latency) {
    const auto& s = *r.latency;
    row.insert(row.end(), {format_ms(s.mean_ms), format_ms(s.median_ms), format_ms(s.std_ms), format_ms(s.p95_ms),
                           std::to_string(s.horizon), format_ms(s.per_step_ms)});
  } else {
    row.insert(row.end(), {"-", "-", "-", "-", "-", "-"});
  }
  row.push_back(format_percent(r.rates.single));
  row.push_back(format_percent(r.rates.multi));
  std::vector<std::size_t> width(head.size());
  for (std::size_t i = 0; i < head.size(); ++i) width[i] = std::max(head[i].size(), row[i].size());
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out += fmt::format("{:<{}}", cells[i], width[i]);
      out += i + 1 < cells.size() ? "  " : "\n";
    }
  };
  line(head);
  std::vector<std::string> rule;
  for (auto w : width) rule.push_back(std::string(w, '-'));
  line(rule);
  line(row);
  out += fmt::format("trials used: {}, aborted: {}\n", r.rates.trials_used, r.rates.trials_aborted);
  if (r.rates.multi_any2) out += fmt::format("multi (any two of three): {}\n", format_percent(*r.rates.multi_any2));
  return out;
}

void write_report(const Report& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream j(std::filesystem::path(dir) / "report.json");
  j << report_json(r).dump(2) << "\n";
  std::ofstream t(std::filesystem::path(dir) / "report.txt");
  t << report_table(r);
  if (!j || !t) throw Error(Errc::io, "cannot write report into " + dir);
}

}  // namespace vilas::eval
