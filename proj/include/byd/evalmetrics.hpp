#pragma once

// PE / OE / SR over evaluation episodes. Failed episodes never contribute
// to the error means; all-fail evaluations fall back to the defaults.

#include <map>
#include <string>
#include <vector>

#include "byd/core.hpp"
#include "byd/curriculum.hpp"

namespace byd {

struct EpisodeTrace {
  // per-step (position error m, rotation error rad)
  std::vector<std::pair<double, double>> errors;
  bool success = false;
  std::string task;
};

struct EvalReport {
  double pe_cm = 3.0;
  double oe_deg = 30.0;
  double sr_percent = 0.0;
  int n_episodes = 0;
  std::map<std::string, double> sr_per_task;
};

inline double position_error_cm(const std::vector<EpisodeTrace>& traces) {
  double sum = 0;
  long n = 0;
  for (const auto& tr : traces) {
    if (!tr.success) continue;
    for (const auto& [pe, oe] : tr.errors) {
      sum += pe;
      ++n;
    }
  }
  if (n == 0) return 3.0;
  return sum / n * 100.0;
}

inline double orientation_error_deg(const std::vector<EpisodeTrace>& traces) {
  double sum = 0;
  long n = 0;
  for (const auto& tr : traces) {
    if (!tr.success) continue;
    for (const auto& [pe, oe] : tr.errors) {
      sum += oe;
      ++n;
    }
  }
  if (n == 0) return 30.0;
  return sum / n * 180.0 / M_PI;
}

inline double success_rate_percent(const std::vector<EpisodeTrace>& traces) {
  require(!traces.empty(), ErrorCategory::contract,
          "success rate needs at least one episode");
  long s = 0;
  for (const auto& tr : traces)
    if (tr.success) ++s;
  return 100.0 * s / traces.size();
}

inline EvalReport make_eval_report(const std::vector<EpisodeTrace>& traces) {
  EvalReport r;
  r.n_episodes = static_cast<int>(traces.size());
  r.pe_cm = position_error_cm(traces);
  r.oe_deg = orientation_error_deg(traces);
  r.sr_percent = success_rate_percent(traces);
  std::map<std::string, std::pair<long, long>> per_task;
  for (const auto& tr : traces) {
    auto& [succ, total] = per_task[tr.task];
    if (tr.success) ++succ;
    ++total;
  }
  for (const auto& [task, counts] : per_task)
    r.sr_per_task[task] = 100.0 * counts.first / counts.second;
  return r;
}

}  // namespace byd
