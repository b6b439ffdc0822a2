#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokisim/trace.hpp"

namespace tokisim {

/// Nearest-rank percentile: 1-based index ceil(p * n) into the sorted values.
inline Cycles nearest_rank(std::vector<Cycles> values, double p) {
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

struct ResponseStats {
  std::uint64_t count = 0;
  Cycles min = 0, max = 0, mean = 0, p95 = 0, jitter = 0;
  std::uint64_t deadline_misses = 0;
};

struct IrqStats {
  std::uint64_t count = 0;
  Cycles min = 0, max = 0, mean = 0, p95 = 0;
  std::uint64_t overruns = 0;
};

struct PeriodUsage {
  Cycles boundary_time = 0;
  std::uint64_t accesses = 0;
  Cycles throttle_cycles = 0;
};

struct CoreUsage {
  std::vector<PeriodUsage> periods;
  std::uint64_t total_accesses = 0;
  Cycles total_throttle_cycles = 0;
};

struct MetricsReport {
  std::map<std::string, ResponseStats> tasks;
  std::map<std::string, IrqStats> interrupts;  // keyed by handler task id
  std::vector<CoreUsage> cores;                // empty when no regulation windows traced
  std::uint64_t dropped_events = 0;
  std::vector<std::string> integrity_errors;
};

namespace detail {
inline void fill_dist(std::vector<Cycles>& samples, Cycles& mn, Cycles& mx, Cycles& mean,
                      Cycles& p95, Cycles& jitter) {
  mn = *std::min_element(samples.begin(), samples.end());
  mx = *std::max_element(samples.begin(), samples.end());
  unsigned __int128 sum = 0;
  for (Cycles v : samples) sum += v;
  mean = static_cast<Cycles>(sum / samples.size());
  p95 = nearest_rank(samples, 0.95);
  jitter = mx - mn;
}
}  // namespace detail

/// Computes the metrics report from a trace stream alone.  Response times are
/// matched per job instance (JOB_RELEASE/JOB_COMPLETE), interrupt latencies
/// per assertion (IRQ_ENTER carries the matching assert time).  Orphaned
/// completes are reported as integrity errors; metrics cover matched pairs.
inline MetricsReport compute_metrics(const std::vector<TraceEvent>& events,
                                     std::uint64_t dropped_events = 0) {
  MetricsReport rep;
  rep.dropped_events = dropped_events;

  std::map<std::string, std::map<std::uint64_t, Cycles>> open_releases;  // task -> instance -> t
  std::map<std::string, std::vector<Cycles>> responses;
  std::map<std::string, std::uint64_t> misses;
  std::map<std::string, std::vector<Cycles>> irq_latencies;
  std::map<std::string, std::uint64_t> irq_overruns;
  bool any_irq = false;
  std::map<std::uint32_t, std::vector<PeriodUsage>> usage;

  // releases first so that matching is independent of event order in the file
  for (const auto& ev : events) {
    if (ev.kind == TraceKind::JobRelease) {
      open_releases[ev.task][ev.arg0] = ev.time;
      responses.try_emplace(ev.task);
    }
  }
  for (const auto& ev : events) {
    switch (ev.kind) {
      case TraceKind::JobComplete: {
        auto& open = open_releases[ev.task];
        auto it = open.find(ev.arg0);
        if (it == open.end()) {
          rep.integrity_errors.push_back("JOB_COMPLETE without matching JOB_RELEASE: task " +
                                         ev.task + " instance " + std::to_string(ev.arg0));
        } else {
          responses[ev.task].push_back(ev.time - it->second);
          open.erase(it);
        }
        break;
      }
      case TraceKind::DeadlineMiss:
        ++misses[ev.task];
        responses.try_emplace(ev.task);
        break;
      case TraceKind::IrqAssert:
        any_irq = true;
        if (ev.arg1 == 2) ++irq_overruns[ev.task];
        irq_latencies.try_emplace(ev.task);
        break;
      case TraceKind::IrqEnter:
        any_irq = true;
        if (ev.time < ev.arg0) {
          rep.integrity_errors.push_back("IRQ_ENTER before its assert time: task " + ev.task);
        } else {
          irq_latencies[ev.task].push_back(ev.time - ev.arg0);
        }
        break;
      case TraceKind::PeriodBoundary:
        // The boundary at t=0 opens the first period; it closes no window.
        if (ev.time > 0) usage[ev.core].push_back({ev.time, ev.arg0, ev.arg1});
        break;
      default:
        break;
    }
  }

  for (auto& [task, samples] : responses) {
    ResponseStats st;
    st.count = samples.size();
    st.deadline_misses = misses.count(task) ? misses[task] : 0;
    if (!samples.empty())
      detail::fill_dist(samples, st.min, st.max, st.mean, st.p95, st.jitter);
    rep.tasks[task] = st;
  }
  for (auto& [task, n] : misses)
    if (!rep.tasks.count(task)) rep.tasks[task] = {.deadline_misses = n};

  if (any_irq) {
    for (auto& [task, samples] : irq_latencies) {
      IrqStats st;
      st.count = samples.size();
      st.overruns = irq_overruns.count(task) ? irq_overruns[task] : 0;
      if (!samples.empty()) {
        Cycles jitter_unused;
        detail::fill_dist(samples, st.min, st.max, st.mean, st.p95, jitter_unused);
      }
      rep.interrupts[task] = st;
    }
  }

  if (!usage.empty()) {
    std::uint32_t max_core = usage.rbegin()->first;
    rep.cores.resize(max_core + 1);
    for (auto& [core, periods] : usage) {
      CoreUsage& cu = rep.cores[core];
      cu.periods = periods;
      for (const auto& p : periods) {
        cu.total_accesses += p.accesses;
        cu.total_throttle_cycles += p.throttle_cycles;
      }
    }
  }

  return rep;
}

/// Metrics JSON with stable key order; integer cycles throughout.
inline nlohmann::ordered_json metrics_to_json(const MetricsReport& rep) {
  nlohmann::ordered_json j;
  j["tasks"] = nlohmann::ordered_json::object();
  for (const auto& [task, st] : rep.tasks) {
    j["tasks"][task] = {{"count", st.count},     {"min", st.min},
                        {"max", st.max},         {"mean", st.mean},
                        {"p95", st.p95},         {"jitter", st.jitter},
                        {"deadline_misses", st.deadline_misses}};
  }
  if (!rep.interrupts.empty()) {
    j["interrupts"] = nlohmann::ordered_json::object();
    for (const auto& [task, st] : rep.interrupts) {
      j["interrupts"][task] = {{"count", st.count}, {"min", st.min},
                               {"max", st.max},     {"mean", st.mean},
                               {"p95", st.p95},     {"overruns", st.overruns}};
    }
  }
  if (!rep.cores.empty()) {
    j["cores"] = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < rep.cores.size(); ++c) {
      const CoreUsage& cu = rep.cores[c];
      nlohmann::ordered_json jc;
      jc["core"] = c;
      jc["total_accesses"] = cu.total_accesses;
      jc["total_throttle_cycles"] = cu.total_throttle_cycles;
      jc["periods"] = nlohmann::ordered_json::array();
      for (const auto& p : cu.periods)
        jc["periods"].push_back({{"time", p.boundary_time},
                                 {"accesses", p.accesses},
                                 {"throttle_cycles", p.throttle_cycles}});
      j["cores"].push_back(std::move(jc));
    }
  }
  j["dropped_events"] = rep.dropped_events;
  if (!rep.integrity_errors.empty()) j["integrity_errors"] = rep.integrity_errors;
  return j;
}

struct MetricDelta {
  std::string metric;
  std::int64_t a = 0, b = 0, delta = 0;
  double percent = 0.0;  // delta relative to a, in percent; 0 when a == 0
};

struct DiffReport {
  std::map<std::string, std::vector<MetricDelta>> tasks;
};

/// Per-task metric comparison of two runs over the same task set.
inline DiffReport compare_runs(const MetricsReport& a, const MetricsReport& b) {
  for (const auto& [task, st] : a.tasks)
    if (!b.tasks.count(task))
      throw std::invalid_argument("compare_runs: task '" + task + "' missing from second run");
  for (const auto& [task, st] : b.tasks)
    if (!a.tasks.count(task))
      throw std::invalid_argument("compare_runs: task '" + task + "' missing from first run");

  DiffReport diff;
  for (const auto& [task, sa] : a.tasks) {
    const ResponseStats& sb = b.tasks.at(task);
    auto add = [&](const char* name, std::uint64_t va, std::uint64_t vb) {
      MetricDelta d;
      d.metric = name;
      d.a = static_cast<std::int64_t>(va);
      d.b = static_cast<std::int64_t>(vb);
      d.delta = d.b - d.a;
      d.percent = d.a != 0 ? 100.0 * static_cast<double>(d.delta) / static_cast<double>(d.a)
                           : 0.0;
      diff.tasks[task].push_back(d);
    };
    add("count", sa.count, sb.count);
    add("min", sa.min, sb.min);
    add("max", sa.max, sb.max);
    add("mean", sa.mean, sb.mean);
    add("p95", sa.p95, sb.p95);
    add("jitter", sa.jitter, sb.jitter);
    add("deadline_misses", sa.deadline_misses, sb.deadline_misses);
  }
  return diff;
}

inline nlohmann::ordered_json diff_to_json(const DiffReport& diff) {
  nlohmann::ordered_json j;
  j["tasks"] = nlohmann::ordered_json::object();
  for (const auto& [task, deltas] : diff.tasks) {
    nlohmann::ordered_json jt = nlohmann::ordered_json::object();
    for (const auto& d : deltas)
      jt[d.metric] = {{"a", d.a}, {"b", d.b}, {"delta", d.delta}, {"percent", d.percent}};
    j["tasks"][task] = std::move(jt);
  }
  return j;
}

}  // namespace tokisim
