#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tokisim/model.hpp"

namespace tokisim {

/// Ratios are fixed-point parts-per-thousand for bit-exact config files.
struct WorkloadSpec {
  std::uint32_t n_tasks = 1;
  std::uint32_t total_utilization = 500;  // per mille
  std::vector<Cycles> period_choices;
  std::uint32_t memory_intensity = 0;     // per mille, fraction of cost spent as accesses
  std::uint64_t seed = 1;
};

/// The generator PRNG is part of the reproducibility contract: a 64-bit LCG
/// (Knuth MMIX multiplier 6364136223846793005, increment 1442695040888963407);
/// uniform doubles take the top 53 bits of the state.
class Lcg {
 public:
  explicit Lcg(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return state_;
  }

  double uniform01() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }

  /// Uniform in [0, n).
  std::uint64_t below(std::uint64_t n) { return next() % n; }

 private:
  std::uint64_t state_;
};

/// UUniFast (Bini & Buttazzo): draws n utilizations uniformly over the
/// simplex summing to the target.  Returns per-mille values; rounding keeps
/// the sum within +-n per mille of the target.
inline std::vector<std::uint32_t> uunifast(std::uint32_t n, std::uint32_t total_pm, Lcg& rng) {
  std::vector<std::uint32_t> out;
  out.reserve(n);
  double sum = static_cast<double>(total_pm) / 1000.0;
  for (std::uint32_t i = 1; i < n; ++i) {
    double next = sum * std::pow(rng.uniform01(), 1.0 / static_cast<double>(n - i));
    out.push_back(static_cast<std::uint32_t>(std::llround((sum - next) * 1000.0)));
    sum = next;
  }
  out.push_back(static_cast<std::uint32_t>(std::llround(sum * 1000.0)));
  return out;
}

struct WorkloadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Generates a deterministic periodic task set: utilizations via UUniFast,
/// periods drawn uniformly from the period grid, cost split into compute and
/// accesses by memory_intensity (accesses = round(intensity * cost / S),
/// clamped so compute stays non-negative).  Single segment per task.
inline std::vector<Task> generate_taskset(const WorkloadSpec& spec, Cycles mem_service_time) {
  if (spec.n_tasks == 0) throw WorkloadError("n_tasks must be >= 1");
  if (spec.period_choices.empty()) throw WorkloadError("period_choices must be non-empty");
  if (spec.total_utilization == 0) throw WorkloadError("total_utilization must be > 0");
  if (spec.memory_intensity > 1000) throw WorkloadError("memory_intensity must be <= 1000");

  Lcg rng(spec.seed);
  auto utils = uunifast(spec.n_tasks, spec.total_utilization, rng);

  std::vector<Task> tasks;
  for (std::uint32_t i = 0; i < spec.n_tasks; ++i) {
    Cycles period = spec.period_choices[rng.below(spec.period_choices.size())];
    Cycles cost = static_cast<Cycles>(utils[i]) * period / 1000;
    if (cost == 0)
      throw WorkloadError("utilization too small for period grid (task " + std::to_string(i) +
                          ")");
    std::uint64_t accesses = (static_cast<std::uint64_t>(spec.memory_intensity) * cost +
                              500ULL * mem_service_time) /
                             (1000ULL * mem_service_time);
    if (accesses * mem_service_time > cost) accesses = cost / mem_service_time;
    Task t;
    t.id = "t" + std::to_string(i);
    t.core = 0;
    t.period = period;
    t.offset = 0;
    t.relative_deadline = period;
    t.profile.segments.push_back({cost - accesses * mem_service_time, accesses});
    tasks.push_back(std::move(t));
  }
  return tasks;
}

/// Wraps a generated task set into a complete deployment: `n_cores` cores
/// with the given policy, tasks partitioned round-robin by index.
inline Deployment wrap_taskset(std::vector<Task> tasks, std::uint32_t n_cores,
                               SchedPolicy policy, Platform platform = {}) {
  Deployment d;
  d.platform = platform;
  for (std::uint32_t c = 0; c < n_cores; ++c) d.cores.push_back({policy, 0});
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    tasks[i].core = static_cast<std::uint32_t>(i % n_cores);
    if (policy == SchedPolicy::FP) tasks[i].priority = static_cast<int>(tasks.size() - i);
    d.tasks.push_back(std::move(tasks[i]));
  }
  return d;
}

enum class InterferenceVariant { Regulated, Unregulated };

/// Canonical 2-core memguard comparison scenario: core 0 runs a critical
/// periodic task with a memory-heavy phase, core 1 runs a hog task that
/// saturates the bus.  The regulated variant constrains the hog's budget;
/// both variants are otherwise identical.
inline Deployment interference_scenario(InterferenceVariant variant) {
  Deployment d;
  d.platform = {};  // 100000-cycle tick, 40-cycle service, 50-cycle dispatch
  d.cores = {{SchedPolicy::FP, 0}, {SchedPolicy::FP, 0}};

  Task critical;
  critical.id = "critical";
  critical.core = 0;
  critical.period = 100000;
  critical.offset = 0;
  critical.relative_deadline = 100000;
  critical.priority = 10;
  critical.profile.segments.push_back({20000, 200});
  d.tasks.push_back(std::move(critical));

  Task hog;
  hog.id = "hog";
  hog.core = 1;
  hog.period = 10000000;
  hog.offset = 0;
  hog.relative_deadline = 10000000;
  hog.priority = 10;
  hog.profile.segments.push_back({0, 240000});
  d.tasks.push_back(std::move(hog));

  if (variant == InterferenceVariant::Regulated) {
    RegulatorConfig r;
    r.period = 100000;
    r.budgets = {400, 100};
    r.guaranteed_min = 2500;  // bus capacity per period: period / mem_service_time
    r.chunk_size = {100, 25};
    d.regulator = std::move(r);
  }
  return d;
}

}  // namespace tokisim
