#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tokisim {

/// All times and durations are simulated CPU cycles.
using Cycles = std::uint64_t;

enum class SchedPolicy { FP, RM, DM, EDF };
enum class TaskKind { Periodic, InterruptHandler };
enum class DeadlineMissPolicy { RecordContinue, AbortJob };
enum class BusArbitration { RoundRobin };

struct Platform {
  Cycles cycles_per_tick = 100000;
  Cycles mem_service_time = 40;
  Cycles dispatch_overhead = 50;
  BusArbitration bus_arbitration = BusArbitration::RoundRobin;
};

/// One profile segment: `compute` cycles of CPU work interleaved with
/// `mem_accesses` shared-memory accesses.  Accesses are spread by strict
/// interleaving: after every floor(compute / (mem_accesses + 1)) compute
/// cycles one access is issued; leftover compute trails at the end.
struct Segment {
  Cycles compute = 0;
  std::uint64_t mem_accesses = 0;
};

struct ExecutionProfile {
  std::vector<Segment> segments;

  /// Cost on an uncontended bus: compute plus one full service time per access.
  Cycles uncontended_cost(Cycles mem_service_time) const {
    Cycles total = 0;
    for (const auto& s : segments) total += s.compute + s.mem_accesses * mem_service_time;
    return total;
  }

  std::uint64_t total_accesses() const {
    std::uint64_t n = 0;
    for (const auto& s : segments) n += s.mem_accesses;
    return n;
  }
};

struct Task {
  std::string id;
  std::uint32_t core = 0;
  Cycles period = 0;  // 0 for interrupt handlers (released by assertion only)
  Cycles offset = 0;
  std::optional<Cycles> relative_deadline;  // defaulted to period for periodic tasks
  std::optional<int> priority;              // nullopt = "derived" (RM/DM cores)
  ExecutionProfile profile;
  TaskKind kind = TaskKind::Periodic;

  bool periodic() const { return kind == TaskKind::Periodic; }
};

struct CoreConfig {
  SchedPolicy policy = SchedPolicy::FP;
  Cycles boot_offset = 0;
};

struct RegulatorConfig {
  Cycles period = 0;                      // regulation period P; defaulted to cycles_per_tick
  std::vector<std::uint64_t> budgets;     // Q_i per core; 0 marks an unregulated core
  std::uint64_t guaranteed_min = 0;       // r_min: reserved bus capacity per period
  std::vector<std::uint64_t> chunk_size;  // per core; defaulted to max(1, ceil(Q_i / 4))

  bool core_regulated(std::uint32_t core) const {
    return core < budgets.size() && budgets[core] > 0;
  }
};

struct ChannelConfig {
  std::uint64_t capacity = 0;
  std::string producer;
  std::string consumer;
  std::uint64_t accesses_per_op = 2;
};

struct InterruptSource {
  std::uint32_t core = 0;
  std::optional<Cycles> period;    // periodic assertion, first at `period`
  std::optional<Cycles> one_shot;  // single assertion at this time
  std::string handler;             // id of an interrupt_handler task on `core`
};

struct Deployment {
  Platform platform;
  std::vector<CoreConfig> cores;
  std::vector<Task> tasks;
  std::optional<RegulatorConfig> regulator;
  std::vector<ChannelConfig> channels;
  std::vector<InterruptSource> interrupts;
  std::uint64_t trace_buffer_capacity = 65536;
  DeadlineMissPolicy deadline_miss_policy = DeadlineMissPolicy::RecordContinue;

  int task_index(const std::string& id) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (tasks[i].id == id) return static_cast<int>(i);
    return -1;
  }

  /// LCM of the periods of all periodic tasks (1 if there are none).
  Cycles hyperperiod() const {
    Cycles h = 1;
    for (const auto& t : tasks)
      if (t.periodic() && t.period > 0) h = std::lcm(h, t.period);
    return h;
  }
};

struct Finding {
  std::string code;
  std::string message;
  std::string path;  // config path, e.g. "tasks[2].period"
};

struct ValidationReport {
  std::vector<Finding> errors;
  std::vector<Finding> warnings;

  bool runnable() const { return errors.empty(); }

  bool has_error(const std::string& code) const {
    for (const auto& f : errors)
      if (f.code == code) return true;
    return false;
  }
  bool has_warning(const std::string& code) const {
    for (const auto& f : warnings)
      if (f.code == code) return true;
    return false;
  }
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline const char* to_string(SchedPolicy p) {
  switch (p) {
    case SchedPolicy::FP: return "FP";
    case SchedPolicy::RM: return "RM";
    case SchedPolicy::DM: return "DM";
    case SchedPolicy::EDF: return "EDF";
  }
  return "?";
}

}  // namespace tokisim
