#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tokisim/model.hpp"

namespace tokisim {

inline constexpr Cycles kNoDeadline = ~Cycles{0};

/// One released instance of a task, with its execution-profile position.
struct Job {
  std::uint32_t task = 0;          // index into Deployment::tasks
  std::uint64_t instance = 0;      // per-task release counter
  Cycles release_time = 0;
  Cycles absolute_deadline = kNoDeadline;

  // profile position
  std::size_t segment = 0;
  Cycles compute_done = 0;         // within current segment
  std::uint64_t accesses_done = 0; // within current segment

  std::uint64_t rr_seq = 0;        // same-priority rotation order (smaller runs first)
  Cycles assert_time = 0;          // handlers: matching IrqAssert time

  // in-flight channel operation
  int op_channel = -1;
  bool op_is_send = false;
  std::uint64_t op_left = 0;       // accesses still to issue for the op
  bool started = false;
  bool missed = false;
  bool aborted = false;
  bool completed = false;
  bool recv_done = false;          // channel consumer: receive performed this job
  bool send_done = false;          // channel producer: send performed this job
};

/// Per-task facts the policy comparators need.
struct SchedContext {
  std::vector<int> priority;           // effective priority (larger = higher)
  std::vector<std::uint8_t> handler;   // 1 if interrupt_handler
  std::vector<std::string> id;         // tie-break for EDF
};

struct CoreSchedState {
  SchedPolicy policy = SchedPolicy::FP;
  const SchedContext* ctx = nullptr;
  std::vector<Job*> ready;   // sorted, best job first; never contains `running`
  Job* running = nullptr;
  Cycles now = 0;

  /// True if `a` outranks `b` under this core's policy.  Interrupt-handler
  /// jobs outrank all periodic jobs; among themselves they compare like FP.
  bool before(const Job* a, const Job* b) const {
    bool ha = ctx->handler[a->task], hb = ctx->handler[b->task];
    if (ha != hb) return ha;
    if (policy == SchedPolicy::EDF && !ha) {
      if (a->absolute_deadline != b->absolute_deadline)
        return a->absolute_deadline < b->absolute_deadline;
      if (ctx->id[a->task] != ctx->id[b->task]) return ctx->id[a->task] < ctx->id[b->task];
      return a->rr_seq < b->rr_seq;
    }
    if (ctx->priority[a->task] != ctx->priority[b->task])
      return ctx->priority[a->task] > ctx->priority[b->task];
    return a->rr_seq < b->rr_seq;
  }

  void insert_ready(Job* j) {
    auto pos = std::lower_bound(ready.begin(), ready.end(), j,
                                [this](const Job* a, const Job* b) { return before(a, b); });
    ready.insert(pos, j);
  }

  void remove_ready(Job* j) {
    auto it = std::find(ready.begin(), ready.end(), j);
    if (it != ready.end()) ready.erase(it);
  }
};

/// Policy-maximal job among ready and running; nullptr means idle.
inline Job* pick_next(const CoreSchedState& s) {
  Job* best = s.running;
  if (!s.ready.empty()) {
    Job* head = s.ready.front();
    if (!best || s.before(head, best)) best = head;
  }
  return best;
}

enum class ReleaseDecision { NoPreempt, Preempt };

/// Inserts a newly released job.  Preempt iff the pick changes; an equal-
/// priority release never preempts (it waits for tick rotation).
inline ReleaseDecision on_job_release(CoreSchedState& s, Job* job) {
  s.insert_ready(job);
  return (s.running && pick_next(s) != s.running) ? ReleaseDecision::Preempt
                                                  : ReleaseDecision::NoPreempt;
}

/// True if the tick should rotate the running job to a same-priority peer.
/// Only FP/RM/DM rotate; EDF has no round robin.
inline bool on_tick_rotates(const CoreSchedState& s) {
  if (s.policy == SchedPolicy::EDF) {
    if (!s.running || !s.ctx->handler[s.running->task]) return false;
    // handler band still rotates FP-style
  }
  if (!s.running) return false;
  for (const Job* j : s.ready) {
    if (s.ctx->handler[j->task] != s.ctx->handler[s.running->task]) continue;
    if (s.ctx->priority[j->task] == s.ctx->priority[s.running->task]) return true;
  }
  return false;
}

enum class AdmissionVerdict { Schedulable, Unknown, Overloaded };

/// Utilization-based admission check with WCET = uncontended profile cost.
/// EDF (implicit deadline): U <= 1 is sufficient and necessary.  RM: the
/// Liu-Layland bound n(2^{1/n} - 1) is sufficient only; above it but within
/// U <= 1 the verdict is unknown.  DM/FP: only the U > 1 overload test.
inline AdmissionVerdict admission_check(const std::vector<Task>& tasks, SchedPolicy policy,
                                        Cycles mem_service_time) {
  long double u = 0.0L;
  for (const auto& t : tasks) {
    if (!t.periodic())
      throw std::invalid_argument("admission_check: non-periodic task '" + t.id + "'");
    u += static_cast<long double>(t.profile.uncontended_cost(mem_service_time)) /
         static_cast<long double>(t.period);
  }
  if (u > 1.0L) return AdmissionVerdict::Overloaded;
  if (policy == SchedPolicy::EDF) return AdmissionVerdict::Schedulable;
  if (policy == SchedPolicy::RM) {
    long double n = static_cast<long double>(tasks.size());
    long double bound = n * (std::pow(2.0L, 1.0L / n) - 1.0L);
    if (u <= bound) return AdmissionVerdict::Schedulable;
    return AdmissionVerdict::Unknown;
  }
  return AdmissionVerdict::Unknown;
}

}  // namespace tokisim
