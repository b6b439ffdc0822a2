#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tokisim/model.hpp"

namespace tokisim {

enum class TraceKind : std::uint8_t {
  JobRelease,
  SchedSwitchIn,
  SchedSwitchOut,
  JobComplete,
  DeadlineMiss,
  IrqAssert,
  IrqEnter,
  BudgetDepleted,
  BudgetReplenished,
  ThrottleStart,
  ThrottleEnd,
  PeriodBoundary,
  ChannelSend,
  ChannelRecv,
  BootRelease,
};

inline const char* trace_kind_token(TraceKind k) {
  switch (k) {
    case TraceKind::JobRelease: return "JOB_RELEASE";
    case TraceKind::SchedSwitchIn: return "SCHED_SWITCH_IN";
    case TraceKind::SchedSwitchOut: return "SCHED_SWITCH_OUT";
    case TraceKind::JobComplete: return "JOB_COMPLETE";
    case TraceKind::DeadlineMiss: return "DEADLINE_MISS";
    case TraceKind::IrqAssert: return "IRQ_ASSERT";
    case TraceKind::IrqEnter: return "IRQ_ENTER";
    case TraceKind::BudgetDepleted: return "BUDGET_DEPLETED";
    case TraceKind::BudgetReplenished: return "BUDGET_REPLENISHED";
    case TraceKind::ThrottleStart: return "THROTTLE_START";
    case TraceKind::ThrottleEnd: return "THROTTLE_END";
    case TraceKind::PeriodBoundary: return "PERIOD_BOUNDARY";
    case TraceKind::ChannelSend: return "CHANNEL_SEND";
    case TraceKind::ChannelRecv: return "CHANNEL_RECV";
    case TraceKind::BootRelease: return "BOOT_RELEASE";
  }
  return "?";
}

inline bool trace_kind_from_token(const std::string& s, TraceKind& out) {
  for (int k = 0; k <= static_cast<int>(TraceKind::BootRelease); ++k) {
    if (s == trace_kind_token(static_cast<TraceKind>(k))) {
      out = static_cast<TraceKind>(k);
      return true;
    }
  }
  return false;
}

/// Kind-specific payloads (arg0, arg1):
///   JOB_RELEASE        job instance, absolute deadline (or ~0 if untracked)
///   SCHED_SWITCH_IN    job instance, 0
///   SCHED_SWITCH_OUT   job instance, reason (0 preempt, 1 complete, 2 block)
///   JOB_COMPLETE       job instance, response time
///   DEADLINE_MISS      job instance, absolute deadline
///   IRQ_ASSERT         source index, status (0 normal, 1 deferred, 2 overrun)
///   IRQ_ENTER          matching assert time, source index
///   BUDGET_DEPLETED    accesses used so far this period, 0
///   BUDGET_REPLENISHED amount, origin (0 period grant, 1 reclaim chunk)
///   THROTTLE_START     reclaim pool at throttle (always 0), 0
///   THROTTLE_END       throttled cycles, 0
///   PERIOD_BOUNDARY    accesses used in the ended period, throttled cycles in it
///   CHANNEL_SEND       channel index, occupancy after
///   CHANNEL_RECV       channel index, occupancy after
///   BOOT_RELEASE       boot offset, 0
struct TraceEvent {
  Cycles time = 0;
  std::uint32_t core = 0;
  TraceKind kind = TraceKind::JobRelease;
  std::string task;  // empty when not applicable
  std::uint64_t arg0 = 0;
  std::uint64_t arg1 = 0;

  bool operator==(const TraceEvent&) const = default;
};

/// Bounded nonblocking capture: a full buffer drops the newest event and
/// counts it; the simulation is never perturbed by tracing.
class TraceBuffer {
 public:
  explicit TraceBuffer(std::uint64_t capacity) : capacity_(capacity) {}

  enum class Emit { Accepted, Dropped };

  Emit emit(TraceEvent ev) {
    ++emitted_;
    if (events_.size() >= capacity_) {
      ++dropped_;
      return Emit::Dropped;
    }
    events_.push_back(std::move(ev));
    return Emit::Accepted;
  }

  const std::vector<TraceEvent>& events() const { return events_; }
  std::uint64_t dropped() const { return dropped_; }
  std::uint64_t emitted() const { return emitted_; }
  std::uint64_t capacity() const { return capacity_; }

 private:
  std::uint64_t capacity_;
  std::uint64_t emitted_ = 0;
  std::uint64_t dropped_ = 0;
  std::vector<TraceEvent> events_;
};

inline constexpr const char* kTraceHeader = "tokisim-trace v1";

/// Merges per-core buffers into one stream ordered by (time, core, per-core
/// emission order).  Buffers are time-ordered by construction.
inline std::vector<TraceEvent> merge_buffers(const std::vector<TraceBuffer>& buffers) {
  std::vector<TraceEvent> out;
  std::size_t total = 0;
  for (const auto& b : buffers) total += b.events().size();
  out.reserve(total);
  std::vector<std::size_t> pos(buffers.size(), 0);
  while (true) {
    int best = -1;
    for (std::size_t c = 0; c < buffers.size(); ++c) {
      if (pos[c] >= buffers[c].events().size()) continue;
      if (best < 0 ||
          buffers[c].events()[pos[c]].time < buffers[best].events()[pos[best]].time)
        best = static_cast<int>(c);  // time tie: lower core first (scan order)
    }
    if (best < 0) break;
    out.push_back(buffers[best].events()[pos[best]++]);
  }
  return out;
}

inline void format_event(std::ostream& os, const TraceEvent& ev) {
  os << ev.time << ',' << ev.core << ',' << trace_kind_token(ev.kind) << ',' << ev.task << ','
     << ev.arg0 << ',' << ev.arg1 << '\n';
}

/// Writes the bit-exact trace format: header line, then one event per line
/// `time,core,KIND,task,arg0,arg1`, LF endings.  Returns records written.
inline std::uint64_t export_trace(const std::vector<TraceEvent>& events, std::ostream& sink) {
  sink << kTraceHeader << '\n';
  for (const auto& ev : events) format_event(sink, ev);
  if (!sink) throw std::runtime_error("trace export: sink write failure");
  return events.size();
}

struct TraceParseError : std::runtime_error {
  std::size_t line;
  TraceParseError(std::size_t line_no, const std::string& msg)
      : std::runtime_error("trace line " + std::to_string(line_no) + ": " + msg),
        line(line_no) {}
};

inline std::vector<TraceEvent> parse_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TraceParseError(1, "missing header");
  if (line != kTraceHeader) throw TraceParseError(1, "bad header '" + line + "'");
  std::vector<TraceEvent> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw TraceParseError(line_no, "empty line");
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (f.size() != 6) throw TraceParseError(line_no, "expected 6 fields");
    TraceEvent ev;
    try {
      ev.time = std::stoull(f[0]);
      ev.core = static_cast<std::uint32_t>(std::stoul(f[1]));
      ev.arg0 = std::stoull(f[4]);
      ev.arg1 = std::stoull(f[5]);
    } catch (const std::exception&) {
      throw TraceParseError(line_no, "bad numeric field");
    }
    if (!trace_kind_from_token(f[2], ev.kind))
      throw TraceParseError(line_no, "unknown kind '" + f[2] + "'");
    ev.task = f[3];
    out.push_back(std::move(ev));
  }
  return out;
}

}  // namespace tokisim
