#pragma once

#include <cassert>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "tokisim/config.hpp"
#include "tokisim/memguard.hpp"
#include "tokisim/metrics.hpp"
#include "tokisim/model.hpp"
#include "tokisim/sched.hpp"
#include "tokisim/trace.hpp"

namespace tokisim {

struct SimFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic discrete-event engine: cores executing job profiles, a
/// round-robin shared memory bus, per-core ticks, staged AMP boot, interrupt
/// sources, inter-core channels, and optional memguard regulation.
class SimEngine {
 public:
  /// Event tie-break at equal time is by this fixed kind order, then by
  /// insertion sequence.  The order is normative for reproducibility.
  enum class EventKind : std::uint8_t {
    BootRelease = 0,
    PeriodBoundary = 1,
    Tick = 2,
    IrqAssert = 3,
    JobRelease = 4,
    BusComplete = 5,
    ChannelWake = 6,
    SegmentStep = 7,
    BusGrant = 8,
    DeadlineCheck = 9,
    SimEnd = 10,
  };

  struct PeriodRecord {
    std::uint64_t period_index = 0;
    std::vector<std::uint64_t> used;
    std::vector<std::uint64_t> grant;
    std::vector<std::uint64_t> chunks_drawn;
    std::uint64_t initial_pool = 0;
    std::vector<Cycles> throttle_cycles;
  };

  struct Result {
    std::vector<TraceEvent> events;   // merged, post-drop
    std::uint64_t emitted = 0;
    std::uint64_t exported = 0;
    std::uint64_t dropped = 0;
    std::vector<std::uint64_t> dropped_per_core;
    std::vector<std::uint64_t> emitted_per_core;
    MetricsReport report;
    std::vector<PeriodRecord> periods;  // regulator accounting, one per completed period
    std::uint64_t bus_completions = 0;
    std::uint64_t seed = 0;
  };

  explicit SimEngine(Deployment d) : d_(std::move(d)) {
    ctx_.priority = resolve_priorities(d_);
    for (const auto& t : d_.tasks) {
      ctx_.handler.push_back(t.kind == TaskKind::InterruptHandler ? 1 : 0);
      ctx_.id.push_back(t.id);
    }
  }

  Result run(Cycles until, std::uint64_t seed = 0) {
    if (until == 0) throw std::invalid_argument("run: until must be > 0");
    until_ = until;
    setup();

    push(until, EventKind::SimEnd, 0);
    while (!heap_.empty()) {
      Event ev = heap_.top();
      heap_.pop();
      if (ev.time < now_) throw SimFault("event time moved backwards");
      if (ev.time >= until) break;  // simulation window is [0, until)
      now_ = ev.time;
      dispatch(ev);
    }
    finish_throttle_accounting();

    Result res;
    res.seed = seed;
    res.events = merge_buffers(buffers_);
    for (const auto& b : buffers_) {
      res.emitted += b.emitted();
      res.dropped += b.dropped();
      res.dropped_per_core.push_back(b.dropped());
      res.emitted_per_core.push_back(b.emitted());
    }
    res.exported = res.events.size();
    res.periods = periods_;
    res.bus_completions = total_bus_completions_;
    res.report = compute_metrics(res.events, res.dropped);
    return res;
  }

 private:
  struct Event {
    Cycles time = 0;
    EventKind kind = EventKind::SimEnd;
    std::uint64_t seq = 0;
    std::uint32_t core = 0;   // core index (Tick, SegmentStep, BusComplete, BootRelease)
    std::uint32_t index = 0;  // task index (JobRelease) or source index (IrqAssert)
    std::uint64_t gen = 0;    // SegmentStep validity generation
    Job* job = nullptr;       // ChannelWake, DeadlineCheck
  };

  struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.kind != b.kind) return a.kind > b.kind;
      return a.seq > b.seq;
    }
  };

  enum class Phase { Unbooted, Idle, Dispatching, Running, BusWait, Throttled };

  // What the job does when it reaches its scheduled SegmentStep milestone.
  enum class Milestone { Access, SegmentEnd };

  struct CoreState {
    CoreSchedState sched;
    Phase phase = Phase::Unbooted;
    Job* current = nullptr;
    std::uint64_t step_gen = 0;      // invalidates in-flight SegmentStep events
    Cycles stint_start = 0;          // start of the current uninterrupted compute stint
    Cycles stint_base = 0;           // compute_done at stint start
    Cycles milestone_compute = 0;    // compute_done target of the pending milestone
    Milestone milestone = Milestone::SegmentEnd;
    bool needs_resched = false;      // set while in a non-preemptible phase
    Cycles throttle_start = 0;
  };

  struct ChannelState {
    std::uint64_t occupancy = 0;
    Job* blocked_producer = nullptr;
    Job* blocked_consumer = nullptr;
  };

  struct SourceState {
    std::optional<Cycles> pending_assert;  // at most one queued/deferred assertion
    Job* active = nullptr;
  };

  // ---- setup ----------------------------------------------------------

  void setup() {
    const std::size_t n = d_.cores.size();
    cores_.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
      cores_[c].sched.policy = d_.cores[c].policy;
      cores_[c].sched.ctx = &ctx_;
    }
    buffers_.clear();
    for (std::size_t c = 0; c < n; ++c) buffers_.emplace_back(d_.trace_buffer_capacity);
    bus_pending_.assign(n, false);
    release_count_.assign(d_.tasks.size(), 0);
    channels_.resize(d_.channels.size());
    sources_.resize(d_.interrupts.size());
    for (std::size_t i = 0; i < d_.tasks.size(); ++i) {
      if (d_.tasks[i].kind != TaskKind::InterruptHandler) continue;
      for (std::size_t s = 0; s < d_.interrupts.size(); ++s)
        if (d_.interrupts[s].handler == d_.tasks[i].id) task_source_[i] = s;
    }
    if (d_.regulator) {
      reg_.emplace(*d_.regulator, static_cast<std::uint32_t>(n));
      push(0, EventKind::PeriodBoundary, 0);
    }
    for (std::size_t c = 0; c < n; ++c) {
      Event e;
      e.core = static_cast<std::uint32_t>(c);
      push(d_.cores[c].boot_offset, EventKind::BootRelease, e.core);
    }
    for (std::size_t s = 0; s < d_.interrupts.size(); ++s) {
      const auto& src = d_.interrupts[s];
      Cycles first = src.period ? *src.period : *src.one_shot;
      Event e;
      e.index = static_cast<std::uint32_t>(s);
      push_full(first, EventKind::IrqAssert, 0, e.index, 0, nullptr);
    }
  }

  // ---- event queue ----------------------------------------------------

  void push(Cycles time, EventKind kind, std::uint32_t core) {
    push_full(time, kind, core, 0, 0, nullptr);
  }

  void push_full(Cycles time, EventKind kind, std::uint32_t core, std::uint32_t index,
                 std::uint64_t gen, Job* job) {
    Event e;
    e.time = time;
    e.kind = kind;
    e.seq = ++event_seq_;
    e.core = core;
    e.index = index;
    e.gen = gen;
    e.job = job;
    heap_.push(e);
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case EventKind::BootRelease: on_boot(ev.core); break;
      case EventKind::PeriodBoundary: on_period_boundary(); break;
      case EventKind::Tick: on_tick_event(ev.core); break;
      case EventKind::IrqAssert: on_irq_assert(ev.index); break;
      case EventKind::JobRelease: on_job_release_event(ev.index); break;
      case EventKind::BusComplete: on_bus_complete(ev.core); break;
      case EventKind::ChannelWake: on_channel_wake(ev.job); break;
      case EventKind::SegmentStep: on_segment_step(ev.core, ev.gen); break;
      case EventKind::BusGrant: on_bus_grant(); break;
      case EventKind::DeadlineCheck: on_deadline_check(ev.job); break;
      case EventKind::SimEnd: break;
    }
  }

  // ---- tracing --------------------------------------------------------

  void emit(std::uint32_t core, TraceKind kind, int task_index, std::uint64_t a0,
            std::uint64_t a1) {
    TraceEvent ev;
    ev.time = now_;
    ev.core = core;
    ev.kind = kind;
    if (task_index >= 0) ev.task = d_.tasks[task_index].id;
    ev.arg0 = a0;
    ev.arg1 = a1;
    buffers_[core].emit(std::move(ev));
  }

  // ---- boot and releases ----------------------------------------------

  void on_boot(std::uint32_t c) {
    CoreState& core = cores_[c];
    core.phase = Phase::Idle;
    emit(c, TraceKind::BootRelease, -1, d_.cores[c].boot_offset, 0);
    push(now_ + d_.platform.cycles_per_tick, EventKind::Tick, c);
    for (std::size_t i = 0; i < d_.tasks.size(); ++i) {
      const Task& t = d_.tasks[i];
      if (t.core != c || !t.periodic()) continue;
      Cycles first = t.offset;
      if (first < now_) {
        Cycles k = (now_ - t.offset + t.period - 1) / t.period;
        first = t.offset + k * t.period;
      }
      push_full(first, EventKind::JobRelease, c, static_cast<std::uint32_t>(i), 0, nullptr);
    }
    // deliver assertions deferred while unbooted
    for (std::size_t s = 0; s < sources_.size(); ++s) {
      if (d_.interrupts[s].core != c) continue;
      if (sources_[s].pending_assert && !sources_[s].active) {
        Cycles at = *sources_[s].pending_assert;
        sources_[s].pending_assert.reset();
        release_handler(static_cast<std::uint32_t>(s), at);
      }
    }
  }

  void on_job_release_event(std::uint32_t task_index) {
    const Task& t = d_.tasks[task_index];
    push_full(now_ + t.period, EventKind::JobRelease, t.core, task_index, 0, nullptr);
    Job* job = new_job(task_index);
    job->release_time = now_;
    if (t.relative_deadline) {
      job->absolute_deadline = now_ + *t.relative_deadline;
      push_full(job->absolute_deadline, EventKind::DeadlineCheck, t.core, 0, 0, job);
    }
    emit(t.core, TraceKind::JobRelease, static_cast<int>(task_index), job->instance,
         job->absolute_deadline);
    admit(t.core, job);
  }

  Job* new_job(std::uint32_t task_index) {
    jobs_.push_back(std::make_unique<Job>());
    Job* job = jobs_.back().get();
    job->task = task_index;
    job->instance = ++release_count_[task_index];
    job->rr_seq = ++rr_counter_;
    return job;
  }

  /// Inserts a runnable job and reacts: dispatch if idle, preempt if it
  /// outranks the running job, defer if the core is in a non-preemptible
  /// phase (dispatch window, outstanding bus access, throttle).
  void admit(std::uint32_t c, Job* job) {
    CoreState& core = cores_[c];
    auto decision = on_job_release(core.sched, job);
    switch (core.phase) {
      case Phase::Idle: {
        Job* pick = pick_next(core.sched);
        if (pick) start_dispatch(c, pick);
        break;
      }
      case Phase::Running:
        if (decision == ReleaseDecision::Preempt) preempt_running(c);
        break;
      case Phase::BusWait:
      case Phase::Throttled:
        core.needs_resched = true;
        break;
      case Phase::Dispatching:  // dispatch end re-evaluates the pick anyway
      case Phase::Unbooted:
        break;
    }
  }

  // ---- context switching ----------------------------------------------

  void start_dispatch(std::uint32_t c, Job* job) {
    CoreState& core = cores_[c];
    core.sched.remove_ready(job);
    core.current = job;
    core.sched.running = job;
    core.phase = Phase::Dispatching;
    ++core.step_gen;
    push_full(now_ + d_.platform.dispatch_overhead, EventKind::SegmentStep, c, 0, core.step_gen,
              nullptr);
  }

  void preempt_running(std::uint32_t c) {
    CoreState& core = cores_[c];
    Job* job = core.current;
    job->compute_done = core.stint_base + (now_ - core.stint_start);
    ++core.step_gen;
    emit(c, TraceKind::SchedSwitchOut, static_cast<int>(job->task), job->instance, 0);
    core.current = nullptr;
    core.sched.running = nullptr;
    core.sched.insert_ready(job);  // keeps its rr_seq: it resumes first among peers
    Job* pick = pick_next(core.sched);
    start_dispatch(c, pick);
  }

  void idle_core(std::uint32_t c) {
    CoreState& core = cores_[c];
    core.current = nullptr;
    core.sched.running = nullptr;
    core.phase = Phase::Idle;
    ++core.step_gen;
    Job* pick = pick_next(core.sched);
    if (pick) start_dispatch(c, pick);
  }

  /// After a stall ends (bus completion, throttle lift): honor a deferred
  /// reschedule, then continue the current job if it is still the pick.
  void resume_or_preempt(std::uint32_t c) {
    CoreState& core = cores_[c];
    core.phase = Phase::Running;
    core.stint_start = now_;
    core.stint_base = core.current->compute_done;
    if (core.needs_resched) {
      core.needs_resched = false;
      Job* pick = pick_next(core.sched);
      if (pick != core.current) {
        preempt_running(c);
        return;
      }
    }
    continue_job(c);
  }

  /// Continues the current job from whatever point it is at: an unfinished
  /// channel-op access burst, a pending receive, the profile, or the trailing
  /// send/completion.
  void continue_job(std::uint32_t c) {
    CoreState& core = cores_[c];
    Job* job = core.current;
    if (job->op_left > 0) {
      attempt_access(c);
      return;
    }
    int recv_ch = consumer_channel(job->task);
    if (recv_ch >= 0 && !job->recv_done) {
      attempt_recv(c, recv_ch);
      return;
    }
    if (job->segment < d_.tasks[job->task].profile.segments.size()) {
      schedule_milestone(c);
      return;
    }
    end_of_body(c);
  }

  // ---- tick -----------------------------------------------------------

  void on_tick_event(std::uint32_t c) {
    CoreState& core = cores_[c];
    push(now_ + d_.platform.cycles_per_tick, EventKind::Tick, c);
    if (core.phase != Phase::Running) return;  // rotation only hits a computing job
    if (!on_tick_rotates(core.sched)) return;
    Job* job = core.current;
    job->compute_done = core.stint_base + (now_ - core.stint_start);
    ++core.step_gen;
    emit(c, TraceKind::SchedSwitchOut, static_cast<int>(job->task), job->instance, 0);
    job->rr_seq = ++rr_counter_;  // to the back of its priority group
    core.current = nullptr;
    core.sched.running = nullptr;
    core.sched.insert_ready(job);
    start_dispatch(c, pick_next(core.sched));
  }

  // ---- profile execution ----------------------------------------------

  void on_segment_step(std::uint32_t c, std::uint64_t gen) {
    CoreState& core = cores_[c];
    if (gen != core.step_gen) return;  // superseded
    if (core.phase == Phase::Dispatching) {
      Job* pick = pick_next(core.sched);
      if (pick != core.current) {
        // a better job arrived inside the dispatch window: switch again
        Job* prev = core.current;
        core.current = nullptr;
        core.sched.running = nullptr;
        core.sched.insert_ready(prev);
        start_dispatch(c, pick_next(core.sched));
        return;
      }
      core.phase = Phase::Running;
      core.stint_start = now_;
      core.stint_base = core.current->compute_done;
      Job* job = core.current;
      emit(c, TraceKind::SchedSwitchIn, static_cast<int>(job->task), job->instance, 0);
      if (!job->started) {
        job->started = true;
        if (ctx_.handler[job->task]) {
          auto it = task_source_.find(job->task);
          emit(c, TraceKind::IrqEnter, static_cast<int>(job->task), job->assert_time,
               it != task_source_.end() ? it->second : 0);
        }
      }
      continue_job(c);
      return;
    }
    if (core.phase != Phase::Running) throw SimFault("SegmentStep in invalid phase");
    Job* job = core.current;
    job->compute_done = core.milestone_compute;
    if (core.milestone == Milestone::Access) {
      attempt_access(c);
      return;
    }
    // segment finished
    ++job->segment;
    job->compute_done = 0;
    job->accesses_done = 0;
    if (job->segment < d_.tasks[job->task].profile.segments.size()) {
      schedule_milestone(c);
      return;
    }
    end_of_body(c);
  }

  void schedule_milestone(std::uint32_t c) {
    CoreState& core = cores_[c];
    Job* job = core.current;
    const Segment& seg = d_.tasks[job->task].profile.segments[job->segment];
    Cycles stride = seg.mem_accesses > 0 ? seg.compute / (seg.mem_accesses + 1) : 0;
    Cycles target;
    if (job->accesses_done < seg.mem_accesses) {
      target = (job->accesses_done + 1) * stride;
      core.milestone = Milestone::Access;
    } else {
      target = seg.compute;
      core.milestone = Milestone::SegmentEnd;
    }
    if (target < job->compute_done) throw SimFault("milestone behind profile position");
    core.milestone_compute = target;
    core.stint_start = now_;
    core.stint_base = job->compute_done;
    ++core.step_gen;
    push_full(now_ + (target - job->compute_done), EventKind::SegmentStep, c, 0, core.step_gen,
              nullptr);
  }

  void end_of_body(std::uint32_t c) {
    Job* job = cores_[c].current;
    int send_ch = producer_channel(job->task);
    if (send_ch >= 0 && !job->send_done) {
      attempt_send(c, send_ch);
      return;
    }
    complete_job(c);
  }

  void complete_job(std::uint32_t c) {
    CoreState& core = cores_[c];
    Job* job = core.current;
    job->completed = true;
    emit(c, TraceKind::JobComplete, static_cast<int>(job->task), job->instance,
         now_ - job->release_time);
    emit(c, TraceKind::SchedSwitchOut, static_cast<int>(job->task), job->instance, 1);
    if (ctx_.handler[job->task]) {
      auto it = task_source_.find(job->task);
      if (it != task_source_.end()) {
        SourceState& src = sources_[it->second];
        src.active = nullptr;
        if (src.pending_assert) {
          Cycles at = *src.pending_assert;
          src.pending_assert.reset();
          release_handler(static_cast<std::uint32_t>(it->second), at);
        }
      }
    }
    idle_core(c);
  }

  // ---- memory accesses and the bus ------------------------------------

  void attempt_access(std::uint32_t c) {
    CoreState& core = cores_[c];
    if (reg_ && reg_->regulated(c)) {
      if (reg_->throttled(c)) throw SimFault("access attempt on throttled core");
      if (reg_->remaining(c) == 0) {
        auto grant = reg_->request_chunk(c);
        if (grant.throttle) {
          core.phase = Phase::Throttled;
          core.throttle_start = now_;
          emit(c, TraceKind::ThrottleStart, core.current ? static_cast<int>(core.current->task)
                                                         : -1,
               0, 0);
          return;  // resumes at the next period boundary
        }
        emit(c, TraceKind::BudgetReplenished, -1, grant.refill, 1);
      }
      if (reg_->charge_access(c) == Regulator::Charge::Depleted)
        emit(c, TraceKind::BudgetDepleted, -1, reg_->used_this_period(c), 0);
    }
    core.phase = Phase::BusWait;
    bus_pending_[c] = true;
    schedule_grant_if_needed();
  }

  void schedule_grant_if_needed() {
    if (bus_busy_ || grant_scheduled_) return;
    for (bool p : bus_pending_)
      if (p) {
        grant_scheduled_ = true;
        push(now_, EventKind::BusGrant, 0);
        return;
      }
  }

  void on_bus_grant() {
    grant_scheduled_ = false;
    if (bus_busy_) return;
    const std::size_t n = bus_pending_.size();
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t c = (bus_rr_ + i) % n;
      if (!bus_pending_[c]) continue;
      bus_pending_[c] = false;
      bus_busy_ = true;
      bus_rr_ = (c + 1) % n;
      push(now_ + d_.platform.mem_service_time, EventKind::BusComplete,
           static_cast<std::uint32_t>(c));
      return;
    }
  }

  void on_bus_complete(std::uint32_t c) {
    bus_busy_ = false;
    schedule_grant_if_needed();
    CoreState& core = cores_[c];
    Job* job = core.current;
    if (!job) throw SimFault("bus completion with no job context");
    ++total_bus_completions_;
    if (job->aborted) {
      idle_core(c);
      return;
    }
    if (job->op_left > 0) {
      --job->op_left;
      if (job->op_left == 0) {
        finish_channel_op(c);
        return;
      }
    } else {
      ++job->accesses_done;
    }
    resume_or_preempt(c);
  }

  // ---- channels --------------------------------------------------------

  int producer_channel(std::uint32_t task_index) const {
    for (std::size_t i = 0; i < d_.channels.size(); ++i)
      if (d_.channels[i].producer == d_.tasks[task_index].id) return static_cast<int>(i);
    return -1;
  }

  int consumer_channel(std::uint32_t task_index) const {
    for (std::size_t i = 0; i < d_.channels.size(); ++i)
      if (d_.channels[i].consumer == d_.tasks[task_index].id) return static_cast<int>(i);
    return -1;
  }

  void attempt_recv(std::uint32_t c, int ch) {
    ChannelState& st = channels_[ch];
    if (st.occupancy == 0) {
      block_on_channel(c, &st.blocked_consumer);
      return;
    }
    start_channel_op(c, ch, /*is_send=*/false);
  }

  void attempt_send(std::uint32_t c, int ch) {
    ChannelState& st = channels_[ch];
    if (st.occupancy >= d_.channels[ch].capacity) {
      block_on_channel(c, &st.blocked_producer);
      return;
    }
    start_channel_op(c, ch, /*is_send=*/true);
  }

  void block_on_channel(std::uint32_t c, Job** slot) {
    CoreState& core = cores_[c];
    Job* job = core.current;
    emit(c, TraceKind::SchedSwitchOut, static_cast<int>(job->task), job->instance, 2);
    *slot = job;
    idle_core(c);
  }

  void start_channel_op(std::uint32_t c, int ch, bool is_send) {
    Job* job = cores_[c].current;
    job->op_channel = ch;
    job->op_is_send = is_send;
    job->op_left = d_.channels[ch].accesses_per_op;
    if (job->op_left == 0) {
      finish_channel_op(c);
      return;
    }
    attempt_access(c);
  }

  void finish_channel_op(std::uint32_t c) {
    CoreState& core = cores_[c];
    Job* job = core.current;
    int ch = job->op_channel;
    ChannelState& st = channels_[ch];
    job->op_channel = -1;
    if (job->op_is_send) {
      ++st.occupancy;
      if (st.occupancy > d_.channels[ch].capacity) throw SimFault("channel overfull");
      job->send_done = true;
      emit(c, TraceKind::ChannelSend, static_cast<int>(job->task), ch, st.occupancy);
      if (st.blocked_consumer) {
        push_full(now_, EventKind::ChannelWake, 0, 0, 0, st.blocked_consumer);
        st.blocked_consumer = nullptr;
      }
      complete_job(c);
    } else {
      if (st.occupancy == 0) throw SimFault("channel underflow");
      --st.occupancy;
      job->recv_done = true;
      emit(c, TraceKind::ChannelRecv, static_cast<int>(job->task), ch, st.occupancy);
      if (st.blocked_producer) {
        push_full(now_, EventKind::ChannelWake, 0, 0, 0, st.blocked_producer);
        st.blocked_producer = nullptr;
      }
      resume_or_preempt(c);
    }
  }

  void on_channel_wake(Job* job) {
    if (job->aborted) return;
    job->rr_seq = ++rr_counter_;
    admit(d_.tasks[job->task].core, job);
  }

  // ---- interrupts ------------------------------------------------------

  void on_irq_assert(std::uint32_t s) {
    const InterruptSource& cfg = d_.interrupts[s];
    if (cfg.period) push_full(now_ + *cfg.period, EventKind::IrqAssert, 0, s, 0, nullptr);
    SourceState& src = sources_[s];
    int task_index = d_.task_index(cfg.handler);
    bool unbooted = cores_[cfg.core].phase == Phase::Unbooted;
    if (src.active || src.pending_assert) {
      if (src.pending_assert) {
        emit(cfg.core, TraceKind::IrqAssert, task_index, s, 2);  // overrun, dropped
        return;
      }
      src.pending_assert = now_;
      emit(cfg.core, TraceKind::IrqAssert, task_index, s, 0);  // queued pending release
      return;
    }
    if (unbooted) {
      src.pending_assert = now_;
      emit(cfg.core, TraceKind::IrqAssert, task_index, s, 1);  // deferred to boot
      return;
    }
    emit(cfg.core, TraceKind::IrqAssert, task_index, s, 0);
    release_handler(s, now_);
  }

  void release_handler(std::uint32_t s, Cycles assert_time) {
    const InterruptSource& cfg = d_.interrupts[s];
    int task_index = d_.task_index(cfg.handler);
    const Task& t = d_.tasks[task_index];
    Job* job = new_job(static_cast<std::uint32_t>(task_index));
    job->release_time = now_;
    job->assert_time = assert_time;
    if (t.relative_deadline) {
      job->absolute_deadline = now_ + *t.relative_deadline;
      push_full(job->absolute_deadline, EventKind::DeadlineCheck, cfg.core, 0, 0, job);
    }
    sources_[s].active = job;
    emit(cfg.core, TraceKind::JobRelease, task_index, job->instance, job->absolute_deadline);
    admit(cfg.core, job);
  }

  // ---- deadlines -------------------------------------------------------

  void on_deadline_check(Job* job) {
    if (job->completed || job->aborted || job->missed) return;
    job->missed = true;
    std::uint32_t c = d_.tasks[job->task].core;
    emit(c, TraceKind::DeadlineMiss, static_cast<int>(job->task), job->instance,
         job->absolute_deadline);
    if (d_.deadline_miss_policy == DeadlineMissPolicy::AbortJob) abort_job(c, job);
  }

  void abort_job(std::uint32_t c, Job* job) {
    CoreState& core = cores_[c];
    job->aborted = true;
    if (ctx_.handler[job->task]) {
      auto it = task_source_.find(job->task);
      if (it != task_source_.end() && sources_[it->second].active == job)
        sources_[it->second].active = nullptr;
    }
    // unblock channel slots held by this job
    for (auto& st : channels_) {
      if (st.blocked_producer == job) st.blocked_producer = nullptr;
      if (st.blocked_consumer == job) st.blocked_consumer = nullptr;
    }
    if (core.current == job) {
      emit(c, TraceKind::SchedSwitchOut, static_cast<int>(job->task), job->instance, 3);
      switch (core.phase) {
        case Phase::Running:
        case Phase::Dispatching:
          idle_core(c);
          break;
        case Phase::BusWait:
          break;  // outstanding access drains; BusComplete discards the job
        case Phase::Throttled:
          core.current = nullptr;  // core stays throttled until the boundary
          core.sched.running = nullptr;
          break;
        default:
          throw SimFault("abort in invalid phase");
      }
    } else {
      core.sched.remove_ready(job);
    }
  }

  // ---- regulation ------------------------------------------------------

  void on_period_boundary() {
    Regulator& reg = *reg_;
    // close throttle windows and collect the ending period's stats
    for (std::size_t c = 0; c < cores_.size(); ++c) {
      if (cores_[c].phase == Phase::Throttled) {
        Cycles dur = now_ - cores_[c].throttle_start;
        reg.add_throttle_cycles(static_cast<std::uint32_t>(c), dur);
        emit(static_cast<std::uint32_t>(c), TraceKind::ThrottleEnd, -1, dur, 0);
      }
    }
    if (now_ > 0) {
      auto stats = reg.end_period_stats();
      PeriodRecord rec;
      rec.period_index = stats.period_index;
      rec.used = stats.used;
      rec.throttle_cycles = stats.throttle_cycles;
      rec.initial_pool = reg.initial_pool();
      std::uint64_t chunks_total = 0;
      for (std::size_t c = 0; c < cores_.size(); ++c) {
        rec.grant.push_back(reg.last_grant(static_cast<std::uint32_t>(c)));
        rec.chunks_drawn.push_back(reg.chunks_drawn(static_cast<std::uint32_t>(c)));
        chunks_total += rec.chunks_drawn.back();
        // per-period enforcement, asserted in the engine
        if (rec.used[c] > rec.grant[c] + rec.chunks_drawn[c])
          throw SimFault("memguard enforcement breach: usage exceeds grant plus chunks");
      }
      if (chunks_total > rec.initial_pool)
        throw SimFault("memguard enforcement breach: chunks exceed initial pool");
      periods_.push_back(rec);
      for (std::size_t c = 0; c < cores_.size(); ++c)
        emit(static_cast<std::uint32_t>(c), TraceKind::PeriodBoundary, -1, rec.used[c],
             rec.throttle_cycles[c]);
    } else {
      for (std::size_t c = 0; c < cores_.size(); ++c)
        emit(static_cast<std::uint32_t>(c), TraceKind::PeriodBoundary, -1, 0, 0);
    }
    auto grants = reg.begin_period();
    for (std::size_t c = 0; c < cores_.size(); ++c)
      if (reg.regulated(static_cast<std::uint32_t>(c)))
        emit(static_cast<std::uint32_t>(c), TraceKind::BudgetReplenished, -1, grants.grant[c], 0);
    // throttled cores resume
    for (std::size_t c = 0; c < cores_.size(); ++c) {
      CoreState& core = cores_[c];
      if (core.phase != Phase::Throttled) continue;
      if (!core.current) {
        core.phase = Phase::Idle;
        idle_core(static_cast<std::uint32_t>(c));
        continue;
      }
      resume_or_preempt(static_cast<std::uint32_t>(c));
    }
    push(now_ + reg.config().period, EventKind::PeriodBoundary, 0);
  }

  void finish_throttle_accounting() {
    if (!reg_) return;
    for (std::size_t c = 0; c < cores_.size(); ++c)
      if (cores_[c].phase == Phase::Throttled)
        reg_->add_throttle_cycles(static_cast<std::uint32_t>(c),
                                  until_ - cores_[c].throttle_start);
  }

  // ---- state -----------------------------------------------------------

  Deployment d_;
  SchedContext ctx_;
  std::vector<CoreState> cores_;
  std::vector<TraceBuffer> buffers_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> heap_;
  std::deque<std::unique_ptr<Job>> jobs_;
  std::vector<std::uint64_t> release_count_;
  std::vector<ChannelState> channels_;
  std::vector<SourceState> sources_;
  std::map<std::uint32_t, std::uint32_t> task_source_;  // handler task -> source index
  std::optional<Regulator> reg_;
  std::vector<PeriodRecord> periods_;
  std::vector<bool> bus_pending_;
  bool bus_busy_ = false;
  bool grant_scheduled_ = false;
  std::size_t bus_rr_ = 0;
  std::uint64_t total_bus_completions_ = 0;
  std::uint64_t event_seq_ = 0;
  std::uint64_t rr_counter_ = 0;
  Cycles now_ = 0;
  Cycles until_ = 0;
};

/// Runs a validated deployment for `until` cycles.  Identical (deployment,
/// until, seed) triples produce bit-identical traces; the seed is recorded
/// for workload-generator use and otherwise unused.
inline SimEngine::Result run_simulation(const Deployment& d, Cycles until,
                                        std::uint64_t seed = 0) {
  SimEngine engine(d);
  return engine.run(until, seed);
}

}  // namespace tokisim
