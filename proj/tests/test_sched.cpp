#include <catch2/catch_amalgamated.hpp>

#include "tokisim/sched.hpp"
#include "tokisim/workloads.hpp"

using namespace tokisim;

namespace {

struct Fixture {
  SchedContext ctx;
  CoreSchedState state;
  std::vector<Job> jobs;
  std::uint64_t rr = 0;

  explicit Fixture(SchedPolicy policy) {
    state.policy = policy;
    state.ctx = &ctx;
    jobs.reserve(64);
  }

  Job* add_task(const std::string& id, int prio, bool handler = false) {
    ctx.priority.push_back(prio);
    ctx.handler.push_back(handler ? 1 : 0);
    ctx.id.push_back(id);
    jobs.emplace_back();
    Job* j = &jobs.back();
    j->task = static_cast<std::uint32_t>(ctx.id.size() - 1);
    j->rr_seq = ++rr;
    return j;
  }
};

}  // namespace

TEST_CASE("pick_next: higher priority wins under FP") {
  Fixture f(SchedPolicy::FP);
  Job* a = f.add_task("a", 2);
  Job* b = f.add_task("b", 5);
  f.state.insert_ready(a);
  f.state.insert_ready(b);
  CHECK(pick_next(f.state) == b);
}

TEST_CASE("pick_next: EDF deadline tie breaks by task id") {
  Fixture f(SchedPolicy::EDF);
  Job* b = f.add_task("b", 0);
  Job* a = f.add_task("a", 0);
  a->absolute_deadline = 400;
  b->absolute_deadline = 400;
  f.state.insert_ready(b);
  f.state.insert_ready(a);
  CHECK(pick_next(f.state) == a);
}

TEST_CASE("pick_next: empty state is idle") {
  Fixture f(SchedPolicy::FP);
  CHECK(pick_next(f.state) == nullptr);
}

TEST_CASE("pick_next: handler outranks any periodic job") {
  Fixture f(SchedPolicy::EDF);
  Job* p = f.add_task("periodic", 99);
  Job* h = f.add_task("isr", 0, /*handler=*/true);
  p->absolute_deadline = 1;
  h->absolute_deadline = kNoDeadline;
  f.state.insert_ready(p);
  f.state.insert_ready(h);
  CHECK(pick_next(f.state) == h);
}

TEST_CASE("on_job_release: higher priority preempts, equal priority does not") {
  Fixture f(SchedPolicy::FP);
  Job* running = f.add_task("run", 3);
  Job* equal = f.add_task("eq", 3);
  Job* high = f.add_task("hi", 5);
  f.state.running = running;
  CHECK(on_job_release(f.state, equal) == ReleaseDecision::NoPreempt);
  CHECK(on_job_release(f.state, high) == ReleaseDecision::Preempt);
}

TEST_CASE("on_job_release: EDF earlier deadline preempts") {
  Fixture f(SchedPolicy::EDF);
  Job* running = f.add_task("a", 0);
  Job* urgent = f.add_task("b", 0);
  running->absolute_deadline = 900;
  urgent->absolute_deadline = 500;
  f.state.running = running;
  CHECK(on_job_release(f.state, urgent) == ReleaseDecision::Preempt);
}

TEST_CASE("tick rotation requires an equal-priority peer and FP-family policy") {
  Fixture f(SchedPolicy::FP);
  Job* a = f.add_task("a", 4);
  Job* b = f.add_task("b", 4);
  f.state.running = a;
  f.state.insert_ready(b);
  CHECK(on_tick_rotates(f.state));

  f.state.remove_ready(b);
  CHECK_FALSE(on_tick_rotates(f.state));  // single running job: unchanged

  Fixture e(SchedPolicy::EDF);
  Job* x = e.add_task("x", 0);
  Job* y = e.add_task("y", 0);
  x->absolute_deadline = y->absolute_deadline = 700;
  e.state.running = x;
  e.state.insert_ready(y);
  CHECK_FALSE(on_tick_rotates(e.state));  // no round robin under EDF
}

TEST_CASE("ready ordering is a total order after every mutation") {
  Lcg rng(13);
  for (auto policy : {SchedPolicy::FP, SchedPolicy::EDF}) {
    Fixture f(policy);
    std::vector<Job*> inserted;
    for (int i = 0; i < 40; ++i) {
      Job* j = f.add_task("t" + std::to_string(i), static_cast<int>(rng.below(5)));
      j->absolute_deadline = 100 + rng.below(5) * 100;
      f.state.insert_ready(j);
      inserted.push_back(j);
      if (rng.below(3) == 0 && !inserted.empty()) {
        std::size_t k = rng.below(inserted.size());
        f.state.remove_ready(inserted[k]);
        inserted.erase(inserted.begin() + static_cast<long>(k));
      }
      for (std::size_t k = 1; k < f.state.ready.size(); ++k) {
        CHECK(f.state.before(f.state.ready[k - 1], f.state.ready[k]));
        CHECK_FALSE(f.state.before(f.state.ready[k], f.state.ready[k - 1]));
      }
      if (!f.state.ready.empty()) CHECK(pick_next(f.state) == f.state.ready.front());
    }
  }
}

TEST_CASE("admission: EDF at exactly U=1 is schedulable") {
  std::vector<Task> ts(2);
  ts[0].id = "a";
  ts[0].period = 1000;
  ts[0].profile.segments.push_back({500, 0});
  ts[1].id = "b";
  ts[1].period = 1000;
  ts[1].profile.segments.push_back({500, 0});
  CHECK(admission_check(ts, SchedPolicy::EDF, 40) == AdmissionVerdict::Schedulable);
}

TEST_CASE("admission: RM bound for two tasks") {
  // n(2^{1/n}-1) for n=2 is 2(sqrt(2)-1) ~= 0.8284: U=0.82 sits below it.
  const double bound2 = 2.0 * (std::sqrt(2.0) - 1.0);
  REQUIRE(bound2 == Catch::Approx(0.828427).epsilon(1e-5));
  std::vector<Task> ts(2);
  ts[0].id = "a";
  ts[0].period = 1000;
  ts[0].profile.segments.push_back({410, 0});
  ts[1].id = "b";
  ts[1].period = 1000;
  ts[1].profile.segments.push_back({410, 0});
  CHECK(admission_check(ts, SchedPolicy::RM, 40) == AdmissionVerdict::Schedulable);

  // between the bound and 1: sufficient-only, so unknown
  ts[0].profile.segments[0].compute = 450;
  ts[1].profile.segments[0].compute = 450;
  CHECK(admission_check(ts, SchedPolicy::RM, 40) == AdmissionVerdict::Unknown);
}

TEST_CASE("admission: overload at U>1, any policy; WCET counts bus service") {
  std::vector<Task> ts(1);
  ts[0].id = "a";
  ts[0].period = 1000;
  ts[0].profile.segments.push_back({1200, 0});
  for (auto p : {SchedPolicy::FP, SchedPolicy::RM, SchedPolicy::DM, SchedPolicy::EDF})
    CHECK(admission_check(ts, p, 40) == AdmissionVerdict::Overloaded);

  // 400 compute + 20 accesses * 40 = 1200 > 1000
  ts[0].profile.segments[0] = {400, 20};
  CHECK(admission_check(ts, SchedPolicy::EDF, 40) == AdmissionVerdict::Overloaded);

  ts[0].kind = TaskKind::InterruptHandler;
  CHECK_THROWS_AS(admission_check(ts, SchedPolicy::EDF, 40), std::invalid_argument);
}

TEST_CASE("admission: DM/FP verdicts are unknown below overload") {
  std::vector<Task> ts(1);
  ts[0].id = "a";
  ts[0].period = 1000;
  ts[0].profile.segments.push_back({100, 0});
  CHECK(admission_check(ts, SchedPolicy::DM, 40) == AdmissionVerdict::Unknown);
  CHECK(admission_check(ts, SchedPolicy::FP, 40) == AdmissionVerdict::Unknown);
}
