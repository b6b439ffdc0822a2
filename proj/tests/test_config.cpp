#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "tokisim/config.hpp"
#include "tokisim/workloads.hpp"

using namespace tokisim;

namespace {

const char* kMinimal = R"({
  "cores": [{}],
  "tasks": [{"id": "a", "core": 0, "period": 1000, "priority": 1,
             "profile": [{"compute": 100}]}]
})";

Deployment two_core_valid() {
  Deployment d;
  d.cores = {{SchedPolicy::RM, 0}, {SchedPolicy::EDF, 0}};
  Task a;
  a.id = "a";
  a.core = 0;
  a.period = 1000;
  a.relative_deadline = 1000;
  a.profile.segments.push_back({100, 2});
  Task b = a;
  b.id = "b";
  b.core = 1;
  d.tasks = {a, b};
  return d;
}

}  // namespace

TEST_CASE("parse applies defaults") {
  Deployment d = parse_deployment(kMinimal);
  REQUIRE(d.cores.size() == 1);
  CHECK(d.cores[0].policy == SchedPolicy::FP);
  CHECK(d.cores[0].boot_offset == 0);
  REQUIRE(d.tasks.size() == 1);
  CHECK(d.tasks[0].relative_deadline == 1000);
  CHECK(d.tasks[0].offset == 0);
  CHECK(d.tasks[0].kind == TaskKind::Periodic);
  CHECK(d.platform.cycles_per_tick == 100000);
  CHECK(d.platform.mem_service_time == 40);
  CHECK(d.platform.dispatch_overhead == 50);
  CHECK(d.trace_buffer_capacity == 65536);
  CHECK(d.deadline_miss_policy == DeadlineMissPolicy::RecordContinue);
}

TEST_CASE("parse rejects duplicate task ids") {
  std::string text = R"({
    "cores": [{}],
    "tasks": [
      {"id": "a", "core": 0, "period": 1000, "profile": [{"compute": 1}]},
      {"id": "a", "core": 0, "period": 2000, "profile": [{"compute": 1}]}
    ]
  })";
  CHECK_THROWS_WITH(parse_deployment(text), Catch::Matchers::ContainsSubstring("duplicate id"));
}

TEST_CASE("parse rejects empty profile") {
  std::string text = R"({
    "cores": [{}],
    "tasks": [{"id": "a", "core": 0, "period": 1000, "profile": []}]
  })";
  CHECK_THROWS_WITH(parse_deployment(text), Catch::Matchers::ContainsSubstring("empty profile"));
}

TEST_CASE("parse rejects unknown keys, bad types, missing fields, syntax errors") {
  CHECK_THROWS_WITH(parse_deployment(R"({"cores": [{}], "tasks": [], "bogus": 1})"),
                    Catch::Matchers::ContainsSubstring("unknown key"));
  CHECK_THROWS_WITH(
      parse_deployment(R"({"cores": [{}], "tasks": [{"id": "a", "core": 0,
        "period": 12.5, "profile": [{"compute": 1}]}]})"),
      Catch::Matchers::ContainsSubstring("integer"));
  CHECK_THROWS_WITH(parse_deployment(R"({"cores": [{}]})"),
                    Catch::Matchers::ContainsSubstring("missing required field 'tasks'"));
  CHECK_THROWS_WITH(parse_deployment("{nope"),
                    Catch::Matchers::ContainsSubstring("syntax error"));
}

TEST_CASE("interrupt handlers must not carry a period") {
  std::string text = R"({
    "cores": [{}],
    "tasks": [{"id": "h", "core": 0, "kind": "interrupt_handler", "period": 5,
               "profile": [{"compute": 1}]}]
  })";
  CHECK_THROWS_AS(parse_deployment(text), ConfigError);
}

TEST_CASE("regulator defaults") {
  std::string text = R"({
    "cores": [{}, {}],
    "tasks": [{"id": "a", "core": 0, "period": 1000, "priority": 1,
               "profile": [{"compute": 100}]}],
    "regulator": {"budgets_Q": [100, 7], "guaranteed_r_min": 200}
  })";
  Deployment d = parse_deployment(text);
  REQUIRE(d.regulator.has_value());
  CHECK(d.regulator->period == 100000);  // defaults to cycles_per_tick
  CHECK(d.regulator->chunk_size == std::vector<std::uint64_t>{25, 2});  // ceil(Q/4)
}

TEST_CASE("serialize round-trip is identity") {
  auto check_roundtrip = [](const Deployment& d) {
    std::string once = serialize_deployment(d);
    Deployment d2 = parse_deployment(once);
    std::string twice = serialize_deployment(d2);
    CHECK(once == twice);
  };
  check_roundtrip(parse_deployment(kMinimal));
  check_roundtrip(interference_scenario(InterferenceVariant::Regulated));
  check_roundtrip(interference_scenario(InterferenceVariant::Unregulated));

  // handler + channel + interrupt coverage
  Deployment d = two_core_valid();
  Task h;
  h.id = "isr";
  h.core = 0;
  h.kind = TaskKind::InterruptHandler;
  h.profile.segments.push_back({10, 0});
  d.tasks.push_back(h);
  d.interrupts.push_back({0, 5000, std::nullopt, "isr"});
  d.channels.push_back({4, "a", "b", 2});
  check_roundtrip(d);
}

TEST_CASE("validate: budget oversubscription") {
  Deployment d = two_core_valid();
  RegulatorConfig r;
  r.period = 1000;
  r.budgets = {60, 50};
  r.chunk_size = {15, 13};
  r.guaranteed_min = 100;
  d.regulator = r;
  auto rep = validate_deployment(d);
  CHECK(rep.has_error("budget_oversubscription"));
}

TEST_CASE("validate: utilization warning above 1") {
  Deployment d;
  d.cores = {{SchedPolicy::EDF, 0}};
  Task a;
  a.id = "a";
  a.core = 0;
  a.period = 1000;
  a.relative_deadline = 1000;
  a.profile.segments.push_back({500, 0});
  Task b = a;
  b.id = "b";
  b.profile.segments[0].compute = 600;
  d.tasks = {a, b};
  auto rep = validate_deployment(d);
  CHECK(rep.runnable());  // warning only
  REQUIRE(rep.has_warning("overutilized"));
  bool found = false;
  for (const auto& w : rep.warnings)
    if (w.code == "overutilized" && w.message.find("1.10") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("validate: clean two-core deployment is runnable") {
  auto rep = validate_deployment(two_core_valid());
  CHECK(rep.errors.empty());
  CHECK(rep.runnable());
}

TEST_CASE("validate: derived priority on FP core is an error") {
  Deployment d = two_core_valid();
  d.cores[0].policy = SchedPolicy::FP;
  auto rep = validate_deployment(d);
  CHECK(rep.has_error("derived_priority_on_fp"));
}

TEST_CASE("validate: boot offset past task offset warns about delayed release") {
  Deployment d = two_core_valid();
  d.cores[1].boot_offset = 5000;
  auto rep = validate_deployment(d);
  CHECK(rep.has_warning("release_delayed"));
}

TEST_CASE("validate flags exactly the mutated field") {
  // property: each single out-of-range mutation produces its own error code
  struct Case {
    const char* code;
    void (*mutate)(Deployment&);
  };
  const Case cases[] = {
      {"bad_period", [](Deployment& d) { d.tasks[0].period = 0; }},
      {"bad_deadline", [](Deployment& d) { d.tasks[0].relative_deadline = 2000; }},
      {"bad_deadline", [](Deployment& d) { d.tasks[0].relative_deadline = 0; }},
      {"core_out_of_range", [](Deployment& d) { d.tasks[0].core = 9; }},
      {"empty_profile", [](Deployment& d) { d.tasks[0].profile.segments.clear(); }},
      {"empty_segment", [](Deployment& d) { d.tasks[0].profile.segments[0] = {0, 0}; }},
      {"duplicate_id", [](Deployment& d) { d.tasks[1].id = "a"; }},
      {"platform_range", [](Deployment& d) { d.platform.mem_service_time = 0; }},
      {"platform_range",
       [](Deployment& d) { d.platform.dispatch_overhead = d.platform.cycles_per_tick; }},
  };
  for (const auto& c : cases) {
    Deployment d = two_core_valid();
    c.mutate(d);
    auto rep = validate_deployment(d);
    INFO("expected error code " << c.code);
    CHECK(rep.has_error(c.code));
  }
}

TEST_CASE("derive_priorities: RM orders by period") {
  std::vector<Task> ts(3);
  ts[0].id = "a";
  ts[0].period = 10;
  ts[1].id = "b";
  ts[1].period = 5;
  ts[2].id = "c";
  ts[2].period = 20;
  for (auto& t : ts) {
    t.relative_deadline = t.period;
    t.profile.segments.push_back({1, 0});
  }
  auto p = derive_priorities(ts, SchedPolicy::RM);
  CHECK(p["b"] > p["a"]);
  CHECK(p["a"] > p["c"]);
  // dense descending range
  CHECK(p["b"] == 3);
  CHECK(p["a"] == 2);
  CHECK(p["c"] == 1);
}

TEST_CASE("derive_priorities: DM tie-break by id") {
  std::vector<Task> ts(2);
  ts[0].id = "b";
  ts[0].period = 20;
  ts[0].relative_deadline = 8;
  ts[1].id = "a";
  ts[1].period = 30;
  ts[1].relative_deadline = 8;
  for (auto& t : ts) t.profile.segments.push_back({1, 0});
  auto p = derive_priorities(ts, SchedPolicy::DM);
  CHECK(p["a"] > p["b"]);
}

TEST_CASE("derive_priorities: single task, handler rejection") {
  std::vector<Task> ts(1);
  ts[0].id = "only";
  ts[0].period = 100;
  ts[0].profile.segments.push_back({1, 0});
  auto p = derive_priorities(ts, SchedPolicy::RM);
  REQUIRE(p.size() == 1);
  CHECK(p["only"] == 1);

  ts[0].kind = TaskKind::InterruptHandler;
  CHECK_THROWS_AS(derive_priorities(ts, SchedPolicy::RM), std::invalid_argument);
}

TEST_CASE("derive_priorities is a total policy-monotone order") {
  Lcg rng(7);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<Task> ts;
    std::size_t n = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) {
      Task t;
      t.id = "t" + std::to_string(i);
      t.period = 100 * (1 + rng.below(10));
      t.relative_deadline = t.period;
      t.profile.segments.push_back({1, 0});
      ts.push_back(std::move(t));
    }
    auto p = derive_priorities(ts, SchedPolicy::RM);
    REQUIRE(p.size() == n);
    std::set<int> values;
    for (const auto& [id, v] : p) values.insert(v);
    REQUIRE(values.size() == n);  // antisymmetric
    CHECK(*values.begin() == 1);
    CHECK(*values.rbegin() == static_cast<int>(n));  // dense
    for (const auto& a : ts)
      for (const auto& b : ts)
        if (a.period < b.period) CHECK(p[a.id] > p[b.id]);  // policy-monotone
  }
}
