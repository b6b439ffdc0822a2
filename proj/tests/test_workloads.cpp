#include <numeric>

#include <catch2/catch_amalgamated.hpp>

#include "tokisim/config.hpp"
#include "tokisim/engine.hpp"
#include "tokisim/workloads.hpp"

using namespace tokisim;

TEST_CASE("uunifast: utilizations sum to the target within rounding") {
  Lcg seeds(42);
  for (int iter = 0; iter < 50; ++iter) {
    std::uint32_t n = 1 + static_cast<std::uint32_t>(seeds.below(12));
    std::uint32_t total = 100 + static_cast<std::uint32_t>(seeds.below(900));
    Lcg rng(seeds.next());
    auto parts = uunifast(n, total, rng);
    REQUIRE(parts.size() == n);
    std::uint64_t sum = std::accumulate(parts.begin(), parts.end(), std::uint64_t{0});
    // each share rounds independently; drift is bounded by n per-mille
    CHECK(sum >= total - n);
    CHECK(sum <= total + n);
  }
}

TEST_CASE("uunifast is deterministic in the seed") {
  Lcg a(7), b(7), c(8);
  CHECK(uunifast(6, 800, a) == uunifast(6, 800, b));
  CHECK(uunifast(6, 800, a) != uunifast(6, 800, c));
}

TEST_CASE("generate: single pure-compute task hits the utilization exactly") {
  WorkloadSpec spec;
  spec.n_tasks = 1;
  spec.total_utilization = 500;
  spec.period_choices = {1000};
  spec.memory_intensity = 0;
  auto ts = generate_taskset(spec, 40);
  REQUIRE(ts.size() == 1);
  CHECK(ts[0].period == 1000);
  REQUIRE(ts[0].profile.segments.size() == 1);
  CHECK(ts[0].profile.segments[0].compute == 500);
  CHECK(ts[0].profile.segments[0].mem_accesses == 0);
}

TEST_CASE("generate: full memory intensity converts cost to accesses") {
  WorkloadSpec spec;
  spec.n_tasks = 1;
  spec.total_utilization = 400;
  spec.period_choices = {1000};
  spec.memory_intensity = 1000;
  auto ts = generate_taskset(spec, 40);
  REQUIRE(ts.size() == 1);
  // cost 400, all memory: 400 / 40 = 10 accesses, no compute left
  CHECK(ts[0].profile.segments[0].mem_accesses == 10);
  CHECK(ts[0].profile.segments[0].compute == 0);
}

TEST_CASE("generate: uncontended cost stays within the utilization budget") {
  Lcg seeds(1);
  for (int iter = 0; iter < 40; ++iter) {
    WorkloadSpec spec;
    spec.n_tasks = 2 + static_cast<std::uint32_t>(seeds.below(8));
    spec.total_utilization = 200 + static_cast<std::uint32_t>(seeds.below(700));
    spec.period_choices = {10000, 20000, 40000, 80000};
    spec.memory_intensity = static_cast<std::uint32_t>(seeds.below(1001));
    spec.seed = seeds.next();
    std::vector<Task> ts;
    try {
      ts = generate_taskset(spec, 40);
    } catch (const WorkloadError&) {
      continue;  // a utilization share rounded to an empty task; redraw
    }
    REQUIRE(ts.size() == spec.n_tasks);
    long double u = 0;
    for (const auto& t : ts) {
      Cycles cost = t.profile.uncontended_cost(40);
      REQUIRE(cost >= 1);
      REQUIRE(cost <= t.period);
      u += static_cast<long double>(cost) / static_cast<long double>(t.period);
    }
    // truncation to the period grid only loses utilization
    CHECK(u <= (spec.total_utilization + spec.n_tasks) / 1000.0L);
  }
}

TEST_CASE("generate is deterministic in the seed") {
  WorkloadSpec spec;
  spec.n_tasks = 5;
  spec.total_utilization = 600;
  spec.period_choices = {1000, 2000, 4000};
  spec.memory_intensity = 300;
  spec.seed = 77;
  auto a = generate_taskset(spec, 40);
  auto b = generate_taskset(spec, 40);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].period == b[i].period);
    CHECK(a[i].profile.segments[0].compute == b[i].profile.segments[0].compute);
    CHECK(a[i].profile.segments[0].mem_accesses == b[i].profile.segments[0].mem_accesses);
  }
}

TEST_CASE("generate rejects utilizations that round to empty tasks") {
  WorkloadSpec spec;
  spec.n_tasks = 50;
  spec.total_utilization = 10;
  spec.period_choices = {50};
  CHECK_THROWS_AS(generate_taskset(spec, 40), WorkloadError);
}

TEST_CASE("wrap: generated deployments validate cleanly and round-trip") {
  for (auto policy : {SchedPolicy::EDF, SchedPolicy::RM, SchedPolicy::FP}) {
    WorkloadSpec spec;
    spec.n_tasks = 8;
    spec.total_utilization = 1500;  // across 2 cores
    spec.period_choices = {100000, 200000, 400000, 800000};
    spec.memory_intensity = 200;
    spec.seed = 3;
    auto ts = generate_taskset(spec, 40);
    auto d = wrap_taskset(ts, 2, policy);
    auto rep = validate_deployment(d);
    INFO("policy " << to_string(policy));
    CHECK(rep.runnable());
    // round-trip through the canonical JSON form
    auto d2 = parse_deployment(serialize_deployment(d));
    CHECK(serialize_deployment(d2) == serialize_deployment(d));
  }
}

TEST_CASE("interference scenarios: same tasks, regulator presence differs") {
  auto reg = interference_scenario(InterferenceVariant::Regulated);
  auto unreg = interference_scenario(InterferenceVariant::Unregulated);
  REQUIRE(reg.tasks.size() == unreg.tasks.size());
  for (std::size_t i = 0; i < reg.tasks.size(); ++i) {
    CHECK(reg.tasks[i].id == unreg.tasks[i].id);
    CHECK(reg.tasks[i].period == unreg.tasks[i].period);
    CHECK(reg.tasks[i].core == unreg.tasks[i].core);
  }
  CHECK(reg.regulator.has_value());
  CHECK_FALSE(unreg.regulator.has_value());
  // r_min covers the sum of budgets: every granted byte of budget is backed
  std::uint64_t qsum = 0;
  for (auto q : reg.regulator->budgets) qsum += q;
  CHECK(qsum <= reg.regulator->guaranteed_min);
  CHECK(validate_deployment(reg).runnable());
  CHECK(validate_deployment(unreg).runnable());
}
