#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tokisim/model.hpp"

namespace tokisim {

using Json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown_keys(const Json& obj, std::set<std::string> allowed,
                                const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' at " + path);
  }
}

inline std::uint64_t get_uint(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key))
    throw ConfigError("missing required field '" + key + "' at " + path);
  const Json& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError("type mismatch: '" + key + "' at " + path + " must be an integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0)
    throw ConfigError("type mismatch: '" + key + "' at " + path + " must be non-negative");
  return v.get<std::uint64_t>();
}

inline std::uint64_t get_uint_or(const Json& obj, const std::string& key, std::uint64_t dflt,
                                 const std::string& path) {
  return obj.contains(key) ? get_uint(obj, key, path) : dflt;
}

inline std::string get_string(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key))
    throw ConfigError("missing required field '" + key + "' at " + path);
  if (!obj.at(key).is_string())
    throw ConfigError("type mismatch: '" + key + "' at " + path + " must be a string");
  return obj.at(key).get<std::string>();
}

inline SchedPolicy parse_policy(const std::string& s, const std::string& path) {
  if (s == "FP") return SchedPolicy::FP;
  if (s == "RM") return SchedPolicy::RM;
  if (s == "DM") return SchedPolicy::DM;
  if (s == "EDF") return SchedPolicy::EDF;
  throw ConfigError("type mismatch: unknown policy '" + s + "' at " + path);
}

}  // namespace detail

/// Parses the external JSON config format into a fully defaulted Deployment.
/// Unknown keys, type mismatches, missing required fields, duplicate task ids
/// and empty profiles are hard errors (ConfigError).
inline Deployment parse_deployment(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("syntax error: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("top level must be an object");
  detail::reject_unknown_keys(doc,
                              {"platform", "cores", "tasks", "regulator", "channels", "interrupts",
                               "trace_buffer_capacity", "deadline_miss_policy"},
                              "$");

  Deployment d;

  if (doc.contains("platform")) {
    const Json& p = doc.at("platform");
    if (!p.is_object()) throw ConfigError("type mismatch: 'platform' must be an object");
    detail::reject_unknown_keys(
        p, {"cycles_per_tick", "mem_service_time", "dispatch_overhead", "bus_arbitration"},
        "platform");
    d.platform.cycles_per_tick =
        detail::get_uint_or(p, "cycles_per_tick", d.platform.cycles_per_tick, "platform");
    d.platform.mem_service_time =
        detail::get_uint_or(p, "mem_service_time", d.platform.mem_service_time, "platform");
    d.platform.dispatch_overhead =
        detail::get_uint_or(p, "dispatch_overhead", d.platform.dispatch_overhead, "platform");
    if (p.contains("bus_arbitration")) {
      std::string a = detail::get_string(p, "bus_arbitration", "platform");
      if (a != "round_robin")
        throw ConfigError("type mismatch: unknown bus_arbitration '" + a + "'");
    }
  }

  if (!doc.contains("cores"))
    throw ConfigError("missing required field 'cores'");
  const Json& cores = doc.at("cores");
  if (!cores.is_array() || cores.empty())
    throw ConfigError("'cores' must be a non-empty array");
  for (std::size_t i = 0; i < cores.size(); ++i) {
    const std::string path = "cores[" + std::to_string(i) + "]";
    const Json& c = cores[i];
    if (!c.is_object()) throw ConfigError("type mismatch: " + path + " must be an object");
    detail::reject_unknown_keys(c, {"policy", "boot_offset"}, path);
    CoreConfig cc;
    if (c.contains("policy"))
      cc.policy = detail::parse_policy(detail::get_string(c, "policy", path), path);
    cc.boot_offset = detail::get_uint_or(c, "boot_offset", 0, path);
    d.cores.push_back(cc);
  }

  if (!doc.contains("tasks"))
    throw ConfigError("missing required field 'tasks'");
  const Json& tasks = doc.at("tasks");
  if (!tasks.is_array())
    throw ConfigError("type mismatch: 'tasks' must be an array");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string path = "tasks[" + std::to_string(i) + "]";
    const Json& t = tasks[i];
    if (!t.is_object()) throw ConfigError("type mismatch: " + path + " must be an object");
    detail::reject_unknown_keys(
        t, {"id", "core", "period", "offset", "relative_deadline", "priority", "profile", "kind"},
        path);
    Task task;
    task.id = detail::get_string(t, "id", path);
    if (d.task_index(task.id) >= 0)
      throw ConfigError("duplicate id '" + task.id + "' at " + path);
    task.core = static_cast<std::uint32_t>(detail::get_uint(t, "core", path));
    if (t.contains("kind")) {
      std::string k = detail::get_string(t, "kind", path);
      if (k == "periodic")
        task.kind = TaskKind::Periodic;
      else if (k == "interrupt_handler")
        task.kind = TaskKind::InterruptHandler;
      else
        throw ConfigError("type mismatch: unknown kind '" + k + "' at " + path);
    }
    if (task.kind == TaskKind::Periodic) {
      task.period = detail::get_uint(t, "period", path);
      task.offset = detail::get_uint_or(t, "offset", 0, path);
      task.relative_deadline =
          detail::get_uint_or(t, "relative_deadline", task.period, path);
    } else {
      if (t.contains("period"))
        throw ConfigError("interrupt_handler task '" + task.id + "' must not have a period");
      task.offset = 0;
      if (t.contains("relative_deadline"))
        task.relative_deadline = detail::get_uint(t, "relative_deadline", path);
    }
    if (t.contains("priority")) {
      const Json& pr = t.at("priority");
      if (pr.is_string()) {
        if (pr.get<std::string>() != "derived")
          throw ConfigError("type mismatch: priority at " + path +
                            " must be an integer or \"derived\"");
      } else if (pr.is_number_integer() || pr.is_number_unsigned()) {
        task.priority = pr.get<int>();
      } else {
        throw ConfigError("type mismatch: priority at " + path +
                          " must be an integer or \"derived\"");
      }
    }
    if (!t.contains("profile"))
      throw ConfigError("missing required field 'profile' at " + path);
    const Json& prof = t.at("profile");
    if (!prof.is_array())
      throw ConfigError("type mismatch: profile at " + path + " must be an array");
    if (prof.empty())
      throw ConfigError("empty profile at " + path);
    for (std::size_t s = 0; s < prof.size(); ++s) {
      const std::string spath = path + ".profile[" + std::to_string(s) + "]";
      const Json& seg = prof[s];
      if (!seg.is_object()) throw ConfigError("type mismatch: " + spath + " must be an object");
      detail::reject_unknown_keys(seg, {"compute", "mem_accesses"}, spath);
      Segment sg;
      sg.compute = detail::get_uint_or(seg, "compute", 0, spath);
      sg.mem_accesses = detail::get_uint_or(seg, "mem_accesses", 0, spath);
      task.profile.segments.push_back(sg);
    }
    d.tasks.push_back(std::move(task));
  }

  if (doc.contains("regulator") && !doc.at("regulator").is_null()) {
    const Json& r = doc.at("regulator");
    if (!r.is_object()) throw ConfigError("type mismatch: 'regulator' must be an object");
    detail::reject_unknown_keys(
        r, {"period_P", "budgets_Q", "guaranteed_r_min", "chunk_size"}, "regulator");
    RegulatorConfig rc;
    rc.period = detail::get_uint_or(r, "period_P", d.platform.cycles_per_tick, "regulator");
    if (!r.contains("budgets_Q"))
      throw ConfigError("missing required field 'budgets_Q' at regulator");
    const Json& q = r.at("budgets_Q");
    if (!q.is_array())
      throw ConfigError("type mismatch: budgets_Q must be an array");
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (!q[i].is_number_integer() && !q[i].is_number_unsigned())
        throw ConfigError("type mismatch: budgets_Q[" + std::to_string(i) +
                          "] must be an integer");
      rc.budgets.push_back(q[i].get<std::uint64_t>());
    }
    rc.guaranteed_min = detail::get_uint(r, "guaranteed_r_min", "regulator");
    if (r.contains("chunk_size")) {
      const Json& ch = r.at("chunk_size");
      if (!ch.is_array())
        throw ConfigError("type mismatch: chunk_size must be an array");
      for (std::size_t i = 0; i < ch.size(); ++i) {
        if (!ch[i].is_number_integer() && !ch[i].is_number_unsigned())
          throw ConfigError("type mismatch: chunk_size[" + std::to_string(i) +
                            "] must be an integer");
        rc.chunk_size.push_back(ch[i].get<std::uint64_t>());
      }
      if (rc.chunk_size.size() != rc.budgets.size())
        throw ConfigError("chunk_size and budgets_Q must have the same length");
    } else {
      for (std::uint64_t qi : rc.budgets)
        rc.chunk_size.push_back(std::max<std::uint64_t>(1, (qi + 3) / 4));
    }
    d.regulator = std::move(rc);
  }

  if (doc.contains("channels")) {
    const Json& chans = doc.at("channels");
    if (!chans.is_array())
      throw ConfigError("type mismatch: 'channels' must be an array");
    for (std::size_t i = 0; i < chans.size(); ++i) {
      const std::string path = "channels[" + std::to_string(i) + "]";
      const Json& c = chans[i];
      if (!c.is_object()) throw ConfigError("type mismatch: " + path + " must be an object");
      detail::reject_unknown_keys(c, {"capacity", "producer", "consumer", "accesses_per_op"},
                                  path);
      ChannelConfig cc;
      cc.capacity = detail::get_uint(c, "capacity", path);
      cc.producer = detail::get_string(c, "producer", path);
      cc.consumer = detail::get_string(c, "consumer", path);
      cc.accesses_per_op = detail::get_uint_or(c, "accesses_per_op", 2, path);
      d.channels.push_back(std::move(cc));
    }
  }

  if (doc.contains("interrupts")) {
    const Json& irqs = doc.at("interrupts");
    if (!irqs.is_array())
      throw ConfigError("type mismatch: 'interrupts' must be an array");
    for (std::size_t i = 0; i < irqs.size(); ++i) {
      const std::string path = "interrupts[" + std::to_string(i) + "]";
      const Json& s = irqs[i];
      if (!s.is_object()) throw ConfigError("type mismatch: " + path + " must be an object");
      detail::reject_unknown_keys(s, {"core", "period", "one_shot", "handler"}, path);
      InterruptSource src;
      src.core = static_cast<std::uint32_t>(detail::get_uint(s, "core", path));
      if (s.contains("period")) src.period = detail::get_uint(s, "period", path);
      if (s.contains("one_shot")) src.one_shot = detail::get_uint(s, "one_shot", path);
      if (src.period.has_value() == src.one_shot.has_value())
        throw ConfigError(path + " must have exactly one of 'period' or 'one_shot'");
      src.handler = detail::get_string(s, "handler", path);
      d.interrupts.push_back(std::move(src));
    }
  }

  d.trace_buffer_capacity = detail::get_uint_or(doc, "trace_buffer_capacity", 65536, "$");
  if (doc.contains("deadline_miss_policy")) {
    std::string p = detail::get_string(doc, "deadline_miss_policy", "$");
    if (p == "record_continue")
      d.deadline_miss_policy = DeadlineMissPolicy::RecordContinue;
    else if (p == "abort_job")
      d.deadline_miss_policy = DeadlineMissPolicy::AbortJob;
    else
      throw ConfigError("type mismatch: unknown deadline_miss_policy '" + p + "'");
  }

  return d;
}

/// Canonical serializer: parse(serialize(parse(x))) == parse(x).
/// Emits all fields with defaults applied, in schema order.
inline std::string serialize_deployment(const Deployment& d) {
  Json doc = Json::object();
  doc["platform"] = {{"cycles_per_tick", d.platform.cycles_per_tick},
                     {"mem_service_time", d.platform.mem_service_time},
                     {"dispatch_overhead", d.platform.dispatch_overhead},
                     {"bus_arbitration", "round_robin"}};
  doc["cores"] = Json::array();
  for (const auto& c : d.cores)
    doc["cores"].push_back({{"policy", to_string(c.policy)}, {"boot_offset", c.boot_offset}});
  doc["tasks"] = Json::array();
  for (const auto& t : d.tasks) {
    Json jt = Json::object();
    jt["id"] = t.id;
    jt["core"] = t.core;
    jt["kind"] = t.kind == TaskKind::Periodic ? "periodic" : "interrupt_handler";
    if (t.periodic()) {
      jt["period"] = t.period;
      jt["offset"] = t.offset;
    }
    if (t.relative_deadline) jt["relative_deadline"] = *t.relative_deadline;
    if (t.priority)
      jt["priority"] = *t.priority;
    else
      jt["priority"] = "derived";
    jt["profile"] = Json::array();
    for (const auto& s : t.profile.segments)
      jt["profile"].push_back({{"compute", s.compute}, {"mem_accesses", s.mem_accesses}});
    doc["tasks"].push_back(std::move(jt));
  }
  if (d.regulator) {
    doc["regulator"] = {{"period_P", d.regulator->period},
                        {"budgets_Q", d.regulator->budgets},
                        {"guaranteed_r_min", d.regulator->guaranteed_min},
                        {"chunk_size", d.regulator->chunk_size}};
  }
  if (!d.channels.empty()) {
    doc["channels"] = Json::array();
    for (const auto& c : d.channels)
      doc["channels"].push_back({{"capacity", c.capacity},
                                 {"producer", c.producer},
                                 {"consumer", c.consumer},
                                 {"accesses_per_op", c.accesses_per_op}});
  }
  if (!d.interrupts.empty()) {
    doc["interrupts"] = Json::array();
    for (const auto& s : d.interrupts) {
      Json js = Json::object();
      js["core"] = s.core;
      if (s.period) js["period"] = *s.period;
      if (s.one_shot) js["one_shot"] = *s.one_shot;
      js["handler"] = s.handler;
      doc["interrupts"].push_back(std::move(js));
    }
  }
  doc["trace_buffer_capacity"] = d.trace_buffer_capacity;
  doc["deadline_miss_policy"] =
      d.deadline_miss_policy == DeadlineMissPolicy::RecordContinue ? "record_continue"
                                                                   : "abort_job";
  return doc.dump(2) + "\n";
}

/// Rate-/deadline-monotonic priority assignment for the periodic tasks of one
/// core.  Smaller period (RM) or relative deadline (DM) gets a strictly higher
/// priority; ties break toward the lexicographically smaller id.  Output is a
/// dense descending range n..1 (larger integer = higher priority).
inline std::map<std::string, int> derive_priorities(const std::vector<Task>& tasks,
                                                    SchedPolicy policy) {
  if (policy != SchedPolicy::RM && policy != SchedPolicy::DM)
    throw std::invalid_argument("derive_priorities: policy must be RM or DM");
  for (const auto& t : tasks)
    if (!t.periodic())
      throw std::invalid_argument("derive_priorities: interrupt_handler task '" + t.id +
                                  "' present");
  std::vector<const Task*> order;
  order.reserve(tasks.size());
  for (const auto& t : tasks) order.push_back(&t);
  std::sort(order.begin(), order.end(), [&](const Task* a, const Task* b) {
    Cycles ka = policy == SchedPolicy::RM ? a->period : a->relative_deadline.value_or(a->period);
    Cycles kb = policy == SchedPolicy::RM ? b->period : b->relative_deadline.value_or(b->period);
    if (ka != kb) return ka < kb;
    return a->id < b->id;
  });
  std::map<std::string, int> out;
  int prio = static_cast<int>(order.size());
  for (const Task* t : order) out[t->id] = prio--;
  return out;
}

/// Effective integer priority for every task in the deployment.  Explicit
/// priorities pass through; "derived" tasks on RM/DM cores get monotonic
/// assignments; handlers without an explicit priority get 0 (their ranking
/// above periodic tasks is handled by the scheduler band, not this number).
/// EDF tasks get 0 (unused).
inline std::vector<int> resolve_priorities(const Deployment& d) {
  std::vector<int> prio(d.tasks.size(), 0);
  for (std::size_t i = 0; i < d.tasks.size(); ++i)
    if (d.tasks[i].priority) prio[i] = *d.tasks[i].priority;
  for (std::uint32_t core = 0; core < d.cores.size(); ++core) {
    SchedPolicy pol = d.cores[core].policy;
    if (pol != SchedPolicy::RM && pol != SchedPolicy::DM) continue;
    std::vector<Task> derived;
    for (const auto& t : d.tasks)
      if (t.core == core && t.periodic() && !t.priority) derived.push_back(t);
    if (derived.empty()) continue;
    auto assigned = derive_priorities(derived, pol);
    for (std::size_t i = 0; i < d.tasks.size(); ++i)
      if (!d.tasks[i].priority && d.tasks[i].core == core && d.tasks[i].periodic())
        prio[i] = assigned.at(d.tasks[i].id);
  }
  return prio;
}

/// Checks every structural invariant plus the cross-field rules.  Findings go
/// into the report; a report with errors blocks cmd_run.
inline ValidationReport validate_deployment(const Deployment& d) {
  ValidationReport rep;
  auto err = [&](std::string code, std::string msg, std::string path) {
    rep.errors.push_back({std::move(code), std::move(msg), std::move(path)});
  };
  auto warn = [&](std::string code, std::string msg, std::string path) {
    rep.warnings.push_back({std::move(code), std::move(msg), std::move(path)});
  };

  const auto& pf = d.platform;
  if (pf.cycles_per_tick < 1)
    err("platform_range", "cycles_per_tick must be >= 1", "platform.cycles_per_tick");
  if (pf.mem_service_time < 1)
    err("platform_range", "mem_service_time must be >= 1", "platform.mem_service_time");
  if (pf.cycles_per_tick <= pf.dispatch_overhead)
    err("platform_range", "cycles_per_tick must exceed dispatch_overhead",
        "platform.cycles_per_tick");

  if (d.cores.empty()) err("no_cores", "at least one core required", "cores");

  for (std::size_t i = 0; i < d.tasks.size(); ++i) {
    const Task& t = d.tasks[i];
    const std::string path = "tasks[" + std::to_string(i) + "]";
    if (t.core >= d.cores.size())
      err("core_out_of_range", "task '" + t.id + "' placed on nonexistent core", path + ".core");
    if (t.periodic()) {
      if (t.period == 0) err("bad_period", "period must be > 0", path + ".period");
      Cycles dl = t.relative_deadline.value_or(t.period);
      if (dl == 0 || dl > t.period)
        err("bad_deadline", "relative_deadline must satisfy 0 < D <= period",
            path + ".relative_deadline");
    }
    if (t.profile.segments.empty())
      err("empty_profile", "profile must have at least one segment", path + ".profile");
    for (std::size_t s = 0; s < t.profile.segments.size(); ++s) {
      const Segment& sg = t.profile.segments[s];
      if (sg.compute + sg.mem_accesses == 0)
        err("empty_segment", "segment must have compute + mem_accesses > 0",
            path + ".profile[" + std::to_string(s) + "]");
    }
    for (std::size_t j = 0; j < i; ++j)
      if (d.tasks[j].id == t.id) err("duplicate_id", "duplicate task id '" + t.id + "'", path);
    if (t.core < d.cores.size() && t.periodic() &&
        t.offset < d.cores[t.core].boot_offset)
      warn("release_delayed",
           "task '" + t.id + "' offset precedes core boot; first release is delayed",
           path + ".offset");
  }

  // FP cores require explicit priorities.
  for (std::size_t i = 0; i < d.tasks.size(); ++i) {
    const Task& t = d.tasks[i];
    if (t.core < d.cores.size() && d.cores[t.core].policy == SchedPolicy::FP && t.periodic() &&
        !t.priority)
      err("derived_priority_on_fp", "task '" + t.id + "' has derived priority on an FP core",
          "tasks[" + std::to_string(i) + "].priority");
  }

  if (d.regulator) {
    const auto& r = *d.regulator;
    if (r.period < 1) err("bad_regulator_period", "period_P must be >= 1", "regulator.period_P");
    if (r.budgets.size() != d.cores.size())
      err("budget_arity", "budgets_Q must list one budget per core", "regulator.budgets_Q");
    std::uint64_t sum = 0;
    for (std::uint64_t q : r.budgets) sum += q;
    if (sum > r.guaranteed_min)
      err("budget_oversubscription",
          "sum of budgets " + std::to_string(sum) + " exceeds guaranteed_r_min " +
              std::to_string(r.guaranteed_min),
          "regulator.budgets_Q");
    for (std::size_t i = 0; i < r.chunk_size.size(); ++i)
      if (i < r.budgets.size() && r.budgets[i] > 0 && r.chunk_size[i] == 0)
        err("bad_chunk_size", "chunk_size must be >= 1 for regulated cores",
            "regulator.chunk_size[" + std::to_string(i) + "]");
  }

  for (std::size_t i = 0; i < d.channels.size(); ++i) {
    const auto& c = d.channels[i];
    const std::string path = "channels[" + std::to_string(i) + "]";
    if (d.task_index(c.producer) < 0)
      err("unknown_endpoint", "channel producer '" + c.producer + "' does not exist",
          path + ".producer");
    if (d.task_index(c.consumer) < 0)
      err("unknown_endpoint", "channel consumer '" + c.consumer + "' does not exist",
          path + ".consumer");
    if (c.capacity == 0) err("bad_capacity", "channel capacity must be >= 1", path + ".capacity");
  }

  // Handler tasks referenced by exactly one interrupt source.
  std::map<std::string, int> handler_refs;
  for (std::size_t i = 0; i < d.interrupts.size(); ++i) {
    const auto& s = d.interrupts[i];
    const std::string path = "interrupts[" + std::to_string(i) + "]";
    if (s.core >= d.cores.size())
      err("core_out_of_range", "interrupt source on nonexistent core", path + ".core");
    int ti = d.task_index(s.handler);
    if (ti < 0) {
      err("unknown_handler", "handler task '" + s.handler + "' does not exist", path + ".handler");
    } else {
      if (d.tasks[ti].kind != TaskKind::InterruptHandler)
        err("bad_handler_kind", "handler task '" + s.handler + "' is not an interrupt_handler",
            path + ".handler");
      if (d.tasks[ti].core != s.core)
        err("handler_core_mismatch", "handler task '" + s.handler + "' is on a different core",
            path + ".handler");
      handler_refs[s.handler]++;
    }
    if (s.period && *s.period == 0)
      err("bad_period", "interrupt period must be > 0", path + ".period");
  }
  for (const auto& [id, n] : handler_refs)
    if (n > 1) err("handler_multiref", "handler task '" + id + "' referenced by " +
                       std::to_string(n) + " interrupt sources", "interrupts");
  for (const auto& t : d.tasks)
    if (t.kind == TaskKind::InterruptHandler && !handler_refs.count(t.id))
      warn("unreferenced_handler", "handler task '" + t.id + "' has no interrupt source", "tasks");

  // Per-core utilization, uncontended-bus cost.
  for (std::uint32_t core = 0; core < d.cores.size(); ++core) {
    long double u = 0.0L;
    for (const auto& t : d.tasks) {
      if (t.core != core || !t.periodic() || t.period == 0) continue;
      u += static_cast<long double>(t.profile.uncontended_cost(pf.mem_service_time)) /
           static_cast<long double>(t.period);
    }
    if (u > 1.0L) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2Lf", u);
      warn("overutilized", "core " + std::to_string(core) + " utilization " + buf + " > 1",
           "cores[" + std::to_string(core) + "]");
    }
  }

  return rep;
}

}  // namespace tokisim
