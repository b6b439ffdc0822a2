// tokisim - deterministic multicore RTOS evaluation platform.
// configure -> validate -> run -> report, from the command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "tokisim/tokisim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << content;
  return static_cast<bool>(out);
}

void print_report(const tokisim::ValidationReport& rep, bool json) {
  using tokisim::Json;
  if (json) {
    Json j;
    j["errors"] = Json::array();
    j["warnings"] = Json::array();
    for (const auto& f : rep.errors)
      j["errors"].push_back({{"code", f.code}, {"message", f.message}, {"path", f.path}});
    for (const auto& f : rep.warnings)
      j["warnings"].push_back({{"code", f.code}, {"message", f.message}, {"path", f.path}});
    j["runnable"] = rep.runnable();
    std::cout << j.dump(2) << "\n";
    return;
  }
  for (const auto& f : rep.errors)
    std::cout << "error [" << f.code << "] " << f.path << ": " << f.message << "\n";
  for (const auto& f : rep.warnings)
    std::cout << "warning [" << f.code << "] " << f.path << ": " << f.message << "\n";
  if (rep.runnable()) std::cout << "OK\n";
}

/// Loads, parses and validates a config file.  On any failure prints the
/// problem and returns the exit code; on success returns 0 and fills `out`.
int load_deployment(const std::string& path, bool json, tokisim::Deployment& out,
                    bool print_ok_report) {
  auto text = read_file(path);
  if (!text) {
    std::cerr << "cannot read '" << path << "'\n";
    return kExitIo;
  }
  tokisim::ValidationReport rep;
  try {
    out = tokisim::parse_deployment(*text);
  } catch (const tokisim::ConfigError& e) {
    rep.errors.push_back({"parse_error", e.what(), "$"});
    print_report(rep, json);
    return kExitValidation;
  }
  rep = tokisim::validate_deployment(out);
  if (!rep.runnable()) {
    print_report(rep, json);
    return kExitValidation;
  }
  if (print_ok_report) print_report(rep, json);
  return kExitOk;
}

void print_summary(const tokisim::MetricsReport& rep) {
  std::printf("%-16s %10s %12s %12s %10s %8s\n", "task", "count", "max", "mean", "jitter",
              "misses");
  for (const auto& [task, st] : rep.tasks)
    std::printf("%-16s %10llu %12llu %12llu %10llu %8llu\n", task.c_str(),
                static_cast<unsigned long long>(st.count),
                static_cast<unsigned long long>(st.max),
                static_cast<unsigned long long>(st.mean),
                static_cast<unsigned long long>(st.jitter),
                static_cast<unsigned long long>(st.deadline_misses));
  if (rep.dropped_events > 0)
    std::printf("dropped trace events: %llu\n",
                static_cast<unsigned long long>(rep.dropped_events));
}

std::string summary_csv(const tokisim::MetricsReport& rep) {
  std::ostringstream os;
  os << "task,count,min,max,mean,p95,jitter,deadline_misses\n";
  for (const auto& [task, st] : rep.tasks)
    os << task << ',' << st.count << ',' << st.min << ',' << st.max << ',' << st.mean << ','
       << st.p95 << ',' << st.jitter << ',' << st.deadline_misses << '\n';
  return os.str();
}

std::string trace_text(const std::vector<tokisim::TraceEvent>& events) {
  std::ostringstream os;
  tokisim::export_trace(events, os);
  return os.str();
}

int cmd_validate(const std::string& config, bool json) {
  tokisim::Deployment d;
  return load_deployment(config, json, d, /*print_ok_report=*/true);
}

int cmd_run(const std::string& config, std::uint64_t until, std::uint64_t seed,
            const std::string& trace_path, const std::string& report_path,
            const std::string& csv_path) {
  tokisim::Deployment d;
  if (int rc = load_deployment(config, false, d, false); rc != kExitOk) return rc;
  tokisim::SimEngine::Result res;
  try {
    res = tokisim::run_simulation(d, until, seed);
  } catch (const tokisim::SimFault& e) {
    std::cerr << "runtime fault: " << e.what() << "\n";
    return kExitRuntime;
  }
  if (!trace_path.empty() && !write_file(trace_path, trace_text(res.events))) {
    std::cerr << "cannot write '" << trace_path << "'\n";
    return kExitIo;
  }
  if (!report_path.empty() &&
      !write_file(report_path, tokisim::metrics_to_json(res.report).dump(2) + "\n")) {
    std::cerr << "cannot write '" << report_path << "'\n";
    return kExitIo;
  }
  if (!csv_path.empty() && !write_file(csv_path, summary_csv(res.report))) {
    std::cerr << "cannot write '" << csv_path << "'\n";
    return kExitIo;
  }
  print_summary(res.report);
  return kExitOk;
}

int cmd_report(const std::string& trace_path) {
  std::ifstream in(trace_path, std::ios::binary);
  if (!in) {
    std::cerr << "cannot read '" << trace_path << "'\n";
    return kExitIo;
  }
  std::vector<tokisim::TraceEvent> events;
  try {
    events = tokisim::parse_trace(in);
  } catch (const tokisim::TraceParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitRuntime;
  }
  auto rep = tokisim::compute_metrics(events);
  std::cout << tokisim::metrics_to_json(rep).dump(2) << "\n";
  return kExitOk;
}

int cmd_gen_workload(const std::string& spec_json, std::uint32_t n_cores,
                     const std::string& policy_name, const std::string& out_path) {
  tokisim::WorkloadSpec spec;
  try {
    tokisim::Json j = tokisim::Json::parse(spec_json);
    if (!j.is_object()) throw tokisim::ConfigError("spec must be a JSON object");
    tokisim::detail::reject_unknown_keys(
        j, {"n_tasks", "total_utilization", "period_choices", "memory_intensity", "seed"},
        "spec");
    spec.n_tasks = static_cast<std::uint32_t>(
        tokisim::detail::get_uint_or(j, "n_tasks", spec.n_tasks, "spec"));
    spec.total_utilization = static_cast<std::uint32_t>(
        tokisim::detail::get_uint_or(j, "total_utilization", spec.total_utilization, "spec"));
    spec.memory_intensity = static_cast<std::uint32_t>(
        tokisim::detail::get_uint_or(j, "memory_intensity", spec.memory_intensity, "spec"));
    spec.seed = tokisim::detail::get_uint_or(j, "seed", spec.seed, "spec");
    if (j.contains("period_choices"))
      for (const auto& p : j.at("period_choices"))
        spec.period_choices.push_back(p.get<std::uint64_t>());
  } catch (const std::exception& e) {
    std::cerr << "bad --spec: " << e.what() << "\n";
    return kExitUsage;
  }
  if (spec.period_choices.empty()) spec.period_choices = {100000, 200000, 400000};

  tokisim::Platform platform;
  tokisim::Deployment d;
  try {
    tokisim::SchedPolicy policy = tokisim::detail::parse_policy(policy_name, "--policy");
    auto tasks = tokisim::generate_taskset(spec, platform.mem_service_time);
    d = tokisim::wrap_taskset(std::move(tasks), n_cores, policy, platform);
  } catch (const std::exception& e) {
    std::cerr << "generator error: " << e.what() << "\n";
    return kExitValidation;
  }
  auto rep = tokisim::validate_deployment(d);
  if (!rep.runnable()) {
    print_report(rep, false);
    return kExitValidation;
  }
  std::string text = tokisim::serialize_deployment(d);
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else if (!write_file(out_path, text)) {
    std::cerr << "cannot write '" << out_path << "'\n";
    return kExitIo;
  }
  return kExitOk;
}

int cmd_compare(const std::string& config_a, const std::string& config_b, std::uint64_t until,
                std::uint64_t seed, const std::string& builtin, const std::string& json_path) {
  tokisim::Deployment a, b;
  if (builtin == "interference") {
    a = tokisim::interference_scenario(tokisim::InterferenceVariant::Unregulated);
    b = tokisim::interference_scenario(tokisim::InterferenceVariant::Regulated);
  } else if (!builtin.empty()) {
    std::cerr << "unknown builtin scenario '" << builtin << "'\n";
    return kExitUsage;
  } else {
    if (int rc = load_deployment(config_a, false, a, false); rc != kExitOk) return rc;
    if (int rc = load_deployment(config_b, false, b, false); rc != kExitOk) return rc;
  }
  tokisim::SimEngine::Result ra, rb;
  try {
    ra = tokisim::run_simulation(a, until, seed);
    rb = tokisim::run_simulation(b, until, seed);
  } catch (const tokisim::SimFault& e) {
    std::cerr << "runtime fault: " << e.what() << "\n";
    return kExitRuntime;
  }
  tokisim::DiffReport diff;
  try {
    diff = tokisim::compare_runs(ra.report, rb.report);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }
  std::printf("%-16s %-16s %12s %12s %12s %9s\n", "task", "metric", "a", "b", "delta", "pct");
  for (const auto& [task, deltas] : diff.tasks)
    for (const auto& d : deltas)
      std::printf("%-16s %-16s %12lld %12lld %12lld %8.2f%%\n", task.c_str(), d.metric.c_str(),
                  static_cast<long long>(d.a), static_cast<long long>(d.b),
                  static_cast<long long>(d.delta), d.percent);
  if (!json_path.empty()) {
    std::string text = tokisim::diff_to_json(diff).dump(2) + "\n";
    if (json_path == "-") {
      std::cout << text;
    } else if (!write_file(json_path, text)) {
      std::cerr << "cannot write '" << json_path << "'\n";
      return kExitIo;
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tokisim - deterministic multicore RTOS evaluation platform"};
  app.require_subcommand(1);

  std::string config, config_b, trace_path, report_path, csv_path, out_path, spec_json;
  std::string policy_name = "EDF", builtin, json_path;
  std::uint64_t until = 0, seed = 0;
  std::uint32_t n_cores = 1;
  bool json = false;

  auto* validate = app.add_subcommand("validate", "check a deployment configuration");
  validate->add_option("config", config, "config file")->required();
  validate->add_flag("--json", json, "machine-readable report");

  auto* run = app.add_subcommand("run", "simulate a deployment");
  run->add_option("config", config, "config file")->required();
  run->add_option("--until", until, "simulation length in cycles")->required();
  run->add_option("--seed", seed, "workload seed (recorded)");
  run->add_option("--trace", trace_path, "trace output file");
  run->add_option("--report", report_path, "metrics JSON output file");
  run->add_option("--csv", csv_path, "metric table CSV output file");

  auto* report = app.add_subcommand("report", "recompute metrics from a trace file");
  report->add_option("trace", trace_path, "trace file")->required();

  auto* gen = app.add_subcommand("gen-workload", "generate a synthetic deployment");
  gen->add_option("--spec", spec_json, "WorkloadSpec JSON fragment")->required();
  gen->add_option("--cores", n_cores, "cores to partition across (round-robin)");
  gen->add_option("--policy", policy_name, "scheduling policy (FP|RM|DM|EDF)");
  gen->add_option("--out", out_path, "output config file ('-' for stdout)");

  auto* compare = app.add_subcommand("compare", "run two deployments and diff their metrics");
  compare->add_option("config_a", config, "first config file");
  compare->add_option("config_b", config_b, "second config file");
  compare->add_option("--until", until, "simulation length in cycles")->required();
  compare->add_option("--seed", seed, "workload seed");
  compare->add_option("--builtin", builtin, "built-in scenario pair (interference)");
  compare->add_option("--json", json_path, "diff JSON output file ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (validate->parsed()) return cmd_validate(config, json);
  if (run->parsed()) {
    if (until == 0) {
      std::cerr << "--until must be > 0\n";
      return kExitUsage;
    }
    return cmd_run(config, until, seed, trace_path, report_path, csv_path);
  }
  if (report->parsed()) return cmd_report(trace_path);
  if (gen->parsed()) return cmd_gen_workload(spec_json, n_cores, policy_name, out_path);
  if (compare->parsed()) {
    if (until == 0) {
      std::cerr << "--until must be > 0\n";
      return kExitUsage;
    }
    if (builtin.empty() && (config.empty() || config_b.empty())) {
      std::cerr << "compare needs two configs or --builtin\n";
      return kExitUsage;
    }
    return cmd_compare(config, config_b, until, seed, builtin, json_path);
  }
  return kExitUsage;
}
