// Single-binary command-line front end: weights, plan, simulate, triage,
// analyze, report. Exit statuses are a stable contract — 0 success, 1 usage
// error, 2 data error. Every executed command emits one run-manifest line to
// stderr (or --manifest <file>) so stdout stays deterministic.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "exitscope/analyzer.hpp"
#include "exitscope/common.hpp"
#include "exitscope/consensus.hpp"
#include "exitscope/planner.hpp"
#include "exitscope/selection.hpp"
#include "exitscope/simulator.hpp"
#include "exitscope/traffic.hpp"
#include "exitscope/weights.hpp"

namespace exitscope {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct io_error : error {
  io_error(const std::string& path, const std::string& what_arg)
      : error("io", path + ": " + what_arg) {}
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw io_error(path, "read failed");
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error(path, "cannot open for writing");
  out.write(content.data(), std::streamsize(content.size()));
  out.flush();
  if (!out) throw io_error(path, "write failed");
}

namespace detail {

// Thrown by handlers for bad flag values; maps to exit status 1 before any
// command work runs.
struct usage_failure {
  std::string message;
};

struct RunManifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> params;

  void set(std::string key, std::string value) {
    params.emplace_back(std::move(key), std::move(value));
  }

  std::string render(double started, double finished, bool ok) const {
    std::string line = "command=" + quote_value(command);
    line += " version=" + std::string(kToolVersion);
    line += " started=" + format_fixed(started, 3);
    line += " finished=" + format_fixed(finished, 3);
    line += std::string(" status=") + (ok ? "ok" : "error");
    for (const auto& [key, value] : params) line += " " + key + "=" + quote_value(value);
    return line;
  }
};

inline double now_seconds() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

inline std::string format_month_utc(double ts) {
  if (!std::isfinite(ts)) return "unknown";
  const double floored = std::floor(ts);
  if (floored < -62135596800.0 || floored > 253402300799.0) return "unknown";  // years 1..9999
  std::time_t t = std::time_t(floored);
  std::tm tm{};
  if (!gmtime_r(&t, &tm)) return "unknown";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d", tm.tm_year + 1900, tm.tm_mon + 1);
  return buf;
}

inline std::unique_ptr<CompletionBackend> make_backend(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "scripted") {
    if (arg.empty()) throw usage_failure{"--backend scripted:<path> needs a path"};
    return std::make_unique<ScriptedBackend>(ScriptedBackend::load(read_file(arg)));
  }
  if (kind == "fuzz") {
    auto seed = parse_uint64(arg);
    if (!seed) throw usage_failure{"--backend fuzz:<seed> needs an unsigned seed"};
    return std::make_unique<FuzzBackend>(*seed);
  }
  throw usage_failure{"unknown backend '" + spec + "' (use scripted:<path> or fuzz:<seed>)"};
}

inline std::unique_ptr<Retriever> make_retriever(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "scripted") {
    if (arg.empty()) throw usage_failure{"--retriever scripted:<path> needs a path"};
    return std::make_unique<ScriptedRetriever>(ScriptedRetriever::load(read_file(arg)));
  }
  if (kind == "empty") return std::make_unique<EmptyRetriever>();
  if (kind == "failing") return std::make_unique<FailingRetriever>();
  throw usage_failure{"unknown retriever '" + spec + "' (use scripted:<path>, empty, or failing)"};
}

}  // namespace detail

// Per-finding counts for the report command: vendor and type tables cover
// findings whose entity was confirmed as device-originated; attack and
// month tables cover positive verdicts.
struct ReportTables {
  std::vector<std::pair<std::string, std::int64_t>> vendor;
  std::vector<std::pair<std::string, std::int64_t>> type;
  std::vector<std::pair<std::string, std::int64_t>> attack;
  std::vector<std::pair<std::string, std::int64_t>> month;
};

inline ReportTables aggregate_findings(const std::vector<Finding>& findings) {
  std::map<std::string, std::int64_t> vendor, type, attack, month;
  for (const Finding& f : findings) {
    if (f.entity && f.is_iot_origin && *f.is_iot_origin) {
      if (f.entity->vendor) ++vendor[*f.entity->vendor];
      if (f.entity->dev_type) ++type[*f.entity->dev_type];
    }
    if (f.verdict && *f.verdict && f.attack_kind) {
      ++attack[std::string(to_string(*f.attack_kind))];
      ++month[detail::format_month_utc(f.timestamp)];
    }
  }
  auto ranked = [](const std::map<std::string, std::int64_t>& counts) {
    std::vector<std::pair<std::string, std::int64_t>> rows(counts.begin(), counts.end());
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return rows;
  };
  return {ranked(vendor), ranked(type), ranked(attack), ranked(month)};
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tor exit observatory toolkit: relay weighting, deployment planning, circuit simulation, and exit-traffic analysis"};
  app.name("exitscope");
  bool records = false;
  std::string manifest_path;
  app.add_flag("--records", records, "emit machine-readable flat records instead of tables");
  app.add_option("--manifest", manifest_path, "write the run manifest to this file instead of stderr");
  app.require_subcommand(1);

  struct {
    std::string roster;
  } wopt;
  CLI::App* weights_cmd =
      app.add_subcommand("weights", "compute position weights and case label for a relay roster")->fallthrough();
  weights_cmd->add_option("roster", wopt.roster, "relay roster file")->required();

  struct {
    std::string roster, options;
    double pc = 0, budget = 0;
    std::int64_t circuits = 1;
  } popt;
  CLI::App* plan_cmd = app.add_subcommand("plan", "greedy budget-constrained exit deployment plan")->fallthrough();
  plan_cmd->add_option("roster", popt.roster, "relay roster file")->required();
  plan_cmd->add_option("options", popt.options, "node option file (label bandwidth cost)")->required();
  plan_cmd->add_option("--pc", popt.pc, "desired at-least-once probability")->required();
  plan_cmd->add_option("--budget", popt.budget, "monthly budget")->required();
  plan_cmd->add_option("--circuits", popt.circuits, "circuits assumed per observation window")->required();

  struct {
    std::string scenario;
  } sopt;
  CLI::App* simulate_cmd =
      app.add_subcommand("simulate", "Monte Carlo check of the analytic hit probability")->fallthrough();
  simulate_cmd->add_option("scenario", sopt.scenario, "scenario file")->required();

  struct {
    std::string roster, flows, top1m, asn_map, hosting_asns, sigs, out_path;
  } topt;
  CLI::App* triage_cmd =
      app.add_subcommand("triage", "classify, filter, and signature-match exit flows")->fallthrough();
  triage_cmd->add_option("roster", topt.roster, "relay roster file")->required();
  triage_cmd->add_option("flows", topt.flows, "flow record file")->required();
  triage_cmd->add_option("--top1m", topt.top1m, "popular-domain list")->required();
  triage_cmd->add_option("--asn-map", topt.asn_map, "cidr-to-asn map")->required();
  triage_cmd->add_option("--hosting-asns", topt.hosting_asns, "hosting-provider asn list")->required();
  triage_cmd->add_option("--sigs", topt.sigs, "byte-signature file")->required();
  triage_cmd->add_option("--out", topt.out_path, "output file for kept flows")->required();

  struct {
    std::string flows, backend, retriever = "empty", out_path;
  } aopt;
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "run the five-step pipeline over kept flows")->fallthrough();
  analyze_cmd->add_option("flows", aopt.flows, "kept-flow record file")->required();
  analyze_cmd->add_option("--backend", aopt.backend, "completion backend: scripted:<path> or fuzz:<seed>")
      ->required();
  analyze_cmd->add_option("--retriever", aopt.retriever,
                          "retrieval backend: scripted:<path>, empty, or failing");
  analyze_cmd->add_option("--out", aopt.out_path, "output findings file")->required();

  struct {
    std::string findings;
  } ropt;
  CLI::App* report_cmd = app.add_subcommand("report", "aggregate findings into count tables")->fallthrough();
  report_cmd->add_option("findings", ropt.findings, "findings file")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("exitscope");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  detail::RunManifest manifest;
  std::function<void()> handler;

  if (app.got_subcommand(weights_cmd)) {
    manifest.command = "weights";
    manifest.set("roster", wopt.roster);
    handler = [&] {
      const NetworkState state = parse_roster(read_file(wopt.roster));
      const auto [w, eval] = compute_weights(state);
      (void)eval;
      if (records) {
        out << "case=" << to_string(w.case_label) << " Wee=" << format_double(w.Wee)
            << " Wed=" << format_double(w.Wed) << " Wnd=" << format_double(w.Wnd)
            << " Wxd=" << format_double(w.Wxd) << " Wne=" << format_double(w.Wne)
            << " Wnx=" << format_double(w.Wnx) << " Wxx=" << format_double(w.Wxx) << "\n";
      } else {
        out << "case " << to_string(w.case_label) << "\n";
        out << "Wee " << format_fixed(w.Wee, 6) << "\n";
        out << "Wed " << format_fixed(w.Wed, 6) << "\n";
        out << "Wnd " << format_fixed(w.Wnd, 6) << "\n";
        out << "Wxd " << format_fixed(w.Wxd, 6) << "\n";
        out << "Wne " << format_fixed(w.Wne, 6) << "\n";
        out << "Wnx " << format_fixed(w.Wnx, 6) << "\n";
        out << "Wxx " << format_fixed(w.Wxx, 6) << "\n";
      }
    };
  } else if (app.got_subcommand(plan_cmd)) {
    manifest.command = "plan";
    manifest.set("roster", popt.roster);
    manifest.set("options", popt.options);
    manifest.set("pc", format_double(popt.pc));
    manifest.set("budget", format_double(popt.budget));
    manifest.set("circuits", std::to_string(popt.circuits));
    handler = [&] {
      if (!(popt.pc >= 0.0 && popt.pc < 1.0))
        throw detail::usage_failure{"--pc must lie in [0, 1)"};
      if (!std::isfinite(popt.budget) || popt.budget < 0)
        throw detail::usage_failure{"--budget must be a finite non-negative amount"};
      if (popt.circuits < 1) throw detail::usage_failure{"--circuits must be at least 1"};
      const NetworkState state = parse_roster(read_file(popt.roster));
      const auto options = parse_options(read_file(popt.options));
      const DeploymentPlan plan =
          plan_deployment(state, options, popt.pc, popt.budget, popt.circuits);
      out << (records ? format_plan_record(plan) : format_plan(plan));
    };
  } else if (app.got_subcommand(simulate_cmd)) {
    manifest.command = "simulate";
    manifest.set("scenario", sopt.scenario);
    handler = [&] {
      const std::string base_dir = std::filesystem::path(sopt.scenario).parent_path().string();
      const Scenario sc = parse_scenario(read_file(sopt.scenario), base_dir);
      manifest.set("roster", sc.roster_path);
      manifest.set("seed", std::to_string(sc.config.seed));
      const NetworkState state = parse_roster(read_file(sc.roster_path));
      const WeightSet w = compute_weights(state).first;
      const double analytic = analytic_pc(state, w, sc.config.fleet_ids, sc.config.circuits_per_trial);
      const SimResult res = run(state, w, sc.config);
      if (records) {
        out << "trials=" << sc.config.trials << " circuits=" << sc.config.circuits_per_trial
            << " seed=" << sc.config.seed << " hit_trials=" << res.hit_trials
            << " empirical_pc=" << format_double(res.empirical_pc)
            << " std_err=" << format_double(res.std_err)
            << " analytic_pc=" << format_double(analytic)
            << " provenance=" << quote_value(res.provenance) << "\n";
      } else {
        out << "trials " << sc.config.trials << "\n";
        out << "circuits " << sc.config.circuits_per_trial << "\n";
        out << "hit_trials " << res.hit_trials << "\n";
        out << "empirical_pc " << format_fixed(res.empirical_pc, 6) << "\n";
        out << "std_err " << format_fixed(res.std_err, 6) << "\n";
        out << "analytic_pc " << format_fixed(analytic, 6) << "\n";
        out << "delta " << format_fixed(std::fabs(res.empirical_pc - analytic), 6) << "\n";
        out << "provenance " << res.provenance << "\n";
      }
    };
  } else if (app.got_subcommand(triage_cmd)) {
    manifest.command = "triage";
    manifest.set("roster", topt.roster);
    manifest.set("flows", topt.flows);
    manifest.set("top1m", topt.top1m);
    manifest.set("asn_map", topt.asn_map);
    manifest.set("hosting_asns", topt.hosting_asns);
    manifest.set("sigs", topt.sigs);
    manifest.set("out", topt.out_path);
    handler = [&] {
      const NetworkState state = parse_roster(read_file(topt.roster));
      const auto or_set = extract_or_ipset(state);
      const auto top1m = parse_domain_list(read_file(topt.top1m));
      const AsnTable asn_table = parse_asn_map(read_file(topt.asn_map));
      const auto hosting = parse_asn_set(read_file(topt.hosting_asns));
      const auto sigs = parse_signatures(read_file(topt.sigs));
      const auto flows = parse_flows(read_file(topt.flows));

      std::map<FilterReason, std::int64_t> reason_counts;
      std::int64_t sighits = 0;
      std::string kept_lines;
      for (const ParsedFlow& pf : flows) {
        const FilterVerdict v = triage_flow(pf.flow, or_set, top1m, hosting, asn_table);
        ++reason_counts[v.reason];
        if (!v.keep) continue;
        const auto hits = match_signatures(pf.flow, sigs);
        sighits += std::int64_t(hits.size());
        kept_lines += format_flow(pf, &hits) + "\n";
      }
      write_file(topt.out_path, kept_lines);

      const FilterReason order[] = {FilterReason::kept, FilterReason::internal,
                                    FilterReason::top1m_host, FilterReason::hosting_asn,
                                    FilterReason::http_5xx, FilterReason::telnet_iac};
      if (records) {
        out << "total=" << flows.size();
        for (FilterReason r : order) out << " " << to_string(r) << "=" << reason_counts[r];
        out << " sighits=" << sighits << "\n";
      } else {
        out << "total " << flows.size() << "\n";
        for (FilterReason r : order) out << to_string(r) << " " << reason_counts[r] << "\n";
        out << "sighits " << sighits << "\n";
      }
    };
  } else if (app.got_subcommand(analyze_cmd)) {
    manifest.command = "analyze";
    manifest.set("flows", aopt.flows);
    manifest.set("backend", aopt.backend);
    manifest.set("retriever", aopt.retriever);
    manifest.set("out", aopt.out_path);
    handler = [&] {
      auto backend = detail::make_backend(aopt.backend);
      auto retriever = detail::make_retriever(aopt.retriever);
      const auto flows = parse_flows(read_file(aopt.flows));
      const auto findings = analyze_flows(flows, *backend, *retriever);
      write_file(aopt.out_path, format_findings(findings));

      std::int64_t errors = 0, attacks = 0;
      for (const Finding& f : findings) {
        if (f.error) ++errors;
        if (f.verdict && *f.verdict) ++attacks;
      }
      if (records) {
        out << "flows=" << flows.size() << " errors=" << errors << " attacks=" << attacks << "\n";
      } else {
        out << "flows " << flows.size() << "\n";
        out << "errors " << errors << "\n";
        out << "attacks " << attacks << "\n";
      }
    };
  } else if (app.got_subcommand(report_cmd)) {
    manifest.command = "report";
    manifest.set("findings", ropt.findings);
    handler = [&] {
      const auto findings = parse_findings(read_file(ropt.findings));
      const ReportTables tables = aggregate_findings(findings);
      auto emit = [&](std::string_view name,
                      const std::vector<std::pair<std::string, std::int64_t>>& rows) {
        if (records) {
          for (const auto& [key, count] : rows)
            out << "table=" << name << " key=" << quote_value(key) << " count=" << count << "\n";
        } else {
          out << "[" << name << "]\n";
          for (const auto& [key, count] : rows) out << key << " " << count << "\n";
        }
      };
      emit("vendor", tables.vendor);
      emit("type", tables.type);
      emit("attack", tables.attack);
      emit("month", tables.month);
    };
  }

  const double started = detail::now_seconds();
  int status = 0;
  try {
    handler();
  } catch (const detail::usage_failure& u) {
    err << "usage error: " << u.message << "\n";
    return 1;
  } catch (const error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    status = 2;
  }
  const std::string line = manifest.render(started, detail::now_seconds(), status == 0);
  if (!manifest_path.empty())
    write_file(manifest_path, line + "\n");
  else
    err << line << "\n";
  return status;
}

}  // namespace exitscope
