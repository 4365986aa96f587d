// Greedy budget-constrained exit deployment: walk option tiers by cost per
// bandwidth, buying one instance at a time until the desired at-least-once
// probability or the budget is reached.
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "exitscope/common.hpp"
#include "exitscope/consensus.hpp"
#include "exitscope/selection.hpp"
#include "exitscope/weights.hpp"

namespace exitscope {

struct NodeOption {
  std::string label;
  double bandwidth = 0;  // Gb/s per instance, > 0
  double cost = 0;       // currency units per month, > 0

  bool operator==(const NodeOption&) const = default;
};

struct Placement {
  NodeOption option;
  std::int64_t count = 0;

  bool operator==(const Placement&) const = default;
};

struct DeploymentPlan {
  std::vector<Placement> placements;  // purchase order, zero counts omitted
  double total_cost = 0;
  double total_bandwidth = 0;
  double achieved_pc = 0;
  std::int64_t circuits_assumed = 0;
};

namespace detail {

inline void validate_options(const std::vector<NodeOption>& options) {
  for (const NodeOption& o : options) {
    if (!(o.bandwidth > 0) || !std::isfinite(o.bandwidth))
      throw precondition_error("option '" + o.label + "': bandwidth must be > 0");
    if (!(o.cost > 0) || !std::isfinite(o.cost))
      throw precondition_error("option '" + o.label + "': cost must be > 0");
  }
}

}  // namespace detail

// Ascending cost per bandwidth; ties break toward lower cost, then label.
inline std::vector<NodeOption> sort_options(std::vector<NodeOption> options) {
  detail::validate_options(options);
  std::sort(options.begin(), options.end(), [](const NodeOption& a, const NodeOption& b) {
    const double ra = a.cost / a.bandwidth, rb = b.cost / b.bandwidth;
    if (ra != rb) return ra < rb;
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.label < b.label;
  });
  return options;
}

// Walks the sorted tiers. On tier entry the instance cap is recomputed as
// floor(remaining budget / option cost), so money an expensive tier cannot
// spend still buys cheaper tiers later. Each added instance joins the fleet
// and the at-least-once probability is recomputed; the loop stops as soon as
// achieved_pc >= desired_pc or cost >= budget. The plan's own bandwidth is
// not folded back into the network aggregates: the choice probability keeps
// using the pre-existing exit pool, a deliberate modeling simplification
// (a real deployment would perturb the consensus it is planned against).
inline DeploymentPlan plan_deployment(const NetworkState& st, const std::vector<NodeOption>& options,
                                      double desired_pc, double budget, std::int64_t c) {
  if (!(desired_pc >= 0) || desired_pc >= 1.0)
    throw precondition_error("desired probability must lie in [0,1)");
  if (!(budget >= 0) || !std::isfinite(budget)) throw precondition_error("budget must be >= 0");
  if (c < 1) throw precondition_error("circuit count must be >= 1");
  detail::validate_options(options);
  if (options.empty()) {
    if (budget > 0 && desired_pc > 0) throw no_options_error();
    DeploymentPlan empty;
    empty.circuits_assumed = c;
    return empty;
  }

  const WeightSet weights = compute_weights(st).first;
  const std::vector<NodeOption> tiers = sort_options(options);

  DeploymentPlan plan;
  plan.circuits_assumed = c;
  double log_none = 0;  // running sum of log1p(-p_i) over placed instances
  double current_pc = 0;
  bool done = current_pc >= desired_pc;

  for (const NodeOption& opt : tiers) {
    if (done || plan.total_cost >= budget) break;
    const double tier_base_cost = plan.total_cost;
    const double tier_base_bw = plan.total_bandwidth;
    std::int64_t max_node = std::int64_t(std::floor((budget - tier_base_cost) / opt.cost));
    // floor() works on rounded quotients; back off until the purchase
    // provably fits the budget in double arithmetic.
    while (max_node > 0 && tier_base_cost + double(max_node) * opt.cost > budget) --max_node;
    if (max_node <= 0) continue;

    ExitFleet probe{{opt.bandwidth}};
    const double p = single_choice_prob(probe, 0, st, weights);
    Placement placed{opt, 0};
    for (std::int64_t k = 1; k <= max_node; ++k) {
      placed.count = k;
      plan.total_cost = tier_base_cost + double(k) * opt.cost;
      plan.total_bandwidth = tier_base_bw + double(k) * opt.bandwidth;
      log_none += std::log1p(-p);
      current_pc = detail::pc_from_log_none(log_none, c);
      if (current_pc >= desired_pc || plan.total_cost >= budget) {
        done = true;
        break;
      }
    }
    if (placed.count > 0) plan.placements.push_back(placed);
  }

  plan.achieved_pc = current_pc;
  return plan;
}

// Options file: `<label> <bandwidth_gbps> <cost_per_month>` per line, with
// '#' comments and blank lines skipped.
inline std::vector<NodeOption> parse_options(std::string_view text) {
  std::vector<NodeOption> out;
  std::size_t lineno = 0;
  for (std::string_view raw : split_lines(text)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto toks = split_ws(line);
    if (toks.size() != 3)
      throw parse_error("expected 3 fields (label bandwidth cost), got " + std::to_string(toks.size()),
                        lineno);
    NodeOption o;
    o.label = std::string(toks[0]);
    auto bw = parse_double(toks[1]);
    auto cost = parse_double(toks[2]);
    if (!bw || !(*bw > 0)) throw parse_error("invalid bandwidth '" + std::string(toks[1]) + "'", lineno);
    if (!cost || !(*cost > 0)) throw parse_error("invalid cost '" + std::string(toks[2]) + "'", lineno);
    o.bandwidth = *bw;
    o.cost = *cost;
    out.push_back(std::move(o));
  }
  return out;
}

// Human-readable report: one `<label> x<count> cost=<c> bw=<b>` line per
// placement plus a summary line.
inline std::string format_plan(const DeploymentPlan& plan) {
  std::string out;
  for (const Placement& p : plan.placements) {
    out += p.option.label;
    out += " x" + std::to_string(p.count);
    out += " cost=" + format_double(double(p.count) * p.option.cost);
    out += " bw=" + format_double(double(p.count) * p.option.bandwidth);
    out += '\n';
  }
  out += "total cost=" + format_double(plan.total_cost);
  out += " bandwidth=" + format_double(plan.total_bandwidth);
  out += " pc=" + format_fixed(plan.achieved_pc, 6);
  out += " circuits=" + std::to_string(plan.circuits_assumed);
  out += '\n';
  return out;
}

// Machine form: a single flat key=value record.
inline std::string format_plan_record(const DeploymentPlan& plan) {
  std::string placements;
  for (const Placement& p : plan.placements) {
    if (!placements.empty()) placements += ',';
    placements += p.option.label + ':' + std::to_string(p.count);
  }
  std::string out = "placements=" + quote_value(placements);
  out += " total_cost=" + format_double(plan.total_cost);
  out += " total_bandwidth=" + format_double(plan.total_bandwidth);
  out += " achieved_pc=" + format_double(plan.achieved_pc);
  out += " circuits_assumed=" + std::to_string(plan.circuits_assumed);
  out += '\n';
  return out;
}

}  // namespace exitscope
