// Monte Carlo circuit oracle: samples the exit hop under the weighted
// bandwidth distribution and measures how often a trial of c circuits hits
// the operator fleet, as an empirical check on the analytic model.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "exitscope/common.hpp"
#include "exitscope/consensus.hpp"
#include "exitscope/selection.hpp"
#include "exitscope/weights.hpp"

namespace exitscope {

struct SimConfig {
  std::int64_t trials = 0;
  std::int64_t circuits_per_trial = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> fleet_ids;  // must name nodes present in the state
};

struct SimResult {
  std::int64_t hit_trials = 0;
  double empirical_pc = 0;
  double std_err = 0;          // binomial: sqrt(p*(1-p)/trials)
  std::string provenance;      // RNG identity; canonical runs are single-threaded
};

// Uniform in [0,1) from the top 53 bits; spelled out because the standard
// distribution adapters are implementation-defined and would break seed
// reproducibility across library versions.
inline double uniform53(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

inline constexpr const char* kRngProvenance = "mt19937_64/top53/single-thread";

// Prefix-sum table over exit-eligible nodes: pure exits weighted b*Wxx, EE
// nodes b*Wxd. Built once per run; draws are binary searches.
class ExitSampler {
public:
  ExitSampler(const NetworkState& st, const WeightSet& w) : state_(&st) {
    double acc = 0;
    for (std::size_t i = 0; i < st.nodes.size(); ++i) {
      const NodeRecord& n = st.nodes[i];
      double weight = 0;
      switch (classify_node(n)) {
        case NodeClass::exit_only: weight = n.bandwidth * w.Wxx; break;
        case NodeClass::both: weight = n.bandwidth * w.Wxd; break;
        default: break;
      }
      if (weight > 0) {
        acc += weight;
        cumulative_.push_back(acc);
        node_index_.push_back(i);
      }
    }
    if (!(acc > 0)) throw degenerate_class_error("exit");
    total_ = acc;
  }

  std::size_t eligible_count() const { return node_index_.size(); }
  double total_weight() const { return total_; }
  const std::vector<std::size_t>& node_indices() const { return node_index_; }

  // Index into node_indices() of the drawn node.
  std::size_t draw_eligible(std::mt19937_64& rng) const {
    const double x = uniform53(rng) * total_;
    std::size_t lo = 0, hi = cumulative_.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (cumulative_[mid] <= x)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

  const NodeRecord& draw(std::mt19937_64& rng) const {
    return state_->nodes[node_index_[draw_eligible(rng)]];
  }

private:
  const NetworkState* state_;
  std::vector<double> cumulative_;
  std::vector<std::size_t> node_index_;
  double total_ = 0;
};

// One-shot convenience draw; bulk callers should hold an ExitSampler.
inline const NodeRecord& sample_exit(const NetworkState& st, const WeightSet& w,
                                     std::mt19937_64& rng) {
  return ExitSampler(st, w).draw(rng);
}

// Analytic at-least-once probability for fleet nodes that live inside the
// state, each weighted by its own class weight (Wxx or Wxd) — exactly the
// per-draw hit probability of the sampler above. For pure-exit fleets this
// coincides with at_least_once_prob over the nodes' bandwidths.
inline double analytic_pc(const NetworkState& st, const WeightSet& w,
                          const std::vector<std::string>& fleet_ids, std::int64_t c) {
  if (c < 0) throw precondition_error("circuit count must be >= 0");
  std::unordered_set<std::string_view> wanted(fleet_ids.begin(), fleet_ids.end());
  const double pool = exit_pool_weight(st, w);
  if (!(pool > 0)) throw degenerate_class_error("exit");
  double log_none = 0;
  std::size_t found = 0;
  for (const NodeRecord& n : st.nodes) {
    if (!wanted.count(n.id)) continue;
    ++found;
    double weight = 0;
    switch (classify_node(n)) {
      case NodeClass::exit_only: weight = n.bandwidth * w.Wxx; break;
      case NodeClass::both: weight = n.bandwidth * w.Wxd; break;
      default: break;
    }
    log_none += std::log1p(-weight / pool);
  }
  if (found != wanted.size()) throw precondition_error("fleet id not present in the state");
  return detail::pc_from_log_none(log_none, c);
}

// Runs config.trials independent trials of circuits_per_trial exit draws and
// counts trials with at least one fleet hit. A trial stops drawing at its
// first hit; the remaining draws cannot change the trial's outcome and every
// draw consumes fresh RNG output, so results stay deterministic per seed.
inline SimResult run(const NetworkState& st, const WeightSet& w, const SimConfig& config) {
  if (config.trials < 1) throw precondition_error("trials must be >= 1");
  if (config.circuits_per_trial < 1) throw precondition_error("circuits per trial must be >= 1");
  std::unordered_set<std::string> node_ids;
  node_ids.reserve(st.nodes.size());
  for (const NodeRecord& n : st.nodes) node_ids.insert(n.id);
  for (const std::string& id : config.fleet_ids)
    if (!node_ids.count(id)) throw precondition_error("fleet id '" + id + "' not present in the state");

  ExitSampler sampler(st, w);
  std::unordered_set<std::string_view> fleet(config.fleet_ids.begin(), config.fleet_ids.end());
  std::vector<char> is_fleet(sampler.eligible_count(), 0);
  for (std::size_t k = 0; k < sampler.eligible_count(); ++k)
    if (fleet.count(st.nodes[sampler.node_indices()[k]].id)) is_fleet[k] = 1;

  std::mt19937_64 rng(config.seed);
  std::int64_t hits = 0;
  for (std::int64_t t = 0; t < config.trials; ++t) {
    for (std::int64_t j = 0; j < config.circuits_per_trial; ++j) {
      if (is_fleet[sampler.draw_eligible(rng)]) {
        ++hits;
        break;
      }
    }
  }

  SimResult res;
  res.hit_trials = hits;
  res.empirical_pc = double(hits) / double(config.trials);
  res.std_err = std::sqrt(res.empirical_pc * (1.0 - res.empirical_pc) / double(config.trials));
  res.provenance = kRngProvenance;
  return res;
}

// Scenario file: flat `key value` lines — roster <path>, fleet_ids
// <comma-joined ids>, circuits <n>, trials <n>, seed <u64>. The roster path
// is resolved against base_dir (normally the scenario file's directory).
struct Scenario {
  std::string roster_path;
  SimConfig config;
};

inline Scenario parse_scenario(std::string_view text, std::string_view base_dir) {
  Scenario sc;
  bool have_roster = false, have_fleet = false, have_c = false, have_trials = false, have_seed = false;
  std::size_t lineno = 0;
  for (std::string_view raw : split_lines(text)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto toks = split_ws(line);
    if (toks.size() != 2) throw parse_error("expected `key value`", lineno);
    std::string_view key = toks[0], value = toks[1];
    if (key == "roster") {
      std::string path(value);
      if (!path.empty() && path.front() != '/' && !base_dir.empty())
        path = std::string(base_dir) + "/" + path;
      sc.roster_path = path;
      have_roster = true;
    } else if (key == "fleet_ids") {
      std::size_t pos = 0;
      std::string v(value);
      while (pos <= v.size()) {
        std::size_t comma = v.find(',', pos);
        std::string id = comma == std::string::npos ? v.substr(pos) : v.substr(pos, comma - pos);
        if (id.empty()) throw parse_error("empty fleet id", lineno);
        sc.config.fleet_ids.push_back(std::move(id));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      have_fleet = true;
    } else if (key == "circuits") {
      auto v = parse_int64(value);
      if (!v || *v < 1) throw parse_error("invalid circuits value", lineno);
      sc.config.circuits_per_trial = *v;
      have_c = true;
    } else if (key == "trials") {
      auto v = parse_int64(value);
      if (!v || *v < 1) throw parse_error("invalid trials value", lineno);
      sc.config.trials = *v;
      have_trials = true;
    } else if (key == "seed") {
      auto v = parse_uint64(value);
      if (!v) throw parse_error("invalid seed value", lineno);
      sc.config.seed = *v;
      have_seed = true;
    } else {
      throw parse_error("unknown scenario key '" + std::string(key) + "'", lineno);
    }
  }
  if (!have_roster) throw parse_error("scenario missing 'roster'");
  if (!have_fleet) throw parse_error("scenario missing 'fleet_ids'");
  if (!have_c) throw parse_error("scenario missing 'circuits'");
  if (!have_trials) throw parse_error("scenario missing 'trials'");
  if (!have_seed) throw parse_error("scenario missing 'seed'");
  return sc;
}

}  // namespace exitscope
