// Analytic exit-selection model: per-circuit probability that one of the
// operator's exit nodes is chosen, the at-least-once probability over c
// circuits, its inverse, and expected observation time per traffic class.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "exitscope/common.hpp"
#include "exitscope/consensus.hpp"
#include "exitscope/weights.hpp"

namespace exitscope {

// Operator-controlled exit nodes, by original bandwidth (Gb/s). The model
// treats them as pure exits competing in the exit-position pool.
struct ExitFleet {
  std::vector<double> bandwidths;
  std::size_t n() const { return bandwidths.size(); }
};

// Weighted bandwidth competing for the exit position.
inline double exit_pool_weight(const NetworkState& st, const WeightSet& w) {
  return st.B_x * w.Wxx + st.B_d * w.Wxd;
}

// Probability a single circuit picks fleet node i: b_i*Wxx over the exit
// pool. b_i = 0 is admitted as a limit probe and yields 0.
inline double single_choice_prob(const ExitFleet& fleet, std::size_t i, const NetworkState& st,
                                 const WeightSet& w) {
  if (i >= fleet.n()) throw precondition_error("fleet index out of range");
  const double b = fleet.bandwidths[i];
  if (!(b >= 0) || !std::isfinite(b))
    throw precondition_error("fleet bandwidth must be finite and non-negative");
  const double pool = exit_pool_weight(st, w);
  if (!(pool > 0)) throw degenerate_class_error("exit");
  const double p = b * w.Wxx / pool;
  if (p > 1.0)
    throw precondition_error("fleet node outweighs the entire exit pool; probability undefined");
  return p;
}

namespace detail {

// log of the none-chosen probability, as a sum of log1p terms; -inf when some
// node is picked with certainty. This is the cancellation-safe core shared by
// every consumer (per-circuit probabilities sit near 1e-5 while c reaches
// 1e5, so 1-(1-p)^c must avoid forming 1-p directly).
inline double log_none_chosen(const ExitFleet& fleet, const NetworkState& st, const WeightSet& w) {
  double sum = 0;
  for (std::size_t i = 0; i < fleet.n(); ++i) sum += std::log1p(-single_choice_prob(fleet, i, st, w));
  return sum;
}

inline double pc_from_log_none(double log_none, std::int64_t c) {
  if (c == 0) return 0.0;
  if (log_none == -std::numeric_limits<double>::infinity()) return 1.0;
  return -std::expm1(double(c) * log_none);
}

}  // namespace detail

// Probability that a single circuit avoids every fleet node.
inline double none_chosen_prob(const ExitFleet& fleet, const NetworkState& st, const WeightSet& w) {
  double prod = 1.0;
  for (std::size_t i = 0; i < fleet.n(); ++i) prod *= 1.0 - single_choice_prob(fleet, i, st, w);
  return prod;
}

// Probability that at least one of c independent circuits exits through the
// fleet. Monotone non-decreasing in c and in every bandwidth; 0 at c = 0.
inline double at_least_once_prob(const ExitFleet& fleet, const NetworkState& st, const WeightSet& w,
                                 std::int64_t c) {
  if (c < 0) throw precondition_error("circuit count must be >= 0");
  return detail::pc_from_log_none(detail::log_none_chosen(fleet, st, w), c);
}

// Smallest circuit count whose at-least-once probability reaches target.
// Closed form ceil(log(1-target)/log(none_chosen)) seeds the answer; the
// result is then nudged so both prob(c) >= target and prob(c-1) < target
// hold under the same double arithmetic as at_least_once_prob.
inline std::int64_t circuits_for_target(const ExitFleet& fleet, const NetworkState& st,
                                        const WeightSet& w, double target) {
  if (!(target >= 0) || target >= 1.0) throw precondition_error("target must lie in [0,1)");
  if (target == 0) return 0;
  const double log_none = detail::log_none_chosen(fleet, st, w);
  if (log_none == 0.0) throw unreachable_target_error();
  if (log_none == -std::numeric_limits<double>::infinity()) return 1;
  double raw = std::log1p(-target) / log_none;  // both negative -> positive
  std::int64_t c = raw <= 0 ? 0 : std::int64_t(std::ceil(raw));
  while (detail::pc_from_log_none(log_none, c) < target) ++c;
  while (c > 0 && detail::pc_from_log_none(log_none, c - 1) >= target) --c;
  return c;
}

// Distinct malicious-traffic classes: rates[j] is class j's circuit-creation
// rate (circuits/second), g the circuit count treated as saturating.
struct TrafficClassModel {
  std::vector<double> rates;
  std::int64_t g = 1;
  std::size_t a() const { return rates.size(); }
};

struct ObservationEstimate {
  double Q = 0;  // max over classes: the wait until the slowest class shows
  std::vector<double> per_class;
};

inline ObservationEstimate estimate_observation_time(const TrafficClassModel& model) {
  if (model.rates.empty()) throw precondition_error("model needs at least one traffic class");
  if (model.g < 1) throw precondition_error("saturation circuit count must be >= 1");
  ObservationEstimate est;
  est.per_class.reserve(model.rates.size());
  for (double rate : model.rates) {
    if (!(rate > 0)) throw precondition_error("every class rate must be > 0");
    est.per_class.push_back(double(model.g) / rate);
  }
  est.Q = *std::max_element(est.per_class.begin(), est.per_class.end());
  return est;
}

}  // namespace exitscope
