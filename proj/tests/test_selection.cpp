#include <catch2/catch_amalgamated.hpp>

#include "exitscope/selection.hpp"
#include "testutil.hpp"

using namespace exitscope;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct RefSetup {
  NetworkState st;
  WeightSet w;
};

RefSetup reference_setup() {
  RefSetup r;
  r.st = parse_roster(testutil::slurp("data/reference.roster"));
  r.w = compute_weights(r.st).first;
  return r;
}

}  // namespace

TEST_CASE("single-circuit choice probability on the reference network", "[selection]") {
  auto [st, w] = reference_setup();
  // Case3a2: Wxx = Wxd = 1, so the pool is simply B_x + B_d.
  const double pool = exit_pool_weight(st, w);
  CHECK_THAT(pool, WithinRel(st.B_x + st.B_d, 1e-15));
  CHECK_THAT(pool, WithinAbs(243.0838, 1e-9));

  ExitFleet fleet{{0.1}};
  const double p = single_choice_prob(fleet, 0, st, w);
  CHECK_THAT(p, WithinRel(0.1 / 243.0838, 1e-12));
  CHECK_THAT(p, WithinAbs(4.1138e-4, 1e-8));

  ExitFleet small{{0.01}};
  CHECK_THAT(single_choice_prob(small, 0, st, w), WithinAbs(4.114e-5, 5e-9));
}

TEST_CASE("at-least-once probability matches the published operating points", "[selection]") {
  auto [st, w] = reference_setup();
  ExitFleet fleet{{0.1}};
  CHECK_THAT(at_least_once_prob(fleet, st, w, 1000), WithinAbs(0.337322, 5e-7));

  ExitFleet small{{0.01}};
  CHECK(at_least_once_prob(small, st, w, 120000) >= 0.99);
  CHECK_THAT(at_least_once_prob(small, st, w, 120000), WithinAbs(0.99282, 5e-5));
}

TEST_CASE("probability basics: zero circuits, zero bandwidth, monotonicity", "[selection]") {
  auto [st, w] = reference_setup();
  ExitFleet fleet{{0.1, 0.05}};
  CHECK(at_least_once_prob(fleet, st, w, 0) == 0.0);

  ExitFleet zero{{0.0}};
  CHECK(single_choice_prob(zero, 0, st, w) == 0.0);
  CHECK(at_least_once_prob(zero, st, w, 100000) == 0.0);

  double prev = 0.0;
  for (std::int64_t c : {1, 10, 100, 1000, 10000, 100000}) {
    double pc = at_least_once_prob(fleet, st, w, c);
    CHECK(pc >= prev);
    CHECK(pc > 0.0);
    CHECK(pc <= 1.0);  // rounds to exactly 1.0 once 1-pc dips under 1 ulp
    prev = pc;
  }

  // More bandwidth never hurts.
  double prev_b = 0.0;
  for (double b : {0.01, 0.05, 0.1, 0.5, 1.0, 5.0}) {
    double pc = at_least_once_prob(ExitFleet{{b}}, st, w, 1000);
    CHECK(pc > prev_b);
    prev_b = pc;
  }
}

TEST_CASE("log-space and direct-product forms agree", "[selection]") {
  auto [st, w] = reference_setup();
  std::mt19937_64 rng(99);
  for (int iter = 0; iter < 50; ++iter) {
    ExitFleet fleet;
    std::size_t n = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i)
      fleet.bandwidths.push_back(std::uniform_real_distribution<double>(0.0, 5.0)(rng));
    const std::int64_t c = std::int64_t(1 + rng() % 2000);
    const double none = none_chosen_prob(fleet, st, w);
    const double direct = 1.0 - std::pow(none, double(c));
    CHECK_THAT(at_least_once_prob(fleet, st, w, c), WithinAbs(direct, 1e-9));
  }
}

TEST_CASE("fleet validation errors", "[selection]") {
  auto [st, w] = reference_setup();
  ExitFleet fleet{{0.1}};
  REQUIRE_ERROR_KIND(single_choice_prob(fleet, 5, st, w), "precondition");  // index
  ExitFleet neg{{-1.0}};
  REQUIRE_ERROR_KIND(single_choice_prob(neg, 0, st, w), "precondition");
  REQUIRE_ERROR_KIND(at_least_once_prob(fleet, st, w, -1), "precondition");

  // A fleet node bigger than the whole pool would imply p > 1.
  ExitFleet huge{{1e6}};
  REQUIRE_ERROR_KIND(single_choice_prob(huge, 0, st, w), "precondition");

  // A network with no exit-position bandwidth cannot host the model.
  NetworkState guards_only = testutil::state_of(5.0, 0.0, 0.0, 3.0);
  auto w2 = compute_weights(guards_only).first;
  REQUIRE_ERROR_KIND(single_choice_prob(fleet, 0, guards_only, w2), "degenerate-class");
}

TEST_CASE("circuit count inversion brackets the target exactly", "[selection]") {
  auto [st, w] = reference_setup();
  std::mt19937_64 rng(123);
  for (int iter = 0; iter < 200; ++iter) {
    ExitFleet fleet{{std::uniform_real_distribution<double>(0.005, 2.0)(rng)}};
    const double target = std::uniform_real_distribution<double>(0.01, 0.999)(rng);
    const std::int64_t c = circuits_for_target(fleet, st, w, target);
    REQUIRE(c >= 1);
    CHECK(at_least_once_prob(fleet, st, w, c) >= target);
    CHECK(at_least_once_prob(fleet, st, w, c - 1) < target);
  }
}

TEST_CASE("circuit count inversion handles the edges", "[selection]") {
  auto [st, w] = reference_setup();
  ExitFleet fleet{{0.1}};
  CHECK(circuits_for_target(fleet, st, w, 0.0) == 0);
  REQUIRE_ERROR_KIND(circuits_for_target(fleet, st, w, 1.0), "precondition");
  REQUIRE_ERROR_KIND(circuits_for_target(fleet, st, w, -0.1), "precondition");

  // Unreachable: the fleet is never chosen.
  ExitFleet zero{{0.0}};
  REQUIRE_ERROR_KIND(circuits_for_target(zero, st, w, 0.5), "unreachable-target");

  // The documented operating point: ~120k circuits for 99% at 0.01 Gb/s.
  ExitFleet small{{0.01}};
  const std::int64_t c99 = circuits_for_target(small, st, w, 0.99);
  CHECK(at_least_once_prob(small, st, w, c99) >= 0.99);
  CHECK(c99 < 120000);  // 120k already overshoots to ~0.9928
  CHECK(c99 > 100000);
}

TEST_CASE("observation time is driven by the slowest traffic class", "[selection]") {
  TrafficClassModel model;
  model.rates = {4.0, 0.5, 2.0};  // circuits/second per class
  model.g = 100;
  auto est = estimate_observation_time(model);
  REQUIRE(est.per_class.size() == 3);
  CHECK_THAT(est.per_class[0], WithinRel(25.0, 1e-15));
  CHECK_THAT(est.per_class[1], WithinRel(200.0, 1e-15));
  CHECK_THAT(est.per_class[2], WithinRel(50.0, 1e-15));
  CHECK_THAT(est.Q, WithinRel(200.0, 1e-15));

  REQUIRE_ERROR_KIND(estimate_observation_time(TrafficClassModel{}), "precondition");
  TrafficClassModel bad_rate{{1.0, 0.0}, 10};
  REQUIRE_ERROR_KIND(estimate_observation_time(bad_rate), "precondition");
  TrafficClassModel bad_g{{1.0}, 0};
  REQUIRE_ERROR_KIND(estimate_observation_time(bad_g), "precondition");
}

TEST_CASE("pool weight respects class-specific weighting", "[selection]") {
  // A 3b1 state has Wxx < 1 and Wxd < 1: the pool must use both weights, not
  // raw totals.
  NetworkState st = testutil::state_of(1.5, 9.0, 4.5, 1.0);
  auto w = compute_weights(st).first;
  REQUIRE(w.case_label == CaseLabel::Case3b1);
  const double expected = st.B_x * w.Wxx + st.B_d * w.Wxd;
  CHECK_THAT(exit_pool_weight(st, w), WithinRel(expected, 0.0));
  CHECK(exit_pool_weight(st, w) < st.B_x + st.B_d);
}
