#include <catch2/catch_amalgamated.hpp>
#include <map>

#include "exitscope/weights.hpp"
#include "testutil.hpp"

using namespace exitscope;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

void check_sum_constraints(const WeightSet& w) {
  CHECK_THAT(w.Wed + w.Wnd + w.Wxd, WithinAbs(1.0, 1e-12));
  CHECK_THAT(w.Wee + w.Wne, WithinAbs(1.0, 1e-12));
  CHECK_THAT(w.Wxx + w.Wnx, WithinAbs(1.0, 1e-12));
}

void check_all_in_range(const WeightSet& w) {
  for (double v : {w.Wee, w.Wed, w.Wnd, w.Wxd, w.Wne, w.Wnx, w.Wxx}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

}  // namespace

TEST_CASE("symmetric network balances every position exactly", "[weights]") {
  // Two equal pure classes at exactly B/3 each sit on the Case 1 boundary;
  // ties resolve to the non-scarce side.
  NetworkState st = testutil::state_of(4.0, 4.0, 2.0, 2.0);
  auto [w, ev] = compute_weights(st);
  CHECK(w.case_label == CaseLabel::Case1);
  CHECK_THAT(w.Wed, WithinAbs(1.0 / 3.0, 1e-15));
  CHECK_THAT(w.Wnd, WithinAbs(1.0 / 3.0, 1e-15));
  CHECK_THAT(w.Wxd, WithinAbs(1.0 / 3.0, 1e-15));
  auto pos = position_bandwidth(st, w);
  CHECK_THAT(pos.entry, WithinRel(st.B / 3.0, 1e-12));
  CHECK_THAT(pos.middle, WithinRel(st.B / 3.0, 1e-12));
  CHECK_THAT(pos.exit, WithinRel(st.B / 3.0, 1e-12));
}

TEST_CASE("reference network lands in Case3a2 with the expected weights", "[weights]") {
  NetworkState st = parse_roster(testutil::slurp("data/reference.roster"));
  auto [w, ev] = compute_weights(st);
  REQUIRE(w.case_label == CaseLabel::Case3a2);
  // Scarce-exit pinning: all exit-capable bandwidth serves the exit position.
  CHECK(w.Wxx == 1.0);
  CHECK(w.Wxd == 1.0);
  CHECK(w.Wnx == 0.0);
  CHECK(w.Wed == 0.0);
  CHECK(w.Wnd == 0.0);
  // Closed form (B_e - B_n) / (2 B_e) evaluated on the class totals.
  const double expected_wne = (st.B_e - st.B_n) / (2.0 * st.B_e);
  CHECK_THAT(w.Wne, WithinAbs(expected_wne, 1e-12));
  CHECK_THAT(w.Wee, WithinAbs(1.0 - expected_wne, 1e-12));
  CHECK(format_fixed(w.Wne, 6) == "0.391567");
  CHECK(format_fixed(w.Wee, 6) == "0.608433");
  check_sum_constraints(w);

  CHECK(ev.predicates.exit_ge_third == false);
  CHECK(ev.predicates.entry_ge_third == true);
  CHECK(ev.predicates.scarce_plus_d_lt_third == true);
  CHECK_THAT(ev.R, WithinAbs(st.B_x, 0.0));
}

TEST_CASE("each case recipe produces its label with valid weights", "[weights]") {
  std::mt19937_64 rng(7);
  for (CaseLabel label : testutil::all_labels()) {
    for (int iter = 0; iter < 120; ++iter) {
      auto s = testutil::sample_for_label(label, rng);
      INFO("label " << to_string(label) << " sample be=" << s.be << " bx=" << s.bx
                    << " bd=" << s.bd << " bn=" << s.bn);
      REQUIRE(testutil::expected_label(s.be, s.bx, s.bd, s.bn) == label);
      NetworkState st = testutil::split_state(s, rng);
      auto [w, ev] = compute_weights(st);
      REQUIRE(w.case_label == label);
      check_sum_constraints(w);
      check_all_in_range(w);
    }
  }
}

TEST_CASE("full three-way balance holds where the mix permits", "[weights]") {
  // Case 1, 2b1 and 2b2 solve the full system: every position gets B/3.
  std::mt19937_64 rng(11);
  for (CaseLabel label : {CaseLabel::Case1, CaseLabel::Case2b1, CaseLabel::Case2b2}) {
    for (int iter = 0; iter < 100; ++iter) {
      auto s = testutil::sample_for_label(label, rng);
      NetworkState st = testutil::split_state(s, rng);
      auto [w, ev] = compute_weights(st);
      REQUIRE(w.case_label == label);
      auto pos = position_bandwidth(st, w);
      CHECK_THAT(pos.entry, WithinRel(st.B / 3.0, 1e-9));
      CHECK_THAT(pos.middle, WithinRel(st.B / 3.0, 1e-9));
      CHECK_THAT(pos.exit, WithinRel(st.B / 3.0, 1e-9));
    }
  }
}

TEST_CASE("exit position reaches B/3 in every full-or-exit-balancing case", "[weights]") {
  // In 2b3 the middle keeps its excess, but the exit side is still balanced:
  // Wxx*B_x + Wxd*B_d == B/3 whenever the state solves the exit equation.
  std::mt19937_64 rng(13);
  for (CaseLabel label :
       {CaseLabel::Case1, CaseLabel::Case2b1, CaseLabel::Case2b2, CaseLabel::Case2b3}) {
    for (int iter = 0; iter < 100; ++iter) {
      auto s = testutil::sample_for_label(label, rng);
      NetworkState st = testutil::split_state(s, rng);
      auto [w, ev] = compute_weights(st);
      REQUIRE(w.case_label == label);
      CHECK_THAT(w.Wxx * st.B_x + w.Wxd * st.B_d, WithinRel(st.B / 3.0, 1e-9));
    }
  }
}

TEST_CASE("case 2a sends EE entirely to the smaller pure class", "[weights]") {
  // Exit smaller: EE reinforces exit.
  NetworkState st = testutil::state_of(1.0, 0.4, 0.3, 4.0);
  auto [w, ev] = compute_weights(st);
  REQUIRE(w.case_label == CaseLabel::Case2a);
  CHECK(ev.predicates.r_plus_d_lt_s);
  CHECK(w.Wxd == 1.0);
  CHECK(w.Wed == 0.0);
  CHECK(w.Wee == 1.0);
  CHECK(w.Wxx == 1.0);

  // Entry smaller: mirror.
  NetworkState st2 = testutil::state_of(0.4, 1.0, 0.3, 4.0);
  auto [w2, ev2] = compute_weights(st2);
  REQUIRE(w2.case_label == CaseLabel::Case2a);
  CHECK(w2.Wxd == 0.0);
  CHECK(w2.Wed == 1.0);
}

TEST_CASE("2b1 falls back to 2b2 when the direct solve escapes [0,1]", "[weights]") {
  // Middle class bigger than pure entry makes Wnx negative in 2b1.
  NetworkState st = testutil::state_of(1.0, 2.0, 3.0, 2.0);
  auto [w, ev] = compute_weights(st);
  REQUIRE(w.case_label == CaseLabel::Case2b2);
  CHECK(ev.predicates.fallback_2b2);
  CHECK(w.Wee == 1.0);
  CHECK(w.Wxx == 1.0);
  CHECK(w.Wne == 0.0);
  CHECK(w.Wnx == 0.0);
  CHECK_THAT(w.Wxd, WithinAbs((3.0 - 4.0 + 1.0 + 2.0) / 9.0, 1e-15));
  CHECK_THAT(w.Wnd, WithinAbs((3.0 - 4.0 + 1.0 + 2.0) / 9.0, 1e-15));
  CHECK_THAT(w.Wed, WithinAbs(1.0 - 2.0 * w.Wxd, 1e-15));
  check_all_in_range(w);

  // A state the direct solve handles stays 2b1 and reports no fallback.
  NetworkState ok = testutil::state_of(1.0, 1.0, 1.0, 1.0);
  auto [w2, ev2] = compute_weights(ok);
  REQUIRE(w2.case_label == CaseLabel::Case2b1);
  CHECK_FALSE(ev2.predicates.fallback_2b2);
  CHECK(w2.Wxx == 1.0);
  CHECK(w2.Wnx == 0.0);
  CHECK_THAT(w2.Wxd, WithinAbs(1.0 / 3.0, 1e-15));
}

TEST_CASE("2b3 keeps scarce middle intact; weights may leave [0,1]", "[weights]") {
  // A huge middle class with a tiny EE class drives Wxd above 1: the closed
  // form has no in-range solution there. The label and the exit-side balance
  // still hold; downstream range consumers must guard against this shape.
  NetworkState st = testutil::state_of(0.5, 0.5, 0.1, 10.0);
  auto [w, ev] = compute_weights(st);
  REQUIRE(w.case_label == CaseLabel::Case2b3);
  CHECK(w.Wne == 0.0);
  CHECK(w.Wnx == 0.0);
  CHECK(w.Wnd == 0.0);
  CHECK(w.Wxd > 1.0);  // documents the out-of-range behavior
  CHECK_THAT(w.Wxx * st.B_x + w.Wxd * st.B_d, WithinRel(st.B / 3.0, 1e-12));
  CHECK_THAT(w.Wed + w.Wnd + w.Wxd, WithinAbs(1.0, 1e-12));
}

TEST_CASE("3a variants pin the scarce side and split the abundant one", "[weights]") {
  // Entry scarce, exit abundant relative to middle.
  NetworkState st = testutil::state_of(0.5, 9.0, 1.0, 2.0);
  auto [w, ev] = compute_weights(st);
  REQUIRE(w.case_label == CaseLabel::Case3a1);
  CHECK(w.Wee == 1.0);
  CHECK(w.Wed == 1.0);
  CHECK_THAT(w.Wnx, WithinAbs((9.0 - 2.0) / 18.0, 1e-15));
  CHECK_THAT(w.Wxx, WithinAbs(1.0 - (9.0 - 2.0) / 18.0, 1e-15));

  // Exit abundant but smaller than the middle class: nothing shed.
  NetworkState st2 = testutil::state_of(0.5, 9.0, 1.0, 9.5);
  auto [w2, ev2] = compute_weights(st2);
  REQUIRE(w2.case_label == CaseLabel::Case3a1);
  CHECK(w2.Wnx == 0.0);
  CHECK(w2.Wxx == 1.0);
}

TEST_CASE("3b variants rebalance through the EE class", "[weights]") {
  NetworkState st = testutil::state_of(1.5, 9.0, 4.5, 1.0);
  auto [w, ev] = compute_weights(st);
  REQUIRE(w.case_label == CaseLabel::Case3b1);
  CHECK(w.Wee == 1.0);
  CHECK(w.Wne == 0.0);
  CHECK_THAT(w.Wed, WithinAbs((4.5 - 3.0 + 9.0 + 1.0) / 13.5, 1e-15));
  CHECK_THAT(w.Wxx, WithinAbs(10.0 / 18.0, 1e-15));
  CHECK_THAT(w.Wnx, WithinAbs(1.0 - 10.0 / 18.0, 1e-15));
  CHECK_THAT(w.Wnd, WithinAbs((1.0 - w.Wed) / 2.0, 1e-15));
  CHECK(w.Wxd == w.Wnd);
  check_sum_constraints(w);
  check_all_in_range(w);

  // Mirror: exit scarce.
  NetworkState st2 = testutil::state_of(9.0, 1.5, 4.5, 1.0);
  auto [w2, ev2] = compute_weights(st2);
  REQUIRE(w2.case_label == CaseLabel::Case3b2);
  CHECK(w2.Wxx == 1.0);
  CHECK(w2.Wnx == 0.0);
  CHECK_THAT(w2.Wee, WithinAbs(10.0 / 18.0, 1e-15));
  check_sum_constraints(w2);
  check_all_in_range(w2);
}

TEST_CASE("division by an absent class reports which class is degenerate", "[weights]") {
  // Both pure classes scarce, no EE bandwidth, huge middle: lands in 2b3
  // whose form divides by B_d.
  NetworkState st = testutil::state_of(0.5, 0.5, 0.0, 10.0);
  try {
    compute_weights(st);
    FAIL("expected degenerate class error");
  } catch (const error& e) {
    CHECK(e.kind() == "degenerate-class");
    CHECK(std::string(e.what()).find("EE") != std::string::npos);
  }
}

TEST_CASE("boundary ties resolve toward the non-scarce branch", "[weights]") {
  // B_e == B_x == exactly B/3: >= comparison admits Case 1.
  NetworkState st = testutil::state_of(3.0, 3.0, 1.5, 1.5);
  auto [w, ev] = compute_weights(st);
  CHECK(w.case_label == CaseLabel::Case1);
  CHECK(ev.predicates.entry_ge_third);
  CHECK(ev.predicates.exit_ge_third);
}

TEST_CASE("case evaluation reports R, S and the balance target", "[weights]") {
  NetworkState st = testutil::state_of(2.0, 5.0, 1.0, 1.0);
  auto ev = compute_weights(st).second;
  CHECK(ev.R == 2.0);
  CHECK(ev.S == 5.0);
  CHECK_THAT(ev.B_over_3, WithinAbs(3.0, 1e-15));
}

TEST_CASE("label names render for reporting", "[weights]") {
  std::map<std::string, int> seen;
  for (CaseLabel label : testutil::all_labels()) seen[to_string(label)]++;
  CHECK(seen.size() == 9);
  CHECK(seen.count("Case1"));
  CHECK(seen.count("Case2b3"));
  CHECK(seen.count("Case3b2"));
}
