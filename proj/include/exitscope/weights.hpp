// The weighted-bandwidth position weights: seven weights chosen so entry,
// middle, and exit capacity are balanced as far as the class mix allows.
// Nine closed-form cases cover every class-scarcity combination.
#pragma once

#include <algorithm>
#include <string>
#include <utility>

#include "exitscope/common.hpp"
#include "exitscope/consensus.hpp"

namespace exitscope {

enum class CaseLabel {
  Case1,    // neither pure class scarce
  Case2a,   // both scarce, EE capacity too small to help the larger one
  Case2b1,  // both scarce, middle not scarce enough to pin, direct solve
  Case2b2,  // both scarce, 2b1 left the range, re-solve with Wne=Wnx=0
  Case2b3,  // both scarce and middle scarce too: middle keeps all its bandwidth
  Case3a1,  // entry scarce, entry+EE still under a third: pin entry side
  Case3a2,  // exit scarce, exit+EE still under a third: pin exit side
  Case3b1,  // entry scarce, EE can rebalance
  Case3b2,  // exit scarce, EE can rebalance
};

inline const char* to_string(CaseLabel c) {
  switch (c) {
    case CaseLabel::Case1: return "Case1";
    case CaseLabel::Case2a: return "Case2a";
    case CaseLabel::Case2b1: return "Case2b1";
    case CaseLabel::Case2b2: return "Case2b2";
    case CaseLabel::Case2b3: return "Case2b3";
    case CaseLabel::Case3a1: return "Case3a1";
    case CaseLabel::Case3a2: return "Case3a2";
    case CaseLabel::Case3b1: return "Case3b1";
    case CaseLabel::Case3b2: return "Case3b2";
  }
  return "?";
}

// Naming: W<position><class> with positions e=entry, n=middle-capable, x=exit
// and classes e=pure entry, d=dual-flagged (EE), x=pure exit. Wed+Wnd+Wxd,
// Wee+Wne, and Wxx+Wnx each sum to 1.
struct WeightSet {
  double Wee = 0, Wed = 0, Wnd = 0, Wxd = 0, Wne = 0, Wnx = 0, Wxx = 0;
  CaseLabel case_label = CaseLabel::Case1;

  bool operator==(const WeightSet&) const = default;
};

struct CasePredicates {
  bool entry_ge_third = false;  // B_e >= B/3
  bool exit_ge_third = false;   // B_x >= B/3
  bool r_plus_d_lt_s = false;   // R + B_d < S (evaluated in Case 2 only)
  // In Case 3 the scarce class is the smaller of {B_e, B_x}, i.e. R; this
  // records scarce + B_d < B/3 (evaluated in Case 3 only).
  bool scarce_plus_d_lt_third = false;
  bool middle_le_third = false;  // B_n <= B/3
  bool fallback_2b2 = false;     // 2b1 produced a weight outside [0,1]
  bool entry_lt_exit = false;    // B_e < B_x
};

struct CaseEvaluation {
  double R = 0;         // min(B_e, B_x): the more scarce pure class
  double S = 0;         // max(B_e, B_x): the less scarce pure class
  double B_over_3 = 0;  // balance target per position
  CasePredicates predicates;
};

namespace detail {

inline void require_class(double denom, const char* node_class) {
  if (!(denom > 0)) throw degenerate_class_error(node_class);
}

inline bool weight_in_range(double w) { return w >= 0.0 && w <= 1.0; }

inline bool all_in_range(const WeightSet& w) {
  return weight_in_range(w.Wee) && weight_in_range(w.Wed) && weight_in_range(w.Wnd) &&
         weight_in_range(w.Wxd) && weight_in_range(w.Wne) && weight_in_range(w.Wnx) &&
         weight_in_range(w.Wxx);
}

}  // namespace detail

// Chooses the matching case and evaluates its closed forms. Branch order:
// Case 1 (both pure classes >= B/3), Case 2 (both < B/3), else Case 3.
// Within Case 2b, a scarce middle (B_n > B/3) goes straight to 2b3; otherwise
// 2b1 is evaluated and falls back to 2b2 if any weight leaves [0,1]. The
// out-of-range test is strict (< 0 or > 1, no epsilon): the forms are exact
// rational expressions, and tolerance would mask case mislabeling. Boundary
// ties (a class exactly B/3) resolve to the non-scarce side.
inline std::pair<WeightSet, CaseEvaluation> compute_weights(const NetworkState& st) {
  if (!(st.B > 0)) throw empty_network_error();
  const double B_e = st.B_e, B_x = st.B_x, B_d = st.B_d, B_n = st.B_n, B = st.B;
  const double third = B / 3.0;

  CaseEvaluation ev;
  ev.R = std::min(B_e, B_x);
  ev.S = std::max(B_e, B_x);
  ev.B_over_3 = third;
  ev.predicates.entry_ge_third = B_e >= third;
  ev.predicates.exit_ge_third = B_x >= third;
  ev.predicates.middle_le_third = B_n <= third;
  ev.predicates.entry_lt_exit = B_e < B_x;

  WeightSet w;

  if (ev.predicates.entry_ge_third && ev.predicates.exit_ge_third) {
    // Case 1: EE bandwidth splits evenly; surplus pure capacity is shifted to
    // the middle position.
    detail::require_class(B_x, "exit");
    detail::require_class(B_e, "entry");
    w.case_label = CaseLabel::Case1;
    w.Wed = w.Wnd = w.Wxd = 1.0 / 3.0;
    w.Wxx = (B_e + B_n + B_x) / (3.0 * B_x);
    w.Wnx = 1.0 - w.Wxx;
    w.Wne = (2.0 * B_e - B_x - B_n) / (3.0 * B_e);
    w.Wee = 1.0 - w.Wne;
  } else if (!ev.predicates.entry_ge_third && !ev.predicates.exit_ge_third) {
    // Case 2: both pure classes scarce.
    const double R = ev.R, S = ev.S;
    ev.predicates.r_plus_d_lt_s = R + B_d < S;
    if (ev.predicates.r_plus_d_lt_s) {
      // Case 2a: even all of EE cannot lift the smaller class to the larger
      // one, so EE serves whichever pure class is smaller, exclusively.
      w.case_label = CaseLabel::Case2a;
      w.Wee = w.Wxx = 1.0;
      w.Wne = w.Wnx = w.Wnd = 0.0;
      if (B_x < B_e) {
        w.Wxd = 1.0;
        w.Wed = 0.0;
      } else {
        w.Wxd = 0.0;
        w.Wed = 1.0;
      }
    } else if (!ev.predicates.middle_le_third) {
      // Case 2b3: middle is scarce too; it keeps everything it has, and EE
      // splits between entry and exit only.
      detail::require_class(B_d, "EE");
      w.case_label = CaseLabel::Case2b3;
      w.Wee = w.Wxx = 1.0;
      w.Wne = w.Wnx = w.Wnd = 0.0;
      w.Wxd = (B_d - 2.0 * B_x + B_e + B_n) / (3.0 * B_d);
      w.Wed = 1.0 - w.Wxd;
    } else {
      // Case 2b1: solve the full balance system directly.
      detail::require_class(B_d, "EE");
      detail::require_class(B_x, "exit");
      w.case_label = CaseLabel::Case2b1;
      w.Wee = 1.0;
      w.Wne = 0.0;
      w.Wxx = (B_x - B_e + B_n) / B_x;
      w.Wnx = (B_e - B_n) / B_x;
      w.Wxd = (B_d - 2.0 * B_x + 4.0 * B_e - 2.0 * B_n) / (3.0 * B_d);
      w.Wnd = (1.0 - w.Wxd) / 2.0;
      w.Wed = w.Wnd;
      if (!detail::all_in_range(w)) {
        // Case 2b2: the direct solve escaped [0,1]; re-solve with the middle
        // position fed by EE only.
        ev.predicates.fallback_2b2 = true;
        w = WeightSet{};
        w.case_label = CaseLabel::Case2b2;
        w.Wee = w.Wxx = 1.0;
        w.Wne = w.Wnx = 0.0;
        w.Wxd = (B_d - 2.0 * B_x + B_e + B_n) / (3.0 * B_d);
        w.Wnd = (B_d - 2.0 * B_n + B_e + B_x) / (3.0 * B_d);
        w.Wed = 1.0 - w.Wxd - w.Wnd;
      }
    }
  } else {
    // Case 3: exactly one pure class is scarce — the smaller one, since the
    // other sits at or above B/3. R is that scarce bandwidth.
    const double scarce = ev.R;
    ev.predicates.scarce_plus_d_lt_third = scarce + B_d < third;
    if (ev.predicates.scarce_plus_d_lt_third) {
      if (ev.predicates.entry_lt_exit) {
        // Case 3a1: entry scarce; it keeps all its bandwidth and takes all of
        // EE. Exit sheds to the middle only if it out-sizes the middle class.
        w.case_label = CaseLabel::Case3a1;
        w.Wee = w.Wed = 1.0;
        w.Wnd = w.Wxd = w.Wne = 0.0;
        if (B_x < B_n) {
          w.Wnx = 0.0;
        } else {
          detail::require_class(B_x, "exit");
          w.Wnx = (B_x - B_n) / (2.0 * B_x);
        }
        w.Wxx = 1.0 - w.Wnx;
      } else {
        // Case 3a2: exit scarce; mirror of 3a1.
        w.case_label = CaseLabel::Case3a2;
        w.Wxx = w.Wxd = 1.0;
        w.Wnd = w.Wed = w.Wnx = 0.0;
        if (B_e < B_n) {
          w.Wne = 0.0;
        } else {
          detail::require_class(B_e, "entry");
          w.Wne = (B_e - B_n) / (2.0 * B_e);
        }
        w.Wee = 1.0 - w.Wne;
      }
    } else {
      if (ev.predicates.entry_lt_exit) {
        // Case 3b1: entry scarce, but entry+EE reaches B/3; EE tops entry up
        // and the remainder splits between middle and exit duties.
        detail::require_class(B_d, "EE");
        detail::require_class(B_x, "exit");
        w.case_label = CaseLabel::Case3b1;
        w.Wee = 1.0;
        w.Wne = 0.0;
        w.Wed = (B_d - 2.0 * B_e + B_x + B_n) / (3.0 * B_d);
        w.Wxx = (B_x + B_n) / (2.0 * B_x);
        w.Wnx = 1.0 - w.Wxx;
        w.Wnd = (1.0 - w.Wed) / 2.0;
        w.Wxd = w.Wnd;
      } else {
        // Case 3b2: exit scarce; mirror of 3b1.
        detail::require_class(B_d, "EE");
        detail::require_class(B_e, "entry");
        w.case_label = CaseLabel::Case3b2;
        w.Wxx = 1.0;
        w.Wnx = 0.0;
        w.Wxd = (B_d - 2.0 * B_x + B_e + B_n) / (3.0 * B_d);
        w.Wee = (B_e + B_n) / (2.0 * B_e);
        w.Wne = 1.0 - w.Wee;
        w.Wnd = (1.0 - w.Wxd) / 2.0;
        w.Wed = w.Wnd;
      }
    }
  }

  return {w, ev};
}

// Weighted bandwidth serving each position under a weight set; the balance
// the algorithm aims for is each position at B/3 where the mix permits.
struct PositionBandwidth {
  double entry = 0, middle = 0, exit = 0;
};

inline PositionBandwidth position_bandwidth(const NetworkState& st, const WeightSet& w) {
  PositionBandwidth p;
  p.entry = w.Wee * st.B_e + w.Wed * st.B_d;
  p.middle = st.B_n + w.Wne * st.B_e + w.Wnd * st.B_d + w.Wnx * st.B_x;
  p.exit = w.Wxx * st.B_x + w.Wxd * st.B_d;
  return p;
}

}  // namespace exitscope
