#pragma once

#include <string_view>

#include "recall/core_model.hpp"

namespace recall {

/// Which region of (eta0, eta1) the bound ranges over:
/// the box [0, delta]^2, or one of its two triangles.
enum class BoundAssumption { symmetric_box, eta0_le_eta1, eta1_le_eta0 };

std::string_view to_string(BoundAssumption a);
/// Accepts "box", "a", "b" and the enumerator names.
BoundAssumption parse_assumption(std::string_view text);

struct IntervalBound {
  double lower = 0.0;
  double upper = 0.0;
  BoundAssumption assumption = BoundAssumption::symmetric_box;
  double delta = 0.0;

  bool contains(double v, double tol = 0.0) const noexcept {
    return v >= lower - tol && v <= upper + tol;
  }
  bool within(const IntervalBound& outer, double tol = 0.0) const noexcept {
    return lower >= outer.lower - tol && upper <= outer.upper + tol;
  }
};

/// Bounds on Pr(Y=1 | Z=1), Pr(Y=1 | Z=0) and their difference.
///
/// Probability bounds are intersected with [0, 1]. The effect bound is the
/// difference of extremes, which is sharp over the box and conservative over
/// the triangles (the shared ordering couples the corners).
struct CateBounds {
  IntervalBound p1_given_1;
  IntervalBound p1_given_0;
  IntervalBound ate;
};

/// 0 <= eta0, eta1 <= delta.
CateBounds prop1_bounds(const ObservedCells& observed, double delta);
/// 0 <= eta0 <= eta1 <= delta.
CateBounds prop2a_bounds(const ObservedCells& observed, double delta);
/// 0 <= eta1 <= eta0 <= delta.
CateBounds prop2b_bounds(const ObservedCells& observed, double delta);

CateBounds cate_bounds(const ObservedCells& observed, double delta,
                       BoundAssumption assumption);

/// Count-form bound on a stratum effect over the box, evaluated directly on
/// the 2x2 table.
IntervalBound table_bounds(const ContingencyTable& table, double delta);

/// Same under any assumption (the triangles go through the cell form).
IntervalBound table_bounds(const ContingencyTable& table, double delta,
                           BoundAssumption assumption);

}  // namespace recall
