#include "recall/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "recall/errors.hpp"

namespace recall {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_delta(double delta) {
  if (!std::isfinite(delta) || delta < 0.0 || delta >= 1.0) {
    throw ConfigError("delta must lie in [0, 1); got " + std::to_string(delta));
  }
}

/// A denominator of the form `base - r * slope` with r = delta / (1 - delta).
struct Denominator {
  double base;
  double slope;

  double at(double r) const { return base - r * slope; }
  /// Supremum of r keeping the denominator positive, as a delta.
  double max_delta() const {
    if (base <= 0.0) return 0.0;
    if (slope <= 0.0) return 1.0;
    const double r = base / slope;
    return r / (1.0 + r);
  }
};

void require_positive(std::initializer_list<Denominator> dens, double r,
                      const char* which) {
  double max_delta = 1.0;
  bool bad = false;
  for (const auto& d : dens) {
    max_delta = std::min(max_delta, d.max_delta());
    if (!(d.at(r) > 0.0)) bad = true;
  }
  if (bad) {
    throw DegenerateBound(std::string(which) +
                              " denominator is not positive; largest "
                              "admissible delta is " +
                              std::to_string(max_delta),
                          max_delta);
  }
}

struct Pieces {
  ObservedCells o;
  double delta;
  double r;
};

Pieces prepare(const ObservedCells& observed, double delta) {
  check_delta(delta);
  const auto o = validated(observed);
  if (!(o.p11 + o.p01 > 0.0)) {
    throw DegenerateBound("no reported-exposed mass", 0.0);
  }
  if (!(o.p10 + o.p00 > 0.0)) {
    throw DegenerateBound("no reported-unexposed mass", 0.0);
  }
  return {o, delta, delta / (1.0 - delta)};
}

IntervalBound interval(double lo, double hi, BoundAssumption a, double delta) {
  return {lo, hi, a, delta};
}

CateBounds assemble(double l11, double u11, double l10, double u10,
                    BoundAssumption a, double delta) {
  CateBounds b;
  b.p1_given_1 = interval(clamp01(l11), clamp01(u11), a, delta);
  b.p1_given_0 = interval(clamp01(l10), clamp01(u10), a, delta);
  b.ate = interval(b.p1_given_1.lower - b.p1_given_0.upper,
                   b.p1_given_1.upper - b.p1_given_0.lower, a, delta);
  return b;
}

}  // namespace

std::string_view to_string(BoundAssumption a) {
  switch (a) {
    case BoundAssumption::symmetric_box: return "box";
    case BoundAssumption::eta0_le_eta1: return "a";
    case BoundAssumption::eta1_le_eta0: return "b";
  }
  return "box";
}

BoundAssumption parse_assumption(std::string_view text) {
  if (text == "box" || text == "symmetric_box") {
    return BoundAssumption::symmetric_box;
  }
  if (text == "a" || text == "eta0_le_eta1") return BoundAssumption::eta0_le_eta1;
  if (text == "b" || text == "eta1_le_eta0") return BoundAssumption::eta1_le_eta0;
  throw ConfigError("unknown bound assumption '" + std::string(text) +
                    "' (expected box, a or b)");
}

CateBounds prop1_bounds(const ObservedCells& observed, double delta) {
  const auto [o, d, r] = prepare(observed, delta);
  const Denominator lower10{o.p10 + o.p00, o.p11};
  const Denominator upper10{o.p10 + o.p00, o.p01};
  require_positive({lower10, upper10}, r, "unexposed-arm");

  const double l11 = o.p11 / (o.p11 + o.p01 / (1.0 - d));
  const double u11 = o.p11 / (o.p11 + (1.0 - d) * o.p01);
  const double l10 = (o.p10 - r * o.p11) / lower10.at(r);
  const double u10 = o.p10 / upper10.at(r);
  return assemble(l11, u11, l10, u10, BoundAssumption::symmetric_box, d);
}

CateBounds prop2a_bounds(const ObservedCells& observed, double delta) {
  const auto [o, d, r] = prepare(observed, delta);
  const Denominator lower10{o.p10 + o.p00, o.p11};
  const Denominator diagonal{o.p10 + o.p00, o.p01 + o.p11};
  require_positive({lower10, diagonal}, r, "unexposed-arm");

  const double l11 = o.p1_given_1();
  const double u11 = o.p11 / (o.p11 + o.p01 * (1.0 - d));
  const double l10 = (o.p10 - r * o.p11) / lower10.at(r);
  const double u10 =
      std::max(o.p1_given_0(), (o.p10 - r * o.p11) / diagonal.at(r));
  return assemble(l11, u11, l10, u10, BoundAssumption::eta0_le_eta1, d);
}

CateBounds prop2b_bounds(const ObservedCells& observed, double delta) {
  const auto [o, d, r] = prepare(observed, delta);
  const Denominator upper10{o.p10 + o.p00, o.p01};
  const Denominator diagonal{o.p10 + o.p00, o.p01 + o.p11};
  require_positive({upper10, diagonal}, r, "unexposed-arm");

  const double l11 = o.p11 / (o.p11 + o.p01 / (1.0 - d));
  const double u11 = o.p1_given_1();
  const double l10 =
      std::min(o.p1_given_0(), (o.p10 - r * o.p11) / diagonal.at(r));
  const double u10 = o.p10 / upper10.at(r);
  return assemble(l11, u11, l10, u10, BoundAssumption::eta1_le_eta0, d);
}

CateBounds cate_bounds(const ObservedCells& observed, double delta,
                       BoundAssumption assumption) {
  switch (assumption) {
    case BoundAssumption::symmetric_box: return prop1_bounds(observed, delta);
    case BoundAssumption::eta0_le_eta1: return prop2a_bounds(observed, delta);
    case BoundAssumption::eta1_le_eta0: return prop2b_bounds(observed, delta);
  }
  return prop1_bounds(observed, delta);
}

IntervalBound table_bounds(const ContingencyTable& table, double delta) {
  check_delta(delta);
  const double a = static_cast<double>(table.a_star);
  const double b = static_cast<double>(table.b_star);
  const double c = static_cast<double>(table.c_star);
  const double d = static_cast<double>(table.d_star);
  if (!(a + b > 0.0)) throw DegenerateBound("stratum has no reported exposed", 0.0);
  if (!(c + d > 0.0)) throw DegenerateBound("stratum has no reported unexposed", 0.0);

  const double r = delta / (1.0 - delta);
  const Denominator shrink_by_b{c + d, b};
  const Denominator shrink_by_a{c + d, a};
  require_positive({shrink_by_a, shrink_by_b}, r, "stratum control");

  const double lower = clamp01(a / (a + b / (1.0 - delta))) -
                       clamp01(c / shrink_by_b.at(r));
  const double upper = clamp01(a / (a + b * (1.0 - delta))) -
                       clamp01((c - a * r) / shrink_by_a.at(r));
  return {lower, upper, BoundAssumption::symmetric_box, delta};
}

IntervalBound table_bounds(const ContingencyTable& table, double delta,
                           BoundAssumption assumption) {
  if (assumption == BoundAssumption::symmetric_box) {
    return table_bounds(table, delta);
  }
  if (table.a_star + table.b_star == 0) {
    throw DegenerateBound("stratum has no reported exposed", 0.0);
  }
  if (table.c_star + table.d_star == 0) {
    throw DegenerateBound("stratum has no reported unexposed", 0.0);
  }
  return cate_bounds(table.frequencies(), delta, assumption).ate;
}

}  // namespace recall
