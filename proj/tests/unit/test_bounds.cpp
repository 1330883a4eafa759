#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <random>

#include "recall/bounds.hpp"
#include "recall/errors.hpp"

using namespace recall;

namespace {

ObservedCells random_observed(std::mt19937_64& rng) {
  std::exponential_distribution<double> ex(1.0);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  const double v[4] = {ex(rng), ex(rng), ex(rng), ex(rng)};
  const double s = v[0] + v[1] + v[2] + v[3];
  const CellProbabilities t{v[0] / s, v[1] / s, v[2] / s, v[3] / s};
  return misclassify_cells(t, {u(rng), u(rng)});
}

// Vertices of the region in (eta0, eta1).
std::vector<EtaPair> vertices(BoundAssumption a, double delta) {
  switch (a) {
    case BoundAssumption::symmetric_box:
      return {{0, 0}, {0, delta}, {delta, 0}, {delta, delta}};
    case BoundAssumption::eta0_le_eta1:
      return {{0, 0}, {0, delta}, {delta, delta}};
    case BoundAssumption::eta1_le_eta0:
      return {{0, 0}, {delta, 0}, {delta, delta}};
  }
  return {};
}

bool inside(BoundAssumption a, double e0, double e1) {
  switch (a) {
    case BoundAssumption::symmetric_box: return true;
    case BoundAssumption::eta0_le_eta1: return e0 <= e1;
    case BoundAssumption::eta1_le_eta0: return e1 <= e0;
  }
  return false;
}

// Clip a polygon to the half-plane coordinate(k) <= limit.
std::vector<EtaPair> clip(const std::vector<EtaPair>& poly, int k, double limit) {
  auto coord = [k](const EtaPair& e) { return k == 0 ? e.eta0 : e.eta1; };
  std::vector<EtaPair> out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    const bool pin = coord(p) <= limit, qin = coord(q) <= limit;
    if (pin) out.push_back(p);
    if (pin != qin) {
      const double t = (limit - coord(p)) / (coord(q) - coord(p));
      out.push_back({p.eta0 + t * (q.eta0 - p.eta0), p.eta1 + t * (q.eta1 - p.eta1)});
    }
  }
  return out;
}

// Both conditional probabilities are linear-fractional in the odds
// eta / (1 - eta), so their extremes over a polygon sit at its vertices.
// For the unexposed arm only rates leaving the corrected cells nonnegative
// count, so that extreme is taken over the region clipped to that rectangle.
// The exposed-arm extremes use the whole region.
struct VertexOracle {
  double l11 = 1, u11 = 0, l10 = 1, u10 = 0;
};

VertexOracle vertex_oracle(const ObservedCells& o, BoundAssumption a,
                           double delta) {
  VertexOracle v;
  for (const auto& e : vertices(a, delta)) {
    const double t11 = o.p11 / (1 - e.eta1);
    const double p11 = t11 / (t11 + o.p01 / (1 - e.eta0));
    v.l11 = std::min(v.l11, p11);
    v.u11 = std::max(v.u11, p11);
  }
  auto poly = vertices(a, delta);
  if (o.p01 > 0) {
    const double r = o.p00 / o.p01;
    poly = clip(poly, 0, r / (1 + r));
  }
  if (o.p11 > 0) {
    const double r = o.p10 / o.p11;
    poly = clip(poly, 1, r / (1 + r));
  }
  for (const auto& e : poly) {
    const double r0 = e.eta0 / (1 - e.eta0);
    const double r1 = e.eta1 / (1 - e.eta1);
    const double p10 = (o.p10 - o.p11 * r1) /
                       (o.p10 + o.p00 - o.p11 * r1 - o.p01 * r0);
    v.l10 = std::min(v.l10, p10);
    v.u10 = std::max(v.u10, p10);
  }
  return v;
}

constexpr std::array<BoundAssumption, 3> kAll{BoundAssumption::symmetric_box,
                                              BoundAssumption::eta0_le_eta1,
                                              BoundAssumption::eta1_le_eta0};

}  // namespace

TEST(Prop1Bounds, HandExample) {
  const ObservedCells o{0.2, 0.3, 0.2, 0.3};
  const auto b = prop1_bounds(o, 0.5);
  EXPECT_NEAR(b.p1_given_1.lower, 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(b.p1_given_1.upper, 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(b.p1_given_0.lower, 0.25, 1e-14);
  EXPECT_NEAR(b.p1_given_0.upper, 0.75, 1e-14);
  EXPECT_NEAR(b.ate.lower, 1.0 / 3.0 - 0.75, 1e-14);
  EXPECT_NEAR(b.ate.upper, 2.0 / 3.0 - 0.25, 1e-14);
}

TEST(TableBounds, HandExample) {
  const auto b = table_bounds(ContingencyTable{20, 20, 30, 30}, 0.5);
  EXPECT_NEAR(b.lower, -5.0 / 12.0, 1e-14);
  EXPECT_NEAR(b.upper, 5.0 / 12.0, 1e-14);
}

TEST(TableBounds, MatchesCellFormUnderEveryAssumption) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> cnt(1, 60);
  for (int i = 0; i < 500; ++i) {
    const ContingencyTable t{cnt(rng), cnt(rng), cnt(rng), cnt(rng)};
    for (double delta : {0.0, 0.1, 0.2, 0.3}) {
      for (auto a : kAll) {
        try {
          const auto count_form = table_bounds(t, delta, a);
          const auto cell_form = cate_bounds(t.frequencies(), delta, a).ate;
          EXPECT_NEAR(count_form.lower, cell_form.lower, 1e-12);
          EXPECT_NEAR(count_form.upper, cell_form.upper, 1e-12);
        } catch (const DegenerateBound& e) {
          EXPECT_THROW(cate_bounds(t.frequencies(), delta, a), DegenerateBound);
          EXPECT_LE(e.max_admissible_delta(), delta);
        }
      }
    }
  }
}

TEST(TableBounds, EmptyArmIsDegenerate) {
  try {
    table_bounds(ContingencyTable{0, 0, 5, 5}, 0.1);
    FAIL();
  } catch (const DegenerateBound& e) {
    EXPECT_EQ(e.max_admissible_delta(), 0.0);
  }
  EXPECT_THROW(table_bounds(ContingencyTable{3, 4, 0, 0}, 0.1,
                            BoundAssumption::eta0_le_eta1),
               DegenerateBound);
}

TEST(TableBounds, MaxAdmissibleDeltaIsTight) {
  // c + d - delta/(1-delta) * max(a, b) hits zero at delta = 10 / 40.
  const ContingencyTable t{30, 5, 4, 6};
  try {
    table_bounds(t, 0.3);
    FAIL();
  } catch (const DegenerateBound& e) {
    EXPECT_NEAR(e.max_admissible_delta(), 0.25, 1e-14);
  }
  EXPECT_NO_THROW(table_bounds(t, 0.2499));
}

TEST(Bounds, MatchVertexOracle) {
  std::mt19937_64 rng(17);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto o = random_observed(rng);
    for (double delta : {0.05, 0.2, 0.4}) {
      for (auto a : kAll) {
        CateBounds b;
        try {
          b = cate_bounds(o, delta, a);
        } catch (const DegenerateBound&) {
          continue;
        }
        const auto v = vertex_oracle(o, a, delta);
        EXPECT_NEAR(b.p1_given_1.lower, std::clamp(v.l11, 0.0, 1.0), 1e-12);
        EXPECT_NEAR(b.p1_given_1.upper, std::clamp(v.u11, 0.0, 1.0), 1e-12);
        EXPECT_NEAR(b.p1_given_0.lower, std::clamp(v.l10, 0.0, 1.0), 1e-12);
        EXPECT_NEAR(b.p1_given_0.upper, std::clamp(v.u10, 0.0, 1.0), 1e-12);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 10000);
}

TEST(Bounds, ContainGridPoints) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const auto o = random_observed(rng);
    for (auto a : kAll) {
      const double delta = 0.3;
      CateBounds b;
      try {
        b = cate_bounds(o, delta, a);
      } catch (const DegenerateBound&) {
        continue;
      }
      for (int i0 = 0; i0 <= 30; ++i0) {
        for (int i1 = 0; i1 <= 30; ++i1) {
          const double e0 = i0 * 0.01, e1 = i1 * 0.01;
          if (!inside(a, e0, e1)) continue;
          double tau;
          try {
            tau = cate_point(o, {e0, e1});
          } catch (const InadmissibleEtas&) {
            continue;
          }
          EXPECT_TRUE(b.ate.contains(tau, 1e-12)) << e0 << "," << e1;
        }
      }
    }
  }
}

TEST(Bounds, TrianglesNestInBox) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 1000; ++i) {
    const auto o = random_observed(rng);
    for (double delta : {0.1, 0.3, 0.5}) {
      try {
        const auto box = prop1_bounds(o, delta);
        EXPECT_TRUE(prop2a_bounds(o, delta).ate.within(box.ate, 1e-12));
        EXPECT_TRUE(prop2b_bounds(o, delta).ate.within(box.ate, 1e-12));
      } catch (const DegenerateBound&) {
      }
    }
  }
}

TEST(Bounds, CollapseAtZeroAndWidenWithDelta) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 500; ++i) {
    const auto o = random_observed(rng);
    const double naive = o.contrast();
    for (auto a : kAll) {
      const auto zero = cate_bounds(o, 0.0, a).ate;
      EXPECT_NEAR(zero.lower, naive, 1e-12);
      EXPECT_NEAR(zero.upper, naive, 1e-12);
      IntervalBound prev = zero;
      for (int k = 1; k <= 10; ++k) {
        IntervalBound cur;
        try {
          cur = cate_bounds(o, 0.05 * k, a).ate;
        } catch (const DegenerateBound&) {
          break;
        }
        EXPECT_TRUE(prev.within(cur, 1e-12));
        prev = cur;
      }
    }
  }
}

TEST(Bounds, RejectsBadDelta) {
  const ObservedCells o{0.25, 0.25, 0.25, 0.25};
  EXPECT_THROW(prop1_bounds(o, -0.1), ConfigError);
  EXPECT_THROW(prop1_bounds(o, 1.0), ConfigError);
  EXPECT_THROW(table_bounds(ContingencyTable{1, 1, 1, 1}, 1.0), ConfigError);
}

TEST(Bounds, ParseAssumption) {
  EXPECT_EQ(parse_assumption("box"), BoundAssumption::symmetric_box);
  EXPECT_EQ(parse_assumption("a"), BoundAssumption::eta0_le_eta1);
  EXPECT_EQ(parse_assumption("eta1_le_eta0"), BoundAssumption::eta1_le_eta0);
  EXPECT_THROW(parse_assumption("c"), ConfigError);
  for (auto a : kAll) EXPECT_EQ(parse_assumption(to_string(a)), a);
}
