#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "recall/errors.hpp"
#include "recall/simulation.hpp"
#include "recall/stratification.hpp"

using namespace recall;

namespace {

Dataset simulated(std::size_t n, EtaPair etas, std::uint64_t seed) {
  return generate_dataset(Scenario::cor_cor, n, RecallBiasSpec::constant(etas),
                          seed)
      .data;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

StratumSummary summary(ContingencyTable t, EtaPair etas, double location,
                       std::size_t id) {
  StratumSummary s;
  s.table = corrected_table(t, etas);
  s.location = Eigen::VectorXd::Constant(1, location);
  s.n = static_cast<std::size_t>(t.n());
  s.sources = {id};
  return s;
}

}  // namespace

TEST(StratumEstimate, SingleStratumEqualsPooledPoint) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cnt(1, 80);
  std::uniform_real_distribution<double> u(0.0, 0.4);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const ContingencyTable t{cnt(rng), cnt(rng), cnt(rng), cnt(rng)};
    const EtaPair e{u(rng), u(rng)};
    double point;
    try {
      point = cate_point(t.frequencies(), e);
    } catch (const InadmissibleEtas&) {
      EXPECT_TRUE(is_degenerate(corrected_table(t, e)) ||
                  corrected_table(t, e).unexposed_y1 < 0 ||
                  corrected_table(t, e).unexposed_y0 < 0);
      continue;
    }
    EXPECT_NEAR(stratum_estimate(t, e), point, 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 1000);
}

TEST(StratumEstimate, PerUnitFormEqualsCountForm) {
  const auto d = simulated(300, {0.1, 0.2}, 4);
  const auto rows = all_rows(d.size());
  const EtaPair e{0.15, 0.3};
  const auto pu = stratum_estimate(d, rows, RecallBiasSpec::constant(e));
  EXPECT_NEAR(pu, stratum_estimate(tabulate(d), e), 1e-12);
  const auto per_unit = RecallBiasSpec::per_unit(
      std::vector<double>(d.size(), e.eta0), std::vector<double>(d.size(), e.eta1));
  EXPECT_NEAR(stratum_estimate(d, rows, per_unit), pu, 1e-12);
}

TEST(StratumEstimate, HandTable) {
  // Corrected exposed: 20/0.5 = 40 with Y=1, 20 with Y=0; unexposed
  // 30 - 20 = 10 with Y=1, 30 with Y=0.
  EXPECT_NEAR(stratum_estimate(ContingencyTable{20, 20, 30, 30}, {0.0, 0.5}),
              40.0 / 60.0 - 10.0 / 40.0, 1e-14);
}

TEST(StratumEstimate, MassesSumToStratumSize) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cnt(0, 50);
  std::uniform_real_distribution<double> u(0.0, 0.6);
  for (int i = 0; i < 1000; ++i) {
    const ContingencyTable t{cnt(rng), cnt(rng), cnt(rng), cnt(rng)};
    const auto c = corrected_table(t, {u(rng), u(rng)});
    EXPECT_NEAR(c.exposed_mass() + c.unexposed_mass(), double(t.n()),
                1e-12 * std::max<double>(1.0, double(t.n())));
  }
}

TEST(StratumEstimate, DegenerateTables) {
  EXPECT_THROW(stratum_estimate(ContingencyTable{0, 0, 4, 4}, {0.1, 0.1}),
               DegenerateStratum);
  EXPECT_THROW(stratum_estimate(ContingencyTable{10, 10, 1, 1}, {0.3, 0.3}),
               DegenerateStratum);
  EXPECT_TRUE(is_degenerate(corrected_table(ContingencyTable{2, 2, 0, 0}, {0, 0})));
}

TEST(QuantileStrata, BalancedAndOrdered) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (std::size_t n : {10u, 37u, 200u}) {
    std::vector<double> s(n);
    for (auto& v : s) v = g(rng);
    for (std::size_t k : {2u, 3u, 10u}) {
      if (k > n) continue;
      const auto a = quantile_strata(s, k);
      a.validate(n);
      EXPECT_EQ(a.count(), k);
      const auto groups = a.members();
      std::size_t lo = n, hi = 0;
      for (const auto& grp : groups) {
        lo = std::min(lo, grp.size());
        hi = std::max(hi, grp.size());
      }
      EXPECT_LE(hi - lo, 1u);
      for (std::size_t j = 0; j + 1 < k; ++j) {
        double mx = -1e300, mn = 1e300;
        for (auto i : groups[j]) mx = std::max(mx, s[i]);
        for (auto i : groups[j + 1]) mn = std::min(mn, s[i]);
        EXPECT_LE(mx, mn);
      }
    }
  }
}

TEST(QuantileStrata, TiesAndErrors) {
  const std::vector<double> s{1, 1, 1, 2, 2, 3};
  EXPECT_NO_THROW(quantile_strata(s, 3));
  EXPECT_THROW(quantile_strata(s, 4), DegenerateScores);
  EXPECT_THROW(quantile_strata(s, 1), ConfigError);
  EXPECT_THROW(quantile_strata(std::vector<double>{1, 2}, 3), ConfigError);
}

TEST(FitPrognostic, InsufficientExposed) {
  Eigen::MatrixXd x(6, 2);
  x.setRandom();
  Dataset d(x, {1, 0, 1, 0, 1, 0}, {1, 1, 0, 0, 0, 0}, {"a", "b"});
  EXPECT_THROW(fit_prognostic(d, ModelSpec::all_covariates(2)), InsufficientExposed);
}

TEST(BuildBlocks, ExactSizesAndMonotoneObjective) {
  std::mt19937_64 rng(8);
  for (int inst = 0; inst < 30; ++inst) {
    const std::size_t k = 2 + inst % 4;
    const std::size_t n = k * (5 + inst % 6);
    const auto d = simulated(n, {0.1, 0.1}, 100 + inst);
    const RankMahalanobis geo(d.covariates());
    const auto res = build_blocks(geo, k, rng());
    res.assignment.validate(n);
    for (const auto& grp : res.assignment.members()) EXPECT_EQ(grp.size(), k);
    ASSERT_FALSE(res.objective_trace.empty());
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i) {
      EXPECT_LE(res.objective_trace[i], res.objective_trace[i - 1]);
    }
    EXPECT_NEAR(res.objective_trace.back(),
                within_block_distance(geo, res.assignment), 1e-9);
  }
}

TEST(BuildBlocks, WithinBlockDistanceMatchesPairSum) {
  const auto d = simulated(24, {0.1, 0.1}, 3);
  const RankMahalanobis geo(d.covariates());
  const auto res = build_blocks(geo, 4, 11);
  double want = 0;
  const auto& lab = res.assignment.labels;
  for (std::size_t i = 0; i < 24; ++i) {
    for (std::size_t j = i + 1; j < 24; ++j) {
      if (lab[i] == lab[j]) want += geo.distance(i, j);
    }
  }
  EXPECT_NEAR(within_block_distance(geo, res.assignment), want, 1e-9);
}

TEST(BuildBlocks, BeatsRandomPartitions) {
  const auto d = simulated(200, {0.1, 0.1}, 5);
  const RankMahalanobis geo(d.covariates());
  const double built = within_block_distance(geo, build_blocks(geo, 10, 1).assignment);
  std::mt19937_64 rng(9);
  StratumAssignment random;
  random.method = StrataMethod::block;
  random.labels.resize(200);
  for (std::size_t i = 0; i < 200; ++i) random.labels[i] = i / 10;
  for (int t = 0; t < 20; ++t) {
    std::shuffle(random.labels.begin(), random.labels.end(), rng);
    EXPECT_LT(built, within_block_distance(geo, random));
  }
}

TEST(BuildBlocks, DeterministicPerSeed) {
  const auto d = simulated(60, {0.1, 0.1}, 6);
  const auto a = build_blocks(d, 6, 42);
  const auto b = build_blocks(d, 6, 42);
  EXPECT_EQ(a.assignment.labels, b.assignment.labels);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
}

TEST(BuildBlocks, Errors) {
  const auto d = simulated(50, {0.1, 0.1}, 6);
  EXPECT_THROW(build_blocks(d, 7, 1), NonDivisibleN);
  const auto one = build_blocks(d, 50, 1);
  EXPECT_EQ(one.assignment.count(), 1u);
}

TEST(CombineStrata, MergesIntoNearestLocation) {
  const EtaPair e{0.1, 0.1};
  std::vector<StratumSummary> s{
      summary({5, 5, 5, 5}, e, 0.0, 0),
      summary({0, 0, 3, 3}, e, 0.9, 1),  // no reported exposed
      summary({5, 5, 5, 5}, e, 1.0, 2),
  };
  const auto r = combine_strata(s);
  EXPECT_EQ(r.merges, 1u);
  ASSERT_EQ(r.strata.size(), 2u);
  EXPECT_EQ(r.strata[1].sources, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(r.strata[1].n, 26u);
  EXPECT_EQ(r.strata[1].table.counts, (ContingencyTable{5, 5, 8, 8}));
  EXPECT_NEAR(r.strata[1].location[0], (6 * 0.9 + 20 * 1.0) / 26, 1e-15);
}

TEST(CombineStrata, TiesGoToLowestIndexAndAllDegenerateThrows) {
  const EtaPair e{0.0, 0.0};
  std::vector<StratumSummary> s{
      summary({5, 5, 5, 5}, e, 0.0, 0),
      summary({0, 0, 3, 3}, e, 1.0, 1),
      summary({5, 5, 5, 5}, e, 2.0, 2),
  };
  EXPECT_EQ(combine_strata(s).strata[0].sources, (std::vector<std::size_t>{0, 1}));
  std::vector<StratumSummary> bad{summary({0, 0, 3, 3}, e, 0.0, 0),
                                  summary({0, 0, 2, 2}, e, 1.0, 1)};
  EXPECT_THROW(combine_strata(bad), AllDegenerate);
}

TEST(Aggregate, SizeWeights) {
  const std::vector<double> tau{0.1, 0.4};
  const std::vector<std::size_t> n{30, 10};
  EXPECT_NEAR(aggregate(tau, n), (0.1 * 30 + 0.4 * 10) / 40, 1e-15);
}

TEST(EstimateOnStrata, EqualsWeightedStratumEstimates) {
  const auto d = simulated(400, {0.1, 0.2}, 12);
  const auto scores = fit_propensity_star(d, ModelSpec::all_covariates(d.dim()));
  const auto a = quantile_strata(scores, 4);
  const auto fit = estimate_on_strata(d, RecallBiasSpec::constant(0.1, 0.2), a, nullptr);
  ASSERT_EQ(fit.merges, 0u);
  double want = 0;
  for (const auto& g : a.members()) {
    want += stratum_estimate(tabulate(d, g), {0.1, 0.2}) * double(g.size()) / 400.0;
  }
  EXPECT_NEAR(fit.tau_hat, want, 1e-12);
}

TEST(Balance, NoMisreportingEqualsNaiveStratifiedAsmd) {
  const auto d = simulated(500, {0.1, 0.2}, 13);
  const auto scores = fit_propensity_star(d, ModelSpec::all_covariates(d.dim()));
  const auto a = quantile_strata(scores, 5);
  const auto diag = balance_diagnostics(a, d, {0.0, 0.0});
  const auto groups = a.members();
  // Every unit carries its stratum's mean covariate vector; arms by Z*.
  // The scale is the raw covariate's pooled sd.
  for (Eigen::Index j = 0; j < Eigen::Index(d.dim()); ++j) {
    std::vector<double> cen(groups.size());
    for (std::size_t s = 0; s < groups.size(); ++s) {
      double sum = 0;
      for (auto i : groups[s]) sum += d.covariates()(Eigen::Index(i), j);
      cen[s] = sum / double(groups[s].size());
    }
    double st = 0, sc = 0, nt = 0, nc = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double v = cen[a.labels[i]];
      (d.exposure_star()[i] ? st : sc) += v;
      (d.exposure_star()[i] ? nt : nc) += 1;
    }
    const double mt = st / nt, mc = sc / nc;
    double rt = 0, rc = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      (d.exposure_star()[i] ? rt : rc) += d.covariates()(Eigen::Index(i), j);
    }
    rt /= nt;
    rc /= nc;
    double vt = 0, vc = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double v = d.covariates()(Eigen::Index(i), j);
      if (d.exposure_star()[i]) {
        vt += (v - rt) * (v - rt);
      } else {
        vc += (v - rc) * (v - rc);
      }
    }
    const double sd = std::sqrt(0.5 * (vt / nt + vc / nc));
    const auto& b = diag[std::size_t(j)];
    EXPECT_NEAR(b.treated_mean, mt, 1e-12);
    EXPECT_NEAR(b.control_mean, mc, 1e-12);
    EXPECT_NEAR(b.pooled_sd, sd, 1e-12);
    EXPECT_NEAR(b.asmd, std::abs(mt - mc) / sd, 1e-12);
  }
}

TEST(Balance, NegativeControlMassThrows) {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  Dataset d(x, {1, 1, 1, 0}, {1, 1, 1, 0}, {"x"});
  StratumAssignment a;
  a.labels = {0, 0, 0, 0};
  EXPECT_THROW(balance_diagnostics(a, d, {0.5, 0.5}), DegenerateStratum);
}
