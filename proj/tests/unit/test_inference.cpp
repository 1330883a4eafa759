#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "recall/errors.hpp"
#include "recall/inference.hpp"
#include "recall/simulation.hpp"

using namespace recall;

namespace {

Dataset simulated(std::size_t n, EtaPair etas, std::uint64_t seed) {
  return generate_dataset(Scenario::cor_cor, n, RecallBiasSpec::constant(etas),
                          seed)
      .data;
}

EstimatorConfig config_for(Method m) {
  EstimatorConfig c;
  c.method = m;
  c.strata_count = 5;
  c.block_size = 20;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(SampleQuantile, TypeSeven) {
  const std::vector<double> v{1, 2, 3, 4, 10};
  EXPECT_DOUBLE_EQ(sample_quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sample_quantile(v, 1.0), 10.0);
  EXPECT_DOUBLE_EQ(sample_quantile(v, 0.5), 3.0);
  // h = 4 * 0.9 = 3.6 -> 4 + 0.6 * 6
  EXPECT_NEAR(sample_quantile(v, 0.9), 7.6, 1e-12);
  EXPECT_THROW(sample_quantile(std::vector<double>{}, 0.5), InvalidData);
}

TEST(RunEstimator, StratifiedMatchesManualPipeline) {
  const auto d = simulated(500, {0.1, 0.2}, 21);
  const auto spec = RecallBiasSpec::constant(0.1, 0.2);
  const auto cfg = config_for(Method::prop);
  const auto run = run_estimator(d, spec, cfg);
  const auto a = quantile_strata(
      fit_propensity_star(d, ModelSpec::all_covariates(d.dim())), 5);
  EXPECT_EQ(run.result.tau_hat, estimate_on_strata(d, spec, a, nullptr).tau_hat);
  EXPECT_EQ(run.strata_built, 5u);
  EXPECT_EQ(run.strata_used + run.merges, run.strata_built);
}

TEST(RunEstimator, BlocksUseConfiguredSize) {
  const auto d = simulated(400, {0.1, 0.2}, 22);
  const auto run = run_estimator(d, RecallBiasSpec::constant(0.1, 0.2),
                                 config_for(Method::block));
  EXPECT_EQ(run.strata_built, 20u);
  EXPECT_TRUE(std::isfinite(run.result.tau_hat));
  EXPECT_THROW(build_strata(d, config_for(Method::ml)), ConfigError);
}

TEST(Bootstrap, ConstantEstimatorGivesDegenerateInterval) {
  // Y = Z* everywhere, so every stratum and every resample estimates 1.
  auto sim = generate_dataset(Scenario::cor_cor, 200,
                              RecallBiasSpec::constant(0.0, 0.0), 5);
  const auto& d0 = sim.data;
  std::vector<std::uint8_t> y(d0.exposure_star().begin(), d0.exposure_star().end());
  const Dataset d(d0.covariates(), y, y, d0.covariate_names());
  BootstrapOptions opt;
  opt.replicates = 100;
  opt.seed = 4;
  const auto r = bootstrap_ci(d, RecallBiasSpec::constant(0, 0),
                              config_for(Method::block), opt);
  EXPECT_EQ(r.failures, 0u);
  EXPECT_NEAR(r.point, 1.0, 1e-12);
  EXPECT_NEAR(r.percentile.lower, 1.0, 1e-12);
  EXPECT_NEAR(r.percentile.upper, 1.0, 1e-12);
  EXPECT_NEAR(r.std_error, 0.0, 1e-12);
}

TEST(Bootstrap, DeterministicAndThreadInvariant) {
  const auto d = simulated(300, {0.1, 0.2}, 23);
  BootstrapOptions opt;
  opt.replicates = 100;
  opt.seed = 9;
  const auto spec = RecallBiasSpec::constant(0.1, 0.2);
  const auto a = bootstrap_ci(d, spec, config_for(Method::prop), opt);
  opt.threads = 3;
  const auto b = bootstrap_ci(d, spec, config_for(Method::prop), opt);
  EXPECT_EQ(a.draws, b.draws);
  EXPECT_EQ(a.percentile.lower, b.percentile.lower);
  EXPECT_LE(a.percentile.lower, a.percentile.upper);
  EXPECT_NEAR(a.half_width, 0.5 * (a.percentile.upper - a.percentile.lower), 1e-15);
  EXPECT_NEAR(a.normal.upper - a.point, 1.959963984540054 * a.std_error, 1e-12);
}

TEST(Bootstrap, RejectsTooFewReplicates) {
  const auto d = simulated(100, {0.1, 0.2}, 24);
  BootstrapOptions opt;
  opt.replicates = 99;
  EXPECT_THROW(bootstrap_ci(d, RecallBiasSpec::constant(0.1, 0.2),
                            config_for(Method::prop), opt),
               ConfigError);
}

TEST(SensitivityGrid, CellsEqualSinglePointRunsBitExactly) {
  const auto d = simulated(400, {0.1, 0.2}, 25);
  const auto grid = make_grid(0.0, 0.5, 0.1);
  for (auto m : {Method::prop, Method::block}) {
    const auto cfg = config_for(m);
    const auto res = sensitivity_grid(d, cfg, grid, grid);
    ASSERT_EQ(res.points.size(), 36u);
    std::size_t infeasible = 0;
    for (const auto& p : res.points) {
      try {
        const auto single =
            run_estimator(d, RecallBiasSpec::constant(p.eta0, p.eta1), cfg);
        ASSERT_TRUE(p.feasible);
        EXPECT_EQ(*p.estimate, single.result.tau_hat);
      } catch (const Error& e) {
        ASSERT_EQ(e.error_class(), ErrorClass::numerical);
        EXPECT_FALSE(p.feasible);
        EXPECT_FALSE(p.estimate.has_value());
        ++infeasible;
      }
    }
    const auto diag = eta_sweep(d, cfg, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& cell = res.points[i * grid.size() + i];
      EXPECT_EQ(cell.feasible, diag.points[i].feasible);
      EXPECT_EQ(cell.estimate, diag.points[i].estimate);
    }
  }
}

TEST(SensitivityGrid, FlagsInfeasibleCells) {
  // Few reported-unexposed units: large rates drive corrected control
  // masses negative in every merge.
  auto sim = generate_dataset(Scenario::cor_cor, 200,
                              RecallBiasSpec::constant(0.0, 0.0), 26);
  const auto& d0 = sim.data;
  std::vector<std::uint8_t> z(d0.size(), 1);
  for (std::size_t i = 0; i < 20; ++i) z[i * 10] = 0;
  const Dataset d(d0.covariates(),
                  {d0.outcome().begin(), d0.outcome().end()}, z,
                  d0.covariate_names());
  const std::vector<double> g0{0.0}, g1{0.0, 0.9};
  const auto res = sensitivity_grid(d, config_for(Method::prop), g0, g1);
  EXPECT_TRUE(res.points[0].feasible);
  EXPECT_FALSE(res.points[1].feasible);
  EXPECT_FALSE(res.points[1].estimate.has_value());
  std::ostringstream csv;
  write_grid_csv(csv, res);
  EXPECT_NE(csv.str().find("0,0.9,NA,NA,NA,false"), std::string::npos);
}

TEST(DeltaSweep, CollapsesAtZeroAndWidens) {
  const auto d = simulated(600, {0.1, 0.2}, 27);
  const auto deltas = make_grid(0.0, 0.3, 0.05);
  for (auto m : {Method::prop, Method::prog, Method::block}) {
    const auto cfg = config_for(m);
    const auto naive = run_estimator(d, RecallBiasSpec::constant(0, 0), cfg);
    for (auto a : {BoundAssumption::symmetric_box, BoundAssumption::eta0_le_eta1,
                   BoundAssumption::eta1_le_eta0}) {
      const auto sweep = delta_sweep(d, cfg, a, deltas);
      ASSERT_TRUE(sweep.points[0].feasible);
      EXPECT_NEAR(*sweep.points[0].lower, naive.result.tau_hat, 1e-12);
      EXPECT_NEAR(*sweep.points[0].upper, naive.result.tau_hat, 1e-12);
      for (std::size_t k = 1; k < deltas.size(); ++k) {
        const auto& p = sweep.points[k];
        const auto& q = sweep.points[k - 1];
        if (!p.feasible || !q.feasible || p.merges != q.merges) continue;
        EXPECT_LE(*p.lower, *q.lower + 1e-12);
        EXPECT_GE(*p.upper, *q.upper - 1e-12);
      }
    }
  }
}

TEST(DeltaSweep, StratifiedBoundsContainPointEstimates) {
  const auto d = simulated(600, {0.1, 0.2}, 28);
  const auto cfg = config_for(Method::prop);
  const std::vector<double> deltas{0.2};
  const auto sweep = delta_sweep(d, cfg, BoundAssumption::symmetric_box, deltas);
  ASSERT_TRUE(sweep.points[0].feasible);
  for (double e0 : {0.0, 0.1, 0.2}) {
    for (double e1 : {0.0, 0.1, 0.2}) {
      const auto run = run_estimator(d, RecallBiasSpec::constant(e0, e1), cfg);
      if (run.merges != sweep.points[0].merges) continue;
      EXPECT_GE(run.result.tau_hat, *sweep.points[0].lower - 1e-12);
      EXPECT_LE(run.result.tau_hat, *sweep.points[0].upper + 1e-12);
    }
  }
}

TEST(DeltaSweep, MaximumLikelihoodLattice) {
  const auto d = simulated(300, {0.1, 0.2}, 29);
  const auto cfg = config_for(Method::ml);
  SweepOptions opt;
  opt.lattice_step = 0.1;
  const std::vector<double> deltas{0.0, 0.2};
  const auto sweep = delta_sweep(d, cfg, BoundAssumption::eta0_le_eta1, deltas, opt);
  const auto at = [&](double e0, double e1) {
    return run_estimator(d, RecallBiasSpec::constant(e0, e1), cfg).result.tau_hat;
  };
  EXPECT_EQ(*sweep.points[0].lower, at(0, 0));
  EXPECT_EQ(*sweep.points[0].upper, at(0, 0));
  double lo = 1e9, hi = -1e9;
  for (auto [e0, e1] : {std::pair{0.0, 0.0}, {0.0, 0.1}, {0.0, 0.2}, {0.1, 0.1},
                        {0.1, 0.2}, {0.2, 0.2}}) {
    lo = std::min(lo, at(e0, e1));
    hi = std::max(hi, at(e0, e1));
  }
  EXPECT_EQ(*sweep.points[1].lower, lo);
  EXPECT_EQ(*sweep.points[1].upper, hi);
}

TEST(DeltaSweep, NaiveMethodsRejected) {
  const auto d = simulated(100, {0.1, 0.2}, 30);
  const std::vector<double> deltas{0.1};
  EXPECT_THROW(delta_sweep(d, config_for(Method::naive_ipw),
                           BoundAssumption::symmetric_box, deltas),
               ConfigError);
}

TEST(Sweeps, NegativeRegionAndCsv) {
  SweepResult r;
  r.points.push_back({0, 0.1, 0.2, -0.5, std::nullopt, std::nullopt, true, 0});
  r.points.push_back({0, 0.3, 0.2, 0.5, std::nullopt, std::nullopt, true, 0});
  r.points.push_back({0, 0.4, 0.4, std::nullopt, std::nullopt, std::nullopt, false, 0});
  const auto neg = negative_region(r);
  ASSERT_EQ(neg.size(), 1u);
  EXPECT_EQ(neg[0], (EtaPair{0.1, 0.2}));
  std::ostringstream out;
  write_grid_csv(out, r);
  EXPECT_EQ(out.str(),
            "eta0,eta1,estimate,lower,upper,feasible\n"
            "0.1,0.2,-0.5,NA,NA,true\n"
            "0.3,0.2,0.5,NA,NA,true\n"
            "0.4,0.4,NA,NA,NA,false\n");
}

TEST(MakeGrid, RoundsAndIncludesEndpoint) {
  const auto g = make_grid(0.0, 0.5, 0.1);
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g[3], 0.3);
  EXPECT_EQ(g[5], 0.5);
  EXPECT_EQ(make_grid(0.0, 0.0, 0.05).size(), 1u);
  EXPECT_THROW(make_grid(0.0, 1.0, 0.0), ConfigError);
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(std::nan("")), "NA");
  EXPECT_EQ(format_number(std::optional<double>{}), "NA");
}
