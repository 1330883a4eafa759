#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "recall/errors.hpp"
#include "recall/estimators.hpp"
#include "recall/logistic.hpp"
#include "recall/simulation.hpp"

using namespace recall;

namespace {

Dataset simulated(std::size_t n, EtaPair etas, std::uint64_t seed,
                  Scenario s = Scenario::cor_cor) {
  return generate_dataset(s, n, RecallBiasSpec::constant(etas), seed).data;
}

// Direct evaluation of sum_i log Pr(Y_i, Z*_i | X_i), written out from the
// misreporting model without going through the library's likelihood.
double oracle_loglik(const Dataset& d, EtaPair etas, const ModelSpec& m,
                     const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma) {
  const auto xe = design_matrix(d, m.exposure_covariates, m.include_intercept);
  const auto xo = design_matrix(d, m.outcome_covariates, m.include_intercept);
  const Eigen::Index k = xo.cols();
  double ll = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double e = sigmoid(xe.row(r).dot(beta));
    double m0, m1;
    if (m.outcome_form == OutcomeForm::shared_slope) {
      const double base = xo.row(r).dot(gamma.tail(k));
      m0 = sigmoid(base);
      m1 = sigmoid(base + gamma[0]);
    } else {
      m0 = sigmoid(xo.row(r).dot(gamma.head(k)));
      m1 = sigmoid(xo.row(r).dot(gamma.tail(k)));
    }
    const int y = d.outcome()[i];
    const double eta = y ? etas.eta1 : etas.eta0;
    const double py1 = y ? m1 : 1 - m1;
    const double py0 = y ? m0 : 1 - m0;
    const double p = d.exposure_star()[i] ? e * (1 - eta) * py1
                                          : e * eta * py1 + (1 - e) * py0;
    ll += std::log(p);
  }
  return ll;
}

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 0.5);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

}  // namespace

TEST(ObservedLikelihood, MatchesDirectEvaluation) {
  const auto d = simulated(300, {0.1, 0.3}, 5);
  std::mt19937_64 rng(1);
  for (auto form : {OutcomeForm::shared_slope, OutcomeForm::separate_arms}) {
    auto m = ModelSpec::all_covariates(d.dim());
    m.outcome_form = form;
    ObservedLikelihood lik(d, RecallBiasSpec::constant(0.1, 0.3), m);
    for (int t = 0; t < 10; ++t) {
      const auto beta = random_vector(lik.exposure_size(), rng);
      const auto gamma = random_vector(lik.outcome_size(), rng);
      EXPECT_NEAR(lik.value(lik.pack(beta, gamma)),
                  oracle_loglik(d, {0.1, 0.3}, m, beta, gamma), 1e-9);
    }
  }
}

TEST(ObservedLikelihood, GradientMatchesCentralDifferences) {
  const auto d = simulated(400, {0.2, 0.1}, 6);
  std::mt19937_64 rng(2);
  for (auto form : {OutcomeForm::shared_slope, OutcomeForm::separate_arms}) {
    auto m = ModelSpec::all_covariates(d.dim());
    m.outcome_form = form;
    ObservedLikelihood lik(d, RecallBiasSpec::constant(0.2, 0.1), m);
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd theta = random_vector(lik.size(), rng);
      Eigen::VectorXd g;
      lik.value_and_gradient(theta, g);
      for (Eigen::Index j = 0; j < theta.size(); ++j) {
        const double h = 1e-5;
        Eigen::VectorXd tp = theta, tm = theta;
        tp[j] += h;
        tm[j] -= h;
        const double fd = (lik.value(tp) - lik.value(tm)) / (2 * h);
        EXPECT_LT(std::abs(g[j] - fd), 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(FitMle, ConvergesWithMonotoneTrace) {
  const auto d = simulated(1000, {0.1, 0.2}, 9);
  const auto fit = fit_mle(d, RecallBiasSpec::constant(0.1, 0.2),
                           ModelSpec::all_covariates(d.dim()));
  EXPECT_TRUE(fit.converged);
  EXPECT_LT(fit.gradient_max_norm, 1e-6);
  ASSERT_GE(fit.loglik_trace.size(), 2u);
  for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) {
    EXPECT_GE(fit.loglik_trace[i], fit.loglik_trace[i - 1] - 1e-12);
  }
  EXPECT_NEAR(fit.loglik_trace.back(), fit.loglik, 1e-12);
}

TEST(FitMle, ReducesToNaiveOutcomeRegressionWithoutMisreporting) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto d = simulated(800, {0.0, 0.0}, seed);
    const auto m = ModelSpec::all_covariates(d.dim());
    const auto fit = fit_mle(d, RecallBiasSpec::constant(0.0, 0.0), m);
    ASSERT_TRUE(fit.converged);
    EXPECT_NEAR(ate_ml(fit, d).tau_hat, naive_or(d, m).tau_hat, 1e-6);
  }
}

TEST(FitMle, RecoversTrueEffectOnLargeSample) {
  const auto sim = generate_dataset(Scenario::cor_cor, 20000,
                                    RecallBiasSpec::constant(0.1, 0.2), 77);
  const auto fit = fit_mle(sim.data, RecallBiasSpec::constant(0.1, 0.2),
                           ModelSpec::all_covariates(sim.data.dim()));
  ASSERT_TRUE(fit.converged);
  const double truth = (sim.m1 - sim.m0).mean();
  // Sampling sd of the estimate at this size is about 0.012.
  EXPECT_NEAR(ate_ml(fit, sim.data).tau_hat, truth, 0.04);
}

TEST(FitMle, PerUnitRatesEqualConstantRates) {
  const auto d = simulated(500, {0.15, 0.25}, 12);
  const auto m = ModelSpec::all_covariates(d.dim());
  const auto c = fit_mle(d, RecallBiasSpec::constant(0.15, 0.25), m);
  const auto p = fit_mle(
      d,
      RecallBiasSpec::per_unit(std::vector<double>(d.size(), 0.15),
                               std::vector<double>(d.size(), 0.25)),
      m);
  EXPECT_NEAR(ate_ml(c, d).tau_hat, ate_ml(p, d).tau_hat, 1e-9);
}

TEST(NaiveIpw, MatchesHajekFormula) {
  const auto d = simulated(600, {0.1, 0.1}, 3);
  const auto m = ModelSpec::all_covariates(d.dim());
  const auto x = design_matrix(d, m.exposure_covariates, true);
  const auto fit = fit_logistic(x, d.exposure_star());
  const auto s = predict_logistic(x, fit.coef);
  double n1 = 0, w1 = 0, n0 = 0, w0 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double si = s[static_cast<Eigen::Index>(i)];
    if (d.exposure_star()[i]) {
      n1 += d.outcome()[i] / si;
      w1 += 1 / si;
    } else {
      n0 += d.outcome()[i] / (1 - si);
      w0 += 1 / (1 - si);
    }
  }
  EXPECT_NEAR(naive_ipw(d, m).tau_hat, n1 / w1 - n0 / w0, 1e-12);
}

TEST(NaiveIpw, PositivityViolation) {
  Eigen::MatrixXd x(8, 1);
  x << -4, -3, -2, -1, 1, 2, 3, 4;
  Dataset d(x, {0, 1, 0, 1, 0, 1, 0, 1}, {0, 0, 0, 0, 1, 1, 1, 1}, {"x"});
  EXPECT_THROW(naive_ipw(d, ModelSpec::all_covariates(1)), PositivityViolation);
}

TEST(NaiveOr, SaturatedTableGivesRawContrast) {
  // No covariates: the fit is saturated in Z*, so the plug-in contrast is the
  // raw difference in outcome proportions.
  std::vector<std::uint8_t> y, z;
  auto add = [&](int yy, int zz, int count) {
    for (int i = 0; i < count; ++i) {
      y.push_back(static_cast<std::uint8_t>(yy));
      z.push_back(static_cast<std::uint8_t>(zz));
    }
  };
  add(1, 1, 30);
  add(0, 1, 10);
  add(1, 0, 20);
  add(0, 0, 40);
  Dataset d(Eigen::MatrixXd(100, 0), y, z, {});
  EXPECT_NEAR(naive_or(d, ModelSpec::all_covariates(0)).tau_hat,
              0.75 - 20.0 / 60.0, 1e-9);
}

TEST(ModelSpec, Validation) {
  ModelSpec m = ModelSpec::all_covariates(3);
  EXPECT_NO_THROW(m.validate(3));
  m.outcome_covariates.push_back(5);
  EXPECT_THROW(m.validate(3), ConfigError);
  ModelSpec dup = ModelSpec::all_covariates(3);
  dup.exposure_covariates.push_back(0);
  EXPECT_THROW(dup.validate(3), ConfigError);
}

TEST(Method, ParseRoundTrip) {
  for (auto m : {Method::ml, Method::prop, Method::prog, Method::block,
                 Method::naive_ipw, Method::naive_or}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("mle"), ConfigError);
}
