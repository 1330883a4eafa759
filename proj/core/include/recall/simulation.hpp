#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "recall/core_model.hpp"
#include "recall/estimators.hpp"

namespace recall {

/// Whether the analyst's (exposure, outcome) models are correct or misspecified.
enum class Scenario { cor_cor, cor_mis, mis_cor, mis_mis };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view text);

/// Generating models. Covariates are X1, X2 ~ Bernoulli(0.5) and
/// X3, X4 ~ N(0, 1). In a "mis" arm the true linear predictor gains
/// quad * (X3^2 - 1) + inter * X3 * X4 + expo * (exp(X4 / 2) - e^{1/8}),
/// terms the analyst's main-effects model cannot represent.
struct DgpParameters {
  double exposure_intercept = 0.2;
  std::array<double, 4> exposure_slopes{0.4, -0.4, 0.4, -0.4};
  double outcome_intercept = 0.0;
  double gamma_z = 0.5;
  std::array<double, 4> outcome_slopes{0.3, -0.3, 0.3, -0.3};

  double exposure_quad = 0.6;
  double exposure_inter = 0.5;
  double exposure_expo = 0.0;
  double outcome_quad = 0.6;
  double outcome_inter = 0.5;
  double outcome_expo = 0.0;

  bool operator==(const DgpParameters&) const = default;
};

struct SimulatedData {
  Dataset data;
  std::vector<std::uint8_t> y0;
  std::vector<std::uint8_t> y1;
  Eigen::VectorXd e;
  Eigen::VectorXd m0;
  Eigen::VectorXd m1;
};

/// True propensity and outcome probabilities at covariate row x.
double true_propensity(Scenario scenario, const DgpParameters& p,
                       const Eigen::Ref<const Eigen::RowVectorXd>& x);
double true_outcome(Scenario scenario, const DgpParameters& p, int z,
                    const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Draws covariates, true exposure and both potential outcomes, then hides
/// each true exposure of a unit with outcome y with probability eta_y.
SimulatedData generate_dataset(Scenario scenario, std::size_t n,
                               const RecallBiasSpec& spec, std::uint64_t seed,
                               const DgpParameters& params = {});

/// Monte Carlo mean of m1(X) - m0(X) over `draws` covariate vectors. Results
/// are cached per (scenario, parameters, seed, draws).
double true_ate(Scenario scenario, std::uint64_t seed,
                const DgpParameters& params = {}, std::size_t draws = 1'000'000);

struct ScenarioConfig {
  Scenario scenario = Scenario::cor_cor;
  std::size_t n = 2000;
  EtaPair etas{0.1, 0.2};
  std::size_t replications = 1000;
  std::uint64_t seed = 1;
  /// Units per stratum for prop/prog and block size for block.
  std::size_t strata_size = 50;
  std::vector<Method> methods{Method::naive_ipw, Method::naive_or, Method::ml,
                              Method::prop,      Method::prog,     Method::block};
  DgpParameters dgp;
  std::uint64_t truth_seed = 20240601;
  std::size_t truth_draws = 1'000'000;
  unsigned threads = 1;

  /// Throws ConfigError.
  void validate() const;
};

struct StudyRow {
  Scenario scenario = Scenario::cor_cor;
  std::size_t n = 0;
  EtaPair etas;
  Method method = Method::ml;
  double true_ate = 0.0;
  double mean_estimate = 0.0;
  /// |mean(tau_hat) - tau|.
  double abs_bias = 0.0;
  /// mean |tau_hat - tau|.
  double mean_abs_error = 0.0;
  double rmse = 0.0;
  /// Monte Carlo standard error of mean(tau_hat).
  double mc_se = 0.0;
  std::size_t replications = 0;
  std::size_t failures = 0;
};

struct StudyReport {
  std::vector<StudyRow> rows;
};

/// Replicate r generates its data from stream (seed, r); estimators see the
/// true rates (naive ones ignore them). Failed fits are excluded and counted.
StudyReport run_study(const ScenarioConfig& config);

/// One row per scenario x N x rates x method; bias and RMSE also x100.
void write_report_csv(std::ostream& out, const StudyReport& report);

/// A synthetic stand-in for a childhood-adversity survey: seven covariates,
/// a binary exposure under-reported at constant rates and a binary outcome.
struct SurveyAnalogue {
  SimulatedData sample;
  EtaPair etas;
  /// Population effect of the generating model (Monte Carlo).
  double population_ate = 0.0;
  /// Mean of m1 - m0 over the sampled units.
  double sample_ate = 0.0;
};

SurveyAnalogue generate_survey_analogue(std::size_t n = 2000,
                                        std::uint64_t seed = 2024,
                                        EtaPair etas = {0.2, 0.2});

}  // namespace recall
