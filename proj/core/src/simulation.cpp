#include "recall/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <tuple>

#include "recall/errors.hpp"
#include "recall/inference.hpp"
#include "recall/logistic.hpp"
#include "recall/parallel.hpp"
#include "recall/random.hpp"

namespace recall {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::cor_cor: return "cor_cor";
    case Scenario::cor_mis: return "cor_mis";
    case Scenario::mis_cor: return "mis_cor";
    case Scenario::mis_mis: return "mis_mis";
  }
  return "cor_cor";
}

Scenario parse_scenario(std::string_view text) {
  for (auto s : {Scenario::cor_cor, Scenario::cor_mis, Scenario::mis_cor,
                 Scenario::mis_mis}) {
    if (text == to_string(s)) return s;
  }
  throw ConfigError("unknown scenario '" + std::string(text) +
                    "' (expected cor_cor, cor_mis, mis_cor or mis_mis)");
}

namespace {

bool exposure_mis(Scenario s) {
  return s == Scenario::mis_cor || s == Scenario::mis_mis;
}
bool outcome_mis(Scenario s) {
  return s == Scenario::cor_mis || s == Scenario::mis_mis;
}

double nonlinear(double quad, double inter, double expo,
                 const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return quad * (x[2] * x[2] - 1.0) + inter * x[2] * x[3] +
         expo * (std::exp(x[3] / 2.0) - std::exp(0.125));
}

double linear(double intercept, const std::array<double, 4>& slopes,
              const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  double t = intercept;
  for (int j = 0; j < 4; ++j) t += slopes[static_cast<std::size_t>(j)] * x[j];
  return t;
}

const std::vector<std::string> kCovariateNames{"x1", "x2", "x3", "x4"};

void draw_covariates(Rng& rng, Eigen::RowVectorXd& x) {
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  x[0] = coin(rng) ? 1.0 : 0.0;
  x[1] = coin(rng) ? 1.0 : 0.0;
  x[2] = normal(rng);
  x[3] = normal(rng);
}

}  // namespace

double true_propensity(Scenario scenario, const DgpParameters& p,
                       const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  double t = linear(p.exposure_intercept, p.exposure_slopes, x);
  if (exposure_mis(scenario)) {
    t += nonlinear(p.exposure_quad, p.exposure_inter, p.exposure_expo, x);
  }
  return sigmoid(t);
}

double true_outcome(Scenario scenario, const DgpParameters& p, int z,
                    const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  double t = linear(p.outcome_intercept, p.outcome_slopes, x) + p.gamma_z * z;
  if (outcome_mis(scenario)) {
    t += nonlinear(p.outcome_quad, p.outcome_inter, p.outcome_expo, x);
  }
  return sigmoid(t);
}

SimulatedData generate_dataset(Scenario scenario, std::size_t n,
                               const RecallBiasSpec& spec, std::uint64_t seed,
                               const DgpParameters& params) {
  spec.check_size(n);
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const auto rows = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd x(rows, 4);
  std::vector<std::uint8_t> y(n), z_star(n), z(n), y0(n), y1(n);
  Eigen::VectorXd e(rows), m0(rows), m1(rows);
  Eigen::RowVectorXd draw(4);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    draw_covariates(rng, draw);
    x.row(r) = draw;
    e[r] = true_propensity(scenario, params, x.row(r));
    m0[r] = true_outcome(scenario, params, 0, x.row(r));
    m1[r] = true_outcome(scenario, params, 1, x.row(r));
    z[i] = unif(rng) < e[r];
    y0[i] = unif(rng) < m0[r];
    y1[i] = unif(rng) < m1[r];
    y[i] = z[i] ? y1[i] : y0[i];
    const double flip = unif(rng);
    z_star[i] = z[i] && !(flip < spec.eta_for(y[i], i));
  }
  return {Dataset(std::move(x), std::move(y), std::move(z_star), kCovariateNames,
                  std::move(z)),
          std::move(y0), std::move(y1), std::move(e), std::move(m0), std::move(m1)};
}

double true_ate(Scenario scenario, std::uint64_t seed, const DgpParameters& params,
                std::size_t draws) {
  using Key = std::tuple<int, std::uint64_t, std::size_t, std::vector<double>>;
  static std::mutex mutex;
  static std::map<Key, double> cache;

  std::vector<double> flat{params.exposure_intercept, params.outcome_intercept,
                           params.gamma_z,            params.outcome_quad,
                           params.outcome_inter,      params.outcome_expo};
  flat.insert(flat.end(), params.outcome_slopes.begin(), params.outcome_slopes.end());
  // The effect only depends on the outcome arm.
  const int arm = outcome_mis(scenario) ? 1 : 0;
  const Key key{arm, seed, draws, flat};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  auto rng = make_rng(seed, 0x7472757468ULL);
  Eigen::RowVectorXd x(4);
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    draw_covariates(rng, x);
    const double d = true_outcome(scenario, params, 1, x) -
                     true_outcome(scenario, params, 0, x);
    const double t = sum + d;
    comp += std::abs(sum) >= std::abs(d) ? (sum - t) + d : (d - t) + sum;
    sum = t;
  }
  const double value = (sum + comp) / static_cast<double>(draws);
  std::lock_guard lock(mutex);
  cache.emplace(key, value);
  return value;
}

void ScenarioConfig::validate() const {
  if (replications < 1) throw ConfigError("replications must be at least 1");
  if (strata_size < 1) throw ConfigError("strata_size must be at least 1");
  if (n < 2 * strata_size) {
    throw ConfigError("n = " + std::to_string(n) + " is below 2 * strata_size = " +
                      std::to_string(2 * strata_size));
  }
  if (methods.empty()) throw ConfigError("no estimators configured");
  if (truth_draws < 1) throw ConfigError("truth_draws must be at least 1");
  check_etas(etas);
}

StudyReport run_study(const ScenarioConfig& config) {
  config.validate();
  const double truth =
      true_ate(config.scenario, config.truth_seed, config.dgp, config.truth_draws);
  const auto spec = RecallBiasSpec::constant(config.etas);
  const std::size_t reps = config.replications;
  const std::size_t k = config.methods.size();

  std::vector<std::optional<double>> estimates(reps * k);
  parallel_for(reps, config.threads, [&](std::size_t r) {
    const auto sim = generate_dataset(config.scenario, config.n, spec,
                                      derive_seed(config.seed, r, 0), config.dgp);
    for (std::size_t m = 0; m < k; ++m) {
      EstimatorConfig est;
      est.method = config.methods[m];
      est.strata_count = config.n / config.strata_size;
      est.block_size = config.strata_size;
      est.seed = derive_seed(config.seed, r, 1);
      try {
        const auto run = run_estimator(sim.data, spec, est);
        if (est.method == Method::ml && !run.converged) continue;
        estimates[r * k + m] = run.result.tau_hat;
      } catch (const Error& e) {
        if (e.error_class() == ErrorClass::usage) throw;
      }
    }
  });

  StudyReport report;
  for (std::size_t m = 0; m < k; ++m) {
    StudyRow row;
    row.scenario = config.scenario;
    row.n = config.n;
    row.etas = config.etas;
    row.method = config.methods[m];
    row.true_ate = truth;
    std::vector<double> values;
    for (std::size_t r = 0; r < reps; ++r) {
      if (const auto& v = estimates[r * k + m]) values.push_back(*v);
    }
    row.replications = values.size();
    row.failures = reps - values.size();
    if (!values.empty()) {
      const double cnt = static_cast<double>(values.size());
      double mean = 0.0, mae = 0.0;
      for (double v : values) {
        mean += v;
        mae += std::abs(v - truth);
      }
      mean /= cnt;
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      const double bias = mean - truth;
      row.mean_estimate = mean;
      row.abs_bias = std::abs(bias);
      row.mean_abs_error = mae / cnt;
      row.rmse = std::sqrt(bias * bias + ss / cnt);
      row.mc_se = values.size() > 1 ? std::sqrt(ss / (cnt - 1.0) / cnt) : 0.0;
    } else {
      row.mean_estimate = row.abs_bias = row.mean_abs_error = row.rmse =
          row.mc_se = std::nan("");
    }
    report.rows.push_back(row);
  }
  return report;
}

void write_report_csv(std::ostream& out, const StudyReport& report) {
  out << "scenario,n,eta0,eta1,method,true_ate,mean_estimate,abs_bias,"
         "mean_abs_error,rmse,mc_se,abs_bias_x100,rmse_x100,replications,failures\n";
  for (const auto& r : report.rows) {
    out << to_string(r.scenario) << ',' << r.n << ',' << format_number(r.etas.eta0)
        << ',' << format_number(r.etas.eta1) << ',' << to_string(r.method) << ','
        << format_number(r.true_ate) << ',' << format_number(r.mean_estimate) << ','
        << format_number(r.abs_bias) << ',' << format_number(r.mean_abs_error)
        << ',' << format_number(r.rmse) << ',' << format_number(r.mc_se) << ','
        << format_number(100.0 * r.abs_bias) << ',' << format_number(100.0 * r.rmse)
        << ',' << r.replications << ',' << r.failures << '\n';
  }
}

namespace {

const std::vector<std::string> kSurveyNames{
    "female", "father_present", "rural", "parent_educ", "log_income",
    "siblings", "iq"};

void draw_survey(Rng& rng, Eigen::RowVectorXd& x) {
  std::bernoulli_distribution female(0.52), father(0.85), rural(0.35);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::poisson_distribution<int> siblings(2.4);
  x[0] = female(rng);
  x[1] = father(rng);
  x[2] = rural(rng);
  x[3] = normal(rng);
  x[4] = 0.4 * x[3] + std::sqrt(1.0 - 0.16) * normal(rng);
  x[5] = std::min(siblings(rng), 9);
  x[6] = 0.3 * x[3] + std::sqrt(1.0 - 0.09) * normal(rng);
}

double survey_propensity(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return sigmoid(-0.9 + 0.3 * x[0] - 0.6 * x[1] + 0.25 * x[2] - 0.3 * x[3] -
                 0.35 * x[4] + 0.08 * x[5] - 0.2 * x[6]);
}

double survey_outcome(int z, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return sigmoid(-0.5 + 0.6 * z - 0.25 * x[0] - 0.2 * x[1] + 0.1 * x[2] -
                 0.2 * x[3] - 0.15 * x[4] + 0.05 * x[5] - 0.1 * x[6]);
}

}  // namespace

SurveyAnalogue generate_survey_analogue(std::size_t n, std::uint64_t seed,
                                        EtaPair etas) {
  check_etas(etas);
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto rows = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd x(rows, 7);
  std::vector<std::uint8_t> y(n), z_star(n), z(n), y0(n), y1(n);
  Eigen::VectorXd e(rows), m0(rows), m1(rows);
  Eigen::RowVectorXd draw(7);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    draw_survey(rng, draw);
    x.row(r) = draw;
    e[r] = survey_propensity(x.row(r));
    m0[r] = survey_outcome(0, x.row(r));
    m1[r] = survey_outcome(1, x.row(r));
    z[i] = unif(rng) < e[r];
    y0[i] = unif(rng) < m0[r];
    y1[i] = unif(rng) < m1[r];
    y[i] = z[i] ? y1[i] : y0[i];
    const double flip = unif(rng);
    z_star[i] = z[i] && !(flip < (y[i] ? etas.eta1 : etas.eta0));
  }

  SurveyAnalogue out;
  out.etas = etas;
  out.sample_ate = (m1 - m0).mean();
  auto truth_rng = make_rng(seed, 0x7472757468ULL);
  Eigen::RowVectorXd u(7);
  double sum = 0.0;
  constexpr std::size_t kDraws = 1'000'000;
  for (std::size_t i = 0; i < kDraws; ++i) {
    draw_survey(truth_rng, u);
    sum += survey_outcome(1, u) - survey_outcome(0, u);
  }
  out.population_ate = sum / static_cast<double>(kDraws);
  out.sample = {Dataset(std::move(x), std::move(y), std::move(z_star), kSurveyNames,
                        std::move(z)),
                std::move(y0), std::move(y1), std::move(e), std::move(m0),
                std::move(m1)};
  return out;
}

}  // namespace recall
