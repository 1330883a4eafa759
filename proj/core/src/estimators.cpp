#include "recall/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "recall/errors.hpp"
#include "recall/logistic.hpp"

namespace recall {

namespace {

constexpr double kSeparationEps = 1e-10;
constexpr double kPositivityEps = 1e-6;
constexpr double kTinyProbability = 1e-300;

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

Eigen::MatrixXd with_leading_column(const Eigen::MatrixXd& X,
                                    std::span<const std::uint8_t> col) {
  Eigen::MatrixXd out(X.rows(), X.cols() + 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out(i, 0) = col[static_cast<std::size_t>(i)];
  }
  out.rightCols(X.cols()) = X;
  return out;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::ml: return "ml";
    case Method::prop: return "prop";
    case Method::prog: return "prog";
    case Method::block: return "block";
    case Method::naive_ipw: return "naive_ipw";
    case Method::naive_or: return "naive_or";
  }
  return "ml";
}

Method parse_method(std::string_view text) {
  for (auto m : {Method::ml, Method::prop, Method::prog, Method::block,
                 Method::naive_ipw, Method::naive_or}) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(text) +
                    "' (expected ml, prop, prog, block, naive_ipw, naive_or)");
}

ModelSpec ModelSpec::all_covariates(std::size_t dim) {
  ModelSpec s;
  for (std::size_t j = 0; j < dim; ++j) {
    s.outcome_covariates.push_back(j);
    s.exposure_covariates.push_back(j);
  }
  return s;
}

void ModelSpec::validate(std::size_t dim) const {
  for (const auto* cols : {&outcome_covariates, &exposure_covariates}) {
    for (auto c : *cols) {
      if (c >= dim) {
        throw ConfigError("model references covariate column " +
                          std::to_string(c) + " but data has " +
                          std::to_string(dim));
      }
    }
    auto sorted = *cols;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("model lists a covariate column twice");
    }
  }
  if (!include_intercept && outcome_covariates.empty() &&
      outcome_form == OutcomeForm::separate_arms) {
    throw ConfigError("outcome model has no terms");
  }
}

ObservedLikelihood::ObservedLikelihood(const Dataset& data,
                                       const RecallBiasSpec& spec,
                                       const ModelSpec& models)
    : data_(&data),
      spec_(spec),
      form_(models.outcome_form),
      exposure_(design_matrix(data, models.exposure_covariates,
                              models.include_intercept)),
      outcome_(design_matrix(data, models.outcome_covariates,
                             models.include_intercept)) {
  spec_.check_size(data.size());
}

Eigen::Index ObservedLikelihood::outcome_size() const noexcept {
  return form_ == OutcomeForm::shared_slope ? outcome_.cols() + 1
                                            : 2 * outcome_.cols();
}

Eigen::VectorXd ObservedLikelihood::pack(const Eigen::VectorXd& beta,
                                         const Eigen::VectorXd& gamma) const {
  Eigen::VectorXd theta(beta.size() + gamma.size());
  theta << beta, gamma;
  return theta;
}

double ObservedLikelihood::value(const Eigen::VectorXd& theta) const {
  return evaluate(theta, nullptr);
}

double ObservedLikelihood::value_and_gradient(const Eigen::VectorXd& theta,
                                              Eigen::VectorXd& gradient) const {
  return evaluate(theta, &gradient);
}

double ObservedLikelihood::evaluate(const Eigen::VectorXd& theta,
                                    Eigen::VectorXd* gradient) const {
  const Eigen::Index pe = exposure_size();
  const Eigen::Index px = outcome_.cols();
  const auto beta = theta.head(pe);
  const auto gamma = theta.tail(outcome_size());

  const Eigen::VectorXd lin_e = exposure_ * beta;
  Eigen::VectorXd lin0, lin1;
  if (form_ == OutcomeForm::shared_slope) {
    lin0 = outcome_ * gamma.tail(px);
    lin1 = lin0.array() + gamma[0];
  } else {
    lin0 = outcome_ * gamma.head(px);
    lin1 = outcome_ * gamma.tail(px);
  }

  const auto y = data_->outcome();
  const auto zs = data_->exposure_star();
  const auto n = static_cast<Eigen::Index>(data_->size());

  Eigen::VectorXd g_e, g_0, g_1;
  if (gradient) {
    g_e.resize(n);
    g_0.resize(n);
    g_1.resize(n);
  }
  CompensatedSum ll;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double e = sigmoid(lin_e[i]);
    const double m0 = sigmoid(lin0[i]);
    const double m1 = sigmoid(lin1[i]);
    const double eta0 = spec_.eta0(u);
    const double eta1 = spec_.eta1(u);

    double p, dm0, dm1, de;
    if (zs[u]) {
      if (y[u]) {
        p = m1 * e * (1.0 - eta1);
        dm0 = 0.0;
        dm1 = e * (1.0 - eta1);
        de = m1 * (1.0 - eta1);
      } else {
        p = (1.0 - m1) * e * (1.0 - eta0);
        dm0 = 0.0;
        dm1 = -e * (1.0 - eta0);
        de = (1.0 - m1) * (1.0 - eta0);
      }
    } else if (y[u]) {
      p = m1 * e * eta1 + m0 * (1.0 - e);
      dm0 = 1.0 - e;
      dm1 = e * eta1;
      de = m1 * eta1 - m0;
    } else {
      p = (1.0 - m1) * e * eta0 + (1.0 - m0) * (1.0 - e);
      dm0 = -(1.0 - e);
      dm1 = -e * eta0;
      de = (1.0 - m1) * eta0 - (1.0 - m0);
    }
    p = std::max(p, kTinyProbability);
    ll.add(std::log(p));
    if (gradient) {
      g_e[i] = de / p * e * (1.0 - e);
      g_0[i] = dm0 / p * m0 * (1.0 - m0);
      g_1[i] = dm1 / p * m1 * (1.0 - m1);
    }
  }

  if (gradient) {
    gradient->resize(size());
    gradient->head(pe) = exposure_.transpose() * g_e;
    if (form_ == OutcomeForm::shared_slope) {
      (*gradient)[pe] = g_1.sum();
      gradient->tail(px) = outcome_.transpose() * (g_0 + g_1);
    } else {
      gradient->segment(pe, px) = outcome_.transpose() * g_0;
      gradient->tail(px) = outcome_.transpose() * g_1;
    }
  }
  return ll.value();
}

namespace {

Eigen::VectorXd initial_gamma(const Dataset& data, const ModelSpec& models,
                              const Eigen::MatrixXd& outcome_design) {
  if (models.outcome_form == OutcomeForm::shared_slope) {
    const auto X = with_leading_column(outcome_design, data.exposure_star());
    return fit_logistic(X, data.outcome()).coef;
  }
  const auto px = outcome_design.cols();
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(2 * px);
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<std::size_t> rows;
    std::vector<std::uint8_t> resp;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.exposure_star()[i] == arm) {
        rows.push_back(i);
        resp.push_back(data.outcome()[i]);
      }
    }
    if (rows.size() > static_cast<std::size_t>(px)) {
      gamma.segment(arm * px, px) =
          fit_logistic(select_rows(outcome_design, rows), resp).coef;
    }
  }
  return gamma;
}

/// Central-difference Hessian of the analytic gradient, symmetrized.
Eigen::MatrixXd numeric_hessian(const ObservedLikelihood& lik,
                                const Eigen::VectorXd& theta) {
  const auto p = theta.size();
  Eigen::MatrixXd H(p, p);
  Eigen::VectorXd gp, gm;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double h = 1e-5 * (1.0 + std::abs(theta[j]));
    Eigen::VectorXd tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    lik.value_and_gradient(tp, gp);
    lik.value_and_gradient(tm, gm);
    H.col(j) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

}  // namespace

FittedModels fit_mle(const Dataset& data, const RecallBiasSpec& spec,
                     const ModelSpec& models, const MleOptions& options) {
  if (data.empty()) throw InvalidData("maximum likelihood fit on empty data");
  models.validate(data.dim());
  const ObservedLikelihood lik(data, spec, models);
  const double n = static_cast<double>(data.size());

  const Eigen::VectorXd beta0 =
      fit_logistic(lik.exposure_design(), data.exposure_star()).coef;
  const Eigen::VectorXd gamma0 =
      initial_gamma(data, models, lik.outcome_design());
  Eigen::VectorXd theta = lik.pack(beta0, gamma0);
  const auto p = theta.size();

  FittedModels fit;
  fit.models = models;
  fit.spec = spec;

  // Quasi-Newton (BFGS) on f = -loglik / n with Armijo backtracking.
  Eigen::VectorXd grad;
  double ll = lik.value_and_gradient(theta, grad);
  fit.loglik_trace.push_back(ll);
  Eigen::VectorXd g = -grad / n;
  double f = -ll / n;
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(p, p);
  bool first_step = true;
  int iterations = 0;

  auto converged = [&](const Eigen::VectorXd& raw_grad) {
    return raw_grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance;
  };

  while (iterations < options.max_iterations && !converged(grad)) {
    Eigen::VectorXd dir = -Hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      Hinv.setIdentity();
      dir = -g;
      slope = g.dot(dir);
    }
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial, trial_grad;
    double trial_ll = 0.0;
    for (int k = 0; k < 60; ++k) {
      trial = theta + step * dir;
      trial_ll = lik.value_and_gradient(trial, trial_grad);
      const double trial_f = -trial_ll / n;
      if (std::isfinite(trial_f) && trial_f <= f + 1e-4 * step * slope &&
          trial_ll >= ll) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    ++iterations;

    const Eigen::VectorXd s = trial - theta;
    const Eigen::VectorXd g_new = -trial_grad / n;
    const Eigen::VectorXd yk = g_new - g;
    const double sy = s.dot(yk);
    if (sy > 1e-14 * s.norm() * yk.norm()) {
      if (first_step) {
        Hinv *= sy / yk.squaredNorm();
        first_step = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p, p);
      Hinv = (I - rho * s * yk.transpose()) * Hinv *
                 (I - rho * yk * s.transpose()) +
             rho * s * s.transpose();
    }
    theta = trial;
    grad = trial_grad;
    g = g_new;
    ll = trial_ll;
    f = -ll / n;
    fit.loglik_trace.push_back(ll);
  }

  // Newton polish: BFGS stalls once objective changes fall below rounding.
  const double polish_target = options.gradient_tolerance * 1e-3;
  for (int k = 0; k < 25 && iterations < options.max_iterations; ++k) {
    if (grad.lpNorm<Eigen::Infinity>() < polish_target) break;
    const Eigen::MatrixXd H = numeric_hessian(lik, theta);
    const Eigen::VectorXd dir = -H.ldlt().solve(grad);
    if (!dir.allFinite()) break;
    bool accepted = false;
    double step = 1.0;
    for (int h = 0; h < 30; ++h) {
      Eigen::VectorXd trial = theta + step * dir, trial_grad;
      const double trial_ll = lik.value_and_gradient(trial, trial_grad);
      if (std::isfinite(trial_ll) && trial_ll >= ll &&
          trial_grad.lpNorm<Eigen::Infinity>() <
              grad.lpNorm<Eigen::Infinity>()) {
        theta = trial;
        grad = trial_grad;
        ll = trial_ll;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    ++iterations;
    fit.loglik_trace.push_back(ll);
  }

  const auto pe = lik.exposure_size();
  fit.beta = theta.head(pe);
  fit.gamma = theta.tail(lik.outcome_size());
  fit.loglik = ll;
  fit.gradient_max_norm = grad.lpNorm<Eigen::Infinity>();
  fit.converged = converged(grad);
  fit.iterations = iterations;

  const auto fv = fitted_values(fit, data);
  for (const auto* v : {&fv.m0, &fv.m1, &fv.e}) {
    if ((v->array() < kSeparationEps).any() ||
        (v->array() > 1.0 - kSeparationEps).any()) {
      fit.separation_warning = true;
    }
  }
  return fit;
}

FittedValues fitted_values(const FittedModels& fit, const Dataset& data) {
  const auto& models = fit.models;
  const Eigen::MatrixXd Xe =
      design_matrix(data, models.exposure_covariates, models.include_intercept);
  const Eigen::MatrixXd Xm =
      design_matrix(data, models.outcome_covariates, models.include_intercept);
  const auto px = Xm.cols();
  if (fit.beta.size() != Xe.cols()) {
    throw ConfigError("fitted exposure model does not match data");
  }

  FittedValues fv;
  fv.e = predict_logistic(Xe, fit.beta);
  Eigen::VectorXd lin0, lin1;
  if (models.outcome_form == OutcomeForm::shared_slope) {
    if (fit.gamma.size() != px + 1) {
      throw ConfigError("fitted outcome model does not match data");
    }
    lin0 = Xm * fit.gamma.tail(px);
    lin1 = lin0.array() + fit.gamma[0];
  } else {
    if (fit.gamma.size() != 2 * px) {
      throw ConfigError("fitted outcome model does not match data");
    }
    lin0 = Xm * fit.gamma.head(px);
    lin1 = Xm * fit.gamma.tail(px);
  }
  fv.m0 = lin0.unaryExpr([](double t) { return sigmoid(t); });
  fv.m1 = lin1.unaryExpr([](double t) { return sigmoid(t); });
  return fv;
}

EstimateResult ate_ml(const FittedModels& fit, const Dataset& data) {
  const auto fv = fitted_values(fit, data);
  EstimateResult r;
  r.method = Method::ml;
  r.spec = fit.spec;
  r.tau_hat = (fv.m1 - fv.m0).mean();
  return r;
}

EstimateResult naive_ipw(const Dataset& data, const ModelSpec& models) {
  if (data.empty()) throw InvalidData("IPW on empty data");
  models.validate(data.dim());
  const Eigen::MatrixXd Xe =
      design_matrix(data, models.exposure_covariates, models.include_intercept);
  const auto fit = fit_logistic(Xe, data.exposure_star());
  const Eigen::VectorXd score = predict_logistic(Xe, fit.coef);

  const auto y = data.outcome();
  const auto z = data.exposure_star();
  double num1 = 0, den1 = 0, num0 = 0, den0 = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double s = score[static_cast<Eigen::Index>(i)];
    if (s < kPositivityEps || s > 1.0 - kPositivityEps) {
      throw PositivityViolation("fitted reported-exposure score " +
                                std::to_string(s) + " at row " +
                                std::to_string(i + 1));
    }
    if (z[i]) {
      num1 += y[i] / s;
      den1 += 1.0 / s;
    } else {
      num0 += y[i] / (1.0 - s);
      den0 += 1.0 / (1.0 - s);
    }
  }
  if (den1 == 0.0 || den0 == 0.0) {
    throw PositivityViolation("one reported-exposure arm is empty");
  }
  EstimateResult r;
  r.method = Method::naive_ipw;
  r.spec = RecallBiasSpec::constant(0.0, 0.0);
  r.tau_hat = num1 / den1 - num0 / den0;
  return r;
}

EstimateResult naive_or(const Dataset& data, const ModelSpec& models) {
  if (data.empty()) throw InvalidData("outcome regression on empty data");
  models.validate(data.dim());
  const Eigen::MatrixXd Xm =
      design_matrix(data, models.outcome_covariates, models.include_intercept);
  const auto fit =
      fit_logistic(with_leading_column(Xm, data.exposure_star()), data.outcome());
  const Eigen::VectorXd lin0 = Xm * fit.coef.tail(Xm.cols());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lin0.size(); ++i) {
    acc += sigmoid(lin0[i] + fit.coef[0]) - sigmoid(lin0[i]);
  }
  EstimateResult r;
  r.method = Method::naive_or;
  r.spec = RecallBiasSpec::constant(0.0, 0.0);
  r.tau_hat = acc / static_cast<double>(lin0.size());
  return r;
}

}  // namespace recall
