#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "recall/core_model.hpp"

namespace recall {

enum class Method { ml, prop, prog, block, naive_ipw, naive_or };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

enum class OutcomeForm {
  /// logit m(z, x) = gamma_z * z + gamma_x' x
  shared_slope,
  /// independent coefficient vectors for z = 0 and z = 1
  separate_arms,
};

/// Which covariate columns enter the outcome and exposure models.
struct ModelSpec {
  std::vector<std::size_t> outcome_covariates;
  std::vector<std::size_t> exposure_covariates;
  bool include_intercept = true;
  OutcomeForm outcome_form = OutcomeForm::shared_slope;

  static ModelSpec all_covariates(std::size_t dim);
  void validate(std::size_t dim) const;
};

struct FittedModels {
  ModelSpec models;
  RecallBiasSpec spec;
  /// Exposure model coefficients over the exposure design.
  Eigen::VectorXd beta;
  /// shared_slope: [gamma_z, outcome design coefficients...];
  /// separate_arms: [arm-0 coefficients..., arm-1 coefficients...].
  Eigen::VectorXd gamma;
  double loglik = 0.0;
  double gradient_max_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  bool separation_warning = false;
  /// Log-likelihood after every accepted step, starting at the initial point.
  std::vector<double> loglik_trace;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
};

struct EstimateResult {
  double tau_hat = 0.0;
  Method method = Method::ml;
  RecallBiasSpec spec;
  std::optional<ConfidenceInterval> interval;
};

/// Observed-data log-likelihood sum_i log Pr(Y_i, Z*_i | X_i) with logistic
/// exposure and outcome models. Parameters are packed as [beta, gamma].
class ObservedLikelihood {
 public:
  ObservedLikelihood(const Dataset& data, const RecallBiasSpec& spec,
                     const ModelSpec& models);

  Eigen::Index exposure_size() const noexcept { return exposure_.cols(); }
  Eigen::Index outcome_size() const noexcept;
  Eigen::Index size() const noexcept { return exposure_size() + outcome_size(); }

  Eigen::VectorXd pack(const Eigen::VectorXd& beta,
                       const Eigen::VectorXd& gamma) const;

  double value(const Eigen::VectorXd& theta) const;
  double value_and_gradient(const Eigen::VectorXd& theta,
                            Eigen::VectorXd& gradient) const;

  const Eigen::MatrixXd& exposure_design() const noexcept { return exposure_; }
  const Eigen::MatrixXd& outcome_design() const noexcept { return outcome_; }

 private:
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* gradient) const;

  const Dataset* data_;
  RecallBiasSpec spec_;
  OutcomeForm form_;
  Eigen::MatrixXd exposure_;
  Eigen::MatrixXd outcome_;
};

struct MleOptions {
  int max_iterations = 500;
  /// Max-norm of the log-likelihood gradient at which the fit counts as
  /// converged.
  double gradient_tolerance = 1e-6;
};

/// Maximizes the observed-data likelihood under the given misreporting
/// rates. Never throws on non-convergence: the best iterate is returned with
/// `converged == false`.
FittedModels fit_mle(const Dataset& data, const RecallBiasSpec& spec,
                     const ModelSpec& models, const MleOptions& options = {});

struct FittedValues {
  Eigen::VectorXd m0;
  Eigen::VectorXd m1;
  Eigen::VectorXd e;
};

FittedValues fitted_values(const FittedModels& fit, const Dataset& data);

/// Plug-in effect: mean over units of m1(x) - m0(x).
EstimateResult ate_ml(const FittedModels& fit, const Dataset& data);

/// Hajek-normalized IPW contrast on the reported exposure, ignoring
/// misreporting. Throws PositivityViolation when a fitted score leaves
/// [1e-6, 1 - 1e-6].
EstimateResult naive_ipw(const Dataset& data, const ModelSpec& models);

/// Plug-in contrast from a logistic fit of Y on (Z*, X), ignoring
/// misreporting.
EstimateResult naive_or(const Dataset& data, const ModelSpec& models);

}  // namespace recall
