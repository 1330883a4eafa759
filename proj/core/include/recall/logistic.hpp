#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "recall/core_model.hpp"

namespace recall {

inline double sigmoid(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(1 + exp(t)) without overflow.
inline double softplus(double t) noexcept {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

struct LogisticOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-9;
};

struct LogisticFit {
  Eigen::VectorXd coef;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  /// Some fitted probability within 1e-10 of 0 or 1.
  bool separation_warning = false;
};

/// Newton-Raphson with step halving on the Bernoulli log-likelihood.
LogisticFit fit_logistic(const Eigen::MatrixXd& design,
                         std::span<const std::uint8_t> response,
                         const LogisticOptions& options = {});

Eigen::VectorXd predict_logistic(const Eigen::MatrixXd& design,
                                 const Eigen::VectorXd& coef);

/// Selected covariate columns, optionally preceded by a column of ones.
Eigen::MatrixXd design_matrix(const Dataset& data,
                              std::span<const std::size_t> columns,
                              bool intercept);

/// Rows of `design` at the given indices.
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& design,
                            std::span<const std::size_t> rows);

}  // namespace recall
