#include "recall/logistic.hpp"

#include <cmath>

#include "recall/errors.hpp"

namespace recall {

namespace {

constexpr double kSeparationEps = 1e-10;

double loglik_at(const Eigen::MatrixXd& X, std::span<const std::uint8_t> y,
                 const Eigen::VectorXd& coef) {
  const Eigen::VectorXd lin = X * coef;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < lin.size(); ++i) {
    ll += (y[static_cast<std::size_t>(i)] ? lin[i] : 0.0) - softplus(lin[i]);
  }
  return ll;
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& X,
                         std::span<const std::uint8_t> y,
                         const LogisticOptions& options) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (n == 0) throw InvalidData("logistic fit on empty data");
  if (static_cast<std::size_t>(n) != y.size()) {
    throw InvalidData("design and response lengths differ");
  }

  LogisticFit fit;
  fit.coef = Eigen::VectorXd::Zero(p);
  fit.loglik = loglik_at(X, y, fit.coef);

  Eigen::VectorXd prob(n), grad(p);
  Eigen::MatrixXd hess(p, p);
  int full_steps = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd lin = X * fit.coef;
    Eigen::VectorXd w(n), resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(lin[i]);
      w[i] = prob[i] * (1.0 - prob[i]);
      resid[i] = static_cast<double>(y[static_cast<std::size_t>(i)]) - prob[i];
    }
    grad.noalias() = X.transpose() * resid;
    if (grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      fit.converged = true;
      break;
    }
    hess.noalias() = X.transpose() * w.asDiagonal() * X;
    // A tiny ridge keeps the step defined under (quasi-)separation.
    hess.diagonal().array() += 1e-12 * (1.0 + hess.diagonal().array());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    const Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite()) break;

    // Near the optimum log-likelihood differences are below rounding, so a
    // line search would reject good steps; take the full Newton step.
    if (grad.dot(step) < 1e-10 * (1.0 + std::abs(fit.loglik))) {
      fit.coef += step;
      fit.loglik = loglik_at(X, y, fit.coef);
      fit.iterations = it + 1;
      if (++full_steps > 5) {
        fit.converged = grad.lpNorm<Eigen::Infinity>() <
                        std::sqrt(options.gradient_tolerance);
        break;
      }
      continue;
    }

    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      const Eigen::VectorXd trial = fit.coef + scale * step;
      const double ll = loglik_at(X, y, trial);
      if (ll >= fit.loglik) {
        fit.coef = trial;
        fit.loglik = ll;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    fit.iterations = it + 1;
    if (!accepted) {
      // No ascent possible at machine precision: stationary point reached.
      fit.converged = grad.lpNorm<Eigen::Infinity>() <
                      std::sqrt(options.gradient_tolerance);
      break;
    }
  }

  const Eigen::VectorXd fitted = predict_logistic(X, fit.coef);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (fitted[i] < kSeparationEps || fitted[i] > 1.0 - kSeparationEps) {
      fit.separation_warning = true;
      break;
    }
  }
  return fit;
}

Eigen::VectorXd predict_logistic(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& coef) {
  Eigen::VectorXd lin = X * coef;
  for (Eigen::Index i = 0; i < lin.size(); ++i) lin[i] = sigmoid(lin[i]);
  return lin;
}

Eigen::MatrixXd design_matrix(const Dataset& data,
                              std::span<const std::size_t> columns,
                              bool intercept) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index offset = intercept ? 1 : 0;
  Eigen::MatrixXd X(n, offset + static_cast<Eigen::Index>(columns.size()));
  if (intercept) X.col(0).setOnes();
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] >= data.dim()) {
      throw ConfigError("model references covariate column " +
                        std::to_string(columns[j]) + " but data has " +
                        std::to_string(data.dim()));
    }
    X.col(offset + static_cast<Eigen::Index>(j)) =
        data.covariates().col(static_cast<Eigen::Index>(columns[j]));
  }
  return X;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& design,
                            std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), design.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        design.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace recall
