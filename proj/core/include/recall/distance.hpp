#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Dense>

namespace recall {

/// Rank-based Mahalanobis geometry over covariate rows.
///
/// Each column is replaced by its mid-ranks; the rank covariance is rescaled
/// so every column has the variance of untied ranks, and its pseudo-inverse
/// defines the metric. Rows are stored pre-whitened, so the distance between
/// two units (the quadratic form, not its square root) is the squared
/// Euclidean distance of their embeddings.
class RankMahalanobis {
 public:
  explicit RankMahalanobis(const Eigen::MatrixXd& covariates);

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(embedding_.rows());
  }
  const Eigen::MatrixXd& embedding() const noexcept { return embedding_; }

  double distance(std::size_t i, std::size_t j) const {
    return (embedding_.row(static_cast<Eigen::Index>(i)) -
            embedding_.row(static_cast<Eigen::Index>(j)))
        .squaredNorm();
  }

  /// Mean embedding of the given rows.
  Eigen::VectorXd centroid(std::span<const std::size_t> rows) const;

 private:
  Eigen::MatrixXd embedding_;
};

/// Mid-ranks (1-based, ties averaged) of a column.
Eigen::VectorXd mid_ranks(const Eigen::VectorXd& column);

}  // namespace recall
