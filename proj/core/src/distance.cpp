#include "recall/distance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace recall {

Eigen::VectorXd mid_ranks(const Eigen::VectorXd& column) {
  const auto n = column.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return column[a] < column[b];
  });
  Eigen::VectorXd ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && column[order[static_cast<std::size_t>(j + 1)]] ==
                            column[order[static_cast<std::size_t>(i)]]) {
      ++j;
    }
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) {
      ranks[order[static_cast<std::size_t>(k)]] = avg;
    }
    i = j + 1;
  }
  return ranks;
}

RankMahalanobis::RankMahalanobis(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  const auto d = x.cols();
  embedding_ = Eigen::MatrixXd::Zero(n, d);
  if (n < 2 || d == 0) return;

  Eigen::MatrixXd ranks(n, d);
  for (Eigen::Index j = 0; j < d; ++j) ranks.col(j) = mid_ranks(x.col(j));
  const Eigen::RowVectorXd mean = ranks.colwise().mean();
  ranks.rowwise() -= mean;
  Eigen::MatrixXd cov = ranks.transpose() * ranks / static_cast<double>(n - 1);

  // Ties shrink a column's rank variance; restore it to the untied value.
  const double nn = static_cast<double>(n);
  const double untied = nn * (nn + 1.0) / 12.0;
  Eigen::VectorXd scale(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    scale[j] = cov(j, j) > 0.0 ? std::sqrt(untied / cov(j, j)) : 0.0;
  }
  cov = scale.asDiagonal() * cov * scale.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double cutoff = 1e-10 * std::max(lambda.maxCoeff(), 0.0);
  Eigen::VectorXd inv_sqrt(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    inv_sqrt[j] = lambda[j] > cutoff ? 1.0 / std::sqrt(lambda[j]) : 0.0;
  }
  // Raw rank differences against the rescaled covariance: row r maps to
  // r V Lambda^{+1/2}.
  embedding_ = ranks * eig.eigenvectors() * inv_sqrt.asDiagonal();
}

Eigen::VectorXd RankMahalanobis::centroid(std::span<const std::size_t> rows) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(embedding_.cols());
  if (rows.empty()) return c;
  for (auto r : rows) c += embedding_.row(static_cast<Eigen::Index>(r)).transpose();
  return c / static_cast<double>(rows.size());
}

}  // namespace recall
