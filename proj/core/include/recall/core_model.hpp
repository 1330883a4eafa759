#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace recall {

/// A single observation. `z` (true exposure) is only known for simulated data.
struct Unit {
  Eigen::VectorXd x;
  int y = 0;
  int z_star = 0;
  std::optional<int> z;
};

/// Column-major store of units with validated binary columns.
///
/// Invariants enforced at construction: every unit has the same covariate
/// dimension, y and z* are 0/1, and when the true exposure is present
/// z* = 1 implies z = 1 (exposure can only be under-reported).
class Dataset {
 public:
  Dataset() = default;
  Dataset(Eigen::MatrixXd covariates, std::vector<std::uint8_t> outcome,
          std::vector<std::uint8_t> exposure_star,
          std::vector<std::string> covariate_names,
          std::optional<std::vector<std::uint8_t>> exposure_true = std::nullopt);

  static Dataset from_units(const std::vector<Unit>& units,
                            std::vector<std::string> covariate_names);

  std::size_t size() const noexcept { return outcome_.size(); }
  std::size_t dim() const noexcept {
    return static_cast<std::size_t>(covariates_.cols());
  }
  bool empty() const noexcept { return outcome_.empty(); }

  const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
  std::span<const std::uint8_t> outcome() const noexcept { return outcome_; }
  std::span<const std::uint8_t> exposure_star() const noexcept {
    return exposure_star_;
  }
  bool has_true_exposure() const noexcept { return exposure_true_.has_value(); }
  std::span<const std::uint8_t> true_exposure() const;
  const std::vector<std::string>& covariate_names() const noexcept {
    return names_;
  }

  Unit unit(std::size_t i) const;

  /// Rows in the given order; indices may repeat (bootstrap resamples).
  Dataset subset(std::span<const std::size_t> rows) const;

  /// Same units with a replaced covariate block (e.g. permuted columns).
  Dataset with_covariates(Eigen::MatrixXd covariates,
                          std::vector<std::string> names) const;

 private:
  Eigen::MatrixXd covariates_;
  std::vector<std::uint8_t> outcome_;
  std::vector<std::uint8_t> exposure_star_;
  std::optional<std::vector<std::uint8_t>> exposure_true_;
  std::vector<std::string> names_;
};

/// Constant misreporting probabilities (eta0 among Y=0, eta1 among Y=1).
struct EtaPair {
  double eta0 = 0.0;
  double eta1 = 0.0;

  friend bool operator==(const EtaPair&, const EtaPair&) = default;
};

/// Probability that a truly exposed unit reports "unexposed", by outcome.
/// Either constant or one value per unit.
class RecallBiasSpec {
 public:
  enum class Mode { constant, per_unit };

  RecallBiasSpec() = default;
  static RecallBiasSpec constant(double eta0, double eta1);
  static RecallBiasSpec constant(EtaPair etas) {
    return constant(etas.eta0, etas.eta1);
  }
  static RecallBiasSpec per_unit(std::vector<double> eta0,
                                 std::vector<double> eta1);

  Mode mode() const noexcept { return mode_; }
  bool is_constant() const noexcept { return mode_ == Mode::constant; }

  /// Throws ConfigError in per-unit mode.
  EtaPair constants() const;

  double eta0(std::size_t unit) const noexcept {
    return is_constant() ? constant_.eta0 : eta0_[unit];
  }
  double eta1(std::size_t unit) const noexcept {
    return is_constant() ? constant_.eta1 : eta1_[unit];
  }
  double eta_for(int y, std::size_t unit) const noexcept {
    return y == 1 ? eta1(unit) : eta0(unit);
  }

  /// Per-unit values follow the resampled rows; constants are unchanged.
  RecallBiasSpec subset(std::span<const std::size_t> rows) const;

  /// Throws ConfigError unless per-unit vectors have length n.
  void check_size(std::size_t n) const;

 private:
  Mode mode_ = Mode::constant;
  EtaPair constant_{};
  std::vector<double> eta0_;
  std::vector<double> eta1_;
};

struct TrueCellsTag {};
struct ObservedCellsTag {};

/// Joint distribution of (Y, exposure) as p11, p10, p01, p00 where the first
/// index is Y and the second is exposure. The tag separates true-exposure
/// cells from cells over the reported exposure Z*.
template <class Tag>
struct Cells {
  double p11 = 0.0;
  double p10 = 0.0;
  double p01 = 0.0;
  double p00 = 0.0;

  double sum() const noexcept { return p11 + p10 + p01 + p00; }
  /// Pr(Y=1 | exposed) and Pr(Y=1 | unexposed).
  double p1_given_1() const noexcept { return p11 / (p11 + p01); }
  double p1_given_0() const noexcept { return p10 / (p10 + p00); }
  double contrast() const noexcept { return p1_given_1() - p1_given_0(); }

  friend bool operator==(const Cells&, const Cells&) = default;
};

using CellProbabilities = Cells<TrueCellsTag>;
using ObservedCells = Cells<ObservedCellsTag>;

/// Checks a simplex to 1e-9 and renormalizes; throws InvalidSimplex otherwise.
template <class Tag>
Cells<Tag> validated(const Cells<Tag>& cells);

/// Observed 2x2 table of one stratum: a = (Z*=1,Y=1), b = (Z*=1,Y=0),
/// c = (Z*=0,Y=1), d = (Z*=0,Y=0).
struct ContingencyTable {
  std::int64_t a_star = 0;
  std::int64_t b_star = 0;
  std::int64_t c_star = 0;
  std::int64_t d_star = 0;

  std::int64_t n() const noexcept { return a_star + b_star + c_star + d_star; }
  ObservedCells frequencies() const;

  ContingencyTable& operator+=(const ContingencyTable& o) noexcept {
    a_star += o.a_star;
    b_star += o.b_star;
    c_star += o.c_star;
    d_star += o.d_star;
    return *this;
  }
  friend ContingencyTable operator+(ContingencyTable l,
                                    const ContingencyTable& r) noexcept {
    return l += r;
  }
  friend bool operator==(const ContingencyTable&,
                         const ContingencyTable&) = default;
};

ContingencyTable tabulate(const Dataset& data);
ContingencyTable tabulate(const Dataset& data,
                          std::span<const std::size_t> rows);

/// Undo under-reporting: recover true-exposure cells from observed cells.
/// Throws InadmissibleEtas if a recovered cell would be negative.
CellProbabilities adjust_cells(const ObservedCells& observed, EtaPair etas);

/// Apply under-reporting to true-exposure cells. Inverse of adjust_cells.
ObservedCells misclassify_cells(const CellProbabilities& truth, EtaPair etas);

/// Pr(Y = y, Z* = z_star | x) given the outcome models m0, m1 and the
/// propensity e at x, by total probability over the true exposure.
double joint_observed_prob(double m0, double m1, double e, EtaPair etas, int y,
                           int z_star);

/// Conditional treatment effect identified from observed cells and known
/// misreporting rates. Throws InadmissibleEtas or DegenerateMargin.
double cate_point(const ObservedCells& observed, EtaPair etas);

void check_etas(EtaPair etas);

}  // namespace recall
