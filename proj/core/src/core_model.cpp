#include "recall/core_model.hpp"

#include <cmath>
#include <string>

#include "recall/errors.hpp"

namespace recall {

namespace {

constexpr double kSimplexTolerance = 1e-9;
// Recovered cells within this distance below zero are rounding, not misfit.
constexpr double kNegativeSlack = 1e-12;

void check_binary(const std::vector<std::uint8_t>& v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > 1) {
      throw NonBinaryValue(std::string(what) + " at row " +
                           std::to_string(i + 1) + " is not 0/1");
    }
  }
}

bool valid_eta(double eta) { return std::isfinite(eta) && eta >= 0.0 && eta < 1.0; }

}  // namespace

Dataset::Dataset(Eigen::MatrixXd covariates, std::vector<std::uint8_t> outcome,
                 std::vector<std::uint8_t> exposure_star,
                 std::vector<std::string> covariate_names,
                 std::optional<std::vector<std::uint8_t>> exposure_true)
    : covariates_(std::move(covariates)),
      outcome_(std::move(outcome)),
      exposure_star_(std::move(exposure_star)),
      exposure_true_(std::move(exposure_true)),
      names_(std::move(covariate_names)) {
  const auto n = outcome_.size();
  if (exposure_star_.size() != n ||
      static_cast<std::size_t>(covariates_.rows()) != n) {
    throw InvalidData("column lengths differ");
  }
  if (names_.size() != static_cast<std::size_t>(covariates_.cols())) {
    throw InvalidData("covariate names do not match covariate dimension");
  }
  check_binary(outcome_, "outcome");
  check_binary(exposure_star_, "reported exposure");
  if (exposure_true_) {
    if (exposure_true_->size() != n) throw InvalidData("true exposure length");
    check_binary(*exposure_true_, "true exposure");
    for (std::size_t i = 0; i < n; ++i) {
      if (exposure_star_[i] == 1 && (*exposure_true_)[i] == 0) {
        throw InvalidData("row " + std::to_string(i + 1) +
                          " reports exposure that did not occur");
      }
    }
  }
  if (!covariates_.allFinite()) throw InvalidData("non-finite covariate value");
}

Dataset Dataset::from_units(const std::vector<Unit>& units,
                            std::vector<std::string> covariate_names) {
  const auto n = units.size();
  const auto d = covariate_names.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<std::uint8_t> y(n), zs(n), z(n);
  bool all_have_z = !units.empty();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = units[i];
    if (static_cast<std::size_t>(u.x.size()) != d) {
      throw InvalidData("unit " + std::to_string(i + 1) +
                        " has covariate dimension " +
                        std::to_string(u.x.size()) + ", expected " +
                        std::to_string(d));
    }
    if ((u.y != 0 && u.y != 1) || (u.z_star != 0 && u.z_star != 1)) {
      throw NonBinaryValue("unit " + std::to_string(i + 1));
    }
    x.row(static_cast<Eigen::Index>(i)) = u.x.transpose();
    y[i] = static_cast<std::uint8_t>(u.y);
    zs[i] = static_cast<std::uint8_t>(u.z_star);
    if (u.z) {
      if (*u.z != 0 && *u.z != 1) throw NonBinaryValue("unit true exposure");
      z[i] = static_cast<std::uint8_t>(*u.z);
    } else {
      all_have_z = false;
    }
  }
  std::optional<std::vector<std::uint8_t>> truth;
  if (all_have_z) truth = std::move(z);
  return Dataset(std::move(x), std::move(y), std::move(zs),
                 std::move(covariate_names), std::move(truth));
}

std::span<const std::uint8_t> Dataset::true_exposure() const {
  if (!exposure_true_) throw InvalidData("dataset has no true exposure");
  return *exposure_true_;
}

Unit Dataset::unit(std::size_t i) const {
  Unit u;
  u.x = covariates_.row(static_cast<Eigen::Index>(i)).transpose();
  u.y = outcome_[i];
  u.z_star = exposure_star_[i];
  if (exposure_true_) u.z = (*exposure_true_)[i];
  return u;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  const auto m = rows.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(m), covariates_.cols());
  std::vector<std::uint8_t> y(m), zs(m);
  std::optional<std::vector<std::uint8_t>> z;
  if (exposure_true_) z.emplace(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = rows[i];
    x.row(static_cast<Eigen::Index>(i)) =
        covariates_.row(static_cast<Eigen::Index>(r));
    y[i] = outcome_[r];
    zs[i] = exposure_star_[r];
    if (z) (*z)[i] = (*exposure_true_)[r];
  }
  return Dataset(std::move(x), std::move(y), std::move(zs), names_,
                 std::move(z));
}

Dataset Dataset::with_covariates(Eigen::MatrixXd covariates,
                                 std::vector<std::string> names) const {
  return Dataset(std::move(covariates), outcome_, exposure_star_,
                 std::move(names), exposure_true_);
}

void check_etas(EtaPair etas) {
  if (!valid_eta(etas.eta0) || !valid_eta(etas.eta1)) {
    throw ConfigError("misreporting probabilities must lie in [0, 1); got (" +
                      std::to_string(etas.eta0) + ", " +
                      std::to_string(etas.eta1) + ")");
  }
}

RecallBiasSpec RecallBiasSpec::constant(double eta0, double eta1) {
  check_etas({eta0, eta1});
  RecallBiasSpec s;
  s.mode_ = Mode::constant;
  s.constant_ = {eta0, eta1};
  return s;
}

RecallBiasSpec RecallBiasSpec::per_unit(std::vector<double> eta0,
                                        std::vector<double> eta1) {
  if (eta0.size() != eta1.size()) {
    throw ConfigError("per-unit eta vectors differ in length");
  }
  for (std::size_t i = 0; i < eta0.size(); ++i) check_etas({eta0[i], eta1[i]});
  RecallBiasSpec s;
  s.mode_ = Mode::per_unit;
  s.eta0_ = std::move(eta0);
  s.eta1_ = std::move(eta1);
  return s;
}

EtaPair RecallBiasSpec::constants() const {
  if (!is_constant()) {
    throw ConfigError("operation requires constant misreporting probabilities");
  }
  return constant_;
}

RecallBiasSpec RecallBiasSpec::subset(std::span<const std::size_t> rows) const {
  if (is_constant()) return *this;
  std::vector<double> e0(rows.size()), e1(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    e0[i] = eta0_[rows[i]];
    e1[i] = eta1_[rows[i]];
  }
  return per_unit(std::move(e0), std::move(e1));
}

void RecallBiasSpec::check_size(std::size_t n) const {
  if (!is_constant() && eta0_.size() != n) {
    throw ConfigError("per-unit eta vectors have length " +
                      std::to_string(eta0_.size()) + " but data has " +
                      std::to_string(n) + " units");
  }
}

template <class Tag>
Cells<Tag> validated(const Cells<Tag>& c) {
  const double vals[] = {c.p11, c.p10, c.p01, c.p00};
  for (double v : vals) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0 + kSimplexTolerance) {
      throw InvalidSimplex("cell probability out of [0, 1]");
    }
  }
  const double s = c.sum();
  if (std::abs(s - 1.0) > kSimplexTolerance) {
    throw InvalidSimplex("cells sum to " + std::to_string(s));
  }
  return {c.p11 / s, c.p10 / s, c.p01 / s, c.p00 / s};
}

template CellProbabilities validated(const CellProbabilities&);
template ObservedCells validated(const ObservedCells&);

ObservedCells ContingencyTable::frequencies() const {
  const double total = static_cast<double>(n());
  if (total <= 0) throw DegenerateMargin("empty contingency table");
  return {static_cast<double>(a_star) / total,
          static_cast<double>(c_star) / total,
          static_cast<double>(b_star) / total,
          static_cast<double>(d_star) / total};
}

ContingencyTable tabulate(const Dataset& data) {
  ContingencyTable t;
  const auto y = data.outcome();
  const auto z = data.exposure_star();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (z[i]) {
      (y[i] ? t.a_star : t.b_star)++;
    } else {
      (y[i] ? t.c_star : t.d_star)++;
    }
  }
  return t;
}

ContingencyTable tabulate(const Dataset& data,
                          std::span<const std::size_t> rows) {
  ContingencyTable t;
  const auto y = data.outcome();
  const auto z = data.exposure_star();
  for (auto i : rows) {
    if (z[i]) {
      (y[i] ? t.a_star : t.b_star)++;
    } else {
      (y[i] ? t.c_star : t.d_star)++;
    }
  }
  return t;
}

CellProbabilities adjust_cells(const ObservedCells& observed, EtaPair etas) {
  check_etas(etas);
  const auto o = validated(observed);
  const double r1 = etas.eta1 / (1.0 - etas.eta1);
  const double r0 = etas.eta0 / (1.0 - etas.eta0);
  CellProbabilities t;
  t.p11 = o.p11 / (1.0 - etas.eta1);
  t.p10 = o.p10 - r1 * o.p11;
  t.p01 = o.p01 / (1.0 - etas.eta0);
  t.p00 = o.p00 - r0 * o.p01;
  for (double* cell : {&t.p10, &t.p00}) {
    if (*cell < -kNegativeSlack) {
      throw InadmissibleEtas(
          "assumed misreporting rates exceed what the observed table allows");
    }
    if (*cell < 0.0) *cell = 0.0;
  }
  return t;
}

ObservedCells misclassify_cells(const CellProbabilities& truth, EtaPair etas) {
  check_etas(etas);
  const auto t = validated(truth);
  ObservedCells o;
  o.p11 = (1.0 - etas.eta1) * t.p11;
  o.p10 = t.p10 + etas.eta1 * t.p11;
  o.p01 = (1.0 - etas.eta0) * t.p01;
  o.p00 = t.p00 + etas.eta0 * t.p01;
  return o;
}

double joint_observed_prob(double m0, double m1, double e, EtaPair etas, int y,
                           int z_star) {
  if (z_star == 1) {
    return y == 1 ? m1 * e * (1.0 - etas.eta1)
                  : (1.0 - m1) * e * (1.0 - etas.eta0);
  }
  return y == 1 ? m1 * e * etas.eta1 + m0 * (1.0 - e)
                : (1.0 - m1) * e * etas.eta0 + (1.0 - m0) * (1.0 - e);
}

double cate_point(const ObservedCells& observed, EtaPair etas) {
  check_etas(etas);
  const auto o = validated(observed);
  const double r1 = etas.eta1 / (1.0 - etas.eta1);
  const double r0 = etas.eta0 / (1.0 - etas.eta0);

  const double exposed_y1 = o.p11 / (1.0 - etas.eta1);
  const double exposed_y0 = o.p01 / (1.0 - etas.eta0);
  const double unexposed_y1 = o.p10 - r1 * o.p11;
  const double unexposed_y0 = o.p00 - r0 * o.p01;
  if (unexposed_y1 < -kNegativeSlack || unexposed_y0 < -kNegativeSlack) {
    throw InadmissibleEtas(
        "assumed misreporting rates exceed what the observed table allows");
  }
  const double exposed = exposed_y1 + exposed_y0;
  const double unexposed = unexposed_y1 + unexposed_y0;
  if (exposed <= 0.0) throw DegenerateMargin("no exposed mass");
  if (unexposed <= 0.0) throw DegenerateMargin("no unexposed mass");
  return exposed_y1 / exposed - std::max(unexposed_y1, 0.0) / unexposed;
}

}  // namespace recall
