#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "recall/core_model.hpp"
#include "recall/distance.hpp"
#include "recall/estimators.hpp"

namespace recall {

enum class StrataMethod { prop, prog, block };

std::string_view to_string(StrataMethod m);

/// Partition of units into strata labelled 0..count()-1.
struct StratumAssignment {
  std::vector<std::size_t> labels;
  StrataMethod method = StrataMethod::prop;
  /// Per-unit score for score-based strata.
  std::optional<std::vector<double>> scores;
  /// Requested stratum count (prop/prog) or block size (block).
  std::size_t configured = 0;

  std::size_t count() const;
  std::vector<std::vector<std::size_t>> members() const;
  /// Throws InvalidData unless labels are contiguous and cover n units.
  void validate(std::size_t n) const;
};

/// Fitted Pr(Z* = 1 | X) from a logistic fit on the exposure covariates.
std::vector<double> fit_propensity_star(const Dataset& data,
                                        const ModelSpec& models);

/// Linear predictor gamma_x' x of a logistic fit of Y on the outcome
/// covariates among units reporting exposure (who are truly exposed).
/// The intercept is excluded. Throws InsufficientExposed.
std::vector<double> fit_prognostic(const Dataset& data, const ModelSpec& models);

/// Equal-frequency strata by score rank; ties keep unit order. Sizes differ
/// by at most one. Throws DegenerateScores with fewer than `count` distinct
/// scores.
StratumAssignment quantile_strata(std::span<const double> scores,
                                  std::size_t count,
                                  StrataMethod method = StrataMethod::prop);

struct BlockingResult {
  StratumAssignment assignment;
  /// Total within-block distance of each accepted partition.
  std::vector<double> objective_trace;
  int rounds = 0;
  bool converged = false;
};

/// Blocks of exactly `block_size` units by iterated optimal matching:
/// random templates, capacitated matching of the rest, then repeatedly eject
/// each block's most distant member, use the ejected units as templates and
/// rematch. Stops when the partition repeats or would get worse, or after
/// max_rounds (then converged == false). Throws NonDivisibleN.
BlockingResult build_blocks(const RankMahalanobis& geometry,
                            std::size_t block_size, std::uint64_t seed,
                            int max_rounds = 50);
BlockingResult build_blocks(const Dataset& data, std::size_t block_size,
                            std::uint64_t seed, int max_rounds = 50);

/// Sum over blocks of pairwise member distances.
double within_block_distance(const RankMahalanobis& geometry,
                             const StratumAssignment& assignment);

/// Misreporting-corrected 2x2 masses of a stratum, alongside raw counts.
struct CorrectedTable {
  double exposed_y1 = 0.0;
  double exposed_y0 = 0.0;
  double unexposed_y1 = 0.0;
  double unexposed_y0 = 0.0;
  ContingencyTable counts;

  double exposed_mass() const noexcept { return exposed_y1 + exposed_y0; }
  double unexposed_mass() const noexcept { return unexposed_y1 + unexposed_y0; }

  CorrectedTable& operator+=(const CorrectedTable& o) noexcept;
};

CorrectedTable corrected_table(const Dataset& data,
                               std::span<const std::size_t> rows,
                               const RecallBiasSpec& spec);
CorrectedTable corrected_table(const ContingencyTable& table, EtaPair etas);

/// No reported exposed, no reported unexposed, or a non-positive corrected
/// unexposed mass.
bool is_degenerate(const CorrectedTable& table) noexcept;

/// Stratum effect from a corrected table. Throws DegenerateStratum.
double stratum_estimate(const CorrectedTable& table);
/// Per-unit form over the given stratum members.
double stratum_estimate(const Dataset& data, std::span<const std::size_t> rows,
                        const RecallBiasSpec& spec);
/// Count form for constant rates.
double stratum_estimate(const ContingencyTable& table, EtaPair etas);

struct StratumSummary {
  CorrectedTable table;
  /// Mean score (one entry) or mean rank-Mahalanobis embedding.
  Eigen::VectorXd location;
  std::size_t n = 0;
  /// Original stratum ids folded into this one.
  std::vector<std::size_t> sources;
};

using DegeneracyTest = std::function<bool(const StratumSummary&)>;

struct CombineResult {
  std::vector<StratumSummary> strata;
  std::size_t merges = 0;
};

/// Folds each degenerate stratum into the stratum with the nearest location
/// until none is degenerate. Counts and corrected masses add. Throws
/// AllDegenerate when no non-degenerate configuration remains.
CombineResult combine_strata(std::vector<StratumSummary> strata,
                             const DegeneracyTest& degenerate = {});

/// Summaries of each stratum at the given rates; location from scores when
/// present, else from `geometry` centroids.
std::vector<StratumSummary> summarize_strata(const Dataset& data,
                                             const StratumAssignment& assignment,
                                             const RecallBiasSpec& spec,
                                             const RankMahalanobis* geometry);

/// Relabels units so merged strata share a label.
StratumAssignment apply_merges(const StratumAssignment& assignment,
                               const CombineResult& combined);

/// sum_i tau_i * n_i / N.
double aggregate(std::span<const double> tau, std::span<const std::size_t> sizes);

struct StratifiedFit {
  double tau_hat = 0.0;
  std::vector<double> stratum_tau;
  std::vector<std::size_t> stratum_sizes;
  std::size_t merges = 0;
};

/// Corrected estimator over a fixed (pre-merge) partition: summarize, merge
/// degenerate strata, estimate each stratum and aggregate.
StratifiedFit estimate_on_strata(const Dataset& data, const RecallBiasSpec& spec,
                                 const StratumAssignment& assignment,
                                 const RankMahalanobis* geometry);

struct CovariateBalance {
  std::string covariate;
  double treated_mean = 0.0;
  double control_mean = 0.0;
  double pooled_sd = 0.0;
  double asmd = 0.0;
};

/// Absolute standardized mean differences with each unit represented by its
/// stratum's mean covariate vector and strata weighted by corrected treated
/// and control masses. The pooled sd is that of the raw covariate in the
/// reported-exposed and reported-unexposed groups. Constant rates only.
std::vector<CovariateBalance> balance_diagnostics(
    const StratumAssignment& assignment, const Dataset& data, EtaPair etas);

}  // namespace recall
