#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "recall/bounds.hpp"
#include "recall/core_model.hpp"
#include "recall/distance.hpp"
#include "recall/estimators.hpp"
#include "recall/stratification.hpp"

namespace recall {

/// Everything needed to run one estimator apart from the data and rates.
struct EstimatorConfig {
  Method method = Method::prop;
  /// Defaults to every covariate in both models.
  std::optional<ModelSpec> models;
  std::size_t strata_count = 10;
  std::size_t block_size = 20;
  /// Seed for the random templates of the blocking step.
  std::uint64_t seed = 0;
  MleOptions mle;

  ModelSpec resolved_models(const Dataset& data) const;
  bool stratified() const noexcept;
};

/// A partition built once and reusable across misreporting rates.
struct PreparedStrata {
  StratumAssignment assignment;
  std::optional<RankMahalanobis> geometry;
  int blocking_rounds = 0;
  bool blocking_converged = true;
};

/// Scores and strata (prop, prog) or blocks (block). Throws ConfigError for
/// methods that do not stratify.
PreparedStrata build_strata(const Dataset& data, const EstimatorConfig& config);

struct EstimatorRun {
  EstimateResult result;
  /// Strata before and after nearest-neighbour merging.
  std::size_t strata_built = 0;
  std::size_t strata_used = 0;
  std::size_t merges = 0;
  int blocking_rounds = 0;
  bool converged = true;
  int iterations = 0;
  bool separation_warning = false;
};

/// Stratified estimate on a prepared partition.
EstimatorRun run_on_strata(const Dataset& data, const RecallBiasSpec& spec,
                           const PreparedStrata& strata,
                           const EstimatorConfig& config);

/// Full pipeline for one method under fixed rates.
EstimatorRun run_estimator(const Dataset& data, const RecallBiasSpec& spec,
                           const EstimatorConfig& config);

struct BootstrapOptions {
  std::size_t replicates = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct BootstrapResult {
  double point = 0.0;
  /// Quantiles of the replicate estimates at (1 - level)/2 and (1 + level)/2.
  ConfidenceInterval percentile;
  /// point -/+ z * standard error.
  ConfidenceInterval normal;
  double std_error = 0.0;
  /// Half the percentile interval width, for "point +/- h" reporting.
  double half_width = 0.0;
  std::size_t replicates = 0;
  std::size_t failures = 0;
  /// Successful replicate estimates in replicate order.
  std::vector<double> draws;
};

/// Nonparametric bootstrap that reruns the whole pipeline (scores, strata or
/// blocks, merges, estimation) on every resample. Replicate r draws from a
/// stream fixed by (seed, r). Throws ConfigError for fewer than 100
/// replicates and ReplicateFailure when more than 10% of them fail.
BootstrapResult bootstrap_ci(const Dataset& data, const RecallBiasSpec& spec,
                             const EstimatorConfig& config,
                             const BootstrapOptions& options);

/// Type-7 sample quantile of sorted values.
double sample_quantile(std::span<const double> sorted, double prob);

enum class SweepKind { delta, eta, grid };

std::string_view to_string(SweepKind k);

struct SweepPoint {
  double delta = 0.0;
  double eta0 = 0.0;
  double eta1 = 0.0;
  /// Point estimate (eta and grid sweeps).
  std::optional<double> estimate;
  /// Bound endpoints (delta sweep) or bootstrap interval (eta sweep).
  std::optional<double> lower;
  std::optional<double> upper;
  bool feasible = true;
  std::size_t merges = 0;
};

struct SweepResult {
  SweepKind kind = SweepKind::grid;
  Method method = Method::prop;
  BoundAssumption assumption = BoundAssumption::symmetric_box;
  std::vector<SweepPoint> points;
};

struct SweepOptions {
  unsigned threads = 1;
  /// Lattice step for maximum-likelihood bounds.
  double lattice_step = 0.05;
  /// When set, each eta-sweep point also gets a bootstrap interval.
  std::optional<BootstrapOptions> bootstrap;
};

/// Stratified bounds per delta: per-stratum table bounds under the
/// assumption, endpoints aggregated with n_i/N weights. Strata whose bounds
/// degenerate at a delta are merged into their nearest neighbour for that
/// delta; points with no feasible merge are flagged. For ml the bounds are
/// the extremes of the plug-in estimate over a lattice on the admissible
/// region. Naive methods throw ConfigError.
SweepResult delta_sweep(const Dataset& data, const EstimatorConfig& config,
                        BoundAssumption assumption, std::span<const double> deltas,
                        const SweepOptions& options = {});

/// Point estimate along eta0 == eta1.
SweepResult eta_sweep(const Dataset& data, const EstimatorConfig& config,
                      std::span<const double> etas,
                      const SweepOptions& options = {});

/// Point estimate on the eta0 x eta1 lattice, eta0 outer and eta1 inner.
SweepResult sensitivity_grid(const Dataset& data, const EstimatorConfig& config,
                             std::span<const double> eta0_grid,
                             std::span<const double> eta1_grid,
                             const SweepOptions& options = {});

/// Feasible lattice points with a negative estimate.
std::vector<EtaPair> negative_region(const SweepResult& sweep);

/// Evenly spaced grid from `from` to `to` inclusive, rounded to 12 decimals.
std::vector<double> make_grid(double from, double to, double step);

/// Shortest round-trip decimal form; "NA" for missing values.
std::string format_number(double value);
std::string format_number(const std::optional<double>& value);

/// Columns delta,lower,upper,feasible.
void write_bounds_csv(std::ostream& out, const SweepResult& sweep);
/// Columns eta0,eta1,estimate,lower,upper,feasible.
void write_grid_csv(std::ostream& out, const SweepResult& sweep);

}  // namespace recall
