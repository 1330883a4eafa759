#include "recall/inference.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>

#include <boost/math/distributions/normal.hpp>

#include "recall/errors.hpp"
#include "recall/parallel.hpp"
#include "recall/random.hpp"

namespace recall {

ModelSpec EstimatorConfig::resolved_models(const Dataset& data) const {
  ModelSpec m = models ? *models : ModelSpec::all_covariates(data.dim());
  m.validate(data.dim());
  return m;
}

bool EstimatorConfig::stratified() const noexcept {
  return method == Method::prop || method == Method::prog ||
         method == Method::block;
}

PreparedStrata build_strata(const Dataset& data, const EstimatorConfig& config) {
  PreparedStrata out;
  switch (config.method) {
    case Method::prop: {
      const auto scores = fit_propensity_star(data, config.resolved_models(data));
      out.assignment = quantile_strata(scores, config.strata_count, StrataMethod::prop);
      break;
    }
    case Method::prog: {
      const auto scores = fit_prognostic(data, config.resolved_models(data));
      out.assignment = quantile_strata(scores, config.strata_count, StrataMethod::prog);
      break;
    }
    case Method::block: {
      out.geometry.emplace(data.covariates());
      auto blocks = build_blocks(*out.geometry, config.block_size, config.seed);
      out.assignment = std::move(blocks.assignment);
      out.blocking_rounds = blocks.rounds;
      out.blocking_converged = blocks.converged;
      break;
    }
    default:
      throw ConfigError("method " + std::string(to_string(config.method)) +
                        " does not stratify");
  }
  return out;
}

EstimatorRun run_on_strata(const Dataset& data, const RecallBiasSpec& spec,
                           const PreparedStrata& strata,
                           const EstimatorConfig& config) {
  const auto fit = estimate_on_strata(
      data, spec, strata.assignment,
      strata.geometry ? &*strata.geometry : nullptr);
  EstimatorRun run;
  run.result.tau_hat = fit.tau_hat;
  run.result.method = config.method;
  run.result.spec = spec;
  run.strata_built = strata.assignment.count();
  run.strata_used = fit.stratum_tau.size();
  run.merges = fit.merges;
  run.blocking_rounds = strata.blocking_rounds;
  run.converged = strata.blocking_converged;
  return run;
}

EstimatorRun run_estimator(const Dataset& data, const RecallBiasSpec& spec,
                           const EstimatorConfig& config) {
  spec.check_size(data.size());
  if (config.stratified()) {
    return run_on_strata(data, spec, build_strata(data, config), config);
  }
  const ModelSpec models = config.resolved_models(data);
  EstimatorRun run;
  switch (config.method) {
    case Method::ml: {
      const auto fit = fit_mle(data, spec, models, config.mle);
      run.result = ate_ml(fit, data);
      run.converged = fit.converged;
      run.iterations = fit.iterations;
      run.separation_warning = fit.separation_warning;
      break;
    }
    case Method::naive_ipw:
      run.result = naive_ipw(data, models);
      break;
    default:
      run.result = naive_or(data, models);
      break;
  }
  run.result.spec = spec;
  return run;
}

double sample_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw InvalidData("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_ci(const Dataset& data, const RecallBiasSpec& spec,
                             const EstimatorConfig& config,
                             const BootstrapOptions& options) {
  if (options.replicates < 100) {
    throw ConfigError("bootstrap needs at least 100 replicates, got " +
                      std::to_string(options.replicates));
  }
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw ConfigError("confidence level must lie in (0, 1)");
  }
  const std::size_t n = data.size();
  const std::size_t b = options.replicates;

  BootstrapResult out;
  out.point = run_estimator(data, spec, config).result.tau_hat;
  out.replicates = b;

  std::vector<double> estimates(b, 0.0);
  std::vector<char> ok(b, 0);
  std::vector<std::string> reasons(b);
  parallel_for(b, options.threads, [&](std::size_t r) {
    auto rng = make_rng(options.seed, r);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(n);
    for (auto& row : rows) row = pick(rng);
    EstimatorConfig cfg = config;
    cfg.seed = derive_seed(options.seed, r);
    try {
      const auto sample = data.subset(rows);
      const auto run = run_estimator(sample, spec.subset(rows), cfg);
      if (config.method == Method::ml && !run.converged) {
        reasons[r] = "likelihood maximization did not converge";
        return;
      }
      estimates[r] = run.result.tau_hat;
      ok[r] = 1;
    } catch (const Error& e) {
      if (e.error_class() == ErrorClass::usage) throw;
      reasons[r] = e.what();
    }
  });

  for (std::size_t r = 0; r < b; ++r) {
    if (ok[r]) {
      out.draws.push_back(estimates[r]);
    } else {
      ++out.failures;
    }
  }
  if (out.failures * 10 > b) {
    const auto first = std::find_if(reasons.begin(), reasons.end(),
                                    [](const auto& s) { return !s.empty(); });
    throw ReplicateFailure(std::to_string(out.failures) + " of " +
                           std::to_string(b) +
                           " bootstrap replicates failed; first: " + *first);
  }

  std::vector<double> sorted = out.draws;
  std::sort(sorted.begin(), sorted.end());
  const double alpha = 1.0 - options.level;
  out.percentile = {sample_quantile(sorted, alpha / 2.0),
                    sample_quantile(sorted, 1.0 - alpha / 2.0), options.level};
  out.half_width = 0.5 * (out.percentile.upper - out.percentile.lower);

  const double m = static_cast<double>(out.draws.size());
  const double mean = std::accumulate(out.draws.begin(), out.draws.end(), 0.0) / m;
  double ss = 0.0;
  for (double v : out.draws) ss += (v - mean) * (v - mean);
  out.std_error = out.draws.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
  const double z = boost::math::quantile(boost::math::normal(),
                                         1.0 - alpha / 2.0);
  out.normal = {out.point - z * out.std_error, out.point + z * out.std_error,
                options.level};
  return out;
}

std::string_view to_string(SweepKind k) {
  switch (k) {
    case SweepKind::delta: return "delta";
    case SweepKind::eta: return "eta";
    case SweepKind::grid: return "grid";
  }
  return "grid";
}

namespace {

void check_grid(std::span<const double> grid, const char* name) {
  if (grid.empty()) throw ConfigError(std::string(name) + " grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] < 1.0)) {
      throw ConfigError(std::string(name) + " value " + format_number(grid[i]) +
                        " is outside [0, 1)");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw ConfigError(std::string(name) + " grid must be strictly increasing");
    }
  }
}

void require_adjusting(const EstimatorConfig& config) {
  if (config.method == Method::naive_ipw || config.method == Method::naive_or) {
    throw ConfigError("method " + std::string(to_string(config.method)) +
                      " ignores misreporting and has no sensitivity analysis");
  }
}

/// Evaluates the estimate at each pair; strata are built once.
std::vector<SweepPoint> evaluate_pairs(const Dataset& data,
                                       const EstimatorConfig& config,
                                       const std::vector<EtaPair>& pairs,
                                       unsigned threads) {
  std::optional<PreparedStrata> strata;
  if (config.stratified()) strata = build_strata(data, config);

  std::vector<SweepPoint> points(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    auto& p = points[i];
    p.eta0 = pairs[i].eta0;
    p.eta1 = pairs[i].eta1;
    const auto spec = RecallBiasSpec::constant(pairs[i]);
    try {
      const auto run = strata ? run_on_strata(data, spec, *strata, config)
                              : run_estimator(data, spec, config);
      p.estimate = run.result.tau_hat;
      p.merges = run.merges;
    } catch (const Error& e) {
      if (e.error_class() != ErrorClass::numerical) throw;
      p.feasible = false;
    }
  });
  return points;
}

double round12(double v) { return std::round(v * 1e12) / 1e12; }

SweepResult delta_sweep_ml(const Dataset& data, const EstimatorConfig& config,
                           BoundAssumption assumption,
                           std::span<const double> deltas,
                           const SweepOptions& options) {
  if (!(options.lattice_step > 0.0)) throw ConfigError("lattice step must be positive");
  auto axis = [&](double delta) {
    std::vector<double> v;
    for (double x : make_grid(0.0, delta, options.lattice_step)) v.push_back(x);
    if (v.back() < delta) v.push_back(round12(delta));
    return v;
  };
  auto admissible = [&](double e0, double e1) {
    switch (assumption) {
      case BoundAssumption::eta0_le_eta1: return e0 <= e1;
      case BoundAssumption::eta1_le_eta0: return e1 <= e0;
      default: return true;
    }
  };

  std::map<std::pair<double, double>, std::size_t> index;
  std::vector<EtaPair> pairs;
  std::vector<std::vector<std::size_t>> members(deltas.size());
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const auto values = axis(deltas[k]);
    for (double e0 : values) {
      for (double e1 : values) {
        if (!admissible(e0, e1)) continue;
        auto [it, fresh] = index.try_emplace({e0, e1}, pairs.size());
        if (fresh) pairs.push_back({e0, e1});
        members[k].push_back(it->second);
      }
    }
  }
  const auto values = evaluate_pairs(data, config, pairs, options.threads);

  SweepResult out;
  out.kind = SweepKind::delta;
  out.method = config.method;
  out.assumption = assumption;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    SweepPoint p;
    p.delta = deltas[k];
    p.eta0 = p.eta1 = deltas[k];
    for (auto i : members[k]) {
      if (!values[i].estimate) continue;
      const double v = *values[i].estimate;
      p.lower = p.lower ? std::min(*p.lower, v) : v;
      p.upper = p.upper ? std::max(*p.upper, v) : v;
    }
    p.feasible = p.lower.has_value();
    out.points.push_back(p);
  }
  return out;
}

}  // namespace

SweepResult delta_sweep(const Dataset& data, const EstimatorConfig& config,
                        BoundAssumption assumption, std::span<const double> deltas,
                        const SweepOptions& options) {
  require_adjusting(config);
  check_grid(deltas, "delta");
  if (config.method == Method::ml) {
    return delta_sweep_ml(data, config, assumption, deltas, options);
  }

  const auto strata = build_strata(data, config);
  const auto base = summarize_strata(
      data, strata.assignment, RecallBiasSpec::constant(0.0, 0.0),
      strata.geometry ? &*strata.geometry : nullptr);
  const double total = static_cast<double>(data.size());

  SweepResult out;
  out.kind = SweepKind::delta;
  out.method = config.method;
  out.assumption = assumption;
  out.points.resize(deltas.size());
  parallel_for(deltas.size(), options.threads, [&](std::size_t k) {
    const double delta = deltas[k];
    auto& p = out.points[k];
    p.delta = delta;
    p.eta0 = p.eta1 = delta;
    const auto degenerate = [&](const StratumSummary& s) {
      try {
        table_bounds(s.table.counts, delta, assumption);
        return false;
      } catch (const DegenerateBound&) {
        return true;
      }
    };
    try {
      const auto combined = combine_strata(base, degenerate);
      double lower = 0.0, upper = 0.0;
      for (const auto& s : combined.strata) {
        const auto b = table_bounds(s.table.counts, delta, assumption);
        const double w = static_cast<double>(s.n) / total;
        lower += w * b.lower;
        upper += w * b.upper;
      }
      p.lower = lower;
      p.upper = upper;
      p.merges = combined.merges;
    } catch (const AllDegenerate&) {
      p.feasible = false;
    }
  });
  return out;
}

SweepResult eta_sweep(const Dataset& data, const EstimatorConfig& config,
                      std::span<const double> etas, const SweepOptions& options) {
  require_adjusting(config);
  check_grid(etas, "eta");
  std::vector<EtaPair> pairs;
  for (double e : etas) pairs.push_back({e, e});

  SweepResult out;
  out.kind = SweepKind::eta;
  out.method = config.method;
  out.points = evaluate_pairs(data, config, pairs, options.threads);
  if (options.bootstrap) {
    for (auto& p : out.points) {
      if (!p.feasible) continue;
      try {
        const auto boot = bootstrap_ci(
            data, RecallBiasSpec::constant(p.eta0, p.eta1), config, *options.bootstrap);
        p.lower = boot.percentile.lower;
        p.upper = boot.percentile.upper;
      } catch (const ReplicateFailure&) {
        p.feasible = false;
      }
    }
  }
  return out;
}

SweepResult sensitivity_grid(const Dataset& data, const EstimatorConfig& config,
                             std::span<const double> eta0_grid,
                             std::span<const double> eta1_grid,
                             const SweepOptions& options) {
  require_adjusting(config);
  check_grid(eta0_grid, "eta0");
  check_grid(eta1_grid, "eta1");
  std::vector<EtaPair> pairs;
  for (double e0 : eta0_grid) {
    for (double e1 : eta1_grid) pairs.push_back({e0, e1});
  }
  SweepResult out;
  out.kind = SweepKind::grid;
  out.method = config.method;
  out.points = evaluate_pairs(data, config, pairs, options.threads);
  return out;
}

std::vector<EtaPair> negative_region(const SweepResult& sweep) {
  std::vector<EtaPair> out;
  for (const auto& p : sweep.points) {
    if (p.feasible && p.estimate && *p.estimate < 0.0) out.push_back({p.eta0, p.eta1});
  }
  return out;
}

std::vector<double> make_grid(double from, double to, double step) {
  if (!(step > 0.0)) throw ConfigError("grid step must be positive");
  if (!(to >= from)) throw ConfigError("grid end lies before its start");
  const auto count = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
  std::vector<double> out;
  for (std::size_t i = 0; i <= count; ++i) {
    out.push_back(round12(from + static_cast<double>(i) * step));
  }
  return out;
}

std::string format_number(double value) {
  if (!std::isfinite(value)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string format_number(const std::optional<double>& value) {
  return value ? format_number(*value) : std::string("NA");
}

void write_bounds_csv(std::ostream& out, const SweepResult& sweep) {
  out << "delta,lower,upper,feasible\n";
  for (const auto& p : sweep.points) {
    out << format_number(p.delta) << ',' << format_number(p.lower) << ','
        << format_number(p.upper) << ',' << (p.feasible ? "true" : "false") << '\n';
  }
}

void write_grid_csv(std::ostream& out, const SweepResult& sweep) {
  out << "eta0,eta1,estimate,lower,upper,feasible\n";
  for (const auto& p : sweep.points) {
    out << format_number(p.eta0) << ',' << format_number(p.eta1) << ','
        << format_number(p.estimate) << ',' << format_number(p.lower) << ','
        << format_number(p.upper) << ',' << (p.feasible ? "true" : "false") << '\n';
  }
}

}  // namespace recall
