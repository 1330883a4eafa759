#include "cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli/config_file.hpp"
#include "cli/csv_input.hpp"
#include "recall/bounds.hpp"
#include "recall/inference.hpp"
#include "recall/simulation.hpp"
#include "recall/stratification.hpp"

namespace recall::cli {

using nlohmann::json;

int exit_code_for(const Error& e) noexcept {
  switch (e.error_class()) {
    case ErrorClass::usage: return kUsage;
    case ErrorClass::data: return kData;
    case ErrorClass::numerical: return kNumerical;
  }
  return kNumerical;
}

namespace {

struct DataOptions {
  std::string input;
  std::string outcome = "y";
  std::string exposure = "zstar";
  std::vector<std::string> covariates;
  std::vector<std::string> outcome_covariates;
  std::vector<std::string> exposure_covariates;
  std::string outcome_form = "shared";
};

struct EstimatorOptions {
  std::string method;
  std::size_t strata = 10;
  std::size_t block_size = 20;
  int max_iter = 500;
  double grad_tol = 1e-6;
};

struct OutputOptions {
  std::string output;
  std::string format;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string config;
};

void add_data_options(CLI::App* sub, DataOptions& d) {
  sub->add_option("--input", d.input, "CSV file with a header row")->required();
  sub->add_option("--outcome", d.outcome, "Binary outcome column")
      ->capture_default_str();
  sub->add_option("--exposure", d.exposure, "Binary reported-exposure column")
      ->capture_default_str();
  sub->add_option("--covariates", d.covariates,
                  "Comma-separated covariate columns (default: all others)")
      ->delimiter(',');
  sub->add_option("--outcome-covariates", d.outcome_covariates,
                  "Covariates of the outcome model (default: all)")
      ->delimiter(',');
  sub->add_option("--exposure-covariates", d.exposure_covariates,
                  "Covariates of the exposure model (default: all)")
      ->delimiter(',');
  sub->add_option("--outcome-form", d.outcome_form, "shared or separate")
      ->check(CLI::IsMember({"shared", "separate"}))
      ->capture_default_str();
}

void add_estimator_options(CLI::App* sub, EstimatorOptions& e, bool required,
                           const std::string& fallback) {
  auto* opt = sub->add_option("--method", e.method,
                              "ml, prop, prog, block, naive_ipw or naive_or");
  if (required) {
    opt->required();
  } else {
    e.method = fallback;
    opt->capture_default_str();
  }
  sub->add_option("--strata", e.strata, "Number of score strata")->capture_default_str();
  sub->add_option("--block-size", e.block_size, "Units per block")->capture_default_str();
  sub->add_option("--max-iter", e.max_iter, "Likelihood iterations")
      ->capture_default_str();
  sub->add_option("--grad-tol", e.grad_tol, "Likelihood gradient tolerance")
      ->capture_default_str();
}

void add_output_options(CLI::App* sub, OutputOptions& o, const std::string& format,
                        std::vector<std::string> formats) {
  o.format = format;
  sub->add_option("--output", o.output, "Write results to this file");
  sub->add_option("--format", o.format, "Output format")
      ->check(CLI::IsMember(std::move(formats)))
      ->capture_default_str();
  sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)")
      ->capture_default_str();
  sub->add_option("--config", o.config, "Flat key = value file of option defaults");
}

std::vector<std::size_t> resolve_names(const Dataset& data,
                                       const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  if (names.empty()) {
    for (std::size_t j = 0; j < data.dim(); ++j) out.push_back(j);
    return out;
  }
  const auto& all = data.covariate_names();
  for (const auto& name : names) {
    const auto it = std::find(all.begin(), all.end(), name);
    if (it == all.end()) {
      throw MissingColumn("model covariate '" + name + "' is not a selected covariate");
    }
    out.push_back(static_cast<std::size_t>(it - all.begin()));
  }
  return out;
}

Dataset load(const DataOptions& d) {
  return ingest_csv(d.input, ColumnRoles{d.outcome, d.exposure, d.covariates});
}

EstimatorConfig make_config(const Dataset& data, const DataOptions& d,
                            const EstimatorOptions& e, const OutputOptions& o) {
  EstimatorConfig c;
  c.method = parse_method(e.method);
  ModelSpec m;
  m.outcome_covariates = resolve_names(data, d.outcome_covariates);
  m.exposure_covariates = resolve_names(data, d.exposure_covariates);
  m.outcome_form =
      d.outcome_form == "separate" ? OutcomeForm::separate_arms : OutcomeForm::shared_slope;
  c.models = m;
  c.strata_count = e.strata;
  c.block_size = e.block_size;
  c.seed = o.seed;
  c.mle.max_iterations = e.max_iter;
  c.mle.gradient_tolerance = e.grad_tol;
  return c;
}

json number_or_null(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

json number_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

void emit(const OutputOptions& o, std::ostream& out, const std::string& text) {
  if (o.output.empty()) {
    out << text;
    return;
  }
  std::ofstream file(o.output, std::ios::binary | std::ios::trunc);
  if (!file) throw InvalidData("cannot write output file '" + o.output + "'");
  file << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

EtaPair require_spec(const std::optional<double>& eta0,
                     const std::optional<double>& eta1, const std::string& what) {
  if (!eta0 || !eta1) {
    throw ConfigError(what + " needs misreporting rates: pass --eta0 and --eta1");
  }
  EtaPair p{*eta0, *eta1};
  check_etas(p);
  return p;
}

json sweep_json(const SweepResult& s, const std::string& command) {
  json points = json::array();
  for (const auto& p : s.points) {
    json j;
    if (s.kind == SweepKind::delta) {
      j["delta"] = p.delta;
    } else {
      j["eta0"] = p.eta0;
      j["eta1"] = p.eta1;
      j["estimate"] = number_or_null(p.estimate);
    }
    j["lower"] = number_or_null(p.lower);
    j["upper"] = number_or_null(p.upper);
    j["feasible"] = p.feasible;
    j["merges"] = p.merges;
    points.push_back(std::move(j));
  }
  json out;
  out["command"] = command;
  out["kind"] = std::string(to_string(s.kind));
  out["method"] = std::string(to_string(s.method));
  if (s.kind == SweepKind::delta) out["assumption"] = std::string(to_string(s.assumption));
  out["points"] = std::move(points);
  return out;
}

/// Prepends config-file entries for keys not given on the command line.
std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                      const CLI::App& app) {
  if (args.empty()) return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  const CLI::App* sub = nullptr;
  for (const auto* s : app.get_subcommands([](const CLI::App*) { return true; })) {
    if (s->get_name() == args[0]) sub = s;
  }
  if (!sub) return args;

  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::vector<std::string> merged{args[0]};
  for (const auto& e : read_config_file(path)) {
    if (e.key == "config") {
      throw ConfigError("config line " + std::to_string(e.line) +
                        ": a config file cannot include another");
    }
    if (sub->get_option_no_throw("--" + e.key) == nullptr) {
      throw ConfigError("config line " + std::to_string(e.line) + ": unknown key '" +
                        e.key + "' for command " + args[0]);
    }
    if (!given(e.key)) merged.push_back("--" + e.key + "=" + e.value);
  }
  merged.insert(merged.end(), args.begin() + 1, args.end());
  return merged;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Average treatment effects under differentially under-reported exposure",
               "recall-ate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "recall-ate 0.3.0");

  // estimate
  DataOptions est_data;
  EstimatorOptions est_opts;
  OutputOptions est_out;
  std::optional<double> est_eta0, est_eta1;
  std::size_t est_boot = 0;
  double est_level = 0.95;
  auto* estimate = app.add_subcommand("estimate", "Point estimate and optional bootstrap interval");
  add_data_options(estimate, est_data);
  add_estimator_options(estimate, est_opts, true, "");
  add_output_options(estimate, est_out, "json", {"json"});
  estimate->add_option("--eta0", est_eta0, "Pr(report unexposed | exposed, Y = 0)");
  estimate->add_option("--eta1", est_eta1, "Pr(report unexposed | exposed, Y = 1)");
  estimate->add_option("--bootstrap", est_boot, "Bootstrap replicates (0 = none)")
      ->capture_default_str();
  estimate->add_option("--level", est_level, "Confidence level")->capture_default_str();

  // bounds
  DataOptions bnd_data;
  EstimatorOptions bnd_opts;
  OutputOptions bnd_out;
  std::string bnd_assumption = "box";
  std::vector<double> bnd_deltas;
  double bnd_max = 0.5, bnd_step = 0.05, bnd_lattice = 0.05;
  auto* bounds = app.add_subcommand("bounds", "Stratified ATE bounds over a delta grid");
  add_data_options(bounds, bnd_data);
  add_estimator_options(bounds, bnd_opts, false, "prop");
  add_output_options(bounds, bnd_out, "csv", {"csv", "json"});
  bounds->add_option("--assumption", bnd_assumption, "box, a (eta0 <= eta1) or b")
      ->check(CLI::IsMember({"box", "a", "b"}))
      ->capture_default_str();
  auto* deltas_opt =
      bounds->add_option("--deltas", bnd_deltas, "Explicit delta grid")->delimiter(',');
  bounds->add_option("--delta-max", bnd_max, "Largest delta")
      ->capture_default_str()->excludes(deltas_opt);
  bounds->add_option("--delta-step", bnd_step, "Delta spacing")
      ->capture_default_str()->excludes(deltas_opt);
  bounds->add_option("--lattice-step", bnd_lattice, "Lattice spacing for ml bounds")
      ->capture_default_str();

  // sensitivity
  DataOptions sen_data;
  EstimatorOptions sen_opts;
  OutputOptions sen_out;
  std::vector<double> sen_g0, sen_g1;
  double sen_min = 0.0, sen_max = 0.5, sen_step = 0.05;
  bool sen_diag = false;
  std::size_t sen_boot = 0;
  double sen_level = 0.95;
  auto* sensitivity =
      app.add_subcommand("sensitivity", "Estimates over an (eta0, eta1) lattice");
  add_data_options(sensitivity, sen_data);
  add_estimator_options(sensitivity, sen_opts, false, "prop");
  add_output_options(sensitivity, sen_out, "csv", {"csv", "json"});
  sensitivity->add_option("--eta0-grid", sen_g0, "Explicit eta0 values")->delimiter(',');
  sensitivity->add_option("--eta1-grid", sen_g1, "Explicit eta1 values")->delimiter(',');
  sensitivity->add_option("--eta-min", sen_min, "Grid start")->capture_default_str();
  sensitivity->add_option("--eta-max", sen_max, "Grid end")->capture_default_str();
  sensitivity->add_option("--eta-step", sen_step, "Grid spacing")->capture_default_str();
  sensitivity->add_flag("--diagonal", sen_diag, "Only eta0 = eta1 (eta sweep)");
  sensitivity->add_option("--bootstrap", sen_boot,
                          "Bootstrap replicates per diagonal point (0 = none)")
      ->capture_default_str();
  sensitivity->add_option("--level", sen_level, "Confidence level")->capture_default_str();

  // simulate
  OutputOptions sim_out;
  std::vector<std::string> sim_scenarios{"cor_cor"};
  std::vector<std::size_t> sim_n{2000};
  std::vector<double> sim_eta0{0.1}, sim_eta1{0.2};
  std::vector<std::string> sim_methods;
  ScenarioConfig sim_cfg;
  std::string sim_json;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study of the estimators");
  add_output_options(simulate, sim_out, "csv", {"csv", "json"});
  simulate->add_option("--scenario", sim_scenarios, "cor_cor, cor_mis, mis_cor, mis_mis")
      ->delimiter(',')->capture_default_str();
  simulate->add_option("--n", sim_n, "Sample sizes")->delimiter(',')->capture_default_str();
  simulate->add_option("--eta0", sim_eta0, "eta0 per rate pair")->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--eta1", sim_eta1, "eta1 per rate pair")->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--replications", sim_cfg.replications, "Replicates per cell")
      ->capture_default_str();
  simulate->add_option("--strata-size", sim_cfg.strata_size,
                       "Units per stratum and block size")
      ->capture_default_str();
  simulate->add_option("--methods", sim_methods, "Estimators (default: all six)")
      ->delimiter(',');
  simulate->add_option("--truth-draws", sim_cfg.truth_draws, "Monte Carlo draws for the true ATE")
      ->capture_default_str();
  simulate->add_option("--truth-seed", sim_cfg.truth_seed, "Seed for the true ATE")
      ->capture_default_str();
  simulate->add_option("--outcome-intercept", sim_cfg.dgp.outcome_intercept)->capture_default_str();
  simulate->add_option("--gamma-z", sim_cfg.dgp.gamma_z)->capture_default_str();
  simulate->add_option("--exposure-quad", sim_cfg.dgp.exposure_quad)->capture_default_str();
  simulate->add_option("--exposure-inter", sim_cfg.dgp.exposure_inter)->capture_default_str();
  simulate->add_option("--exposure-expo", sim_cfg.dgp.exposure_expo)->capture_default_str();
  simulate->add_option("--outcome-quad", sim_cfg.dgp.outcome_quad)->capture_default_str();
  simulate->add_option("--outcome-inter", sim_cfg.dgp.outcome_inter)->capture_default_str();
  simulate->add_option("--outcome-expo", sim_cfg.dgp.outcome_expo)->capture_default_str();
  simulate->add_option("--json-output", sim_json, "Also write the report as JSON here");

  // balance
  DataOptions bal_data;
  EstimatorOptions bal_opts;
  OutputOptions bal_out;
  std::optional<double> bal_eta0, bal_eta1;
  auto* balance = app.add_subcommand("balance", "Covariate balance before and after correction");
  add_data_options(balance, bal_data);
  add_estimator_options(balance, bal_opts, false, "prop");
  add_output_options(balance, bal_out, "csv", {"csv", "json"});
  balance->add_option("--eta0", bal_eta0, "Pr(report unexposed | exposed, Y = 0)");
  balance->add_option("--eta1", bal_eta1, "Pr(report unexposed | exposed, Y = 1)");

  // generate
  OutputOptions gen_out;
  std::string gen_kind = "survey", gen_scenario = "cor_cor", gen_truth;
  std::size_t gen_n = 2000;
  double gen_eta0 = 0.2, gen_eta1 = 0.2;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset with known truth");
  add_output_options(generate, gen_out, "csv", {"csv"});
  generate->add_option("--kind", gen_kind, "survey (seven covariates) or scenario")
      ->check(CLI::IsMember({"survey", "scenario"}))->capture_default_str();
  generate->add_option("--scenario", gen_scenario, "Scenario for kind = scenario")
      ->capture_default_str();
  generate->add_option("--n", gen_n, "Units")->capture_default_str();
  generate->add_option("--eta0", gen_eta0)->capture_default_str();
  generate->add_option("--eta1", gen_eta1)->capture_default_str();
  generate->add_option("--truth-output", gen_truth, "JSON file for the known truth");

  try {
    auto merged = merge_config(args, app);
    std::reverse(merged.begin(), merged.end());
    app.parse(merged);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }

  try {
    if (estimate->parsed()) {
      const auto data = load(est_data);
      const auto config = make_config(data, est_data, est_opts, est_out);
      const bool naive =
          config.method == Method::naive_ipw || config.method == Method::naive_or;
      const EtaPair etas =
          naive && !est_eta0 && !est_eta1
              ? EtaPair{0.0, 0.0}
              : require_spec(est_eta0, est_eta1, "estimate with method " + est_opts.method);
      const auto spec = RecallBiasSpec::constant(etas);
      const auto run = run_estimator(data, spec, config);

      json j;
      j["command"] = "estimate";
      j["method"] = std::string(to_string(config.method));
      j["n"] = data.size();
      j["seed"] = est_out.seed;
      j["spec"] = {{"eta0", etas.eta0}, {"eta1", etas.eta1}};
      j["point"] = run.result.tau_hat;
      j["settings"] = {{"strata", config.strata_count},
                       {"block_size", config.block_size},
                       {"covariates", data.covariate_names()}};
      j["diagnostics"] = {{"converged", run.converged},
                          {"iterations", run.iterations},
                          {"merges", run.merges},
                          {"strata_built", run.strata_built},
                          {"strata_used", run.strata_used},
                          {"blocking_rounds", run.blocking_rounds},
                          {"separation_warning", run.separation_warning}};
      j["interval"] = nullptr;
      if (est_boot > 0) {
        BootstrapOptions b;
        b.replicates = est_boot;
        b.level = est_level;
        b.seed = est_out.seed;
        b.threads = est_out.threads;
        const auto boot = bootstrap_ci(data, spec, config, b);
        j["interval"] = {{"type", "percentile"},
                         {"level", est_level},
                         {"lower", boot.percentile.lower},
                         {"upper", boot.percentile.upper},
                         {"normal_lower", boot.normal.lower},
                         {"normal_upper", boot.normal.upper},
                         {"half_width", boot.half_width},
                         {"std_error", boot.std_error},
                         {"replicates", boot.replicates},
                         {"failures", boot.failures}};
      }
      emit(est_out, out, dump(j));
    } else if (bounds->parsed()) {
      const auto data = load(bnd_data);
      const auto config = make_config(data, bnd_data, bnd_opts, bnd_out);
      const auto grid = bnd_deltas.empty() ? make_grid(0.0, bnd_max, bnd_step) : bnd_deltas;
      SweepOptions so;
      so.threads = bnd_out.threads;
      so.lattice_step = bnd_lattice;
      const auto sweep =
          delta_sweep(data, config, parse_assumption(bnd_assumption), grid, so);
      if (bnd_out.format == "json") {
        emit(bnd_out, out, dump(sweep_json(sweep, "bounds")));
      } else {
        std::ostringstream s;
        write_bounds_csv(s, sweep);
        emit(bnd_out, out, s.str());
      }
    } else if (sensitivity->parsed()) {
      const auto data = load(sen_data);
      const auto config = make_config(data, sen_data, sen_opts, sen_out);
      const auto axis = make_grid(sen_min, sen_max, sen_step);
      const auto g0 = sensitivity->count("--eta0-grid") ? sen_g0 : axis;
      const auto g1 = sensitivity->count("--eta1-grid") ? sen_g1 : axis;
      SweepOptions so;
      so.threads = sen_out.threads;
      SweepResult sweep;
      if (sen_diag) {
        if (sensitivity->count("--eta1-grid") && g1 != g0) {
          throw ConfigError("--diagonal uses one grid; --eta1-grid must match --eta0-grid");
        }
        if (sen_boot > 0) {
          BootstrapOptions b;
          b.replicates = sen_boot;
          b.level = sen_level;
          b.seed = sen_out.seed;
          b.threads = sen_out.threads;
          so.bootstrap = b;
        }
        sweep = eta_sweep(data, config, g0, so);
      } else {
        if (sen_boot > 0) throw ConfigError("--bootstrap applies to --diagonal sweeps only");
        sweep = sensitivity_grid(data, config, g0, g1, so);
      }
      if (sen_out.format == "json") {
        emit(sen_out, out, dump(sweep_json(sweep, "sensitivity")));
      } else {
        std::ostringstream s;
        write_grid_csv(s, sweep);
        emit(sen_out, out, s.str());
      }
    } else if (simulate->parsed()) {
      if (sim_eta0.size() != sim_eta1.size()) {
        throw ConfigError("--eta0 and --eta1 must list the same number of values");
      }
      if (!sim_methods.empty()) {
        sim_cfg.methods.clear();
        for (const auto& m : sim_methods) sim_cfg.methods.push_back(parse_method(m));
      }
      sim_cfg.seed = sim_out.seed;
      sim_cfg.threads = sim_out.threads;
      StudyReport report;
      for (const auto& sc : sim_scenarios) {
        for (auto n : sim_n) {
          for (std::size_t k = 0; k < sim_eta0.size(); ++k) {
            ScenarioConfig c = sim_cfg;
            c.scenario = parse_scenario(sc);
            c.n = n;
            c.etas = {sim_eta0[k], sim_eta1[k]};
            auto part = run_study(c);
            report.rows.insert(report.rows.end(), part.rows.begin(), part.rows.end());
          }
        }
      }
      json rows = json::array();
      for (const auto& r : report.rows) {
        rows.push_back({{"scenario", std::string(to_string(r.scenario))},
                        {"n", r.n},
                        {"eta0", r.etas.eta0},
                        {"eta1", r.etas.eta1},
                        {"method", std::string(to_string(r.method))},
                        {"true_ate", number_or_null(r.true_ate)},
                        {"mean_estimate", number_or_null(r.mean_estimate)},
                        {"abs_bias", number_or_null(r.abs_bias)},
                        {"mean_abs_error", number_or_null(r.mean_abs_error)},
                        {"rmse", number_or_null(r.rmse)},
                        {"mc_se", number_or_null(r.mc_se)},
                        {"abs_bias_x100", number_or_null(100.0 * r.abs_bias)},
                        {"rmse_x100", number_or_null(100.0 * r.rmse)},
                        {"replications", r.replications},
                        {"failures", r.failures}});
      }
      json j{{"command", "simulate"}, {"seed", sim_out.seed}, {"rows", rows}};
      if (sim_out.format == "json") {
        emit(sim_out, out, dump(j));
      } else {
        std::ostringstream s;
        write_report_csv(s, report);
        emit(sim_out, out, s.str());
      }
      if (!sim_json.empty()) {
        OutputOptions side;
        side.output = sim_json;
        emit(side, out, dump(j));
      }
    } else if (balance->parsed()) {
      const auto data = load(bal_data);
      const auto config = make_config(data, bal_data, bal_opts, bal_out);
      const EtaPair etas = require_spec(bal_eta0, bal_eta1, "balance");
      const auto strata = build_strata(data, config);
      const auto geometry = strata.geometry ? &*strata.geometry : nullptr;
      const auto combined = combine_strata(summarize_strata(
          data, strata.assignment, RecallBiasSpec::constant(etas), geometry));
      const auto merged = apply_merges(strata.assignment, combined);
      const auto naive = balance_diagnostics(merged, data, {0.0, 0.0});
      const auto corrected = balance_diagnostics(merged, data, etas);

      if (bal_out.format == "json") {
        json rows = json::array();
        for (std::size_t j = 0; j < naive.size(); ++j) {
          auto side = [](const CovariateBalance& b) {
            return json{{"treated_mean", b.treated_mean},
                        {"control_mean", b.control_mean},
                        {"pooled_sd", b.pooled_sd},
                        {"asmd", number_or_null(b.asmd)}};
          };
          rows.push_back({{"covariate", naive[j].covariate},
                          {"naive", side(naive[j])},
                          {"corrected", side(corrected[j])}});
        }
        json j{{"command", "balance"},
               {"method", std::string(to_string(config.method))},
               {"spec", {{"eta0", etas.eta0}, {"eta1", etas.eta1}}},
               {"strata", combined.strata.size()},
               {"merges", combined.merges},
               {"covariates", rows}};
        emit(bal_out, out, dump(j));
      } else {
        std::ostringstream s;
        s << "covariate,asmd_naive,asmd_corrected,treated_mean,control_mean,pooled_sd\n";
        for (std::size_t j = 0; j < naive.size(); ++j) {
          s << naive[j].covariate << ',' << format_number(naive[j].asmd) << ','
            << format_number(corrected[j].asmd) << ','
            << format_number(corrected[j].treated_mean) << ','
            << format_number(corrected[j].control_mean) << ','
            << format_number(corrected[j].pooled_sd) << '\n';
        }
        emit(bal_out, out, s.str());
      }
    } else if (generate->parsed()) {
      const EtaPair etas{gen_eta0, gen_eta1};
      check_etas(etas);
      json truth;
      std::ostringstream s;
      if (gen_kind == "survey") {
        const auto g = generate_survey_analogue(gen_n, gen_out.seed, etas);
        write_dataset_csv(s, g.sample.data);
        truth = {{"kind", "survey"},
                 {"n", gen_n},
                 {"seed", gen_out.seed},
                 {"eta0", etas.eta0},
                 {"eta1", etas.eta1},
                 {"population_ate", g.population_ate},
                 {"sample_ate", g.sample_ate}};
      } else {
        const auto scenario = parse_scenario(gen_scenario);
        const auto g = generate_dataset(scenario, gen_n, RecallBiasSpec::constant(etas),
                                        gen_out.seed);
        write_dataset_csv(s, g.data);
        truth = {{"kind", "scenario"},
                 {"scenario", gen_scenario},
                 {"n", gen_n},
                 {"seed", gen_out.seed},
                 {"eta0", etas.eta0},
                 {"eta1", etas.eta1},
                 {"population_ate", true_ate(scenario, sim_cfg.truth_seed)},
                 {"sample_ate", (g.m1 - g.m0).mean()}};
      }
      emit(gen_out, out, s.str());
      if (!gen_truth.empty()) {
        OutputOptions side;
        side.output = gen_truth;
        emit(side, out, dump(truth));
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}

}  // namespace recall::cli
