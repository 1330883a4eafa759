#include "recall/stratification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "recall/assignment.hpp"
#include "recall/errors.hpp"
#include "recall/logistic.hpp"
#include "recall/random.hpp"

namespace recall {

std::string_view to_string(StrataMethod m) {
  switch (m) {
    case StrataMethod::prop: return "prop";
    case StrataMethod::prog: return "prog";
    case StrataMethod::block: return "block";
  }
  return "prop";
}

std::size_t StratumAssignment::count() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

std::vector<std::vector<std::size_t>> StratumAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(count());
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

void StratumAssignment::validate(std::size_t n) const {
  if (labels.size() != n) {
    throw InvalidData("assignment covers " + std::to_string(labels.size()) +
                      " units, data has " + std::to_string(n));
  }
  for (const auto& m : members()) {
    if (m.empty()) throw InvalidData("stratum labels are not contiguous");
  }
  if (scores && scores->size() != n) throw InvalidData("score vector length");
}

std::vector<double> fit_propensity_star(const Dataset& data,
                                        const ModelSpec& models) {
  if (data.empty()) throw InvalidData("propensity fit on empty data");
  models.validate(data.dim());
  const auto X =
      design_matrix(data, models.exposure_covariates, models.include_intercept);
  const auto fit = fit_logistic(X, data.exposure_star());
  const Eigen::VectorXd p = predict_logistic(X, fit.coef);
  return {p.data(), p.data() + p.size()};
}

std::vector<double> fit_prognostic(const Dataset& data, const ModelSpec& models) {
  models.validate(data.dim());
  std::vector<std::size_t> exposed;
  std::vector<std::uint8_t> response;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.exposure_star()[i]) {
      exposed.push_back(i);
      response.push_back(data.outcome()[i]);
    }
  }
  const std::size_t needed = models.outcome_covariates.size() + 2;
  if (exposed.size() < needed) {
    throw InsufficientExposed(std::to_string(exposed.size()) +
                              " reported-exposed units; need at least " +
                              std::to_string(needed));
  }
  const auto ones = std::count(response.begin(), response.end(), 1);
  if (ones == 0 || ones == static_cast<long>(response.size())) {
    throw InsufficientExposed("outcome is constant among reported-exposed units");
  }
  const auto X =
      design_matrix(data, models.outcome_covariates, models.include_intercept);
  const auto fit = fit_logistic(select_rows(X, exposed), response);
  const Eigen::Index offset = models.include_intercept ? 1 : 0;
  const Eigen::VectorXd slopes = fit.coef.tail(fit.coef.size() - offset);
  const Eigen::VectorXd score = X.rightCols(X.cols() - offset) * slopes;
  return {score.data(), score.data() + score.size()};
}

StratumAssignment quantile_strata(std::span<const double> scores,
                                  std::size_t count, StrataMethod method) {
  const std::size_t n = scores.size();
  if (count < 2) throw ConfigError("need at least two strata");
  if (n < count) {
    throw ConfigError(std::to_string(n) + " units cannot fill " +
                      std::to_string(count) + " strata");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return scores[a] < scores[b]; });
  std::size_t distinct = n == 0 ? 0 : 1;
  for (std::size_t r = 1; r < n; ++r) {
    if (scores[order[r]] != scores[order[r - 1]]) ++distinct;
  }
  if (distinct < count) {
    throw DegenerateScores(std::to_string(distinct) +
                           " distinct scores for " + std::to_string(count) +
                           " strata");
  }
  StratumAssignment out;
  out.method = method;
  out.configured = count;
  out.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) out.labels[order[r]] = r * count / n;
  out.scores.emplace(scores.begin(), scores.end());
  return out;
}

namespace {

/// Labels blocks by their smallest member so equal partitions compare equal.
std::vector<std::size_t> canonical_labels(const std::vector<std::size_t>& raw,
                                          std::size_t blocks) {
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> relabel(blocks, kUnset);
  std::size_t next = 0;
  std::vector<std::size_t> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (relabel[raw[i]] == kUnset) relabel[raw[i]] = next++;
    out[i] = relabel[raw[i]];
  }
  return out;
}

std::vector<std::size_t> match_to_templates(const RankMahalanobis& geometry,
                                            const std::vector<std::size_t>& templates,
                                            std::size_t block_size) {
  const std::size_t n = geometry.size();
  const std::size_t blocks = templates.size();
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> labels(n, kUnset);
  for (std::size_t t = 0; t < blocks; ++t) labels[templates[t]] = t;

  std::vector<std::size_t> rest;
  rest.reserve(n - blocks);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == kUnset) rest.push_back(i);
  }
  std::vector<double> costs(rest.size() * blocks);
  for (std::size_t r = 0; r < rest.size(); ++r) {
    for (std::size_t t = 0; t < blocks; ++t) {
      costs[r * blocks + t] = geometry.distance(rest[r], templates[t]);
    }
  }
  const std::vector<std::size_t> caps(blocks, block_size - 1);
  const auto matching = optimal_capacitated_assignment(
      CostMatrix(rest.size(), blocks, std::move(costs)), caps);
  for (std::size_t r = 0; r < rest.size(); ++r) {
    labels[rest[r]] = matching.row_to_col[r];
  }
  return canonical_labels(labels, blocks);
}

std::vector<std::size_t> most_distant_members(
    const RankMahalanobis& geometry,
    const std::vector<std::vector<std::size_t>>& blocks) {
  std::vector<std::size_t> out;
  out.reserve(blocks.size());
  for (const auto& members : blocks) {
    std::size_t worst = members.front();
    double worst_total = -1.0;
    for (auto i : members) {
      double total = 0.0;
      for (auto j : members) {
        if (i != j) total += geometry.distance(i, j);
      }
      if (total > worst_total) {
        worst_total = total;
        worst = i;
      }
    }
    out.push_back(worst);
  }
  return out;
}

/// Ejects the most distant member of every block and matches the ejected
/// units back to the remaining block cores, one per block, at minimum total
/// distance to the core members.
std::vector<std::size_t> reinsert_most_distant(const RankMahalanobis& geometry,
                                               const StratumAssignment& current) {
  const auto blocks = current.members();
  const auto ejected = most_distant_members(geometry, blocks);
  const std::size_t count = blocks.size();
  std::vector<double> costs(count * count, 0.0);
  for (std::size_t a = 0; a < count; ++a) {
    for (std::size_t b = 0; b < count; ++b) {
      double total = 0.0;
      for (auto v : blocks[b]) {
        if (v != ejected[b]) total += geometry.distance(ejected[a], v);
      }
      costs[a * count + b] = total;
    }
  }
  const auto matching = optimal_assignment(CostMatrix(count, count, std::move(costs)));
  std::vector<std::size_t> labels = current.labels;
  for (std::size_t a = 0; a < count; ++a) labels[ejected[a]] = matching.row_to_col[a];
  return canonical_labels(labels, count);
}

}  // namespace

double within_block_distance(const RankMahalanobis& geometry,
                             const StratumAssignment& assignment) {
  double total = 0.0;
  for (const auto& members : assignment.members()) {
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        total += geometry.distance(members[a], members[b]);
      }
    }
  }
  return total;
}

BlockingResult build_blocks(const RankMahalanobis& geometry,
                            std::size_t block_size, std::uint64_t seed,
                            int max_rounds) {
  const std::size_t n = geometry.size();
  if (block_size == 0 || n == 0 || n % block_size != 0) {
    throw NonDivisibleN(std::to_string(n) + " units cannot form blocks of " +
                        std::to_string(block_size));
  }
  const std::size_t blocks = n / block_size;

  BlockingResult result;
  result.assignment.method = StrataMethod::block;
  result.assignment.configured = block_size;
  if (blocks == 1) {
    result.assignment.labels.assign(n, 0);
    result.objective_trace.push_back(
        within_block_distance(geometry, result.assignment));
    result.converged = true;
    return result;
  }

  auto rng = make_rng(seed);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t t = 0; t < blocks; ++t) {
    std::uniform_int_distribution<std::size_t> pick(t, n - 1);
    std::swap(pool[t], pool[pick(rng)]);
  }
  std::vector<std::size_t> templates(pool.begin(),
                                     pool.begin() + static_cast<long>(blocks));

  result.assignment.labels = match_to_templates(geometry, templates, block_size);
  double objective = within_block_distance(geometry, result.assignment);
  result.objective_trace.push_back(objective);

  for (int round = 0; round < max_rounds; ++round) {
    StratumAssignment candidate = result.assignment;
    candidate.labels = reinsert_most_distant(geometry, result.assignment);
    if (candidate.labels == result.assignment.labels) {
      result.converged = true;
      return result;
    }
    const double cand_objective = within_block_distance(geometry, candidate);
    if (!(cand_objective < objective)) {
      // Only ties were exchanged: the partition is a fixed point.
      result.converged = true;
      return result;
    }
    result.assignment = std::move(candidate);
    objective = cand_objective;
    result.objective_trace.push_back(objective);
    result.rounds = round + 1;
  }
  return result;
}

BlockingResult build_blocks(const Dataset& data, std::size_t block_size,
                            std::uint64_t seed, int max_rounds) {
  return build_blocks(RankMahalanobis(data.covariates()), block_size, seed,
                      max_rounds);
}

CorrectedTable& CorrectedTable::operator+=(const CorrectedTable& o) noexcept {
  exposed_y1 += o.exposed_y1;
  exposed_y0 += o.exposed_y0;
  unexposed_y1 += o.unexposed_y1;
  unexposed_y0 += o.unexposed_y0;
  counts += o.counts;
  return *this;
}

CorrectedTable corrected_table(const Dataset& data,
                               std::span<const std::size_t> rows,
                               const RecallBiasSpec& spec) {
  CorrectedTable t;
  const auto y = data.outcome();
  const auto z = data.exposure_star();
  for (auto i : rows) {
    if (z[i] && y[i]) {
      const double eta = spec.eta1(i);
      t.exposed_y1 += 1.0 / (1.0 - eta);
      t.unexposed_y1 -= eta / (1.0 - eta);
      ++t.counts.a_star;
    } else if (z[i]) {
      const double eta = spec.eta0(i);
      t.exposed_y0 += 1.0 / (1.0 - eta);
      t.unexposed_y0 -= eta / (1.0 - eta);
      ++t.counts.b_star;
    } else if (y[i]) {
      t.unexposed_y1 += 1.0;
      ++t.counts.c_star;
    } else {
      t.unexposed_y0 += 1.0;
      ++t.counts.d_star;
    }
  }
  return t;
}

CorrectedTable corrected_table(const ContingencyTable& table, EtaPair etas) {
  check_etas(etas);
  const double a = static_cast<double>(table.a_star);
  const double b = static_cast<double>(table.b_star);
  CorrectedTable t;
  t.exposed_y1 = a / (1.0 - etas.eta1);
  t.exposed_y0 = b / (1.0 - etas.eta0);
  t.unexposed_y1 =
      static_cast<double>(table.c_star) - a * etas.eta1 / (1.0 - etas.eta1);
  t.unexposed_y0 =
      static_cast<double>(table.d_star) - b * etas.eta0 / (1.0 - etas.eta0);
  t.counts = table;
  return t;
}

bool is_degenerate(const CorrectedTable& t) noexcept {
  return t.counts.a_star + t.counts.b_star == 0 ||
         t.counts.c_star + t.counts.d_star == 0 || !(t.unexposed_mass() > 0.0);
}

double stratum_estimate(const CorrectedTable& t) {
  if (t.counts.a_star + t.counts.b_star == 0) {
    throw DegenerateStratum("stratum has no reported exposed units");
  }
  if (!(t.unexposed_mass() > 0.0)) {
    throw DegenerateStratum("corrected unexposed mass is not positive");
  }
  return t.exposed_y1 / t.exposed_mass() - t.unexposed_y1 / t.unexposed_mass();
}

double stratum_estimate(const Dataset& data, std::span<const std::size_t> rows,
                        const RecallBiasSpec& spec) {
  return stratum_estimate(corrected_table(data, rows, spec));
}

double stratum_estimate(const ContingencyTable& table, EtaPair etas) {
  check_etas(etas);
  const double a = static_cast<double>(table.a_star);
  const double b = static_cast<double>(table.b_star);
  const double c = static_cast<double>(table.c_star);
  const double d = static_cast<double>(table.d_star);
  const double r1 = etas.eta1 / (1.0 - etas.eta1);
  const double r0 = etas.eta0 / (1.0 - etas.eta0);
  if (a + b == 0.0) throw DegenerateStratum("stratum has no reported exposed units");
  const double control = c - a * r1 + d - b * r0;
  if (!(control > 0.0)) {
    throw DegenerateStratum("corrected unexposed mass is not positive");
  }
  const double treated_y1 = a / (1.0 - etas.eta1);
  return treated_y1 / (treated_y1 + b / (1.0 - etas.eta0)) -
         (c - a * r1) / control;
}

CombineResult combine_strata(std::vector<StratumSummary> strata,
                             const DegeneracyTest& degenerate) {
  const DegeneracyTest test =
      degenerate ? degenerate
                 : DegeneracyTest([](const StratumSummary& s) {
                     return is_degenerate(s.table);
                   });
  CombineResult out;
  for (;;) {
    auto bad = std::find_if(strata.begin(), strata.end(), test);
    if (bad == strata.end()) break;
    if (strata.size() == 1) {
      throw AllDegenerate("every merge of the strata remains degenerate");
    }
    const auto idx = static_cast<std::size_t>(bad - strata.begin());
    std::size_t nearest = idx == 0 ? 1 : 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < strata.size(); ++j) {
      if (j == idx) continue;
      const double dist = (strata[j].location - strata[idx].location).norm();
      if (dist < best) {
        best = dist;
        nearest = j;
      }
    }
    auto& into = strata[nearest];
    const auto& from = strata[idx];
    const double total = static_cast<double>(into.n + from.n);
    if (total > 0) {
      into.location = (static_cast<double>(into.n) * into.location +
                       static_cast<double>(from.n) * from.location) /
                      total;
    }
    into.table += from.table;
    into.n += from.n;
    into.sources.insert(into.sources.end(), from.sources.begin(),
                        from.sources.end());
    std::sort(into.sources.begin(), into.sources.end());
    strata.erase(bad);
    ++out.merges;
  }
  out.strata = std::move(strata);
  return out;
}

std::vector<StratumSummary> summarize_strata(const Dataset& data,
                                             const StratumAssignment& assignment,
                                             const RecallBiasSpec& spec,
                                             const RankMahalanobis* geometry) {
  assignment.validate(data.size());
  const auto groups = assignment.members();
  std::vector<StratumSummary> out(groups.size());
  for (std::size_t s = 0; s < groups.size(); ++s) {
    auto& sum = out[s];
    sum.table = corrected_table(data, groups[s], spec);
    sum.n = groups[s].size();
    sum.sources = {s};
    if (assignment.scores) {
      double acc = 0.0;
      for (auto i : groups[s]) acc += (*assignment.scores)[i];
      sum.location = Eigen::VectorXd::Constant(1, acc / static_cast<double>(sum.n));
    } else if (geometry) {
      sum.location = geometry->centroid(groups[s]);
    } else {
      sum.location = Eigen::VectorXd::Zero(1);
    }
  }
  return out;
}

StratumAssignment apply_merges(const StratumAssignment& assignment,
                               const CombineResult& combined) {
  std::vector<std::size_t> relabel(assignment.count(), 0);
  for (std::size_t s = 0; s < combined.strata.size(); ++s) {
    for (auto src : combined.strata[s].sources) relabel[src] = s;
  }
  StratumAssignment out = assignment;
  for (auto& l : out.labels) l = relabel[l];
  return out;
}

double aggregate(std::span<const double> tau, std::span<const std::size_t> sizes) {
  if (tau.size() != sizes.size() || tau.empty()) {
    throw InvalidData("aggregate needs one size per stratum estimate");
  }
  const double total =
      static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
  double acc = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    acc += tau[i] * (static_cast<double>(sizes[i]) / total);
  }
  return acc;
}

StratifiedFit estimate_on_strata(const Dataset& data, const RecallBiasSpec& spec,
                                 const StratumAssignment& assignment,
                                 const RankMahalanobis* geometry) {
  spec.check_size(data.size());
  auto combined = combine_strata(summarize_strata(data, assignment, spec, geometry));
  StratifiedFit fit;
  fit.merges = combined.merges;
  for (const auto& s : combined.strata) {
    fit.stratum_tau.push_back(stratum_estimate(s.table));
    fit.stratum_sizes.push_back(s.n);
  }
  fit.tau_hat = aggregate(fit.stratum_tau, fit.stratum_sizes);
  return fit;
}

std::vector<CovariateBalance> balance_diagnostics(
    const StratumAssignment& assignment, const Dataset& data, EtaPair etas) {
  check_etas(etas);
  assignment.validate(data.size());
  const auto groups = assignment.members();
  const auto d = static_cast<Eigen::Index>(data.dim());
  const double r1 = etas.eta1 / (1.0 - etas.eta1);
  const double r0 = etas.eta0 / (1.0 - etas.eta0);

  std::vector<double> treated(groups.size()), control(groups.size());
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(groups.size()), d);
  for (std::size_t s = 0; s < groups.size(); ++s) {
    const auto t = tabulate(data, groups[s]);
    const double a = static_cast<double>(t.a_star);
    const double b = static_cast<double>(t.b_star);
    treated[s] = a / (1.0 - etas.eta1) + b / (1.0 - etas.eta0);
    control[s] = static_cast<double>(t.c_star + t.d_star) - a * r1 - b * r0;
    if (control[s] < 0.0) {
      throw DegenerateStratum("stratum " + std::to_string(s) +
                              " has negative corrected control mass");
    }
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(d);
    for (auto i : groups[s]) c += data.covariates().row(static_cast<Eigen::Index>(i));
    centroids.row(static_cast<Eigen::Index>(s)) = c / static_cast<double>(groups[s].size());
  }
  const double total_t = std::accumulate(treated.begin(), treated.end(), 0.0);
  const double total_c = std::accumulate(control.begin(), control.end(), 0.0);
  if (!(total_t > 0.0) || !(total_c > 0.0)) {
    throw DegenerateStratum("no corrected treated or control mass");
  }

  std::vector<CovariateBalance> out;
  for (Eigen::Index j = 0; j < d; ++j) {
    CovariateBalance cb;
    cb.covariate = data.covariate_names()[static_cast<std::size_t>(j)];
    double mt = 0.0, mc = 0.0;
    for (std::size_t s = 0; s < groups.size(); ++s) {
      mt += treated[s] * centroids(static_cast<Eigen::Index>(s), j);
      mc += control[s] * centroids(static_cast<Eigen::Index>(s), j);
    }
    mt /= total_t;
    mc /= total_c;
    // Scale by the spread of the raw covariate in the reported arms, so the
    // denominator does not depend on the stratification.
    double st = 0.0, sc = 0.0, nt = 0.0, nc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double x = data.covariates()(static_cast<Eigen::Index>(i), j);
      if (data.exposure_star()[i]) {
        st += x;
        nt += 1.0;
      } else {
        sc += x;
        nc += 1.0;
      }
    }
    double vt = 0.0, vc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double x = data.covariates()(static_cast<Eigen::Index>(i), j);
      if (data.exposure_star()[i]) {
        vt += (x - st / nt) * (x - st / nt);
      } else {
        vc += (x - sc / nc) * (x - sc / nc);
      }
    }
    vt = nt > 0.0 ? vt / nt : 0.0;
    vc = nc > 0.0 ? vc / nc : 0.0;
    cb.treated_mean = mt;
    cb.control_mean = mc;
    cb.pooled_sd = std::sqrt(0.5 * (vt + vc));
    const double diff = std::abs(mt - mc);
    if (cb.pooled_sd > 0.0) {
      cb.asmd = diff / cb.pooled_sd;
    } else {
      cb.asmd = diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    out.push_back(cb);
  }
  return out;
}

}  // namespace recall
