#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "graph.hpp"
#include "lasso.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sampler.hpp"

namespace ising_lasso {

enum class Family { rr, grid, star_linear, star_log, tree };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::rr: return "rr";
    case Family::grid: return "grid";
    case Family::star_linear: return "star_linear";
    case Family::star_log: return "star_log";
    case Family::tree: return "tree";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  if (s == "rr") return Family::rr;
  if (s == "grid") return Family::grid;
  if (s == "star_linear") return Family::star_linear;
  if (s == "star_log") return Family::star_log;
  if (s == "tree") return Family::tree;
  throw InvalidArgument("config field 'family': unknown value '" + s + "'");
}

/// Sweep description. n = max(2, round(β · beta_factor · d · log p)) and
/// λ = κ √(log p / n), both with natural logarithms.
struct ExperimentConfig {
  Family family = Family::rr;
  std::size_t degree = 3;  ///< rr and tree families; grid is 4, stars derive d from p
  std::vector<std::size_t> p_list;
  std::vector<double> beta_grid;
  double beta_factor = 10.0;
  CouplingScheme coupling = MixedSign{0.4};
  double kappa = 1.0;
  std::optional<double> kappa_logistic;  ///< defaults to kappa
  std::size_t trials = 200;
  std::vector<SolverKind> solvers{SolverKind::lasso};
  std::uint64_t master_seed = 0;
  SamplerConfig sampler{};
  SolverConfig solver{1e-8, 100000, 1e-8, false, std::nullopt};
  std::size_t workers = 1;
  bool record_timing = true;

  double kappa_for(SolverKind k) const { return k == SolverKind::logistic ? kappa_logistic.value_or(kappa) : kappa; }

  void validate() const {
    if (trials < 1) throw InvalidArgument("config field 'trials' must be >= 1");
    if (p_list.empty()) throw InvalidArgument("config field 'p_list' must be nonempty");
    if (beta_grid.empty()) throw InvalidArgument("config field 'beta_grid' must be nonempty");
    for (std::size_t i = 0; i < beta_grid.size(); ++i) {
      if (!(beta_grid[i] > 0)) throw InvalidArgument("config field 'beta_grid' must hold positive values");
      if (i && !(beta_grid[i] > beta_grid[i - 1])) throw InvalidArgument("config field 'beta_grid' must be strictly increasing");
    }
    if (!(beta_factor > 0)) throw InvalidArgument("config field 'beta_factor' must be positive");
    if (!(kappa > 0)) throw InvalidArgument("config field 'kappa' must be positive");
    if (kappa_logistic && !(*kappa_logistic > 0)) throw InvalidArgument("config field 'kappa_logistic' must be positive");
    if (solvers.empty()) throw InvalidArgument("config field 'solver' selects no solver");
    if (sampler.thinning_sweeps < 1) throw InvalidArgument("config field 'thinning_sweeps' must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Config JSON

namespace detail {
template <class T>
T config_get(const nlohmann::json& j, const char* field) {
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument(std::string("config field '") + field + "' is missing or has the wrong type");
  }
}
}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json coupling;
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, UniformPositive>) coupling = {{"scheme", "uniform"}, {"value", s.theta0}};
        else if constexpr (std::is_same_v<S, MixedSign>) coupling = {{"scheme", "mixed"}, {"value", s.theta0}};
        else coupling = {{"scheme", "degree_scaled"}, {"value", s.amplitude}};
      },
      c.coupling);
  std::string solver = c.solvers.size() == 2 ? "both" : to_string(c.solvers.front());
  nlohmann::json j = {{"family", to_string(c.family)},
                      {"degree", c.degree},
                      {"p_list", c.p_list},
                      {"beta_grid", c.beta_grid},
                      {"beta_factor", c.beta_factor},
                      {"coupling", coupling},
                      {"kappa", c.kappa},
                      {"trials", c.trials},
                      {"solver", solver},
                      {"master_seed", c.master_seed},
                      {"burn_in_sweeps", c.sampler.burn_in_sweeps},
                      {"thinning_sweeps", c.sampler.thinning_sweeps},
                      {"solver_tol", c.solver.tol},
                      {"max_iters", c.solver.max_iters},
                      {"workers", c.workers},
                      {"record_timing", c.record_timing}};
  if (c.kappa_logistic) j["kappa_logistic"] = *c.kappa_logistic;
  return j;
}

/// Parses a sweep config. Required: family, p_list, beta_grid, kappa, trials.
/// beta_factor defaults to 15 for the grid family and 10 otherwise.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  ExperimentConfig c;
  c.family = family_from_string(detail::config_get<std::string>(j, "family"));
  c.p_list = detail::config_get<std::vector<std::size_t>>(j, "p_list");
  c.beta_grid = detail::config_get<std::vector<double>>(j, "beta_grid");
  c.kappa = detail::config_get<double>(j, "kappa");
  c.trials = detail::config_get<std::size_t>(j, "trials");
  c.beta_factor = c.family == Family::grid ? 15.0 : 10.0;
  if (j.contains("degree")) c.degree = detail::config_get<std::size_t>(j, "degree");
  if (j.contains("beta_factor")) c.beta_factor = detail::config_get<double>(j, "beta_factor");
  if (j.contains("kappa_logistic")) c.kappa_logistic = detail::config_get<double>(j, "kappa_logistic");
  if (j.contains("master_seed")) c.master_seed = detail::config_get<std::uint64_t>(j, "master_seed");
  if (j.contains("burn_in_sweeps")) c.sampler.burn_in_sweeps = detail::config_get<std::size_t>(j, "burn_in_sweeps");
  if (j.contains("thinning_sweeps")) c.sampler.thinning_sweeps = detail::config_get<std::size_t>(j, "thinning_sweeps");
  if (j.contains("solver_tol")) c.solver.tol = detail::config_get<double>(j, "solver_tol");
  if (j.contains("max_iters")) c.solver.max_iters = detail::config_get<std::size_t>(j, "max_iters");
  if (j.contains("workers")) c.workers = detail::config_get<std::size_t>(j, "workers");
  if (j.contains("record_timing")) c.record_timing = detail::config_get<bool>(j, "record_timing");
  if (j.contains("solver")) {
    auto s = detail::config_get<std::string>(j, "solver");
    if (s == "both") c.solvers = {SolverKind::lasso, SolverKind::logistic};
    else if (s == "lasso" || s == "logistic") c.solvers = {solver_kind_from_string(s)};
    else throw InvalidArgument("config field 'solver' must be lasso, logistic or both");
  }
  if (j.contains("coupling")) {
    const auto& cj = j.at("coupling");
    auto scheme = detail::config_get<std::string>(cj, "scheme");
    auto value = detail::config_get<double>(cj, "value");
    if (scheme == "uniform") c.coupling = UniformPositive{value};
    else if (scheme == "mixed") c.coupling = MixedSign{value};
    else if (scheme == "degree_scaled") c.coupling = DegreeScaled{value};
    else throw InvalidArgument("config field 'coupling.scheme' must be uniform, mixed or degree_scaled");
  } else if (c.family == Family::grid) {
    c.coupling = UniformPositive{0.2};
  } else if (c.family == Family::star_linear || c.family == Family::star_log) {
    c.coupling = DegreeScaled{1.2};
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Trials

/// Star degree: ⌈0.1 p⌉ (linear) or ⌈ln p⌉ (logarithmic).
inline std::size_t star_degree(Family f, std::size_t p) {
  double d = f == Family::star_linear ? std::ceil(0.1 * static_cast<double>(p)) : std::ceil(std::log(static_cast<double>(p)));
  return static_cast<std::size_t>(std::max(1.0, d));
}

inline SignedGraph build_experiment_graph(const ExperimentConfig& c, std::size_t p, std::uint64_t seed) {
  SignedGraph g;
  switch (c.family) {
    case Family::rr: g = generate_random_regular(p, c.degree, derive_seed(seed, {1})); break;
    case Family::grid: {
      auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p))));
      if (side * side != p) throw InvalidArgument("grid family needs p to be a perfect square, got " + std::to_string(p));
      g = generate_grid_periodic(side, side);
      break;
    }
    case Family::star_linear:
    case Family::star_log: g = generate_star(p, star_degree(c.family, p)); break;
    case Family::tree: g = generate_bethe_tree(p, c.degree); break;
  }
  return assign_couplings(std::move(g), c.coupling, derive_seed(seed, {2}));
}

inline std::size_t sample_size(double beta, double factor, std::size_t d, std::size_t p) {
  double n = std::round(beta * factor * static_cast<double>(d) * std::log(static_cast<double>(p)));
  return static_cast<std::size_t>(std::max(2.0, n));
}

struct SolverOutcome {
  SolverKind solver = SolverKind::lasso;
  double lambda = 0.0;
  bool success = false;
  std::optional<std::string> failure_cause;  ///< first solver error, if any
  std::vector<bool> node_correct;
  double elapsed_ms = 0.0;
};

struct TrialResult {
  std::size_t p = 0;
  std::size_t d = 0;
  std::size_t n = 0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::vector<SolverOutcome> outcomes;  ///< one per configured solver, same data
};

/// One trial: build the graph, draw n samples, run every configured solver
/// on the same samples, and score exact signed-edge recovery.
inline TrialResult run_trial(const ExperimentConfig& c, std::size_t p, double beta, std::uint64_t trial_seed) {
  TrialResult res;
  res.p = p;
  res.beta = beta;
  res.seed = trial_seed;
  SignedGraph g = build_experiment_graph(c, p, trial_seed);
  res.d = g.max_degree();
  res.n = sample_size(beta, c.beta_factor, res.d, p);
  SamplerConfig sc = c.sampler;
  sc.seed = derive_seed(trial_seed, {3});
  SampleMatrix samples = gibbs_sample(g, res.n, sc);
  for (SolverKind kind : c.solvers) {
    auto start = std::chrono::steady_clock::now();
    SolverOutcome out;
    out.solver = kind;
    out.lambda = LambdaRule{c.kappa_for(kind)}(p, res.n);
    GraphEstimate est = recover_graph(samples, out.lambda, kind, c.solver);
    out.node_correct.resize(p);
    for (Vertex r = 0; r < p; ++r)
      out.node_correct[r] = !est.node_errors[r] && est.neighborhoods[r].signs == true_signed_neighborhood(g, r);
    for (const auto& e : est.node_errors)
      if (e) {
        out.failure_cause = *e;
        break;
      }
    out.success = est.matches(g);
    out.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    res.outcomes.push_back(std::move(out));
  }
  return res;
}

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t p, std::size_t beta_index, std::size_t trial) {
  return derive_seed(master, {p, beta_index, trial});
}

// ---------------------------------------------------------------------------
// Sweeps

struct SuccessPoint {
  double beta = 0.0;
  std::size_t d = 0;
  std::size_t n = 0;
  double lambda = 0.0;
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::size_t solver_failures = 0;  ///< trials in which some node's solver errored
  double probability = 0.0;
  double stderr_ = 0.0;
  double mean_trial_ms = 0.0;
};

struct SuccessCurve {
  SolverKind solver = SolverKind::lasso;
  Family family = Family::rr;
  std::size_t p = 0;
  std::vector<SuccessPoint> points;

  std::vector<double> betas() const {
    std::vector<double> b;
    for (const auto& pt : points) b.push_back(pt.beta);
    return b;
  }
  std::vector<double> probabilities() const {
    std::vector<double> b;
    for (const auto& pt : points) b.push_back(pt.probability);
    return b;
  }
};

/// Wald standard error with a floor of 0.5/trials, so a single trial or an
/// all-or-nothing cell never reports zero uncertainty.
inline double binomial_stderr(std::size_t successes, std::size_t trials) {
  double t = static_cast<double>(trials);
  double prob = static_cast<double>(successes) / t;
  return std::max(std::sqrt(prob * (1.0 - prob) / t), 0.5 / t);
}

struct SweepResult {
  std::vector<SuccessCurve> curves;
  std::vector<std::string> warnings;  ///< monotone-trend violations
  nlohmann::json manifest;

  const SuccessCurve& curve(SolverKind s, std::size_t p) const {
    for (const auto& c : curves)
      if (c.solver == s && c.p == p) return c;
    throw InvalidArgument("no curve for solver " + to_string(s) + " and p=" + std::to_string(p));
  }
};

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Full p_list × beta_grid × trials sweep. Trials run on `config.workers`
/// threads; each trial's seed depends only on (master_seed, p, β index,
/// trial), so results do not depend on scheduling.
inline SweepResult run_sweep(const ExperimentConfig& c) {
  c.validate();
  SweepResult result;
  nlohmann::json config_json = to_json(c);
  result.manifest = {{"config", config_json}, {"config_hash", fnv1a_hex(config_json.dump())}, {"cells", nlohmann::json::array()}};

  for (std::size_t s = 0; s < c.solvers.size(); ++s)
    for (std::size_t p : c.p_list) result.curves.push_back({c.solvers[s], c.family, p, {}});

  for (std::size_t pi = 0; pi < c.p_list.size(); ++pi) {
    const std::size_t p = c.p_list[pi];
    for (std::size_t bi = 0; bi < c.beta_grid.size(); ++bi) {
      const double beta = c.beta_grid[bi];
      std::vector<TrialResult> trials(c.trials);
      parallel_for(c.trials, c.workers, [&](std::size_t t) {
        try {
          trials[t] = run_trial(c, p, beta, trial_seed(c.master_seed, p, bi, t));
        } catch (const Error& e) {
          // Generation or sampling failure: every solver fails this trial.
          TrialResult tr;
          tr.p = p;
          tr.beta = beta;
          tr.seed = trial_seed(c.master_seed, p, bi, t);
          for (SolverKind k : c.solvers) tr.outcomes.push_back({k, 0.0, false, std::string(e.what()), {}, 0.0});
          trials[t] = std::move(tr);
        }
      });

      nlohmann::json cell = {{"p", p}, {"beta", beta}, {"beta_index", bi}};
      nlohmann::json seeds = nlohmann::json::array();
      for (const auto& tr : trials) seeds.push_back(tr.seed);
      cell["trial_seeds"] = seeds;
      nlohmann::json outcome_json = nlohmann::json::object();

      for (std::size_t s = 0; s < c.solvers.size(); ++s) {
        SuccessPoint pt;
        pt.beta = beta;
        pt.trials = c.trials;
        std::string bits;
        double total_ms = 0.0;
        for (const auto& tr : trials) {
          const auto& o = tr.outcomes[s];
          pt.successes += o.success ? 1 : 0;
          pt.solver_failures += o.failure_cause ? 1 : 0;
          total_ms += o.elapsed_ms;
          bits += o.success ? '1' : '0';
          if (tr.n) {
            pt.n = tr.n;
            pt.d = tr.d;
            pt.lambda = o.lambda;
          }
        }
        pt.probability = static_cast<double>(pt.successes) / static_cast<double>(pt.trials);
        pt.stderr_ = binomial_stderr(pt.successes, pt.trials);
        pt.mean_trial_ms = c.record_timing ? total_ms / static_cast<double>(pt.trials) : 0.0;
        outcome_json[to_string(c.solvers[s])] = bits;
        result.curves[s * c.p_list.size() + pi].points.push_back(pt);
      }
      cell["outcomes"] = outcome_json;
      result.manifest["cells"].push_back(cell);
    }
  }

  for (const auto& curve : result.curves) {
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      const auto& a = curve.points[i - 1];
      const auto& b = curve.points[i];
      if (b.probability < a.probability - 2.0 * std::max(a.stderr_, b.stderr_)) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s p=%zu: success drops from %.3f (beta=%g) to %.3f (beta=%g)",
                      to_string(curve.solver).c_str(), curve.p, a.probability, a.beta, b.probability, b.beta);
        result.warnings.emplace_back(buf);
      }
    }
  }
  return result;
}

inline std::string sweep_csv(const SweepResult& r) {
  std::string out = "solver,family,p,d,beta,n,lambda,trials,successes,probability,stderr,mean_trial_ms\n";
  char buf[512];
  for (const auto& c : r.curves) {
    for (const auto& pt : c.points) {
      std::snprintf(buf, sizeof buf, "%s,%s,%zu,%zu,%.17g,%zu,%.17g,%zu,%zu,%.17g,%.17g,%.17g\n", to_string(c.solver).c_str(),
                    to_string(c.family).c_str(), c.p, pt.d, pt.beta, pt.n, pt.lambda, pt.trials, pt.successes, pt.probability,
                    pt.stderr_, pt.mean_trial_ms);
      out += buf;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Curve comparison

/// β at which the curve first reaches 0.5, linearly interpolated between
/// neighbouring grid points. The first grid β if the curve starts at or above
/// 0.5; nullopt if it never gets there.
inline std::optional<double> crossing_point(const std::vector<double>& betas, const std::vector<double>& probs, double level = 0.5) {
  if (betas.size() != probs.size()) throw InvalidArgument("crossing_point: grid and values differ in length");
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (probs[i] >= level) {
      if (i == 0) return betas[0];
      double f = (level - probs[i - 1]) / (probs[i] - probs[i - 1]);
      return betas[i - 1] + f * (betas[i] - betas[i - 1]);
    }
  }
  return std::nullopt;
}

inline std::optional<double> crossing_point(const SuccessCurve& c) { return crossing_point(c.betas(), c.probabilities()); }

struct CurveAlignment {
  std::size_t p = 0;
  std::vector<double> betas;
  std::vector<double> differences;  ///< prob_a − prob_b per β
  std::optional<double> crossing_a;
  std::optional<double> crossing_b;
  double max_abs_difference() const {
    double m = 0.0;
    for (double d : differences) m = std::max(m, std::abs(d));
    return m;
  }
};

/// Pairs curves by p; the β grids must match exactly.
inline std::vector<CurveAlignment> compare_solvers(const std::vector<SuccessCurve>& a, const std::vector<SuccessCurve>& b) {
  if (a.size() != b.size()) throw InvalidArgument("compare_solvers: different numbers of curves");
  std::vector<CurveAlignment> out;
  for (const auto& ca : a) {
    const SuccessCurve* match = nullptr;
    for (const auto& cb : b)
      if (cb.p == ca.p) match = &cb;
    if (!match) throw InvalidArgument("compare_solvers: no partner curve for p=" + std::to_string(ca.p));
    if (ca.betas() != match->betas()) throw InvalidArgument("compare_solvers: beta grids differ for p=" + std::to_string(ca.p));
    CurveAlignment al;
    al.p = ca.p;
    al.betas = ca.betas();
    for (std::size_t i = 0; i < ca.points.size(); ++i) al.differences.push_back(ca.points[i].probability - match->points[i].probability);
    al.crossing_a = crossing_point(ca);
    al.crossing_b = crossing_point(*match);
    out.push_back(std::move(al));
  }
  return out;
}

/// Picks the κ with the highest success rate at one (p, β) cell. Ties,
/// including the all-zero case below the transition, go to the higher mean
/// fraction of correctly recovered neighborhoods, then to the earlier
/// candidate. Uses seeds disjoint from run_sweep's.
inline double calibrate_kappa(ExperimentConfig c, const std::vector<double>& candidates, std::size_t p, double beta,
                              std::size_t trials, SolverKind solver) {
  if (candidates.empty()) throw InvalidArgument("calibrate_kappa needs candidates");
  if (trials < 1) throw InvalidArgument("calibrate_kappa needs at least one trial");
  c.solvers = {solver};
  double best = candidates.front();
  std::size_t best_hits = 0;
  double best_acc = -1.0;
  for (double kappa : candidates) {
    c.kappa = kappa;
    c.kappa_logistic = kappa;
    std::vector<char> ok(trials, 0);
    std::vector<double> acc(trials, 0.0);
    parallel_for(trials, c.workers, [&](std::size_t t) {
      auto o = run_trial(c, p, beta, derive_seed(c.master_seed ^ 0x6b617070616b6170ULL, {p, t})).outcomes[0];
      ok[t] = o.success;
      double good = 0;
      for (bool b : o.node_correct) good += b ? 1 : 0;
      acc[t] = o.node_correct.empty() ? 0.0 : good / static_cast<double>(o.node_correct.size());
    });
    std::size_t hits = 0;
    double mean_acc = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      hits += ok[t] ? 1 : 0;
      mean_acc += acc[t] / static_cast<double>(trials);
    }
    if (best_acc < 0 || hits > best_hits || (hits == best_hits && mean_acc > best_acc)) {
      best = kappa;
      best_hits = hits;
      best_acc = mean_acc;
    }
  }
  return best;
}

}  // namespace ising_lasso
