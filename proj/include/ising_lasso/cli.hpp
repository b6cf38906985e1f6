#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bethe.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "graph.hpp"
#include "lasso.hpp"
#include "sampler.hpp"
#include "samples.hpp"
#include "witness.hpp"

namespace ising_lasso::cli {

inline constexpr const char* kHelpFooter = R"(Conventions:
  Couplings: one coupling J per undirected edge {r,t}; the joint law is
  P(x) ∝ exp(sum over edges of J x_r x_t) with spins x in {-1,+1}, so an
  isolated edge has E[x_r x_t] = tanh(J). No factor 1/2, no double counting.
  Logarithms are natural: lambda = kappa*sqrt(ln p / n),
  n = max(2, round(beta * factor * d * ln p)), and star graphs with
  logarithmic degree use d = ceil(ln p).
  Default worker count comes from ISING_LASSO_WORKERS, else the core count.
Exit codes: 0 success, 1 domain error (JSON on stderr), 2 usage error.)";

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// Writes to `path`, or to `out` when the path is empty or "-".
inline void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot open '" + path + "' for writing");
  f << content;
  if (!f) throw InvalidArgument("failed writing '" + path + "'");
}

inline SampleMatrix load_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "' for reading");
  return read_samples(in);
}

inline std::vector<Vertex> parse_vertex_list(const std::string& s) {
  std::vector<Vertex> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(static_cast<Vertex>(std::stoull(tok)));
  return out;
}

inline CouplingScheme make_scheme(const std::string& name, double value) {
  if (name == "uniform") return UniformPositive{value};
  if (name == "mixed") return MixedSign{value};
  if (name == "degree_scaled") return DegreeScaled{value};
  throw InvalidArgument("unknown coupling scheme '" + name + "'");
}

inline nlohmann::json solution_json(const LassoSolution& sol) {
  nlohmann::json nb = nlohmann::json::array();
  for (auto [v, s] : extract_signed_neighborhood(sol).signs) nb.push_back({v, s});
  std::vector<Vertex> predictors = vertices_except(static_cast<std::size_t>(sol.coefficients.size()) + 1, sol.r);
  return {{"r", sol.r},
          {"lambda", sol.lambda},
          {"predictors", predictors},
          {"coefficients", ising_lasso::detail::vec_json(sol.coefficients)},
          {"subgradient", ising_lasso::detail::vec_json(sol.subgradient)},
          {"kkt_residual", sol.kkt_residual},
          {"iterations", sol.iterations},
          {"nonunique", sol.nonunique},
          {"neighborhood", nb}};
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

/// Runs one CLI invocation. `args` excludes the program name. Output files
/// are written directly; anything without an output path goes to `out`.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ising model structure learning by neighborhood regression", "ising_lasso"};
  app.footer(kHelpFooter);
  app.require_subcommand(1);

  // graph
  auto* graph_cmd = app.add_subcommand("graph", "Generate a signed graph as JSON");
  std::string g_family = "rr", g_scheme = "mixed", g_out;
  std::size_t g_p = 0, g_degree = 3, g_rows = 0, g_cols = 0;
  double g_value = 0.4;
  std::uint64_t g_seed = 0;
  graph_cmd->add_option("--family", g_family, "rr | grid | star | tree | bethe_tree");
  graph_cmd->add_option("--p", g_p, "number of vertices");
  graph_cmd->add_option("--degree", g_degree, "degree (rr, bethe_tree), hub degree (star), max degree (tree)");
  graph_cmd->add_option("--rows", g_rows, "grid rows");
  graph_cmd->add_option("--cols", g_cols, "grid columns");
  graph_cmd->add_option("--coupling", g_scheme, "uniform | mixed | degree_scaled | none");
  graph_cmd->add_option("--theta0", g_value, "coupling magnitude, or amplitude for degree_scaled");
  graph_cmd->add_option("--seed", g_seed);
  graph_cmd->add_option("--out", g_out, "output path (default stdout)");

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "Draw Gibbs samples from a graph");
  std::string s_graph, s_out, s_format = "text";
  std::size_t s_n = 0;
  SamplerConfig s_cfg;
  bool s_exact = false;
  sample_cmd->add_option("--graph", s_graph, "graph JSON")->required();
  sample_cmd->add_option("--n", s_n, "number of samples");
  sample_cmd->add_option("--burn-in", s_cfg.burn_in_sweeps);
  sample_cmd->add_option("--thinning", s_cfg.thinning_sweeps);
  sample_cmd->add_option("--seed", s_cfg.seed);
  sample_cmd->add_option("--format", s_format, "text | binary");
  sample_cmd->add_flag("--exact-moments", s_exact, "print exact moments by enumeration instead of sampling");
  sample_cmd->add_option("--out", s_out, "output path (default stdout)");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Solve neighborhood regressions");
  std::string v_samples, v_solver = "lasso", v_out;
  std::optional<std::size_t> v_node;
  std::optional<double> v_lambda, v_kappa;
  SolverConfig v_cfg;
  solve_cmd->add_option("--samples", v_samples, "samples file (text or binary)")->required();
  solve_cmd->add_option("--node", v_node, "single node; omit to recover the whole graph");
  solve_cmd->add_option("--lambda", v_lambda, "regularization");
  solve_cmd->add_option("--kappa", v_kappa, "use lambda = kappa*sqrt(ln p / n)");
  solve_cmd->add_option("--solver", v_solver, "lasso | logistic");
  solve_cmd->add_option("--tol", v_cfg.tol);
  solve_cmd->add_option("--max-iters", v_cfg.max_iters);
  solve_cmd->add_option("--out", v_out, "output path (default stdout)");

  // witness
  auto* witness_cmd = app.add_subcommand("witness", "Primal-dual witness certificate or noise tail probe on a tree");
  std::string w_graph, w_samples, w_out, w_n_grid;
  std::size_t w_node = 0, w_trials = 0;
  std::optional<double> w_lambda;
  bool w_population = false, w_tail = false;
  double w_c = 0.5;
  TailProbeConfig w_tail_cfg;
  w_tail_cfg.workers = default_worker_count();
  witness_cmd->add_option("--graph", w_graph, "tree graph JSON")->required();
  witness_cmd->add_option("--samples", w_samples, "samples file");
  witness_cmd->add_flag("--population", w_population, "use exact moments (tree covariance) instead of samples");
  witness_cmd->add_option("--node", w_node);
  witness_cmd->add_option("--lambda", w_lambda);
  witness_cmd->add_flag("--tail-probe", w_tail, "estimate the noise tail probability instead");
  witness_cmd->add_option("--n-grid", w_n_grid, "comma-separated sample sizes for the tail probe");
  witness_cmd->add_option("--trials", w_trials, "tail probe trials per grid point");
  witness_cmd->add_option("--c", w_c, "tail probe exponent c");
  witness_cmd->add_option("--seed", w_tail_cfg.seed);
  witness_cmd->add_option("--workers", w_tail_cfg.workers);
  witness_cmd->add_option("--out", w_out, "output path (default stdout)");

  // theory
  auto* theory_cmd = app.add_subcommand("theory", "Closed-form tree quantities");
  std::vector<std::string> t_rr;
  std::string t_graph, t_out;
  std::optional<double> t_lambda;
  theory_cmd->add_option("--rr-constants", t_rr, "d=<degree> theta0=<coupling>")->expected(2);
  theory_cmd->add_option("--graph", t_graph, "tree graph JSON");
  theory_cmd->add_option("--lambda", t_lambda, "also report the sparsistency thresholds at this lambda");
  theory_cmd->add_option("--out", t_out, "output path (default stdout)");

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Run a success-probability sweep");
  std::string e_config, e_csv, e_manifest, e_solver;
  std::optional<std::size_t> e_trials, e_workers;
  std::optional<std::uint64_t> e_seed;
  std::optional<double> e_kappa;
  bool e_calibrate = false;
  std::vector<double> e_candidates{0.5, 1.0, 2.0, 4.0};
  exp_cmd->add_option("--config", e_config, "sweep config JSON")->required();
  exp_cmd->add_option("--out", e_csv, "CSV output path (default stdout)");
  exp_cmd->add_option("--manifest", e_manifest, "manifest JSON path (default <out>.manifest.json)");
  exp_cmd->add_option("--trials", e_trials);
  exp_cmd->add_option("--seed", e_seed, "master seed override");
  exp_cmd->add_option("--workers", e_workers);
  exp_cmd->add_option("--kappa", e_kappa);
  exp_cmd->add_option("--solver", e_solver, "lasso | logistic | both");
  exp_cmd->add_flag("--calibrate", e_calibrate, "pick kappa at the grid midpoint instead of sweeping");
  exp_cmd->add_option("--candidates", e_candidates, "kappa candidates for --calibrate")->delimiter(',');

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  auto usage = [&](const std::string& msg) {
    err << "usage error: " << msg << "\n";
    return 2;
  };

  try {
    if (graph_cmd->parsed()) {
      SignedGraph g;
      if (g_family == "rr") {
        g = generate_random_regular(g_p, g_degree, g_seed);
      } else if (g_family == "grid") {
        g = generate_grid_periodic(g_rows, g_cols);
      } else if (g_family == "star") {
        g = generate_star(g_p, g_degree);
      } else if (g_family == "tree") {
        g = generate_random_tree(g_p, g_degree, g_seed);
      } else if (g_family == "bethe_tree") {
        g = generate_bethe_tree(g_p, g_degree);
      } else {
        return usage("unknown graph family '" + g_family + "'");
      }
      if (g_scheme != "none") g = assign_couplings(std::move(g), detail::make_scheme(g_scheme, g_value), derive_seed(g_seed, {2}));
      detail::emit(g_out, detail::dump(to_json(g)), out);
      return 0;
    }

    if (sample_cmd->parsed()) {
      SignedGraph g = graph_from_json(detail::read_json(s_graph));
      if (s_exact) {
        ExactMoments m = exact_enumerate(g);
        nlohmann::json cov = nlohmann::json::array();
        for (Index i = 0; i < m.covariance.rows(); ++i)
          cov.push_back(ising_lasso::detail::vec_json(m.covariance.row(i).transpose()));
        detail::emit(s_out, detail::dump({{"mean", ising_lasso::detail::vec_json(m.mean)}, {"covariance", cov}, {"log_partition", m.log_partition}}), out);
        return 0;
      }
      if (s_format != "text" && s_format != "binary") return usage("--format must be text or binary");
      SampleMatrix samples = gibbs_sample(g, s_n, s_cfg);
      std::ostringstream ss;
      if (s_format == "text") write_samples_text(ss, samples);
      else write_samples_binary(ss, samples);
      detail::emit(s_out, ss.str(), out);
      return 0;
    }

    if (solve_cmd->parsed()) {
      if (v_lambda.has_value() == v_kappa.has_value()) return usage("solve needs exactly one of --lambda or --kappa");
      SolverKind kind = solver_kind_from_string(v_solver);
      SampleMatrix samples = detail::load_samples(v_samples);
      double lambda = v_lambda ? *v_lambda : LambdaRule{*v_kappa}(samples.p(), samples.n());
      if (v_node) {
        if (*v_node >= samples.p()) throw InvalidArgument("--node out of range");
        LassoSolution sol = kind == SolverKind::lasso
                                ? solve_lasso(NeighborhoodProblem::from_samples(samples, *v_node, lambda), v_cfg)
                                : solve_logistic_l1(NeighborhoodProblem::from_design(samples.to_double(), samples.second_moments(),
                                                                                     *v_node, lambda),
                                                    v_cfg);
        detail::emit(v_out, detail::dump(detail::solution_json(sol)), out);
        return 0;
      }
      GraphEstimate est = recover_graph(samples, lambda, kind, v_cfg);
      nlohmann::json nbs = nlohmann::json::array();
      for (Vertex r = 0; r < samples.p(); ++r) {
        nlohmann::json nb = nlohmann::json::array();
        for (auto [v, s] : est.neighborhoods[r].signs) nb.push_back({v, s});
        nlohmann::json entry = {{"r", r}, {"neighborhood", nb}};
        if (est.node_errors[r]) entry["error"] = *est.node_errors[r];
        nbs.push_back(entry);
      }
      nlohmann::json edges = nlohmann::json::array();
      for (auto [e, s] : est.and_edges) edges.push_back({e.first, e.second, s});
      detail::emit(v_out, detail::dump({{"lambda", lambda}, {"solver", to_string(kind)}, {"neighborhoods", nbs}, {"and_edges", edges}}),
                   out);
      return 0;
    }

    if (witness_cmd->parsed()) {
      SignedGraph g = graph_from_json(detail::read_json(w_graph));
      RescaledParams tt = rescaled_theta(g);
      if (w_node >= g.p()) throw InvalidArgument("--node out of range");
      if (w_tail) {
        if (w_n_grid.empty() || w_trials == 0) return usage("--tail-probe needs --n-grid and --trials");
        std::vector<std::size_t> grid = detail::parse_vertex_list(w_n_grid);
        const double theta0 = g.num_edges() ? g.theta_max() : 0.0;
        w_tail_cfg.node = w_node;
        w_tail_cfg.c = w_c;
        w_tail_cfg.alpha = g.max_degree() ? rr_constants(g.max_degree(), theta0).alpha : 1.0;
        detail::emit(w_out, tail_rows_csv(tail_rate_probe(g, tt, grid, w_trials, w_tail_cfg)), out);
        return 0;
      }
      if (!w_lambda) return usage("witness needs --lambda");
      if (w_population == !w_samples.empty()) return usage("witness needs exactly one of --samples or --population");
      std::vector<Vertex> support = g.neighbors(w_node);
      WitnessCertificate cert =
          w_population ? construct_witness_population(tree_covariance(g), w_node, support, tt, *w_lambda)
                       : construct_witness(detail::load_samples(w_samples), w_node, support, tt, *w_lambda);
      detail::emit(w_out, detail::dump(to_json(cert)), out);
      return 0;
    }

    if (theory_cmd->parsed()) {
      if (!t_rr.empty()) {
        std::optional<std::size_t> d;
        std::optional<double> theta0;
        for (const auto& kv : t_rr) {
          auto eq = kv.find('=');
          if (eq == std::string::npos) return usage("--rr-constants expects d=<int> theta0=<float>");
          std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
          try {
            if (key == "d") d = std::stoull(val);
            else if (key == "theta0") theta0 = std::stod(val);
            else return usage("--rr-constants: unknown key '" + key + "'");
          } catch (const std::logic_error&) {
            return usage("--rr-constants: bad value for '" + key + "'");
          }
        }
        if (!d || !theta0) return usage("--rr-constants expects d=<int> theta0=<float>");
        detail::emit(t_out, detail::dump(to_json(rr_constants(*d, *theta0))), out);
        return 0;
      }
      if (t_graph.empty()) return usage("theory needs --rr-constants or --graph");
      SignedGraph g = graph_from_json(detail::read_json(t_graph));
      detail::emit(t_out, detail::dump(theory_report(g, t_lambda)), out);
      return 0;
    }

    if (exp_cmd->parsed()) {
      nlohmann::json cj = detail::read_json(e_config);
      if (e_trials) cj["trials"] = *e_trials;
      if (e_seed) cj["master_seed"] = *e_seed;
      if (e_kappa) cj["kappa"] = *e_kappa;
      if (!e_solver.empty()) cj["solver"] = e_solver;
      if (e_workers) cj["workers"] = *e_workers;
      else if (!cj.contains("workers")) cj["workers"] = default_worker_count();
      ExperimentConfig cfg = experiment_config_from_json(cj);
      if (e_calibrate) {
        const double beta = cfg.beta_grid[cfg.beta_grid.size() / 2];
        const std::size_t p = cfg.p_list.front();
        nlohmann::json res = nlohmann::json::object();
        for (SolverKind k : cfg.solvers)
          res[to_string(k)] = calibrate_kappa(cfg, e_candidates, p, beta, cfg.trials, k);
        detail::emit(e_csv, detail::dump({{"p", p}, {"beta", beta}, {"trials", cfg.trials}, {"candidates", e_candidates}, {"kappa", res}}),
                     out);
        return 0;
      }
      SweepResult sweep = run_sweep(cfg);
      detail::emit(e_csv, sweep_csv(sweep), out);
      std::string manifest_path = e_manifest;
      if (manifest_path.empty() && !e_csv.empty() && e_csv != "-") manifest_path = e_csv + ".manifest.json";
      if (!manifest_path.empty()) detail::emit(manifest_path, detail::dump(sweep.manifest), out);
      for (const auto& w : sweep.warnings) err << "warning: " << w << "\n";
      return 0;
    }
  } catch (const Error& e) {
    err << nlohmann::json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << nlohmann::json{{"error", "invalid_argument"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return usage("no subcommand");
}

}  // namespace ising_lasso::cli
