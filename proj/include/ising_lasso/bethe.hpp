#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "error.hpp"
#include "graph.hpp"
#include "linalg.hpp"

namespace ising_lasso {

// Closed-form population quantities for zero-field Ising models on trees
// (more precisely forests: isolated vertices and several components are
// fine). These formulas are wrong on graphs with cycles, so every entry point
// checks acyclicity first.

inline void require_acyclic(const SignedGraph& graph, const std::string& what) {
  if (!graph.couplings_assigned()) throw InvalidArgument(what + " needs assigned couplings");
  if (!graph.is_acyclic()) throw NotATree(what + " requires a tree (acyclic graph); the Bethe closed forms are not exact on loopy graphs");
}

/// Minimizer of the population square loss for every node.
struct RescaledParams {
  Eigen::MatrixXd theta;              ///< p × p, row r holds θ̃_{r,·}; zero diagonal and zero off-edges
  Eigen::VectorXd inverse_prefactor;  ///< 1 − d_r + Σ_{u∈N(r)} 1/(1 − tanh² J_ru)
  double theta_tilde_min = std::numeric_limits<double>::infinity();  ///< min |θ̃_rt| over edges

  std::size_t p() const noexcept { return static_cast<std::size_t>(theta.rows()); }

  /// θ̃_{\r} in predictor order (vertices except r).
  Eigen::VectorXd row(Vertex r) const {
    Eigen::VectorXd out(static_cast<Index>(p() - 1));
    for (std::size_t j = 0; j + 1 < p(); ++j) out[static_cast<Index>(j)] = theta(static_cast<Index>(r), static_cast<Index>(predictor_vertex(r, j)));
    return out;
  }
};

inline RescaledParams rescaled_theta(const SignedGraph& graph) {
  require_acyclic(graph, "rescaled_theta");
  const auto p = static_cast<Index>(graph.p());
  RescaledParams out;
  out.theta = Eigen::MatrixXd::Zero(p, p);
  out.inverse_prefactor = Eigen::VectorXd::Ones(p);
  for (Vertex r = 0; r < graph.p(); ++r) {
    double acc = 1.0 - static_cast<double>(graph.degree(r));
    for (const auto& [u, idx] : graph.incident(r)) {
      double t = std::tanh(graph.edges()[idx].coupling);
      acc += 1.0 / (1.0 - t * t);
    }
    out.inverse_prefactor[static_cast<Index>(r)] = acc;
    for (const auto& [u, idx] : graph.incident(r)) {
      double t = std::tanh(graph.edges()[idx].coupling);
      double v = t / (1.0 - t * t) / acc;
      out.theta(static_cast<Index>(r), static_cast<Index>(u)) = v;
      out.theta_tilde_min = std::min(out.theta_tilde_min, std::abs(v));
    }
  }
  return out;
}

/// Rescaled coupling for a regular tree of degree d with |J| = theta0:
/// tanh(θ0)·sign / (1 + (d − 1) tanh²(θ0)).
inline double rescaled_theta_rr(std::size_t d, double theta0, int sign) {
  if (d < 3) throw InvalidArgument("rescaled_theta_rr needs d >= 3");
  if (!(theta0 > 0)) throw InvalidArgument("theta0 must be positive");
  double t = std::tanh(theta0);
  return (sign >= 0 ? 1.0 : -1.0) * t / (1.0 + static_cast<double>(d - 1) * t * t);
}

/// C_rt = Π_{e ∈ path(r,t)} tanh(J_e), C_rr = 1, zero across components.
inline Eigen::MatrixXd tree_covariance(const SignedGraph& graph) {
  require_acyclic(graph, "tree_covariance");
  const std::size_t p = graph.p();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Index>(p), static_cast<Index>(p));
  std::vector<double> prod(p);
  std::vector<bool> seen(p);
  for (Vertex r = 0; r < p; ++r) {
    std::fill(seen.begin(), seen.end(), false);
    std::queue<Vertex> queue;
    prod[r] = 1.0;
    seen[r] = true;
    queue.push(r);
    while (!queue.empty()) {
      Vertex u = queue.front();
      queue.pop();
      c(static_cast<Index>(r), static_cast<Index>(u)) = prod[u];
      for (const auto& [v, idx] : graph.incident(u)) {
        if (seen[v]) continue;
        seen[v] = true;
        prod[v] = prod[u] * std::tanh(graph.edges()[idx].coupling);
        queue.push(v);
      }
    }
  }
  return c;
}

/// Inverse of tree_covariance in closed form:
/// diagonal Σ_{u∈N(r)} 1/(1 − tanh² J_ru) − d_r + 1,
/// off-diagonal −tanh(J_rt)/(1 − tanh² J_rt) on edges, 0 elsewhere.
inline Eigen::MatrixXd bethe_inverse_covariance(const SignedGraph& graph) {
  require_acyclic(graph, "bethe_inverse_covariance");
  const auto p = static_cast<Index>(graph.p());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(p, p);
  for (Vertex r = 0; r < graph.p(); ++r) {
    double diag = 1.0 - static_cast<double>(graph.degree(r));
    for (const auto& [u, idx] : graph.incident(r)) {
      double t = std::tanh(graph.edges()[idx].coupling);
      diag += 1.0 / (1.0 - t * t);
      k(static_cast<Index>(r), static_cast<Index>(u)) = -t / (1.0 - t * t);
    }
    k(static_cast<Index>(r), static_cast<Index>(r)) = diag;
  }
  return k;
}

/// Closed-form constants for a degree-d regular tree with |J| = θ0.
/// Q*_SS has 1 on the diagonal and tanh²θ0 off it, so its eigenvalues are
/// 1 − tanh²θ0 (multiplicity d − 1) and 1 + (d − 1) tanh²θ0.
struct RRConstants {
  std::size_t d = 0;
  double theta0 = 0.0;
  double c_min = 0.0;           ///< 1 − tanh²θ0
  double alpha = 0.0;           ///< 1 − tanh θ0
  double lambda_max_qss = 0.0;  ///< 1 + (d − 1) tanh²θ0
  double theta_tilde_rr = 0.0;
};

inline RRConstants rr_constants(std::size_t d, double theta0) {
  if (d < 3) throw InvalidArgument("rr_constants needs d >= 3");
  if (!(theta0 > 0)) throw InvalidArgument("theta0 must be positive");
  double t = std::tanh(theta0);
  RRConstants c;
  c.d = d;
  c.theta0 = theta0;
  c.c_min = 1.0 - t * t;
  c.alpha = 1.0 - t;
  c.lambda_max_qss = 1.0 + static_cast<double>(d - 1) * t * t;
  c.theta_tilde_rr = rescaled_theta_rr(d, theta0, +1);
  return c;
}

/// |||Q_{S^c S} Q_SS^{-1}|||_∞ where Q is `q_full` without row/column r and S
/// is a set of vertex ids. Q_SS is inverted through its Cholesky factor.
inline double incoherence_norm(const Eigen::MatrixXd& q_full, Vertex r, const std::vector<Vertex>& support) {
  const auto p = static_cast<std::size_t>(q_full.rows());
  if (r >= p) throw InvalidArgument("node index out of range");
  std::vector<bool> in_s(p, false);
  for (Vertex v : support) {
    if (v >= p || v == r) throw InvalidArgument("support vertex " + std::to_string(v) + " is invalid");
    in_s[v] = true;
  }
  std::vector<std::size_t> s_idx, sc_idx;
  for (Vertex v = 0; v < p; ++v) {
    if (v == r) continue;
    (in_s[v] ? s_idx : sc_idx).push_back(v);
  }
  if (s_idx.empty() || sc_idx.empty()) return 0.0;
  Eigen::MatrixXd q_ss = submatrix(q_full, s_idx, s_idx);
  double lmin = min_eigenvalue(q_ss);
  if (!(lmin > 1e-12)) throw SingularMatrix("Q_SS is not invertible", lmin);
  Eigen::MatrixXd q_s_sc = submatrix(q_full, s_idx, sc_idx);
  Eigen::MatrixXd solved = q_ss.llt().solve(q_s_sc);  // Q_SS^{-1} Q_{S S^c}
  return matrix_inf_norm(solved.transpose());
}

/// Sufficient condition for including every true edge:
/// θ̃*_min ≥ 6 λ √d / C_min, with C_min the minimum over nodes of
/// Λ_min(Q*_SS(r)).
struct ThresholdReport {
  double lambda = 0.0;
  double theta_tilde_min = 0.0;
  double c_min = 0.0;
  std::size_t d = 0;
  double threshold = 0.0;      ///< 6 λ √d / C_min
  double lambda_limit = 0.0;   ///< θ̃*_min C_min / (6 √d)
  bool pass = false;
};

inline double population_c_min(const SignedGraph& graph, const Eigen::MatrixXd& covariance) {
  double c_min = std::numeric_limits<double>::infinity();
  for (Vertex r = 0; r < graph.p(); ++r) {
    auto nb = graph.neighbors(r);
    if (nb.empty()) continue;
    c_min = std::min(c_min, min_eigenvalue(submatrix(covariance, nb, nb)));
  }
  return c_min;
}

inline ThresholdReport theorem_thresholds(const SignedGraph& graph, double lambda) {
  require_acyclic(graph, "theorem_thresholds");
  if (!(lambda >= 0)) throw InvalidArgument("lambda must be >= 0");
  if (graph.num_edges() == 0) throw InvalidArgument("theorem_thresholds needs at least one edge");
  ThresholdReport rep;
  rep.lambda = lambda;
  rep.theta_tilde_min = rescaled_theta(graph).theta_tilde_min;
  rep.c_min = population_c_min(graph, tree_covariance(graph));
  rep.d = graph.max_degree();
  const double sqrt_d = std::sqrt(static_cast<double>(rep.d));
  rep.threshold = 6.0 * lambda * sqrt_d / rep.c_min;
  rep.lambda_limit = rep.theta_tilde_min * rep.c_min / (6.0 * sqrt_d);
  rep.pass = rep.theta_tilde_min >= rep.threshold;
  return rep;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json to_json(const RRConstants& c) {
  return {{"d", c.d}, {"theta0", c.theta0}, {"c_min", c.c_min}, {"alpha", c.alpha},
          {"lambda_max_qss", c.lambda_max_qss}, {"theta_tilde_rr", c.theta_tilde_rr}};
}

inline nlohmann::json to_json(const ThresholdReport& t) {
  return {{"lambda", t.lambda}, {"theta_tilde_min", t.theta_tilde_min}, {"c_min", t.c_min}, {"d", t.d},
          {"threshold", t.threshold}, {"lambda_limit", t.lambda_limit}, {"pass", t.pass}};
}

/// Theory report for a tree: rescaled couplings per ordered edge, C_min and
/// α from the population covariance (min / worst case over nodes), the
/// largest eigenvalue of any Q*_r, and optionally the threshold check.
inline nlohmann::json theory_report(const SignedGraph& graph, std::optional<double> lambda = std::nullopt) {
  require_acyclic(graph, "theory_report");
  auto tilde = rescaled_theta(graph);
  Eigen::MatrixXd cov = tree_covariance(graph);
  nlohmann::json theta = nlohmann::json::array();
  for (Vertex r = 0; r < graph.p(); ++r)
    for (Vertex t : graph.neighbors(r)) theta.push_back({r, t, tilde.theta(static_cast<Index>(r), static_cast<Index>(t))});
  double worst_incoherence = 0.0, lambda_max = 0.0;
  for (Vertex r = 0; r < graph.p(); ++r) {
    auto nb = graph.neighbors(r);
    if (!nb.empty()) worst_incoherence = std::max(worst_incoherence, incoherence_norm(cov, r, nb));
    if (graph.p() > 1) lambda_max = std::max(lambda_max, max_eigenvalue(drop_row_col(cov, r)));
  }
  nlohmann::json out = {{"theta_tilde", theta},
                        {"theta_tilde_min", tilde.theta_tilde_min},
                        {"c_min", population_c_min(graph, cov)},
                        {"alpha", 1.0 - worst_incoherence},
                        {"lambda_max", lambda_max}};
  if (lambda) out["thresholds"] = to_json(theorem_thresholds(graph, *lambda));
  return out;
}

}  // namespace ising_lasso
