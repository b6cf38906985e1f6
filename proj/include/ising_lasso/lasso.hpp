#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "graph.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "samples.hpp"

namespace ising_lasso {

struct SolverConfig {
  double tol = 1e-8;                  ///< KKT residual target
  std::size_t max_iters = 100000;     ///< full coordinate cycles (or proximal steps)
  double active_threshold = 1e-8;     ///< |θ| above this counts as a selected neighbor
  bool record_objective = false;      ///< keep the objective after every cycle
  std::optional<Eigen::VectorXd> warm_start;
};

/// Regression of spin r on the remaining p-1 spins. The square loss is kept
/// through its sufficient statistics,
///   ℓ(θ) = ½·yy − bᵀθ + ½·θᵀQθ,
/// so the same problem type serves sample data (Q = Qⁿ) and exact population
/// moments (Q = Q*). The raw design is only kept when built from samples,
/// because the logistic loss needs it.
struct NeighborhoodProblem {
  Vertex r = 0;
  double lambda = 0.0;
  std::size_t p = 0;
  Eigen::MatrixXd gram;   ///< Q, (p-1)×(p-1)
  Eigen::VectorXd cross;  ///< b = E{x_{\r} x_r}
  double response_second_moment = 1.0;
  std::optional<Eigen::MatrixXd> predictors;  ///< n × (p-1)
  std::optional<Eigen::VectorXd> response;    ///< length n

  static NeighborhoodProblem from_second_moments(const Eigen::MatrixXd& moments, Vertex r, double lambda) {
    if (moments.rows() != moments.cols()) throw InvalidArgument("moment matrix must be square");
    const auto p = static_cast<std::size_t>(moments.rows());
    if (r >= p) throw InvalidArgument("response index out of range");
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
    NeighborhoodProblem prob;
    prob.r = r;
    prob.lambda = lambda;
    prob.p = p;
    auto keep = vertices_except(p, r);
    prob.gram = submatrix(moments, keep, keep);
    prob.cross = submatrix(moments, keep, {r});
    prob.response_second_moment = moments(static_cast<Index>(r), static_cast<Index>(r));
    return prob;
  }

  static NeighborhoodProblem from_samples(const SampleMatrix& samples, Vertex r, double lambda) {
    if (r >= samples.p()) throw InvalidArgument("response index out of range");
    return from_design(samples.to_double(), samples.second_moments(), r, lambda);
  }

  /// `x` is the n × p spin matrix as doubles and `moments` its (1/n)XᵀX;
  /// callers solving many nodes on one data set compute both once.
  static NeighborhoodProblem from_design(const Eigen::MatrixXd& x, const Eigen::MatrixXd& moments, Vertex r, double lambda) {
    auto prob = from_second_moments(moments, r, lambda);
    auto keep = vertices_except(static_cast<std::size_t>(x.cols()), r);
    Eigen::MatrixXd design(x.rows(), static_cast<Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) design.col(static_cast<Index>(j)) = x.col(static_cast<Index>(keep[j]));
    prob.predictors = std::move(design);
    prob.response = x.col(static_cast<Index>(r));
    return prob;
  }

  std::size_t dim() const noexcept { return p - 1; }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const { return gram * theta - cross; }

  double loss(const Eigen::VectorXd& theta) const {
    return 0.5 * response_second_moment - cross.dot(theta) + 0.5 * theta.dot(gram * theta);
  }

  double objective(const Eigen::VectorXd& theta) const { return loss(theta) + lambda * theta.lpNorm<1>(); }
};

struct LassoSolution {
  Vertex r = 0;
  double lambda = 0.0;
  Eigen::VectorXd coefficients;  ///< θ̂_{\r}, predictor order (vertices except r)
  Eigen::VectorXd subgradient;   ///< ẑ = −∇ℓ(θ̂)/λ; zero when λ = 0
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  double objective = 0.0;
  bool nonunique = false;  ///< λ = 0 with a singular Gram matrix
  std::vector<double> objective_trace;
};

inline double soft_threshold(double z, double t) noexcept {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

/// max over free coordinates of the KKT violation:
/// |g_t + λ·sign θ_t| when θ_t ≠ 0 and max(0, |g_t| − λ) otherwise.
inline double kkt_violation(const Eigen::VectorXd& grad, const Eigen::VectorXd& theta, double lambda,
                            const std::vector<bool>& free) {
  double worst = 0.0;
  for (Index j = 0; j < theta.size(); ++j) {
    if (!free[static_cast<std::size_t>(j)]) continue;
    double v = theta[j] != 0.0 ? std::abs(grad[j] + lambda * (theta[j] > 0 ? 1.0 : -1.0))
                               : std::max(0.0, std::abs(grad[j]) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

namespace detail {

inline LassoSolution coordinate_descent(const NeighborhoodProblem& prob, const std::vector<bool>& free,
                                        const SolverConfig& config) {
  const Index m = static_cast<Index>(prob.dim());
  const double lambda = prob.lambda;
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m);
  if (config.warm_start) {
    if (config.warm_start->size() != m) throw InvalidArgument("warm start has the wrong length");
    theta = *config.warm_start;
    for (Index j = 0; j < m; ++j)
      if (!free[static_cast<std::size_t>(j)]) theta[j] = 0.0;
  }

  LassoSolution sol;
  sol.r = prob.r;
  sol.lambda = lambda;
  Eigen::VectorXd grad = prob.gradient(theta);
  double residual = kkt_violation(grad, theta, lambda, free);
  std::size_t cycles = 0;
  if (config.record_objective) sol.objective_trace.push_back(prob.objective(theta));

  while (residual > config.tol) {
    if (cycles >= config.max_iters)
      throw ConvergenceError("lasso coordinate descent did not converge for node " + std::to_string(prob.r), residual, cycles);
    ++cycles;
    double max_change = 0.0;
    for (Index j = 0; j < m; ++j) {
      if (!free[static_cast<std::size_t>(j)]) continue;
      const double qjj = prob.gram(j, j);
      if (qjj <= 0.0) continue;
      const double old = theta[j];
      const double updated = soft_threshold(qjj * old - grad[j], lambda) / qjj;
      if (updated == old) continue;
      const double delta = updated - old;
      theta[j] = updated;
      grad.noalias() += delta * prob.gram.col(j);
      max_change = std::max(max_change, std::abs(delta));
    }
    // Fresh gradient each cycle so the residual carries no accumulated drift.
    grad = prob.gradient(theta);
    residual = kkt_violation(grad, theta, lambda, free);
    if (config.record_objective) sol.objective_trace.push_back(prob.objective(theta));
    if (max_change == 0.0) break;  // exact fixed point
  }

  sol.coefficients = theta;
  sol.iterations = cycles;
  sol.kkt_residual = residual;
  sol.objective = prob.objective(theta);
  sol.subgradient = lambda > 0 ? Eigen::VectorXd(-grad / lambda) : Eigen::VectorXd::Zero(m);
  if (lambda == 0.0) {
    std::vector<std::size_t> idx;
    for (Index j = 0; j < m; ++j)
      if (free[static_cast<std::size_t>(j)]) idx.push_back(static_cast<std::size_t>(j));
    sol.nonunique = !idx.empty() && min_eigenvalue(submatrix(prob.gram, idx, idx)) <= 1e-10;
  }
  return sol;
}

}  // namespace detail

/// Neighborhood Lasso: argmin ℓ(θ) + λ‖θ‖₁ by cyclic coordinate descent with
/// soft-threshold updates. Terminates once the KKT residual is at most
/// config.tol (or at an exact fixed point of the cycle).
inline LassoSolution solve_lasso(const NeighborhoodProblem& prob, const SolverConfig& config = {}) {
  return detail::coordinate_descent(prob, std::vector<bool>(prob.dim(), true), config);
}

/// Lasso with every coordinate outside `support` (vertex ids) pinned at 0.
/// The KKT residual covers the support coordinates only.
inline LassoSolution solve_lasso_restricted(const NeighborhoodProblem& prob, const std::vector<Vertex>& support,
                                            const SolverConfig& config = {}) {
  if (support.empty()) throw InvalidArgument("restricted support must be nonempty");
  std::vector<bool> free(prob.dim(), false);
  for (Vertex v : support) {
    if (v == prob.r || v >= prob.p) throw InvalidArgument("support vertex " + std::to_string(v) + " is invalid for node " + std::to_string(prob.r));
    free[predictor_index(prob.r, v)] = true;
  }
  return detail::coordinate_descent(prob, free, config);
}

// ---------------------------------------------------------------------------
// ℓ1-regularized logistic regression

namespace detail {
inline double softplus(double z) noexcept { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
inline double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace detail

/// argmin (1/n) Σ log(1 + exp(−2 x_r θᵀx_{\r})) + λ‖θ‖₁ by plain proximal
/// gradient (ISTA) with step 1/λmax(Q). The factor 2 makes θ
/// estimate the edge couplings J directly, since P(x_r | rest) ∝ exp(x_r Σ J x_t).
inline LassoSolution solve_logistic_l1(const NeighborhoodProblem& prob, const SolverConfig& config = {}) {
  if (!prob.predictors || !prob.response) throw InvalidArgument("logistic regression needs raw samples");
  if (!(prob.lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
  const Eigen::MatrixXd& x = *prob.predictors;
  const Eigen::VectorXd& y = *prob.response;
  const double n = static_cast<double>(x.rows());
  const Index m = x.cols();
  const double lambda = prob.lambda;
  const std::vector<bool> free(static_cast<std::size_t>(m), true);

  auto loss_of = [&](const Eigen::VectorXd& margin) {
    double s = 0.0;
    for (Index i = 0; i < margin.size(); ++i) s += detail::softplus(-2.0 * y[i] * margin[i]);
    return s / n;
  };
  auto grad_of = [&](const Eigen::VectorXd& margin) {
    Eigen::VectorXd w(margin.size());
    for (Index i = 0; i < margin.size(); ++i) w[i] = -2.0 * y[i] * detail::sigmoid(-2.0 * y[i] * margin[i]);
    return Eigen::VectorXd(x.transpose() * w / n);
  };

  Eigen::VectorXd theta = config.warm_start ? *config.warm_start : Eigen::VectorXd::Zero(m);
  if (theta.size() != m) throw InvalidArgument("warm start has the wrong length");
  Eigen::VectorXd margin = x * theta;
  double f = loss_of(margin);
  Eigen::VectorXd grad = grad_of(margin);
  double residual = kkt_violation(grad, theta, lambda, free);
  // The loss has Hessian (4/n) Xᵀ diag(σ(1−σ)) X ⪯ (1/n) XᵀX = Q, so 1/λmax(Q)
  // is a safe fixed step. A fixed step avoids line-search decisions that
  // are swamped by round-off near the optimum.
  const double step_l = std::max(max_eigenvalue(prob.gram), 1e-12);
  std::size_t iters = 0;

  LassoSolution sol;
  sol.r = prob.r;
  sol.lambda = lambda;
  if (config.record_objective) sol.objective_trace.push_back(f + lambda * theta.lpNorm<1>());

  while (residual > config.tol) {
    if (iters >= config.max_iters)
      throw ConvergenceError("logistic proximal gradient did not converge for node " + std::to_string(prob.r), residual, iters);
    ++iters;
    Eigen::VectorXd candidate(m);
    for (Index j = 0; j < m; ++j) candidate[j] = soft_threshold(theta[j] - grad[j] / step_l, lambda / step_l);
    Eigen::VectorXd cand_margin = x * candidate;
    double f_cand = loss_of(cand_margin);
    theta = candidate;
    margin = cand_margin;
    f = f_cand;
    grad = grad_of(margin);
    residual = kkt_violation(grad, theta, lambda, free);
    if (config.record_objective) sol.objective_trace.push_back(f + lambda * theta.lpNorm<1>());
  }

  sol.coefficients = theta;
  sol.iterations = iters;
  sol.kkt_residual = residual;
  sol.objective = f + lambda * theta.lpNorm<1>();
  sol.subgradient = lambda > 0 ? Eigen::VectorXd(-grad / lambda) : Eigen::VectorXd::Zero(m);
  return sol;
}

// ---------------------------------------------------------------------------
// Signed neighborhoods and whole-graph recovery

struct SignedNeighborhood {
  Vertex r = 0;
  std::map<Vertex, int> signs;  ///< neighbor → ±1

  friend bool operator==(const SignedNeighborhood&, const SignedNeighborhood&) = default;
};

inline SignedNeighborhood extract_signed_neighborhood(const LassoSolution& sol, double active_threshold = 1e-8) {
  SignedNeighborhood out{sol.r, {}};
  for (Index j = 0; j < sol.coefficients.size(); ++j) {
    double c = sol.coefficients[j];
    if (std::abs(c) > active_threshold) out.signs[predictor_vertex(sol.r, static_cast<std::size_t>(j))] = c > 0 ? 1 : -1;
  }
  return out;
}

enum class SolverKind { lasso, logistic };

inline std::string to_string(SolverKind k) { return k == SolverKind::lasso ? "lasso" : "logistic"; }

inline SolverKind solver_kind_from_string(const std::string& s) {
  if (s == "lasso") return SolverKind::lasso;
  if (s == "logistic") return SolverKind::logistic;
  throw InvalidArgument("unknown solver '" + s + "' (expected lasso or logistic)");
}

/// λ = κ·sqrt(log p / n), natural log.
struct LambdaRule {
  double kappa = 1.0;
  double operator()(std::size_t p, std::size_t n) const {
    return kappa * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
  }
};

struct GraphEstimate {
  double lambda = 0.0;
  std::vector<SignedNeighborhood> neighborhoods;
  std::vector<std::optional<std::string>> node_errors;  ///< solver failure per node
  std::map<std::pair<Vertex, Vertex>, int> and_edges;    ///< edge kept when both ends agree

  bool all_solved() const {
    return std::none_of(node_errors.begin(), node_errors.end(), [](const auto& e) { return e.has_value(); });
  }

  /// N̂±(r) = N±(r) for every r, with no solver failures.
  bool matches(const SignedGraph& truth) const {
    if (!all_solved() || neighborhoods.size() != truth.p()) return false;
    for (Vertex r = 0; r < truth.p(); ++r)
      if (neighborhoods[r].signs != true_signed_neighborhood(truth, r)) return false;
    return true;
  }
};

/// Runs the chosen solver for every node. Per-node failures are recorded, not
/// thrown, so one bad node does not hide the rest of the estimate.
inline GraphEstimate recover_graph(const SampleMatrix& samples, double lambda, SolverKind kind,
                                   const SolverConfig& config = {}, std::size_t workers = 1) {
  const std::size_t p = samples.p();
  GraphEstimate est;
  est.lambda = lambda;
  est.neighborhoods.resize(p);
  est.node_errors.resize(p);
  Eigen::MatrixXd moments = samples.second_moments();
  Eigen::MatrixXd x = kind == SolverKind::logistic ? samples.to_double() : Eigen::MatrixXd();
  parallel_for(p, workers, [&](std::size_t r) {
    est.neighborhoods[r].r = r;
    try {
      LassoSolution sol;
      if (kind == SolverKind::lasso) {
        sol = solve_lasso(NeighborhoodProblem::from_second_moments(moments, r, lambda), config);
      } else {
        sol = solve_logistic_l1(NeighborhoodProblem::from_design(x, moments, r, lambda), config);
      }
      est.neighborhoods[r] = extract_signed_neighborhood(sol, config.active_threshold);
    } catch (const Error& e) {
      est.node_errors[r] = std::string("node ") + std::to_string(r) + ": " + e.what();
    }
  });
  for (Vertex r = 0; r < p; ++r) {
    for (auto [t, s] : est.neighborhoods[r].signs) {
      if (t <= r) continue;
      auto it = est.neighborhoods[t].signs.find(r);
      if (it != est.neighborhoods[t].signs.end() && it->second == s) est.and_edges[{r, t}] = s;
    }
  }
  return est;
}

inline GraphEstimate recover_graph(const SampleMatrix& samples, const LambdaRule& rule, SolverKind kind,
                                   const SolverConfig& config = {}, std::size_t workers = 1) {
  return recover_graph(samples, rule(samples.p(), samples.n()), kind, config, workers);
}

}  // namespace ising_lasso
