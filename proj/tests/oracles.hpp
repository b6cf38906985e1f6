#pragma once
// Test-side reference computations, written independently of the library
// code paths they check: direct 2^p sums with plain weights, and an
// exhaustive sign-pattern search for the Lasso.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct WeightedEdge {
  std::size_t r, t;
  double j;
};

/// E{x_r x_t} for all pairs and E{x_r} by summing exp(Σ J x_r x_t) over all
/// states without any log-space tricks (fine for p ≤ 14 and |J| ≤ 1).
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> enumerate_moments(std::size_t p, const std::vector<WeightedEdge>& edges) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  double z = 0.0;
  std::vector<int> x(p);
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << p); ++s) {
    for (std::size_t v = 0; v < p; ++v) x[v] = (s >> v) & 1 ? 1 : -1;
    double energy = 0.0;
    for (const auto& e : edges) energy += e.j * x[e.r] * x[e.t];
    double w = std::exp(energy);
    z += w;
    for (std::size_t a = 0; a < p; ++a) {
      mean[a] += w * x[a];
      for (std::size_t b = 0; b < p; ++b) m(a, b) += w * x[a] * x[b];
    }
  }
  return {m / z, mean / z};
}

/// Population minimizer (Q*)^{-1} b for node r from a full second-moment
/// matrix; returned in full p-vector form with a zero at r.
inline Eigen::VectorXd population_minimizer(const Eigen::MatrixXd& m, std::size_t r) {
  const std::size_t p = m.rows();
  std::vector<std::size_t> idx;
  for (std::size_t v = 0; v < p; ++v)
    if (v != r) idx.push_back(v);
  Eigen::MatrixXd q(p - 1, p - 1);
  Eigen::VectorXd b(p - 1);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    b[a] = m(idx[a], r);
    for (std::size_t c = 0; c < idx.size(); ++c) q(a, c) = m(idx[a], idx[c]);
  }
  Eigen::VectorXd sol = q.fullPivLu().solve(b);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
  for (std::size_t a = 0; a < idx.size(); ++a) out[idx[a]] = sol[a];
  return out;
}

/// Random tree on p vertices (Prüfer-free: vertex v joins a uniform earlier
/// vertex) with couplings uniform in [-cap, cap] away from zero.
inline std::vector<WeightedEdge> random_tree(std::size_t p, double cap, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> mag(0.05, cap);
  std::vector<WeightedEdge> edges;
  for (std::size_t v = 1; v < p; ++v) {
    std::size_t u = std::uniform_int_distribution<std::size_t>(0, v - 1)(gen);
    double j = mag(gen) * (gen() & 1 ? 1.0 : -1.0);
    edges.push_back({u, v, j});
  }
  return edges;
}

/// min_θ ½ yy − bᵀθ + ½ θᵀQθ + λ‖θ‖₁ by trying every sign pattern in
/// {−1, 0, +1}^m: on a fixed pattern the problem is an unconstrained
/// quadratic on the active coordinates, kept only if the solution has the
/// assumed signs. Patterns with a singular active block are skipped; some
/// optimal solution always has linearly independent active columns.
inline double lasso_bruteforce(const Eigen::MatrixXd& q, const Eigen::VectorXd& b, double yy, double lambda,
                               Eigen::VectorXd* argmin = nullptr) {
  const int m = static_cast<int>(b.size());
  double best = std::numeric_limits<double>::infinity();
  int patterns = 1;
  for (int i = 0; i < m; ++i) patterns *= 3;
  for (int code = 0; code < patterns; ++code) {
    std::vector<int> sign(m);
    std::vector<int> active;
    int c = code;
    for (int i = 0; i < m; ++i) {
      sign[i] = c % 3 - 1;
      c /= 3;
      if (sign[i] != 0) active.push_back(i);
    }
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(m);
    if (!active.empty()) {
      const int k = static_cast<int>(active.size());
      Eigen::MatrixXd qa(k, k);
      Eigen::VectorXd rhs(k);
      for (int a = 0; a < k; ++a) {
        rhs[a] = b[active[a]] - lambda * sign[active[a]];
        for (int d = 0; d < k; ++d) qa(a, d) = q(active[a], active[d]);
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa);
      if (svd.singularValues().minCoeff() < 1e-10 * std::max(1.0, svd.singularValues().maxCoeff())) continue;
      Eigen::VectorXd sol = qa.llt().solve(rhs);
      bool consistent = true;
      for (int a = 0; a < k; ++a)
        if (sol[a] * sign[active[a]] <= 0) consistent = false;
      if (!consistent) continue;
      for (int a = 0; a < k; ++a) theta[active[a]] = sol[a];
    }
    double obj = 0.5 * yy - b.dot(theta) + 0.5 * theta.dot(q * theta) + lambda * theta.lpNorm<1>();
    if (obj < best) {
      best = obj;
      if (argmin) *argmin = theta;
    }
  }
  return best;
}

}  // namespace oracle
