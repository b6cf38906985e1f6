#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "graph.hpp"

namespace ising_lasso {

using Index = Eigen::Index;

/// All vertices of [0, p) except r, in increasing order. Position j in this
/// list is predictor j of the neighborhood regression for r.
inline std::vector<Vertex> vertices_except(std::size_t p, Vertex r) {
  std::vector<Vertex> out;
  out.reserve(p - 1);
  for (Vertex v = 0; v < p; ++v)
    if (v != r) out.push_back(v);
  return out;
}

inline Vertex predictor_vertex(Vertex r, std::size_t j) noexcept { return j < r ? j : j + 1; }
inline std::size_t predictor_index(Vertex r, Vertex v) noexcept { return v < r ? v : v - 1; }

inline Eigen::MatrixXd submatrix(const Eigen::MatrixXd& a, const std::vector<std::size_t>& rows,
                                 const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = a(static_cast<Index>(rows[i]), static_cast<Index>(cols[j]));
  return out;
}

inline Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<std::size_t>& idx) {
  Eigen::VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[static_cast<Index>(idx[i])];
  return out;
}

inline constexpr double kSymmetryTolerance = 1e-12;

/// Eigenvalues (ascending) of a symmetric matrix. Asymmetry above 1e-12 is
/// an error; below it the matrix is symmetrized first.
inline Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("eigenvalues need a square matrix");
  if (a.size() == 0) return Eigen::VectorXd();
  double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance) throw InvalidArgument("matrix is not symmetric (deviation " + std::to_string(asym) + ")");
  Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

inline double min_eigenvalue(const Eigen::MatrixXd& a) {
  auto ev = symmetric_eigenvalues(a);
  return ev.size() ? ev[0] : std::numeric_limits<double>::infinity();
}

inline double max_eigenvalue(const Eigen::MatrixXd& a) {
  auto ev = symmetric_eigenvalues(a);
  return ev.size() ? ev[ev.size() - 1] : 0.0;
}

/// |||A|||_inf = max_j sum_k |A_jk|; zero for an empty matrix.
inline double matrix_inf_norm(const Eigen::MatrixXd& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

inline Eigen::MatrixXd drop_row_col(const Eigen::MatrixXd& a, Vertex r) {
  auto keep = vertices_except(static_cast<std::size_t>(a.rows()), r);
  return submatrix(a, keep, keep);
}

}  // namespace ising_lasso
