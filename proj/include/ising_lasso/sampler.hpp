#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "graph.hpp"
#include "rng.hpp"
#include "samples.hpp"

namespace ising_lasso {

struct SamplerConfig {
  std::size_t burn_in_sweeps = 1000;
  std::size_t thinning_sweeps = 10;  ///< full sweeps between retained samples, >= 1
  std::uint64_t seed = 0;

  std::string digest() const {
    return "gibbs-heat-bath burn_in=" + std::to_string(burn_in_sweeps) + " thinning=" + std::to_string(thinning_sweeps) +
           " seed=" + std::to_string(seed);
  }
};

namespace detail {
// Compressed adjacency with couplings for the inner sampling loop.
struct CouplingTable {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> neighbor;
  std::vector<double> coupling;

  explicit CouplingTable(const SignedGraph& g) : offsets(g.p() + 1, 0) {
    for (Vertex r = 0; r < g.p(); ++r) offsets[r + 1] = offsets[r] + g.degree(r);
    neighbor.resize(offsets.back());
    coupling.resize(offsets.back());
    for (Vertex r = 0; r < g.p(); ++r) {
      std::size_t k = offsets[r];
      for (const auto& [t, idx] : g.incident(r)) {
        neighbor[k] = t;
        coupling[k] = g.edges()[idx].coupling;
        ++k;
      }
    }
  }
};
}  // namespace detail

/// Single-site heat-bath Gibbs sampler for exp(sum_e J_e x_r x_t).
/// Site r is set to +1 with probability 1 / (1 + exp(-2 h_r)), where
/// h_r = sum_{t in N(r)} J_rt x_t. Sites are visited in index order; one
/// sweep updates every site once.
inline SampleMatrix gibbs_sample(const SignedGraph& graph, std::size_t n, const SamplerConfig& config) {
  if (n == 0) throw InvalidArgument("gibbs_sample needs n >= 1");
  if (config.thinning_sweeps < 1) throw InvalidArgument("thinning_sweeps must be >= 1");
  if (!graph.couplings_assigned()) throw InvalidArgument("gibbs_sample needs assigned couplings");
  const std::size_t p = graph.p();
  if (p == 0) throw InvalidArgument("gibbs_sample needs p >= 1");

  detail::CouplingTable table(graph);
  Rng rng(config.seed);
  std::vector<std::int8_t> x(p);
  for (auto& v : x) v = (rng() >> 63) ? 1 : -1;

  auto sweep = [&] {
    for (std::size_t r = 0; r < p; ++r) {
      double h = 0.0;
      for (std::size_t k = table.offsets[r]; k < table.offsets[r + 1]; ++k) h += table.coupling[k] * x[table.neighbor[k]];
      double prob_up = 1.0 / (1.0 + std::exp(-2.0 * h));
      x[r] = uniform01(rng) < prob_up ? 1 : -1;
    }
  };

  for (std::size_t s = 0; s < config.burn_in_sweeps; ++s) sweep();
  SampleMatrix::Storage data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < config.thinning_sweeps; ++s) sweep();
    for (std::size_t r = 0; r < p; ++r) data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = x[r];
  }
  return SampleMatrix(std::move(data), config.digest());
}

// ---------------------------------------------------------------------------
// Exact enumeration

inline constexpr std::size_t kMaxEnumerationSpins = 20;

struct ExactMoments {
  Eigen::VectorXd mean;            ///< E{x_r}
  Eigen::MatrixXd second_moment;   ///< E{x_r x_t}, unit diagonal
  Eigen::MatrixXd covariance;      ///< E{x_r x_t} - E{x_r}E{x_t}
  double log_partition = 0.0;
};

/// Visits every configuration x ∈ {-1,+1}^p with its exact probability.
/// The visitor is called as visit(std::span<const std::int8_t> x, double prob).
/// Spin v of configuration index s is +1 when bit v of s is set.
template <class Visitor>
double for_each_state(const SignedGraph& graph, Visitor&& visit) {
  const std::size_t p = graph.p();
  if (p > kMaxEnumerationSpins)
    throw InvalidArgument("exact enumeration is capped at p <= " + std::to_string(kMaxEnumerationSpins) + " spins");
  if (!graph.couplings_assigned()) throw InvalidArgument("exact enumeration needs assigned couplings");
  const std::size_t states = std::size_t{1} << p;
  std::vector<double> energy(states);
  double max_energy = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < states; ++s) {
    double e = 0.0;
    for (const auto& edge : graph.edges()) {
      bool same = ((s >> edge.r) & 1u) == ((s >> edge.t) & 1u);
      e += same ? edge.coupling : -edge.coupling;
    }
    energy[s] = e;
    max_energy = std::max(max_energy, e);
  }
  double z_scaled = 0.0;
  for (double e : energy) z_scaled += std::exp(e - max_energy);
  const double log_z = max_energy + std::log(z_scaled);

  std::vector<std::int8_t> x(p);
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t v = 0; v < p; ++v) x[v] = ((s >> v) & 1u) ? 1 : -1;
    visit(std::span<const std::int8_t>(x), std::exp(energy[s] - log_z));
  }
  return log_z;
}

/// Mean, second moments and covariance by summing over all 2^p states in
/// log space. Capped at p <= 20.
inline ExactMoments exact_enumerate(const SignedGraph& graph) {
  const std::size_t p = graph.p();
  ExactMoments m;
  m.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  m.second_moment = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  m.log_partition = for_each_state(graph, [&](std::span<const std::int8_t> x, double prob) {
    for (std::size_t v = 0; v < p; ++v) {
      m.mean[static_cast<Eigen::Index>(v)] += prob * x[v];
    }
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t t = r + 1; t < p; ++t) m.second_moment(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) += prob * (x[r] * x[t]);
  });
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(p); ++r) {
    m.second_moment(r, r) = 1.0;
    for (Eigen::Index t = r + 1; t < static_cast<Eigen::Index>(p); ++t) m.second_moment(t, r) = m.second_moment(r, t);
  }
  m.covariance = m.second_moment - m.mean * m.mean.transpose();
  return m;
}

}  // namespace ising_lasso
