#pragma once

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bethe.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "lasso.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sampler.hpp"
#include "samples.hpp"

namespace ising_lasso {

// ---------------------------------------------------------------------------
// Covariance conditions

struct CovarianceReport {
  Vertex r = 0;
  std::vector<Vertex> support;
  Eigen::MatrixXd q;          ///< (p-1)×(p-1) second-moment matrix of x_{\r}
  double eig_min_ss = 0.0;    ///< Λ_min(Q_SS); +inf for an empty S
  double eig_max_full = 0.0;  ///< Λ_max(Q)
  double incoherence = 0.0;   ///< |||Q_{S^cS} Q_SS^{-1}|||_∞; +inf when Q_SS is singular
};

/// Report for node r from a full p × p second-moment matrix (sample or
/// population). A singular Q_SS shows up as infinite incoherence rather than
/// an exception, so rank-deficient sample matrices can still be audited.
inline CovarianceReport covariance_report(const Eigen::MatrixXd& moments, Vertex r, const std::vector<Vertex>& support) {
  const auto p = static_cast<std::size_t>(moments.rows());
  if (r >= p) throw InvalidArgument("node index out of range");
  CovarianceReport rep;
  rep.r = r;
  rep.support = support;
  rep.q = drop_row_col(moments, r);
  rep.eig_max_full = max_eigenvalue(rep.q);
  std::vector<std::size_t> s_idx;
  for (Vertex v : support) {
    if (v >= p || v == r) throw InvalidArgument("support vertex " + std::to_string(v) + " is invalid");
    s_idx.push_back(predictor_index(r, v));
  }
  rep.eig_min_ss = min_eigenvalue(submatrix(rep.q, s_idx, s_idx));
  if (support.empty()) {
    rep.incoherence = 0.0;
  } else if (rep.eig_min_ss > 1e-12) {
    rep.incoherence = incoherence_norm(moments, r, support);
  } else {
    rep.incoherence = std::numeric_limits<double>::infinity();
  }
  return rep;
}

/// Qⁿ = (1/n) Σ x_{\r} x_{\r}ᵀ with its eigen summaries for support S.
inline CovarianceReport sample_covariance(const SampleMatrix& samples, Vertex r, const std::vector<Vertex>& support) {
  return covariance_report(samples.second_moments(), r, support);
}

struct ConditionCheck {
  double eig_min_ss = 0.0;
  double eig_floor = 0.0;          ///< C_min − δ
  double eig_margin = 0.0;         ///< Λ_min(Q_SS) − (C_min − δ)
  double incoherence = 0.0;
  double incoherence_limit = 0.0;  ///< 1 − α/2
  double incoherence_margin = 0.0;
  bool eigen_pass = false;
  bool incoherence_pass = false;
  bool pass() const noexcept { return eigen_pass && incoherence_pass; }
};

/// Sample-level dependency and incoherence conditions:
/// Λ_min(Q_SS) ≥ C_min − δ and |||Q_{S^cS} Q_SS^{-1}|||_∞ ≤ 1 − α/2.
/// Comparisons allow 1e-12 of round-off.
inline ConditionCheck check_conditions(const CovarianceReport& rep, double c_min_target, double alpha_target, double delta = 0.0) {
  ConditionCheck c;
  c.eig_min_ss = rep.eig_min_ss;
  c.eig_floor = c_min_target - delta;
  c.eig_margin = rep.eig_min_ss - c.eig_floor;
  c.incoherence = rep.incoherence;
  c.incoherence_limit = 1.0 - alpha_target / 2.0;
  c.incoherence_margin = c.incoherence_limit - rep.incoherence;
  c.eigen_pass = c.eig_margin >= -1e-12;
  c.incoherence_pass = c.incoherence_margin >= -1e-12;
  return c;
}

// ---------------------------------------------------------------------------
// Noise vector Wⁿ = −∇ℓ(θ̃*) = (1/n) Σ_i Z⁽ⁱ⁾,  Z_s = x_s (x_r − Σ_t θ̃_rt x_t)

struct NoiseVector {
  Eigen::VectorXd w;          ///< predictor order (vertices except r)
  double inf_norm = 0.0;
  double max_abs_z = 0.0;     ///< max over samples and coordinates of |Z_s⁽ⁱ⁾|
  double max_variance = 0.0;  ///< largest per-coordinate sample variance of Z_s
};

inline NoiseVector compute_noise_vector(const SampleMatrix& samples, Vertex r, const RescaledParams& theta_tilde) {
  if (theta_tilde.p() != samples.p()) throw InvalidArgument("rescaled parameters and samples disagree on p");
  if (r >= samples.p()) throw InvalidArgument("node index out of range");
  Eigen::MatrixXd x = samples.to_double();
  Eigen::VectorXd row = theta_tilde.theta.row(static_cast<Index>(r)).transpose();  // full length p, zero at r
  Eigen::VectorXd residual = x.col(static_cast<Index>(r)) - x * row;
  const double n = static_cast<double>(samples.n());
  Eigen::VectorXd full = x.transpose() * residual / n;
  NoiseVector out;
  out.w = subvector(full, vertices_except(samples.p(), r));
  out.inf_norm = out.w.size() ? out.w.cwiseAbs().maxCoeff() : 0.0;
  // |x_s| = 1, so |Z_s⁽ⁱ⁾| = |residual_i| and Z_s² = residual_i².
  out.max_abs_z = residual.cwiseAbs().maxCoeff();
  const double mean_sq = residual.squaredNorm() / n;
  for (Index j = 0; j < out.w.size(); ++j) out.max_variance = std::max(out.max_variance, mean_sq - out.w[j] * out.w[j]);
  return out;
}

/// Per-coordinate exact statistics of Z_s under the model, by enumeration.
struct ZStatistics {
  Eigen::VectorXd mean;         ///< E[Z_s]
  Eigen::VectorXd second;       ///< E[Z_s²]
  Eigen::VectorXd max_abs;      ///< max over all 2^p states of |Z_s|
};

inline ZStatistics exact_z_statistics(const SignedGraph& graph, Vertex r, const RescaledParams& theta_tilde) {
  const std::size_t p = graph.p();
  const auto m = static_cast<Index>(p - 1);
  ZStatistics z{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
  Eigen::VectorXd row = theta_tilde.theta.row(static_cast<Index>(r)).transpose();
  for_each_state(graph, [&](std::span<const std::int8_t> x, double prob) {
    double resid = x[r];
    for (std::size_t t = 0; t < p; ++t) resid -= row[static_cast<Index>(t)] * x[t];
    for (Index j = 0; j < m; ++j) {
      double zs = x[predictor_vertex(r, static_cast<std::size_t>(j))] * resid;
      z.mean[j] += prob * zs;
      z.second[j] += prob * zs * zs;
      z.max_abs[j] = std::max(z.max_abs[j], std::abs(zs));
    }
  });
  return z;
}

// ---------------------------------------------------------------------------
// Primal-dual witness

struct WitnessOptions {
  SolverConfig solver{};
  std::optional<double> c_min;  ///< inject instead of the measured Λ_min(Q_SS)
  std::optional<double> alpha;  ///< inject instead of the measured 1 − incoherence
  std::size_t d = 0;            ///< degree used in the ℓ2 bound; 0 means |S|
  double slack = 1e-8;          ///< tolerance on inequalities that hold exactly in exact arithmetic
};

/// Primal-dual witness for node r with candidate support S (the true
/// neighborhood). Only raw quantities are stored; every check is evaluated
/// from them on demand.
struct WitnessCertificate {
  Vertex r = 0;
  double lambda = 0.0;
  std::vector<Vertex> support;
  std::vector<Vertex> complement;
  Eigen::VectorXd theta_hat_s;
  Eigen::VectorXd theta_tilde_s;
  Eigen::VectorXd z_s;
  Eigen::VectorXd z_sc;
  Eigen::VectorXd w_s;
  Eigen::VectorXd w_sc;
  Eigen::MatrixXd q_ss;
  Eigen::MatrixXd q_sc_s;
  double measured_c_min = 0.0;
  double measured_incoherence = 0.0;
  double c_min = 0.0;  ///< value used in the ℓ2 bound
  double alpha = 0.0;  ///< value reported against the incoherence target
  std::size_t d = 0;
  double theta_tilde_min = 0.0;
  double restricted_kkt_residual = 0.0;
  double slack = 1e-8;

  double z_sc_inf_norm() const { return z_sc.size() ? z_sc.cwiseAbs().maxCoeff() : 0.0; }
  double strict_feasibility_margin() const { return 1.0 - z_sc_inf_norm(); }

  bool sign_consistent() const {
    for (Index i = 0; i < theta_hat_s.size(); ++i) {
      if (theta_hat_s[i] == 0.0 || (theta_hat_s[i] > 0) != (theta_tilde_s[i] > 0)) return false;
    }
    return true;
  }

  double noise_inf_norm() const {
    double a = w_s.size() ? w_s.cwiseAbs().maxCoeff() : 0.0;
    double b = w_sc.size() ? w_sc.cwiseAbs().maxCoeff() : 0.0;
    return std::max(a, b);
  }
  bool noise_within_half_lambda() const { return noise_inf_norm() <= lambda / 2.0; }

  double l2_error() const { return (theta_hat_s - theta_tilde_s).norm(); }
  double l2_bound() const { return 3.0 * lambda * std::sqrt(static_cast<double>(d)) / c_min; }
  double linf_error() const { return theta_hat_s.size() ? (theta_hat_s - theta_tilde_s).cwiseAbs().maxCoeff() : 0.0; }
  double half_theta_tilde_min() const { return theta_tilde_min / 2.0; }

  /// (1 − α̂)(1 + ‖W_S‖∞/λ) + ‖W_{S^c}‖∞/λ with α̂ from the measured incoherence.
  double dual_chain_bound() const {
    double ws = w_s.size() ? w_s.cwiseAbs().maxCoeff() : 0.0;
    double wsc = w_sc.size() ? w_sc.cwiseAbs().maxCoeff() : 0.0;
    return measured_incoherence * (1.0 + ws / lambda) + wsc / lambda;
  }

  /// Max-abs residual of both blocks of the zero-subgradient system
  /// Q_{·S}(θ̂_S − θ̃_S) = W − λ ẑ.
  double zero_subgradient_residual() const {
    Eigen::VectorXd u = theta_hat_s - theta_tilde_s;
    double a = (q_ss * u - w_s + lambda * z_s).cwiseAbs().maxCoeff();
    double b = z_sc.size() ? (q_sc_s * u - w_sc + lambda * z_sc).cwiseAbs().maxCoeff() : 0.0;
    return std::max(a, b);
  }

  std::map<std::string, bool> checks() const {
    return {
        {"strict_dual_feasibility", strict_feasibility_margin() > 0.0},
        {"sign_consistency", sign_consistent()},
        // Conditional statement: vacuous when ‖W‖∞ > λ/2.
        {"l2_consistency", !noise_within_half_lambda() || l2_error() <= l2_bound() + slack},
        {"linf_half_theta_tilde_min", linf_error() <= half_theta_tilde_min() + slack},
        {"dual_feasibility_chain", z_sc_inf_norm() <= dual_chain_bound() + slack},
    };
  }

  bool all_pass() const {
    for (const auto& [name, ok] : checks())
      if (!ok) return false;
    return true;
  }
};

namespace detail {

inline WitnessCertificate build_witness(const Eigen::MatrixXd& moments, Vertex r, const std::vector<Vertex>& support,
                                        const RescaledParams& theta_tilde, double lambda, const WitnessOptions& opts) {
  const auto p = static_cast<std::size_t>(moments.rows());
  if (!(lambda > 0)) throw InvalidArgument("witness construction needs lambda > 0");
  if (support.empty()) throw InvalidArgument("witness construction needs a nonempty support");
  if (theta_tilde.p() != p) throw InvalidArgument("rescaled parameters and data disagree on p");
  if (r >= p) throw InvalidArgument("node index out of range");

  auto prob = NeighborhoodProblem::from_second_moments(moments, r, lambda);
  Eigen::VectorXd tilde = theta_tilde.row(r);
  Eigen::VectorXd w = prob.cross - prob.gram * tilde;

  std::vector<std::size_t> s_idx, sc_idx;
  std::vector<bool> in_s(p - 1, false);
  for (Vertex v : support) {
    if (v >= p || v == r) throw InvalidArgument("support vertex " + std::to_string(v) + " is invalid");
    in_s[predictor_index(r, v)] = true;
  }
  WitnessCertificate cert;
  for (std::size_t j = 0; j + 1 < p; ++j) {
    if (in_s[j]) {
      s_idx.push_back(j);
      cert.support.push_back(predictor_vertex(r, j));
    } else {
      sc_idx.push_back(j);
      cert.complement.push_back(predictor_vertex(r, j));
    }
  }
  cert.r = r;
  cert.lambda = lambda;
  cert.q_ss = submatrix(prob.gram, s_idx, s_idx);
  cert.q_sc_s = submatrix(prob.gram, sc_idx, s_idx);
  cert.measured_c_min = min_eigenvalue(cert.q_ss);
  if (!(cert.measured_c_min > 1e-12)) throw SingularMatrix("Q_SS is not invertible", cert.measured_c_min);
  cert.measured_incoherence =
      sc_idx.empty() ? 0.0 : matrix_inf_norm(cert.q_ss.llt().solve(cert.q_sc_s.transpose()).transpose());
  cert.c_min = opts.c_min.value_or(cert.measured_c_min);
  cert.alpha = opts.alpha.value_or(1.0 - cert.measured_incoherence);
  cert.d = opts.d ? opts.d : support.size();
  cert.theta_tilde_min = theta_tilde.theta_tilde_min;
  cert.slack = opts.slack;

  // (a) restricted Lasso on S; ẑ_S from its subgradient, which equals
  //     sign(θ̂_S) on active coordinates.
  LassoSolution restricted = solve_lasso_restricted(prob, cert.support, opts.solver);
  cert.restricted_kkt_residual = restricted.kkt_residual;
  cert.theta_hat_s = subvector(restricted.coefficients, s_idx);
  cert.theta_tilde_s = subvector(tilde, s_idx);
  cert.z_s = subvector(restricted.subgradient, s_idx);
  for (Index i = 0; i < cert.theta_hat_s.size(); ++i)
    if (cert.theta_hat_s[i] != 0.0) cert.z_s[i] = cert.theta_hat_s[i] > 0 ? 1.0 : -1.0;
  cert.w_s = subvector(w, s_idx);
  cert.w_sc = subvector(w, sc_idx);
  // (b) θ̂_{S^c} = 0; (c) ẑ_{S^c} from the S^c block of the zero-subgradient system.
  cert.z_sc = (cert.w_sc - cert.q_sc_s * (cert.theta_hat_s - cert.theta_tilde_s)) / lambda;
  return cert;
}

}  // namespace detail

/// Witness on sample data: Qⁿ and b from the samples, Wⁿ = b − Qⁿθ̃*.
inline WitnessCertificate construct_witness(const SampleMatrix& samples, Vertex r, const std::vector<Vertex>& support,
                                            const RescaledParams& theta_tilde, double lambda, const WitnessOptions& opts = {}) {
  return detail::build_witness(samples.second_moments(), r, support, theta_tilde, lambda, opts);
}

/// Witness in the population limit: exact moments in place of Qⁿ and b, so
/// W vanishes up to round-off when θ̃* is the population minimizer.
inline WitnessCertificate construct_witness_population(const Eigen::MatrixXd& moments, Vertex r,
                                                       const std::vector<Vertex>& support, const RescaledParams& theta_tilde,
                                                       double lambda, const WitnessOptions& opts = {}) {
  return detail::build_witness(moments, r, support, theta_tilde, lambda, opts);
}

namespace detail {
inline nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
}  // namespace detail

inline nlohmann::json to_json(const WitnessCertificate& c) {
  nlohmann::json checks = nlohmann::json::object();
  for (const auto& [name, ok] : c.checks()) checks[name] = ok;
  return {{"r", c.r},
          {"lambda", c.lambda},
          {"support", c.support},
          {"complement", c.complement},
          {"theta_hat_S", detail::vec_json(c.theta_hat_s)},
          {"theta_tilde_S", detail::vec_json(c.theta_tilde_s)},
          {"z_S", detail::vec_json(c.z_s)},
          {"z_Sc", detail::vec_json(c.z_sc)},
          {"W_S", detail::vec_json(c.w_s)},
          {"W_Sc", detail::vec_json(c.w_sc)},
          {"strict_feasibility_margin", c.strict_feasibility_margin()},
          {"sign_consistent", c.sign_consistent()},
          {"l2_error", c.l2_error()},
          {"l2_bound", c.l2_bound()},
          {"linf_error", c.linf_error()},
          {"half_theta_tilde_min", c.half_theta_tilde_min()},
          {"noise_inf_norm", c.noise_inf_norm()},
          {"dual_chain_bound", c.dual_chain_bound()},
          {"measured_c_min", c.measured_c_min},
          {"measured_incoherence", c.measured_incoherence},
          {"c_min", c.c_min},
          {"alpha", c.alpha},
          {"d", c.d},
          {"zero_subgradient_residual", c.zero_subgradient_residual()},
          {"all_checks", checks},
          {"pass", c.all_pass()}};
}

// ---------------------------------------------------------------------------
// Tail-rate probe for ‖Wⁿ‖∞

struct TailRow {
  std::size_t n = 0;
  double lambda = 0.0;
  double empirical_prob = 0.0;
  double bound = 0.0;       ///< 2 exp(−c log p)
  std::size_t trials = 0;
  std::size_t hits = 0;
  double stderr_ = 0.0;     ///< binomial standard error of empirical_prob
  bool in_precondition = false;  ///< n ≥ (c+1) d² log p
};

struct TailProbeConfig {
  Vertex node = 0;
  double c = 0.5;
  double alpha = 0.5;
  SamplerConfig sampler{};  ///< seed is replaced per trial
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// λ at the lower end allowed for the concentration statement:
/// 4 √(c+1) (2 − α)/α · √(log p / n).
inline double tail_lambda(double c, double alpha, std::size_t p, std::size_t n) {
  return 4.0 * std::sqrt(c + 1.0) * (2.0 - alpha) / alpha * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
}

/// Monte Carlo estimate of P((2 − α)/λ · ‖Wⁿ‖∞ ≥ α/2) for each n in the grid,
/// with fresh Gibbs chains per trial.
inline std::vector<TailRow> tail_rate_probe(const SignedGraph& graph, const RescaledParams& theta_tilde,
                                            const std::vector<std::size_t>& n_grid, std::size_t trials,
                                            const TailProbeConfig& cfg) {
  std::vector<TailRow> rows;
  if (trials == 0) return rows;
  const std::size_t p = graph.p();
  const double log_p = std::log(static_cast<double>(p));
  const double d = static_cast<double>(graph.max_degree());
  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    const std::size_t n = n_grid[gi];
    TailRow row;
    row.n = n;
    row.trials = trials;
    row.lambda = tail_lambda(cfg.c, cfg.alpha, p, n);
    row.bound = 2.0 * std::exp(-cfg.c * log_p);
    row.in_precondition = static_cast<double>(n) >= (cfg.c + 1.0) * d * d * log_p;
    std::vector<char> hit(trials, 0);
    parallel_for(trials, cfg.workers, [&](std::size_t t) {
      SamplerConfig sc = cfg.sampler;
      sc.seed = derive_seed(cfg.seed, {n, t});
      auto samples = gibbs_sample(graph, n, sc);
      auto noise = compute_noise_vector(samples, cfg.node, theta_tilde);
      hit[t] = (2.0 - cfg.alpha) / row.lambda * noise.inf_norm >= cfg.alpha / 2.0;
    });
    for (char h : hit) row.hits += h ? 1 : 0;
    row.empirical_prob = static_cast<double>(row.hits) / static_cast<double>(trials);
    row.stderr_ = std::sqrt(row.empirical_prob * (1.0 - row.empirical_prob) / static_cast<double>(trials));
    rows.push_back(row);
  }
  return rows;
}

inline std::string tail_rows_csv(const std::vector<TailRow>& rows) {
  std::string out = "n,lambda,empirical_prob,bound,trials\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%zu\n", r.n, r.lambda, r.empirical_prob, r.bound, r.trials);
    out += buf;
  }
  return out;
}

}  // namespace ising_lasso
