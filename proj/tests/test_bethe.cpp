#include <cmath>

#include <gtest/gtest.h>

#include <ising_lasso/bethe.hpp>
#include <ising_lasso/sampler.hpp>

#include "oracles.hpp"

using namespace ising_lasso;

namespace {

SignedGraph from_edges(std::size_t p, const std::vector<oracle::WeightedEdge>& edges) {
  SignedGraph g(p);
  std::vector<double> j;
  for (const auto& e : edges) {
    g.add_edge(e.r, e.t);
    j.push_back(e.j);
  }
  if (!j.empty()) g.set_couplings(j);
  return g;
}

SignedGraph regular_tree(double theta0) { return assign_couplings(generate_bethe_tree(16, 3), UniformPositive{theta0}, 0); }

}  // namespace

TEST(RescaledTheta, InteriorVertexOfRegularTree) {
  auto tt = rescaled_theta(regular_tree(0.4));
  EXPECT_NEAR(tt.theta(0, 1), 0.294827, 2e-6);
  const double t = std::tanh(0.4);
  EXPECT_NEAR(tt.theta(0, 1), t / (1 + 2 * t * t), 1e-15);
  EXPECT_EQ(tt.theta(0, 5), 0.0);
  EXPECT_EQ(tt.theta(0, 0), 0.0);
}

TEST(RescaledTheta, MatchesPopulationMinimizerOnRandomTrees) {
  for (std::uint32_t seed = 0; seed < 8; ++seed) {
    const std::size_t p = 6 + seed % 5;
    auto edges = oracle::random_tree(p, 0.6, seed);
    auto [m, mean] = oracle::enumerate_moments(p, edges);
    auto tt = rescaled_theta(from_edges(p, edges));
    for (Vertex r = 0; r < p; ++r) {
      Eigen::VectorXd ref = oracle::population_minimizer(m, r);
      for (Vertex t = 0; t < p; ++t) EXPECT_NEAR(tt.theta(r, t), ref[t], 1e-10) << "seed " << seed << " r " << r << " t " << t;
    }
  }
}

TEST(RescaledTheta, SmallCouplingLimit) {
  auto tt = rescaled_theta(regular_tree(1e-4));
  EXPECT_LT(std::abs(tt.theta(0, 1) - 1e-4) / 1e-4, 1e-6);
}

TEST(RescaledTheta, RejectsLoopyGraph) {
  auto g = assign_couplings(generate_random_regular(8, 3, 1), MixedSign{0.4}, 1);
  EXPECT_THROW(rescaled_theta(g), NotATree);
  EXPECT_THROW(tree_covariance(g), NotATree);
  EXPECT_THROW(bethe_inverse_covariance(g), NotATree);
}

TEST(RescaledThetaRr, ClosedForms) {
  EXPECT_NEAR(rescaled_theta_rr(3, 0.4, +1), 0.294827, 2e-6);
  EXPECT_NEAR(rescaled_theta_rr(3, 0.4, -1), -0.294827, 2e-6);
  EXPECT_NEAR(rescaled_theta_rr(4, 0.2, +1), 0.176722, 5e-7);
  EXPECT_NEAR(rescaled_theta_rr(3, 1e-6, +1), 1e-6, 1e-15);
}

TEST(TreeCovariance, PathProducts) {
  SignedGraph g(3);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.set_couplings({0.4, 0.4});
  auto c = tree_covariance(g);
  EXPECT_NEAR(c(0, 1), 0.379949, 5e-7);
  EXPECT_NEAR(c(0, 2), 0.144361, 5e-7);
  auto ex = exact_enumerate(g);
  EXPECT_LT((c - ex.covariance).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TreeCovariance, ForestHasZeroAcrossComponents) {
  auto g = assign_couplings(generate_star(6, 3), UniformPositive{0.5}, 0);
  auto c = tree_covariance(g);
  EXPECT_EQ(c(1, 5), 0.0);
  EXPECT_EQ(c(4, 5), 0.0);
  EXPECT_EQ(c(5, 5), 1.0);
}

TEST(InverseCovariance, InvertsTreeCovariance) {
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    const std::size_t p = 3 + seed;
    auto g = from_edges(p, oracle::random_tree(p, 0.9, 100 + seed));
    Eigen::MatrixXd prod = tree_covariance(g) * bethe_inverse_covariance(g);
    EXPECT_LT((prod - Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(InverseCovariance, SingleEdge) {
  SignedGraph g(2);
  g.add_edge(0, 1);
  g.set_couplings({0.7});
  const double t = std::tanh(0.7);
  auto k = bethe_inverse_covariance(g);
  EXPECT_NEAR(k(0, 0), 1 / (1 - t * t), 1e-15);
  EXPECT_NEAR(k(0, 1), -t / (1 - t * t), 1e-15);
  EXPECT_TRUE(bethe_inverse_covariance(SignedGraph(4)).isIdentity());
}

TEST(RrConstants, DegreeThree) {
  auto c = rr_constants(3, 0.4);
  EXPECT_NEAR(c.c_min, 0.855639, 5e-7);
  EXPECT_NEAR(c.alpha, 0.620051, 5e-7);
  EXPECT_NEAR(c.lambda_max_qss, 1.288722, 5e-7);
  auto tiny = rr_constants(5, 1e-9);
  EXPECT_NEAR(tiny.c_min, 1.0, 1e-15);
  EXPECT_NEAR(tiny.alpha, 1.0, 1e-8);
}

TEST(RrConstants, EigenAndIncoherenceOracle) {
  for (std::size_t d : {3u, 4u, 5u, 8u}) {
    for (double theta0 : {0.1, 0.2, 0.4}) {
      const double t2 = std::tanh(theta0) * std::tanh(theta0);
      Eigen::MatrixXd q = Eigen::MatrixXd::Constant(d, d, t2);
      q.diagonal().setOnes();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
      auto c = rr_constants(d, theta0);
      EXPECT_NEAR(es.eigenvalues().minCoeff(), c.c_min, 1e-12);
      EXPECT_NEAR(es.eigenvalues().maxCoeff(), c.lambda_max_qss, 1e-12);
    }
  }
}

TEST(Incoherence, RegularTreeEqualsOneMinusAlpha) {
  auto g = regular_tree(0.4);
  auto c = tree_covariance(g);
  EXPECT_NEAR(incoherence_norm(c, 0, g.neighbors(0)), std::tanh(0.4), 1e-12);
  EXPECT_NEAR(incoherence_norm(c, 0, g.neighbors(0)), 1 - rr_constants(3, 0.4).alpha, 1e-12);
}

TEST(Incoherence, IdentityAndSingleNeighbor) {
  EXPECT_EQ(incoherence_norm(Eigen::MatrixXd::Identity(5, 5), 0, {1, 2}), 0.0);
  auto g = from_edges(8, oracle::random_tree(8, 0.8, 3));
  auto c = tree_covariance(g);
  double theta_max = 0.0;
  for (const auto& e : g.edges()) theta_max = std::max(theta_max, std::abs(e.coupling));
  for (Vertex r = 0; r < 8; ++r)
    for (Vertex s : g.neighbors(r)) EXPECT_LE(incoherence_norm(c, r, {s}), std::tanh(theta_max) + 1e-15);
}

TEST(Incoherence, SingularBlockRejected) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Ones(4, 4);
  EXPECT_THROW(incoherence_norm(q, 0, {1, 2}), SingularMatrix);
}

TEST(Thresholds, RegularTreeExamples) {
  auto g = regular_tree(0.4);
  auto fail = theorem_thresholds(g, 0.03);
  EXPECT_NEAR(fail.threshold, 0.3642, 5e-4);
  EXPECT_FALSE(fail.pass);
  auto pass = theorem_thresholds(g, 0.02);
  EXPECT_NEAR(pass.threshold, 0.2428, 5e-4);
  EXPECT_TRUE(pass.pass);
  EXPECT_NEAR(pass.c_min, 0.855639, 5e-7);
  EXPECT_TRUE(theorem_thresholds(g, 0.0).pass);
  EXPECT_FALSE(theorem_thresholds(g, 100.0).pass);
}

TEST(TheoryReport, Fields) {
  auto rep = theory_report(regular_tree(0.4), 0.02);
  EXPECT_NEAR(rep["alpha"].get<double>(), 0.620051, 5e-7);
  EXPECT_NEAR(rep["c_min"].get<double>(), 0.855639, 5e-7);
  EXPECT_TRUE(rep["thresholds"]["pass"].get<bool>());
  EXPECT_EQ(rep["theta_tilde"].size(), 30u);
}
