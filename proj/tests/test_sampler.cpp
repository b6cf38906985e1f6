#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include <ising_lasso/bethe.hpp>
#include <ising_lasso/sampler.hpp>

#include "oracles.hpp"

using namespace ising_lasso;

namespace {

SignedGraph path3(double j) {
  SignedGraph g(3);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  if (j != 0.0) g.set_couplings({j, j});
  return g;
}

SamplerConfig config(std::uint64_t seed) {
  SamplerConfig c;
  c.burn_in_sweeps = 200;
  c.thinning_sweeps = 5;
  c.seed = seed;
  return c;
}

double se_of_product(double c, std::size_t n) { return std::sqrt((1.0 - c * c) / static_cast<double>(n)); }

}  // namespace

TEST(Gibbs, IndependentSpinsWithoutEdges) {
  const std::size_t n = 100000;
  auto s = gibbs_sample(SignedGraph(6), n, config(1));
  auto mag = estimate_magnetization(s);
  for (Index v = 0; v < mag.size(); ++v) EXPECT_LT(std::abs(mag[v]), 0.02);
  auto m = s.second_moments();
  for (Index a = 0; a < 6; ++a)
    for (Index b = a + 1; b < 6; ++b) EXPECT_LT(std::abs(m(a, b)), 0.02);
}

TEST(Gibbs, PairTableIndependenceChiSquare) {
  // 2×2 contingency table of (x0, x1) on an edgeless graph: Pearson
  // statistic with 1 degree of freedom, 0.1% critical value 10.83.
  const std::size_t n = 40000;
  auto s = gibbs_sample(SignedGraph(2), n, config(5));
  double counts[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < n; ++i) counts[s(i, 0) > 0][s(i, 1) > 0] += 1;
  double row[2] = {counts[0][0] + counts[0][1], counts[1][0] + counts[1][1]};
  double col[2] = {counts[0][0] + counts[1][0], counts[0][1] + counts[1][1]};
  double chi2 = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      double e = row[a] * col[b] / static_cast<double>(n);
      chi2 += (counts[a][b] - e) * (counts[a][b] - e) / e;
    }
  EXPECT_LT(chi2, 10.83);
}

TEST(Gibbs, StateFrequenciesMatchEnumeration) {
  // Goodness of fit over all 8 states of a mixed-sign triangle; 7 degrees
  // of freedom, 0.1% critical value 24.32.
  SignedGraph g(3);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(0, 2);
  g.set_couplings({0.5, -0.3, 0.2});
  const std::size_t n = 40000;
  auto s = gibbs_sample(g, n, config(11));
  std::vector<double> observed(8, 0.0), expected;
  for (std::size_t i = 0; i < n; ++i) observed[(s(i, 0) > 0) | (s(i, 1) > 0) << 1 | (s(i, 2) > 0) << 2] += 1;
  for (std::size_t st = 0; st < 8; ++st) {
    int x[3] = {st & 1 ? 1 : -1, st & 2 ? 1 : -1, st & 4 ? 1 : -1};
    expected.push_back(std::exp(0.5 * x[0] * x[1] - 0.3 * x[1] * x[2] + 0.2 * x[0] * x[2]));
  }
  double z = 0.0;
  for (double e : expected) z += e;
  double chi2 = 0.0;
  for (std::size_t st = 0; st < 8; ++st) {
    double e = expected[st] / z * static_cast<double>(n);
    chi2 += (observed[st] - e) * (observed[st] - e) / e;
  }
  EXPECT_LT(chi2, 24.32);
}

TEST(Gibbs, EdgeCovarianceOnTreeIsTanh) {
  auto g = assign_couplings(generate_bethe_tree(16, 3), UniformPositive{0.4}, 0);
  const std::size_t n = 50000;
  auto m = gibbs_sample(g, n, config(2)).second_moments();
  const double t = std::tanh(0.4);
  for (const auto& e : g.edges()) EXPECT_LT(std::abs(m(e.r, e.t) - t), 3.0 * se_of_product(t, n)) << e.r << "-" << e.t;
}

TEST(Gibbs, RandomRegularMatchesEnumeration) {
  auto g = assign_couplings(generate_random_regular(12, 3, 4), MixedSign{0.4}, 4);
  const std::size_t n = 50000;
  auto m = gibbs_sample(g, n, config(3)).second_moments();
  auto [exact, mean] = oracle::enumerate_moments(12, [&] {
    std::vector<oracle::WeightedEdge> e;
    for (const auto& ed : g.edges()) e.push_back({ed.r, ed.t, ed.coupling});
    return e;
  }());
  for (const auto& e : g.edges()) {
    double c = exact(e.r, e.t);
    EXPECT_LT(std::abs(m(e.r, e.t) - c), 4.0 * se_of_product(c, n));
  }
}

TEST(Gibbs, ParamagneticMeans) {
  auto g = assign_couplings(generate_random_regular(32, 3, 8), MixedSign{0.4}, 8);
  auto mag = estimate_magnetization(gibbs_sample(g, 50000, config(4)));
  for (Index v = 0; v < mag.size(); ++v) EXPECT_LT(std::abs(mag[v]), 0.05);
}

TEST(Gibbs, DeterministicPerSeed) {
  auto g = assign_couplings(generate_random_regular(10, 3, 1), MixedSign{0.4}, 1);
  EXPECT_EQ(gibbs_sample(g, 500, config(9)), gibbs_sample(g, 500, config(9)));
  EXPECT_FALSE(gibbs_sample(g, 500, config(9)) == gibbs_sample(g, 500, config(10)));
}

TEST(Gibbs, Errors) {
  auto g = assign_couplings(generate_star(4, 2), UniformPositive{0.3}, 0);
  EXPECT_THROW(gibbs_sample(g, 0, config(0)), InvalidArgument);
  SamplerConfig bad = config(0);
  bad.thinning_sweeps = 0;
  EXPECT_THROW(gibbs_sample(g, 10, bad), InvalidArgument);
  EXPECT_THROW(gibbs_sample(generate_star(4, 2), 10, config(0)), InvalidArgument);
}

TEST(Enumeration, SingleEdgeIsTanh) {
  SignedGraph g(2);
  g.add_edge(0, 1);
  g.set_couplings({0.4});
  auto m = exact_enumerate(g);
  EXPECT_NEAR(m.second_moment(0, 1), 0.379949, 5e-7);
  EXPECT_NEAR(m.second_moment(0, 1), std::tanh(0.4), 1e-14);
  EXPECT_NEAR(m.log_partition, std::log(4.0 * std::cosh(0.4)), 1e-14);
}

TEST(Enumeration, PathWithoutCouplingIsIdentity) {
  SignedGraph g(3);
  auto m = exact_enumerate(g);
  EXPECT_TRUE(m.covariance.isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-15));
}

TEST(Enumeration, PathDistanceTwo) {
  auto m = exact_enumerate(path3(0.4));
  EXPECT_NEAR(m.covariance(0, 2), 0.144361, 5e-7);
  EXPECT_NEAR(m.covariance(0, 2), std::tanh(0.4) * std::tanh(0.4), 1e-14);
}

TEST(Enumeration, MatchesIndependentOracle) {
  auto g = assign_couplings(generate_random_regular(10, 3, 3), MixedSign{0.7}, 3);
  std::vector<oracle::WeightedEdge> e;
  for (const auto& ed : g.edges()) e.push_back({ed.r, ed.t, ed.coupling});
  auto [m, mean] = oracle::enumerate_moments(10, e);
  auto ex = exact_enumerate(g);
  EXPECT_LT((ex.second_moment - m).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT(ex.mean.cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Enumeration, CapEnforced) { EXPECT_THROW(exact_enumerate(SignedGraph(21)), InvalidArgument); }

TEST(Magnetization, Examples) {
  SampleMatrix::Storage ones = SampleMatrix::Storage::Ones(4, 3);
  auto m1 = estimate_magnetization(SampleMatrix(ones));
  for (Index v = 0; v < 3; ++v) EXPECT_EQ(m1[v], 1.0);
  SampleMatrix::Storage half(4, 2);
  half << 1, -1, -1, 1, 1, 1, -1, -1;
  auto m2 = estimate_magnetization(SampleMatrix(half));
  EXPECT_EQ(m2[0], 0.0);
  EXPECT_EQ(m2[1], 0.0);
}

TEST(SecondMoments, SingleSampleIsRankOne) {
  SampleMatrix::Storage row(1, 4);
  row << 1, -1, -1, 1;
  auto m = SampleMatrix(row).second_moments();
  for (Index v = 0; v < 4; ++v) EXPECT_EQ(m(v, v), 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  EXPECT_NEAR(es.eigenvalues()[3], 4.0, 1e-12);
  EXPECT_NEAR(es.eigenvalues()[2], 0.0, 1e-12);
}

TEST(SampleMatrix, RejectsBadValues) {
  SampleMatrix::Storage bad(1, 2);
  bad << 1, 0;
  EXPECT_THROW(SampleMatrix{bad}, InvalidArgument);
  EXPECT_THROW(SampleMatrix{SampleMatrix::Storage(0, 3)}, InvalidArgument);
}

TEST(SampleIO, TextAndBinaryRoundTrip) {
  auto g = assign_couplings(generate_random_regular(13, 4, 2), MixedSign{0.3}, 2);
  auto s = gibbs_sample(g, 37, config(1));
  std::stringstream text, bin;
  write_samples_text(text, s);
  write_samples_binary(bin, s);
  EXPECT_EQ(read_samples(text), s);
  EXPECT_EQ(read_samples(bin), s);
  // 37 rows × 13 bits = 481 bits → 61 bytes after the 12-byte header.
  EXPECT_EQ(bin.str().size(), 12u + 61u);
}

TEST(SampleIO, MalformedInput) {
  std::stringstream a("p=2 n=2\n1 -1\n1");
  EXPECT_THROW(read_samples(a), InvalidArgument);
  std::stringstream b("p=2 n=1\n1 3\n");
  EXPECT_THROW(read_samples(b), InvalidArgument);
  std::stringstream c("");
  EXPECT_THROW(read_samples(c), InvalidArgument);
}
