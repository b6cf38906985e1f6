#include <cmath>

#include <gtest/gtest.h>

#include <ising_lasso/experiment.hpp>
#include <ising_lasso/graph.hpp>

using namespace ising_lasso;

namespace {

bool all_degrees(const SignedGraph& g, std::size_t d) {
  for (Vertex v = 0; v < g.p(); ++v)
    if (g.degree(v) != d) return false;
  return true;
}

}  // namespace

TEST(RandomRegular, SixVerticesDegreeThree) {
  auto g = generate_random_regular(6, 3, 1);
  EXPECT_EQ(g.p(), 6u);
  EXPECT_EQ(g.num_edges(), 9u);
  EXPECT_TRUE(all_degrees(g, 3));
}

TEST(RandomRegular, OddDegreeSumRejected) {
  try {
    generate_random_regular(5, 3, 0);
    FAIL() << "expected an error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("p·d must be even"), std::string::npos);
  }
}

TEST(RandomRegular, EdgeCountIsHalfDegreeSum) {
  auto g = generate_random_regular(64, 3, 7);
  EXPECT_EQ(g.num_edges(), 96u);
  EXPECT_TRUE(all_degrees(g, 3));
}

TEST(RandomRegular, SimpleAndDeterministic) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto a = generate_random_regular(32, 4, seed);
    auto b = generate_random_regular(32, 4, seed);
    EXPECT_EQ(a.sorted_edges().size(), b.sorted_edges().size());
    auto ea = a.sorted_edges(), eb = b.sorted_edges();
    for (std::size_t i = 0; i < ea.size(); ++i) {
      EXPECT_EQ(ea[i].r, eb[i].r);
      EXPECT_EQ(ea[i].t, eb[i].t);
      EXPECT_NE(ea[i].r, ea[i].t);
    }
    EXPECT_TRUE(all_degrees(a, 4));
  }
}

TEST(RandomRegular, RetryLimitReported) {
  // d = p-1 forces the complete graph, which the pairing model almost never hits.
  try {
    generate_random_regular(12, 11, 3, 5);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("retry limit"), std::string::npos);
  }
}

TEST(Grid, FourByFour) {
  auto g = generate_grid_periodic(4, 4);
  EXPECT_EQ(g.p(), 16u);
  EXPECT_EQ(g.num_edges(), 32u);
  EXPECT_TRUE(all_degrees(g, 4));
}

TEST(Grid, ThreeByThree) {
  auto g = generate_grid_periodic(3, 3);
  EXPECT_EQ(g.p(), 9u);
  EXPECT_EQ(g.num_edges(), 18u);
}

TEST(Grid, WrapDuplicatesRejected) { EXPECT_THROW(generate_grid_periodic(2, 4), InvalidArgument); }

TEST(Star, LinearDegreeSingleEdge) {
  std::size_t d = star_degree(Family::star_linear, 10);
  EXPECT_EQ(d, 1u);
  auto g = generate_star(10, d);
  EXPECT_EQ(g.num_edges(), 1u);
  EXPECT_TRUE(g.has_edge(0, 1));
}

TEST(Star, LogDegreeUsesNaturalLog) {
  std::size_t d = star_degree(Family::star_log, 16);
  EXPECT_EQ(d, 3u);  // ceil(ln 16) = ceil(2.77)
  auto g = generate_star(16, d);
  EXPECT_EQ(g.degree(0), 3u);
  EXPECT_EQ(g.degree(10), 0u);
}

TEST(Star, HubDegreeTooLarge) { EXPECT_THROW(generate_star(4, 5), InvalidArgument); }

TEST(RandomTree, EdgesAcyclicAndDeterministic) {
  auto a = generate_random_tree(8, 3, 2);
  auto b = generate_random_tree(8, 3, 2);
  EXPECT_EQ(a.num_edges(), 7u);
  EXPECT_TRUE(a.is_acyclic());
  EXPECT_LE(a.max_degree(), 3u);
  auto ea = a.sorted_edges(), eb = b.sorted_edges();
  ASSERT_EQ(ea.size(), eb.size());
  for (std::size_t i = 0; i < ea.size(); ++i) {
    EXPECT_EQ(ea[i].r, eb[i].r);
    EXPECT_EQ(ea[i].t, eb[i].t);
  }
}

TEST(RandomTree, TwoVertices) {
  auto g = generate_random_tree(2, 2, 0);
  EXPECT_EQ(g.num_edges(), 1u);
}

TEST(BetheTree, InternalDegree) {
  auto g = generate_bethe_tree(10, 3);
  EXPECT_TRUE(g.is_acyclic());
  EXPECT_EQ(g.num_edges(), 9u);
  EXPECT_EQ(g.degree(0), 3u);
  EXPECT_EQ(g.degree(1), 3u);
  EXPECT_EQ(g.degree(2), 3u);
}

TEST(Couplings, UniformPositive) {
  auto g = assign_couplings(generate_random_regular(16, 3, 1), UniformPositive{0.2}, 5);
  for (const auto& e : g.edges()) EXPECT_EQ(e.coupling, 0.2);
}

TEST(Couplings, DegreeScaledStar) {
  auto g = assign_couplings(generate_star(12, 9), DegreeScaled{1.2}, 0);
  for (const auto& e : g.edges()) EXPECT_NEAR(e.coupling, 0.4, 1e-15);
}

TEST(Couplings, MixedSignMagnitudeAndBothSigns) {
  auto g = assign_couplings(generate_random_regular(64, 3, 3), MixedSign{0.4}, 9);
  int pos = 0, neg = 0;
  for (const auto& e : g.edges()) {
    EXPECT_EQ(std::abs(e.coupling), 0.4);
    (e.coupling > 0 ? pos : neg)++;
  }
  EXPECT_GT(pos, 20);
  EXPECT_GT(neg, 20);
}

TEST(Couplings, InvariantsEnforced) {
  SignedGraph g(3);
  g.add_edge(0, 1);
  EXPECT_THROW(g.add_edge(1, 0), InvalidArgument);
  EXPECT_THROW(g.add_edge(2, 2), InvalidArgument);
  EXPECT_THROW(g.set_couplings({0.0}), InvalidArgument);
  EXPECT_THROW(g.set_couplings({0.1, 0.2}), InvalidArgument);
  EXPECT_THROW(assign_couplings(SignedGraph(4), MixedSign{0.4}, 0), InvalidArgument);
}

TEST(SignedEdges, SignMap) {
  SignedGraph g(3);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.set_couplings({0.4, -0.4});
  auto s = signed_edge_set(g);
  EXPECT_EQ((s.at({0, 1})), 1);
  EXPECT_EQ((s.at({1, 2})), -1);
  EXPECT_TRUE(signed_edge_set(SignedGraph(5)).empty());
  auto nb = true_signed_neighborhood(g, 1);
  EXPECT_EQ(nb.size(), 2u);
  EXPECT_EQ(nb.at(0), 1);
  EXPECT_EQ(nb.at(2), -1);
}

TEST(PathLength, Star) {
  auto g = generate_star(6, 3);
  EXPECT_EQ(path_length(g, 0, 2), 1u);
  EXPECT_EQ(path_length(g, 1, 3), 2u);
  EXPECT_FALSE(path_length(g, 1, 5).has_value());
}

TEST(GraphJson, RoundTrip) {
  auto g = assign_couplings(generate_random_regular(20, 3, 4), MixedSign{0.4}, 4);
  auto back = graph_from_json(nlohmann::json::parse(to_json(g).dump()));
  EXPECT_EQ(signed_edge_set(back), signed_edge_set(g));
  auto unassigned = graph_from_json(to_json(generate_grid_periodic(3, 3)));
  EXPECT_EQ(unassigned.num_edges(), 18u);
  EXPECT_FALSE(unassigned.couplings_assigned());
  EXPECT_THROW(graph_from_json(nlohmann::json{{"p", 3}}), InvalidArgument);
}
