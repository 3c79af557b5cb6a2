#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vertiflow/net_model.hpp"

namespace vertiflow {
namespace {

TEST(BuildIncidence, ExampleNetwork) {
  const IndicatorMatrices m = build_incidence(fixtures::example_network(), fixtures::example_demands());
  Eigen::MatrixXd e(4, 4);
  e << -1, -1, 0, 0, 1, 0, -1, 0, 0, 1, 0, -1, 0, 0, 1, 1;
  EXPECT_EQ(m.incidence, e);
  Eigen::MatrixXd d1(4, 3), d2(4, 3);
  d1 << 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 1;
  d2 << -1, -1, 0, 0, 0, 0, 0, 0, -1, 0, 0, 0;
  EXPECT_EQ(m.destination, d1);
  EXPECT_EQ(m.origin, d2);
  EXPECT_EQ(m.incidence_abs, e.cwiseAbs());
  EXPECT_EQ(m.big_m, 50.0);
}

TEST(BuildIncidence, SingleLinkNoDemands) {
  RiskNetwork n;
  n.nodes = {{0, {0, 0}, 1}, {1, {1, 0}, 1}};
  n.links = {{0, 0, 1, 1}};
  const IndicatorMatrices m = build_incidence(n, DemandSet{});
  EXPECT_EQ(m.incidence.rows(), 2);
  EXPECT_EQ(m.incidence(0, 0), -1.0);
  EXPECT_EQ(m.incidence(1, 0), 1.0);
  EXPECT_EQ(m.destination.cols(), 0);
  EXPECT_EQ(m.origin.cols(), 0);
}

TEST(BuildIncidence, UnknownDemandNodeThrows) {
  EXPECT_THROW(build_incidence(fixtures::example_network(), DemandSet{{{0, 7}}}), ValidationError);
}

TEST(EnumerateScenarios, ExampleNetworkCount) {
  const std::vector<Scenario> s = enumerate_scenarios(fixtures::example_network());
  EXPECT_EQ(s.size(), 15u);
  double total = 0.0;
  for (const Scenario& x : s) total += x.probability;
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_FALSE(s[0].disturbed());
  EXPECT_NEAR(s[0].probability, 0.2, 1e-12);
}

TEST(EnumerateScenarios, WorkedExampleLevelProbabilities) {
  const RiskNetwork n = fixtures::example_network();
  EXPECT_NEAR(n.disruption.probability({ElementKind::node, 0}, 1), 0.05, 1e-12);
  EXPECT_NEAR(n.disruption.probability({ElementKind::node, 1}, 1), 0.1, 1e-12);
  EXPECT_NEAR(n.disruption.probability({ElementKind::node, 2}, 2), 0.05, 1e-12);
  EXPECT_NEAR(n.disruption.probability({ElementKind::link, 2}, 1), 0.05, 1e-12);
}

TEST(EnumerateScenarios, NoDisruption) {
  RiskNetwork n = fixtures::example_network();
  n.disruption.p_dis = 0.0;
  const std::vector<Scenario> s = enumerate_scenarios(n);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].probability, 1.0);
}

TEST(EnumerateScenarios, NodeLevelVector) {
  for (const Scenario& s : enumerate_scenarios(fixtures::example_network())) {
    if (s.element == ElementRef{ElementKind::node, 3} && s.level == 1) {
      Eigen::VectorXd cv(4);
      cv << 10, 15, 15, 5;
      EXPECT_EQ(s.node_caps, cv);
      EXPECT_EQ(s.link_caps, fixtures::example_network().link_capacities());
      return;
    }
  }
  FAIL() << "v3 level 1 missing";
}

TEST(EnumerateScenarios, MassMismatchThrows) {
  RiskNetwork n = fixtures::example_network();
  n.disruption.links[0].levels[0].cond_prob = 0.4;
  EXPECT_THROW(enumerate_scenarios(n), ValidationError);
}

TEST(ValidateNetwork, ExampleIsClean) { EXPECT_TRUE(validate_network(fixtures::example_network()).ok()); }

TEST(ValidateNetwork, RepeatedLevel) {
  RiskNetwork n = fixtures::example_network();
  n.disruption.nodes[1].levels = {{5, 0.5}, {5, 0.5}};
  const ValidationReport r = validate_network(n);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.str().find("levels not strictly decreasing"), std::string::npos);
  EXPECT_NE(r.str().find("node 1"), std::string::npos);
}

TEST(ValidateNetwork, MassMismatch) {
  RiskNetwork n = fixtures::example_network();
  // Total mass 0.9 against p_dis 0.8.
  n.disruption.links[0].weight += 0.1 / 0.8;
  const ValidationReport r = validate_network(n);
  EXPECT_NE(r.str().find("disruption mass mismatch"), std::string::npos);
}

TEST(ValidateNetwork, StructuralErrors) {
  RiskNetwork n = fixtures::example_network();
  n.links.push_back({4, 1, 1, 2});
  n.links.push_back({5, 0, 1, 2});
  n.links.push_back({6, 0, 9, 2});
  const std::string s = validate_network(n).str();
  EXPECT_NE(s.find("tail equals head"), std::string::npos);
  EXPECT_NE(s.find("duplicate (tail, head)"), std::string::npos);
  EXPECT_NE(s.find("unknown node"), std::string::npos);
  EXPECT_NE(s.find("does not cover"), std::string::npos);
}

// Properties over random networks.
TEST(NetModelProperties, RandomNetworks) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const RiskNetwork n = fixtures::random_network(rng, 2 + trial % 5, 8);
    ASSERT_TRUE(validate_network(n).ok()) << validate_network(n).str();
    const IndicatorMatrices m = build_incidence(n, fixtures::random_demands(rng, n.num_nodes(), 3));
    for (Eigen::Index j = 0; j < m.incidence.cols(); ++j) {
      EXPECT_EQ(m.incidence.col(j).sum(), 0.0);
      EXPECT_EQ(m.incidence.col(j).cwiseAbs().sum(), 2.0);
    }
    const std::vector<Scenario> s = enumerate_scenarios(n);
    double total = 0.0;
    int undisturbed = 0;
    const Eigen::VectorXd cv0 = n.node_capacities();
    const Eigen::VectorXd ce0 = n.link_capacities();
    for (const Scenario& x : s) {
      total += x.probability;
      if (!x.disturbed()) {
        ++undisturbed;
        continue;
      }
      const bool node = x.element.kind == ElementKind::node;
      const Eigen::VectorXd& changed = node ? x.node_caps : x.link_caps;
      const Eigen::VectorXd& base = node ? cv0 : ce0;
      EXPECT_LT(changed[x.element.index], base[x.element.index]);
      for (Eigen::Index i = 0; i < base.size(); ++i) {
        if (i != x.element.index) EXPECT_EQ(changed[i], base[i]);
      }
      EXPECT_EQ(node ? x.link_caps : x.node_caps, node ? ce0 : cv0);
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_EQ(undisturbed, 1);
  }
}

}  // namespace
}  // namespace vertiflow
