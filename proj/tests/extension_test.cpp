#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vertiflow/extension.hpp"

namespace vertiflow {
namespace {

const BackupPolicy kPolicy{};

TEST(QualifyDetour, Examples) {
  const DetourCheck a = qualify_detour({0, 0}, {10, 0}, {5, 2}, kPolicy);
  EXPECT_NEAR(a.ratio, 2.0 * std::sqrt(29.0) / 10.0, 1e-12);
  EXPECT_TRUE(a.qualified);
  const DetourCheck b = qualify_detour({0, 0}, {10, 0}, {5, 0.5}, kPolicy);
  EXPECT_NEAR(b.ratio, 1.0050, 1e-4);
  EXPECT_FALSE(b.qualified);
  const DetourCheck c = qualify_detour({0, 0}, {10, 0}, {16, 0}, kPolicy);
  EXPECT_NEAR(c.ratio, 2.2, 1e-12);
  EXPECT_FALSE(c.qualified);
  EXPECT_THROW(qualify_detour({1, 1}, {1, 1}, {2, 2}, kPolicy), std::invalid_argument);
}

TEST(QualifyDetour, RigidMotionInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-20.0, 20.0), ang(0.0, 6.283185307179586);
  for (int t = 0; t < 500; ++t) {
    const Point a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    const double th = ang(rng), dx = u(rng), dy = u(rng);
    auto move = [&](Point p) {
      return Point{std::cos(th) * p.x_km - std::sin(th) * p.y_km + dx, std::sin(th) * p.x_km + std::cos(th) * p.y_km + dy};
    };
    EXPECT_NEAR(qualify_detour(a, b, c, kPolicy).ratio, qualify_detour(move(a), move(b), move(c), kPolicy).ratio,
                1e-12);
  }
}

class ExampleExtension : public ::testing::Test {
 protected:
  RiskNetwork net = fixtures::example_network();
  IndicatorMatrices ind = build_incidence(net, fixtures::example_demands());
  CandidateSet cands = fixtures::example_candidates();
  BackupTopology topo = build_backup_topology(net, cands, kPolicy);
  Eigen::VectorXd caps = Eigen::VectorXd::Constant(1, 2.0);

  Scenario find(ElementRef ref, int level) const {
    for (const Scenario& s : enumerate_scenarios(net)) {
      if (s.element == ref && s.level == level) return s;
    }
    throw std::runtime_error("scenario missing");
  }
};

TEST_F(ExampleExtension, Topology) {
  EXPECT_LT(topo.adjacency_radius_km, 1.0);
  ASSERT_EQ(topo.links.size(), 4u);
  for (auto [t, h] : std::vector<std::pair<int, int>>{{1, 4}, {4, 1}, {3, 4}, {4, 3}}) {
    EXPECT_GE(topo.find_link(t, h), 0) << t << "->" << h;
  }
  EXPECT_EQ(topo.detours[2], std::vector<int>{0});
  for (int e : {0, 1, 3}) EXPECT_TRUE(topo.detours[e].empty());
  Eigen::MatrixXd adj(4, 1);
  adj << 0, 1, 0, 1;
  EXPECT_EQ(topo.adjacency, adj);
  EXPECT_FALSE(topo.excluded[0]);
}

TEST_F(ExampleExtension, IsolatedCandidateExcluded) {
  CandidateSet c = CandidateSet::broadcast({{4, {3.2, 1.0}}, {5, {40.0, 40.0}}}, {0, 2}, {0, 1});
  const BackupTopology t = build_backup_topology(net, c, kPolicy);
  EXPECT_TRUE(t.excluded[1]);
  EXPECT_FALSE(t.warnings.empty());
  EXPECT_EQ(t.adjacency.col(1).sum(), 0.0);
}

TEST_F(ExampleExtension, LinkCaseCapacities) {
  const ExtendedScenario ext = extend_scenario(find({ElementKind::link, 2}, 1), ind, topo, caps);
  ASSERT_EQ(ext.kind, ExtensionCase::link);
  Eigen::VectorXd ce(8), cv(5);
  ce << 8, 4, 2, 8, 2, 2, 2, 2;
  cv << 10, 15, 15, 10, 2;
  EXPECT_EQ(ext.problem.link_caps, ce);
  EXPECT_EQ(ext.problem.node_caps, cv);
  EXPECT_NEAR(extended_throughput(ext).throughput(), 16.0, 1e-6);
}

TEST_F(ExampleExtension, NodeCase) {
  const ExtendedScenario ext = extend_scenario(find({ElementKind::node, 3}, 1), ind, topo, caps);
  ASSERT_EQ(ext.kind, ExtensionCase::node);
  Eigen::VectorXd cv(4);
  cv << 10, 15, 15, 7;
  EXPECT_EQ(ext.problem.node_caps, cv);
  const ThroughputResult r = extended_throughput(ext);
  EXPECT_NEAR(r.throughput(), 15.0, 1e-6);
  EXPECT_TRUE(r.verified);
}

TEST_F(ExampleExtension, ZeroReserveChangesNothing) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  for (const Scenario& s : enumerate_scenarios(net)) {
    const double base = throughput(s, ind).throughput();
    EXPECT_NEAR(extended_throughput(extend_scenario(s, ind, topo, zero)).throughput(), base, 1e-9);
  }
}

TEST_F(ExampleExtension, MismatchedTopologyThrows) {
  RiskNetwork other = net;
  other.nodes.push_back({4, {9, 9}, 3});
  other.disruption.nodes.push_back({});
  const BackupTopology t = build_backup_topology(other, cands, kPolicy);
  EXPECT_THROW(extend_scenario(find({ElementKind::node, 3}, 1), ind, t, caps), std::invalid_argument);
}

TEST_F(ExampleExtension, CandidateOnNodeThrows) {
  CandidateSet c = CandidateSet::broadcast({{4, {2.0, 1.0}}}, {0, 2}, {0, 1});
  EXPECT_THROW(build_backup_topology(net, c, kPolicy), ValidationError);
}

TEST(CandidateSet, Validation) {
  CandidateSet c = CandidateSet::broadcast({{3, {1, 1}}}, {0, 2, 2}, {0, 1, 0});
  const std::string s = c.validate(3).str();
  EXPECT_NE(s.find("not strictly increasing"), std::string::npos);
  EXPECT_NE(s.find("must be positive"), std::string::npos);
  EXPECT_TRUE(CandidateSet::broadcast({{3, {1, 1}}}, {0, 1, 2}, {0, 4, 6}).validate(3).ok());
  EXPECT_FALSE(CandidateSet::broadcast({{5, {1, 1}}}, {0, 1}, {0, 4}).validate(3).ok());
}

// Random extended scenarios: incidence structure, capacity inheritance,
// containment, and agreement with the path-flow oracle.
TEST(ExtensionProperties, RandomNetworks) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> coord(0.0, 10.0);
  std::uniform_int_distribution<int> cap(0, 4);
  int link_cases_with_detours = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const RiskNetwork n = fixtures::random_network(rng, 3 + trial % 3, 6);
    const IndicatorMatrices ind = build_incidence(n, fixtures::random_demands(rng, n.num_nodes(), 2));
    std::vector<Candidate> cs;
    for (int c = 0; c < 3; ++c) cs.push_back({n.num_nodes() + c, {coord(rng), coord(rng)}});
    const CandidateSet set = CandidateSet::broadcast(cs, {0, 1, 2}, {0, 1, 2});
    BackupPolicy pol;
    pol.adjacency_radius_km = 3.0;
    const BackupTopology topo = build_backup_topology(n, set, pol);
    Eigen::VectorXd caps(3);
    for (int c = 0; c < 3; ++c) caps[c] = cap(rng);
    for (const Scenario& s : enumerate_scenarios(n)) {
      const ExtendedScenario ext = extend_scenario(s, ind, topo, caps);
      const FlowProblem& p = ext.problem;
      if (ext.kind == ExtensionCase::link) {
        const int nv = n.num_nodes(), ne = n.num_links();
        std::set<int> allowed;
        for (int c : topo.detours[s.element.index]) allowed.insert(c);
        if (!allowed.empty()) ++link_cases_with_detours;
        for (int j = ne; j < p.num_links(); ++j) {
          const BackupLink& b = topo.links[j - ne];
          EXPECT_EQ(p.link_caps[j], caps[b.candidate]);
          const double nz = p.incidence.col(j).cwiseAbs().sum();
          if (nz == 0.0) continue;
          EXPECT_EQ(nz, 2.0);
          EXPECT_EQ(p.incidence.col(j).sum(), 0.0);
          EXPECT_TRUE(allowed.count(b.candidate));
          EXPECT_EQ(std::abs(p.incidence(nv + b.candidate, j)), 1.0);
        }
      } else if (ext.kind == ExtensionCase::node) {
        int changed = 0;
        for (int i = 0; i < n.num_nodes(); ++i) changed += p.node_caps[i] != s.node_caps[i];
        EXPECT_LE(changed, 1);
        for (int i = 0; i < n.num_nodes(); ++i) {
          if (i != s.element.index) EXPECT_EQ(p.node_caps[i], s.node_caps[i]);
        }
      }
      const ThroughputResult r = extended_throughput(ext);
      EXPECT_TRUE(r.verified);
      EXPECT_GE(r.throughput(), throughput(s, ind).throughput() - 1e-9);
    }
  }
  EXPECT_GT(link_cases_with_detours, 0);
}

}  // namespace
}  // namespace vertiflow
