#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vertiflow/net_model.hpp"
#include "vertiflow/throughput.hpp"

namespace vertiflow {

struct Candidate {
  int id = 0;  // continues the node numbering
  Point position;
};

struct CandidateSet {
  std::vector<Candidate> candidates;
  Eigen::MatrixXd capacity_levels;  // N_Vb x K_Z, first column zero, rows increasing
  Eigen::MatrixXd costs;            // N_Vb x K_Z, first column zero, positive elsewhere

  int size() const { return static_cast<int>(candidates.size()); }
  int levels() const { return static_cast<int>(capacity_levels.cols()); }

  // Same capacity/cost row for every candidate.
  static CandidateSet broadcast(std::vector<Candidate> cands, const std::vector<double>& capacities,
                                const std::vector<double>& cost_row) {
    CandidateSet s;
    s.candidates = std::move(cands);
    const int n = s.size();
    const int k = static_cast<int>(capacities.size());
    s.capacity_levels.resize(n, k);
    s.costs.resize(n, static_cast<Eigen::Index>(cost_row.size()));
    for (int i = 0; i < n; ++i) {
      for (int m = 0; m < k; ++m) s.capacity_levels(i, m) = capacities[m];
      for (std::size_t m = 0; m < cost_row.size(); ++m) s.costs(i, static_cast<Eigen::Index>(m)) = cost_row[m];
    }
    return s;
  }

  ValidationReport validate(int num_nodes) const {
    ValidationReport report;
    if (capacity_levels.rows() != size() || costs.rows() != size() || costs.cols() != capacity_levels.cols()) {
      report.add("levels", "capacity/cost matrices do not match the candidate count");
      return report;
    }
    if (size() > 0 && levels() < 1) report.add("levels", "at least one level is required");
    for (int c = 0; c < size(); ++c) {
      const std::string name = "candidate " + std::to_string(c);
      if (candidates[c].id != num_nodes + c) {
        report.add(name, "id " + std::to_string(candidates[c].id) + " does not continue the node numbering");
      }
      for (int m = 0; m < levels(); ++m) {
        const double cap = capacity_levels(c, m);
        const double cost = costs(c, m);
        if (!std::isfinite(cap) || !std::isfinite(cost)) report.add(name, "non-finite level");
        if (m == 0) {
          if (cap != 0.0) report.add(name, "first capacity level must be 0");
          if (cost != 0.0) report.add(name, "first cost must be 0");
        } else {
          if (!(cap > capacity_levels(c, m - 1))) report.add(name, "capacity levels not strictly increasing");
          if (!(cost > 0.0)) report.add(name, "cost of a built level must be positive");
        }
      }
    }
    return report;
  }
};

struct BackupPolicy {
  double ratio_min = 1.02;
  double ratio_max = 1.5;
  std::optional<double> adjacency_radius_km;  // default: 40% of the mean link length

  ValidationReport validate() const {
    ValidationReport report;
    if (!(ratio_min > 1.0 && ratio_min <= ratio_max)) report.add("policy", "ratio bounds must satisfy 1 < min <= max");
    if (adjacency_radius_km && !(*adjacency_radius_km > 0.0)) report.add("policy", "adjacency radius must be positive");
    return report;
  }

  double radius_for(const RiskNetwork& network) const {
    if (adjacency_radius_km) return *adjacency_radius_km;
    if (network.links.empty()) throw ValidationError("adjacency radius needs at least one link or an explicit value");
    double total = 0.0;
    for (const Link& e : network.links) {
      total += distance(network.nodes.at(e.tail).position, network.nodes.at(e.head).position);
    }
    return 0.4 * total / static_cast<double>(network.links.size());
  }
};

struct DetourCheck {
  bool qualified = false;
  double ratio = 0.0;
};

inline DetourCheck qualify_detour(const Point& tail, const Point& head, const Point& c, const BackupPolicy& policy) {
  const double direct = distance(tail, head);
  if (!(direct > 0.0)) throw std::invalid_argument("zero-length link: detour ratio undefined");
  const double r = (distance(tail, c) + distance(c, head)) / direct;
  return {policy.ratio_min <= r && r <= policy.ratio_max, r};
}

inline DetourCheck qualify_detour(const RiskNetwork& network, const Link& link, const Point& c,
                                  const BackupPolicy& policy) {
  return qualify_detour(network.nodes.at(link.tail).position, network.nodes.at(link.head).position, c, policy);
}

// Extended node numbering: original nodes 0..N_V-1, candidate c is N_V + c.
struct BackupLink {
  int tail = 0;
  int head = 0;
  int candidate = 0;  // candidate index
  int node = 0;       // original node
};

struct BackupTopology {
  int num_nodes = 0;
  int num_candidates = 0;
  std::vector<std::pair<int, int>> original_links;  // (tail, head) per original link
  std::vector<BackupLink> links;
  std::vector<std::vector<int>> detours;  // per original link: qualified candidates
  Eigen::MatrixXd adjacency;              // N_V x N_Vb
  std::vector<bool> excluded;
  std::vector<std::string> warnings;
  double adjacency_radius_km = 0.0;

  int find_link(int tail, int head) const {
    for (std::size_t j = 0; j < links.size(); ++j) {
      if (links[j].tail == tail && links[j].head == head) return static_cast<int>(j);
    }
    return -1;
  }
};

inline BackupTopology build_backup_topology(const RiskNetwork& network, const CandidateSet& candidates,
                                            const BackupPolicy& policy) {
  const ValidationReport pr = policy.validate();
  if (!pr.ok()) throw ValidationError(pr.str());
  BackupTopology t;
  t.num_nodes = network.num_nodes();
  t.num_candidates = candidates.size();
  t.adjacency_radius_km = policy.radius_for(network);
  t.detours.assign(network.links.size(), {});
  t.adjacency = Eigen::MatrixXd::Zero(t.num_nodes, t.num_candidates);
  t.excluded.assign(t.num_candidates, false);
  for (const Link& e : network.links) t.original_links.emplace_back(e.tail, e.head);

  for (int c = 0; c < t.num_candidates; ++c) {
    const Point& pc = candidates.candidates[c].position;
    for (int i = 0; i < t.num_nodes; ++i) {
      if (distance(pc, network.nodes[i].position) == 0.0) {
        throw ValidationError("candidate " + std::to_string(c) + " coincides with node " + std::to_string(i));
      }
    }
    std::set<int> joined;
    for (int i = 0; i < t.num_nodes; ++i) {
      if (distance(pc, network.nodes[i].position) <= t.adjacency_radius_km) joined.insert(i);
    }
    for (int j = 0; j < network.num_links(); ++j) {
      const Link& e = network.links[j];
      if (qualify_detour(network, e, pc, policy).qualified) {
        t.detours[j].push_back(c);
        joined.insert(e.tail);
        joined.insert(e.head);
      }
    }
    if (joined.empty()) {
      t.excluded[c] = true;
      t.warnings.push_back("candidate " + std::to_string(c) + " connects to no original node; excluded");
      continue;
    }
    const int vc = t.num_nodes + c;
    for (int i : joined) {
      t.adjacency(i, c) = 1.0;
      t.links.push_back({i, vc, c, i});
      t.links.push_back({vc, i, c, i});
    }
  }
  return t;
}

enum class ExtensionCase { undisturbed, link, node };

struct ExtendedScenario {
  Scenario scenario;
  ExtensionCase kind = ExtensionCase::undisturbed;
  FlowProblem problem;              // extended incidence, indicators and capacities
  Eigen::MatrixXd backup_top;       // link case: original-node rows of the backup columns
  Eigen::MatrixXd backup_bottom;    // link case: backup-node rows of the backup columns
  Eigen::VectorXd backup_link_caps; // link case: one entry per backup link
  std::vector<int> active_links;    // link case: backup links carrying incidence
};

inline ExtendedScenario extend_scenario(const Scenario& scenario, const IndicatorMatrices& ind,
                                        const BackupTopology& topo, const Eigen::VectorXd& backup_caps) {
  const int nv = static_cast<int>(ind.incidence.rows());
  const int ne = static_cast<int>(ind.incidence.cols());
  if (nv != topo.num_nodes || ne != static_cast<int>(topo.original_links.size()) ||
      scenario.node_caps.size() != nv || scenario.link_caps.size() != ne) {
    throw std::invalid_argument("scenario and backup topology come from different networks");
  }
  if (backup_caps.size() != topo.num_candidates) throw std::invalid_argument("backup capacity vector has wrong length");
  if (backup_caps.size() > 0 && backup_caps.minCoeff() < 0.0) throw std::invalid_argument("negative backup capacity");

  ExtendedScenario ext;
  ext.scenario = scenario;
  ext.problem = make_flow_problem(scenario, ind);
  if (!scenario.disturbed()) return ext;

  if (scenario.element.kind == ElementKind::node) {
    ext.kind = ExtensionCase::node;
    const int v = scenario.element.index;
    ext.problem.node_caps[v] += topo.adjacency.row(v).dot(backup_caps);
    return ext;
  }

  ext.kind = ExtensionCase::link;
  const int e = scenario.element.index;
  const int nb = topo.num_candidates;
  const int nl = static_cast<int>(topo.links.size());
  const auto [tau, sigma] = topo.original_links[e];
  ext.backup_top = Eigen::MatrixXd::Zero(nv, nl);
  ext.backup_bottom = Eigen::MatrixXd::Zero(nb, nl);
  ext.backup_link_caps.resize(nl);
  for (int j = 0; j < nl; ++j) ext.backup_link_caps[j] = backup_caps[topo.links[j].candidate];
  for (int c : topo.detours[e]) {
    for (int j : {topo.find_link(tau, nv + c), topo.find_link(nv + c, sigma)}) {
      const BackupLink& b = topo.links.at(j);
      ext.active_links.push_back(j);
      auto place = [&](int node, double sign) {
        if (node < nv) {
          ext.backup_top(node, j) = sign;
        } else {
          ext.backup_bottom(node - nv, j) = sign;
        }
      };
      place(b.tail, -1.0);
      place(b.head, 1.0);
    }
  }

  FlowProblem& p = ext.problem;
  Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(nv + nb, ne + nl);
  inc.topLeftCorner(nv, ne) = ind.incidence;
  inc.topRightCorner(nv, nl) = ext.backup_top;
  inc.bottomRightCorner(nb, nl) = ext.backup_bottom;
  p.incidence = std::move(inc);
  const int ns = static_cast<int>(ind.destination.cols());
  Eigen::MatrixXd d1 = Eigen::MatrixXd::Zero(nv + nb, ns);
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(nv + nb, ns);
  d1.topRows(nv) = ind.destination;
  d2.topRows(nv) = ind.origin;
  p.destination = std::move(d1);
  p.origin = std::move(d2);
  Eigen::VectorXd ce(ne + nl);
  ce << scenario.link_caps, ext.backup_link_caps;
  Eigen::VectorXd cv(nv + nb);
  cv << scenario.node_caps, backup_caps;
  p.link_caps = std::move(ce);
  p.node_caps = std::move(cv);
  return ext;
}

inline ThroughputResult extended_throughput(const ExtendedScenario& ext, const SolverConfig& cfg = {}) {
  ThroughputResult r = solve_flow(ext.problem, cfg);
  r.element = ext.scenario.element;
  r.level = ext.scenario.level;
  r.probability = ext.scenario.probability;
  return r;
}

}  // namespace vertiflow
