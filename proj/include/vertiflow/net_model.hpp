#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace vertiflow {

// Thrown when a model violates a structural invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kProbabilityMassTol = 1e-9;

struct Point {
  double x_km = 0.0;
  double y_km = 0.0;
};

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a.x_km - b.x_km, a.y_km - b.y_km);
}

struct Node {
  int id = 0;
  Point position;
  double capacity = 0.0;
};

struct Link {
  int id = 0;
  int tail = 0;
  int head = 0;
  double capacity = 0.0;
};

struct DisturbedLevel {
  double capacity = 0.0;
  double cond_prob = 0.0;  // given that this element is the disturbed one
};

struct ElementDisruption {
  double weight = 0.0;  // probability this element is the disturbed one, given a disruption
  std::vector<DisturbedLevel> levels;
};

enum class ElementKind { none, node, link };

struct ElementRef {
  ElementKind kind = ElementKind::none;
  int index = -1;

  bool operator==(const ElementRef&) const = default;
};

inline std::string to_string(const ElementRef& ref) {
  switch (ref.kind) {
    case ElementKind::node:
      return "v" + std::to_string(ref.index);
    case ElementKind::link:
      return "e" + std::to_string(ref.index);
    case ElementKind::none:
      break;
  }
  return "none";
}

struct DisruptionModel {
  double p_dis = 0.0;
  std::vector<ElementDisruption> nodes;
  std::vector<ElementDisruption> links;

  const ElementDisruption& element(const ElementRef& ref) const {
    if (ref.kind == ElementKind::node) return nodes.at(ref.index);
    if (ref.kind == ElementKind::link) return links.at(ref.index);
    throw std::invalid_argument("no disruption data for the undisturbed element");
  }

  // Absolute probability p_{ev,k}; level is 1-based.
  double probability(const ElementRef& ref, int level) const {
    const ElementDisruption& el = element(ref);
    return p_dis * el.weight * el.levels.at(level - 1).cond_prob;
  }

  // Total probability that `ref` is the disturbed element.
  double element_probability(const ElementRef& ref) const {
    double total = 0.0;
    const ElementDisruption& el = element(ref);
    for (const DisturbedLevel& lv : el.levels) total += p_dis * el.weight * lv.cond_prob;
    return total;
  }

  // Sets every element weight to 1 / (N_V + N_E).
  void set_uniform_weights() {
    const std::size_t count = nodes.size() + links.size();
    if (count == 0) return;
    const double w = 1.0 / static_cast<double>(count);
    for (auto& el : nodes) el.weight = w;
    for (auto& el : links) el.weight = w;
  }
};

struct RiskNetwork {
  std::vector<Node> nodes;
  std::vector<Link> links;
  DisruptionModel disruption;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_links() const { return static_cast<int>(links.size()); }

  Eigen::VectorXd node_capacities() const {
    Eigen::VectorXd c(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) c[i] = nodes[i].capacity;
    return c;
  }

  Eigen::VectorXd link_capacities() const {
    Eigen::VectorXd c(links.size());
    for (std::size_t j = 0; j < links.size(); ++j) c[j] = links[j].capacity;
    return c;
  }

  // Default demand big-M: total undisturbed node capacity.
  double total_node_capacity() const {
    double total = 0.0;
    for (const Node& n : nodes) total += n.capacity;
    return total;
  }
};

struct DemandPair {
  int origin = 0;
  int destination = 0;

  bool operator==(const DemandPair&) const = default;
};

struct DemandSet {
  std::vector<DemandPair> pairs;

  int size() const { return static_cast<int>(pairs.size()); }
};

struct Scenario {
  ElementRef element;
  int level = 0;  // 0 for undisturbed
  double probability = 0.0;
  Eigen::VectorXd link_caps;
  Eigen::VectorXd node_caps;

  bool disturbed() const { return element.kind != ElementKind::none; }
};

struct IndicatorMatrices {
  Eigen::MatrixXd incidence;      // N_V x N_E, -1 at the tail, +1 at the head
  Eigen::MatrixXd incidence_abs;  // |incidence|
  Eigen::MatrixXd destination;    // N_V x N_S, +1 at the destination
  Eigen::MatrixXd origin;         // N_V x N_S, -1 at the origin
  double big_m = 0.0;             // demand bound M, total undisturbed node capacity
};

struct ValidationIssue {
  std::string element;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }

  void add(std::string element, std::string message) {
    issues.push_back({std::move(element), std::move(message)});
  }

  std::string str() const {
    std::ostringstream out;
    for (const auto& issue : issues) out << issue.element << ": " << issue.message << "\n";
    return out.str();
  }
};

namespace detail {

inline void check_levels(ValidationReport& report, const std::string& name, double capacity,
                         const ElementDisruption& el, double p_dis) {
  if (!(el.weight >= 0.0) || !std::isfinite(el.weight)) report.add(name, "negative disruption weight");
  double prev = capacity;
  for (std::size_t k = 0; k < el.levels.size(); ++k) {
    const DisturbedLevel& lv = el.levels[k];
    if (!(lv.capacity < prev)) {
      report.add(name, k == 0 ? "first disturbed level not below undisturbed capacity"
                              : "levels not strictly decreasing");
    }
    if (lv.capacity < 0.0) report.add(name, "negative disturbed capacity");
    if (!(lv.cond_prob >= 0.0 && lv.cond_prob <= 1.0)) report.add(name, "conditional probability outside [0,1]");
    const double p = p_dis * el.weight * lv.cond_prob;
    if (p > p_dis + kProbabilityMassTol) report.add(name, "level probability exceeds p_dis");
    prev = lv.capacity;
  }
}

}  // namespace detail

inline ValidationReport validate_network(const RiskNetwork& network) {
  ValidationReport report;
  const int nv = network.num_nodes();
  const int ne = network.num_links();
  for (int i = 0; i < nv; ++i) {
    const Node& n = network.nodes[i];
    const std::string name = "node " + std::to_string(i);
    if (n.id != i) report.add(name, "id " + std::to_string(n.id) + " is not the contiguous index");
    if (!(n.capacity >= 0.0) || !std::isfinite(n.capacity)) report.add(name, "negative capacity");
  }
  std::set<std::pair<int, int>> seen;
  for (int j = 0; j < ne; ++j) {
    const Link& e = network.links[j];
    const std::string name = "link " + std::to_string(j);
    if (e.id != j) report.add(name, "id " + std::to_string(e.id) + " is not the contiguous index");
    if (!(e.capacity >= 0.0) || !std::isfinite(e.capacity)) report.add(name, "negative capacity");
    const bool ends_ok = e.tail >= 0 && e.tail < nv && e.head >= 0 && e.head < nv;
    if (!ends_ok) report.add(name, "endpoint references unknown node");
    if (e.tail == e.head) report.add(name, "tail equals head");
    if (!seen.insert({e.tail, e.head}).second) report.add(name, "duplicate (tail, head)");
  }

  const DisruptionModel& dm = network.disruption;
  if (!(dm.p_dis >= 0.0 && dm.p_dis <= 1.0)) report.add("disruption", "p_dis outside [0,1]");
  if (static_cast<int>(dm.nodes.size()) != nv || static_cast<int>(dm.links.size()) != ne) {
    report.add("disruption", "does not cover exactly the nodes and links");
    return report;
  }
  double mass = 0.0;
  for (int i = 0; i < nv; ++i) {
    detail::check_levels(report, "node " + std::to_string(i), network.nodes[i].capacity, dm.nodes[i], dm.p_dis);
    mass += dm.element_probability({ElementKind::node, i});
  }
  for (int j = 0; j < ne; ++j) {
    detail::check_levels(report, "link " + std::to_string(j), network.links[j].capacity, dm.links[j], dm.p_dis);
    mass += dm.element_probability({ElementKind::link, j});
  }
  if (std::abs(mass - dm.p_dis) > kProbabilityMassTol) {
    std::ostringstream msg;
    msg << "disruption mass mismatch: levels sum to " << mass << ", p_dis is " << dm.p_dis;
    report.add("disruption", msg.str());
  }
  return report;
}

inline ValidationReport validate_demands(const RiskNetwork& network, const DemandSet& demands) {
  ValidationReport report;
  std::set<std::pair<int, int>> seen;
  for (int l = 0; l < demands.size(); ++l) {
    const DemandPair& s = demands.pairs[l];
    const std::string name = "demand " + std::to_string(l);
    if (s.origin < 0 || s.origin >= network.num_nodes() || s.destination < 0 ||
        s.destination >= network.num_nodes()) {
      report.add(name, "references unknown node");
    }
    if (s.origin == s.destination) report.add(name, "origin equals destination");
    if (!seen.insert({s.origin, s.destination}).second) report.add(name, "duplicate pair");
  }
  return report;
}

inline IndicatorMatrices build_incidence(const RiskNetwork& network, const DemandSet& demands) {
  const ValidationReport report = validate_demands(network, demands);
  if (!report.ok()) throw ValidationError(report.str());
  const int nv = network.num_nodes();
  const int ne = network.num_links();
  const int ns = demands.size();
  IndicatorMatrices m;
  m.incidence = Eigen::MatrixXd::Zero(nv, ne);
  for (int j = 0; j < ne; ++j) {
    const Link& e = network.links[j];
    if (e.tail < 0 || e.tail >= nv || e.head < 0 || e.head >= nv || e.tail == e.head) {
      throw ValidationError("link " + std::to_string(j) + ": invalid endpoints");
    }
    m.incidence(e.tail, j) = -1.0;
    m.incidence(e.head, j) = 1.0;
  }
  m.incidence_abs = m.incidence.cwiseAbs();
  m.destination = Eigen::MatrixXd::Zero(nv, ns);
  m.origin = Eigen::MatrixXd::Zero(nv, ns);
  for (int l = 0; l < ns; ++l) {
    m.destination(demands.pairs[l].destination, l) = 1.0;
    m.origin(demands.pairs[l].origin, l) = -1.0;
  }
  m.big_m = network.total_node_capacity();
  return m;
}

// Undisturbed moment first, then every node level, then every link level.
// Levels whose absolute probability is exactly zero are skipped.
inline std::vector<Scenario> enumerate_scenarios(const RiskNetwork& network) {
  const DisruptionModel& dm = network.disruption;
  if (static_cast<int>(dm.nodes.size()) != network.num_nodes() ||
      static_cast<int>(dm.links.size()) != network.num_links()) {
    throw ValidationError("disruption model does not cover exactly the nodes and links");
  }
  const Eigen::VectorXd cv0 = network.node_capacities();
  const Eigen::VectorXd ce0 = network.link_capacities();

  std::vector<Scenario> out;
  out.push_back({ElementRef{}, 0, 1.0 - dm.p_dis, ce0, cv0});
  double mass = 0.0;
  auto add_element = [&](ElementKind kind, int index) {
    const ElementRef ref{kind, index};
    const ElementDisruption& el = dm.element(ref);
    for (std::size_t k = 0; k < el.levels.size(); ++k) {
      const double p = dm.p_dis * el.weight * el.levels[k].cond_prob;
      mass += p;
      if (p == 0.0) continue;
      Scenario s{ref, static_cast<int>(k) + 1, p, ce0, cv0};
      if (kind == ElementKind::node) {
        s.node_caps[index] = el.levels[k].capacity;
      } else {
        s.link_caps[index] = el.levels[k].capacity;
      }
      out.push_back(std::move(s));
    }
  };
  for (int i = 0; i < network.num_nodes(); ++i) add_element(ElementKind::node, i);
  for (int j = 0; j < network.num_links(); ++j) add_element(ElementKind::link, j);
  if (std::abs(mass - dm.p_dis) > kProbabilityMassTol) {
    std::ostringstream msg;
    msg << "disruption mass mismatch: levels sum to " << mass << ", p_dis is " << dm.p_dis;
    throw ValidationError(msg.str());
  }
  return out;
}

}  // namespace vertiflow
