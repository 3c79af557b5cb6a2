#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vertiflow/design.hpp"
#include "vertiflow/extension.hpp"
#include "vertiflow/net_model.hpp"

namespace vertiflow {

struct ScenarioGain {
  ElementRef element;
  int level = 0;
  double probability = 0.0;
  double gain = 0.0;  // S*_ext - S*_orig
};

struct EnhancementReport {
  double total = 0.0;     // delta, conditional weights p / P^ev_dis
  double expected = 0.0;  // delta-bar, raw weights p
  std::vector<ScenarioGain> scenarios;
};

inline EnhancementReport enhancement_from_scenarios(const RiskNetwork& network,
                                                    const std::vector<ScenarioThroughput>& per_scenario) {
  EnhancementReport r;
  for (const ScenarioThroughput& s : per_scenario) {
    if (s.element.kind == ElementKind::none) continue;
    const double gain = s.extended - s.original;
    r.scenarios.push_back({s.element, s.level, s.probability, gain});
    r.expected += gain * s.probability;
    const double pe = network.disruption.element_probability(s.element);
    if (pe > 0.0) r.total += gain * s.probability / pe;
  }
  return r;
}

inline EnhancementReport throughput_enhancement(const DesignSpec& spec, const Eigen::VectorXd& backup_caps,
                                                const SolverConfig& cfg = {}) {
  return enhancement_from_scenarios(spec.network, evaluate_capacities(spec, backup_caps, cfg).scenarios);
}

inline EnhancementReport throughput_enhancement(const DesignSpec& spec, const DesignResult& design) {
  return enhancement_from_scenarios(spec.network, design.per_scenario);
}

inline int find_link(const RiskNetwork& network, int tail, int head) {
  for (const Link& e : network.links) {
    if (e.tail == tail && e.head == head) return e.id;
  }
  return -1;
}

struct DiversityReport {
  std::vector<int> paths;  // per O-D pair
};

// 1 for the pair's own link plus one per built candidate that is a qualified detour of it.
inline DiversityReport travel_diversity(const RiskNetwork& network, const DemandSet& demands,
                                        const BackupTopology& topo, const Eigen::VectorXd& backup_caps) {
  if (backup_caps.size() != topo.num_candidates) throw std::invalid_argument("backup capacity vector has wrong length");
  DiversityReport r;
  for (const DemandPair& s : demands.pairs) {
    const int e = find_link(network, s.origin, s.destination);
    if (e < 0) {
      throw std::invalid_argument("O-D pair (" + std::to_string(s.origin) + "," + std::to_string(s.destination) +
                                  ") has no original link");
    }
    int count = 1;
    for (int c : topo.detours[e]) count += backup_caps[c] > 0.0;
    r.paths.push_back(count);
  }
  return r;
}

struct LandingDistance {
  double distance = 0.0;
  double t = 0.0;  // position along the segment, 0 at the origin
};

// max over the segment a->b of the distance to the nearest site, by the exact
// lower envelope. Squared distances share the leading coefficient, so each
// pairwise difference is linear in t and the envelope peaks at an endpoint or
// at a pairwise crossing. Returns the smallest maximizing t.
inline LandingDistance max_min_distance(const Point& a, const Point& b, const std::vector<Point>& sites) {
  if (sites.empty()) throw std::invalid_argument("no landing sites");
  const double dx = b.x_km - a.x_km;
  const double dy = b.y_km - a.y_km;
  auto nearest = [&](double t) {
    const Point p{a.x_km + t * dx, a.y_km + t * dy};
    double best = distance(p, sites[0]);
    for (const Point& q : sites) best = std::min(best, distance(p, q));
    return best;
  };
  if (dx == 0.0 && dy == 0.0) return {nearest(0.0), 0.0};
  std::vector<double> ts{0.0, 1.0};
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const double ai = (a.x_km - sites[i].x_km) * (a.x_km - sites[i].x_km) + (a.y_km - sites[i].y_km) * (a.y_km - sites[i].y_km);
    for (std::size_t j = i + 1; j < sites.size(); ++j) {
      const double aj =
          (a.x_km - sites[j].x_km) * (a.x_km - sites[j].x_km) + (a.y_km - sites[j].y_km) * (a.y_km - sites[j].y_km);
      const double slope = 2.0 * (dx * (sites[j].x_km - sites[i].x_km) + dy * (sites[j].y_km - sites[i].y_km));
      if (slope == 0.0) continue;
      const double t = (aj - ai) / slope;
      if (t > 0.0 && t < 1.0) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());
  LandingDistance best{-1.0, 0.0};
  for (double t : ts) {
    const double v = nearest(t);
    if (v > best.distance + 1e-12) best = {v, t};
  }
  return best;
}

struct CoverageReport {
  std::vector<LandingDistance> pairs;  // per O-D pair, along the origin-destination segment
};

// Landing sites are the original nodes plus every built backup.
inline CoverageReport max_landing_distance(const RiskNetwork& network, const DemandSet& demands,
                                           const CandidateSet& candidates, const Eigen::VectorXd& backup_caps) {
  if (backup_caps.size() != candidates.size()) throw std::invalid_argument("backup capacity vector has wrong length");
  std::vector<Point> sites;
  for (const Node& v : network.nodes) sites.push_back(v.position);
  for (int c = 0; c < candidates.size(); ++c) {
    if (backup_caps[c] > 0.0) sites.push_back(candidates.candidates[c].position);
  }
  CoverageReport r;
  for (const DemandPair& s : demands.pairs) {
    r.pairs.push_back(max_min_distance(network.nodes.at(s.origin).position, network.nodes.at(s.destination).position, sites));
  }
  return r;
}

// Linear interpolation between order statistics (q in [0,1]).
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level outside [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct DesignMetrics {
  EnhancementReport enhancement;
  DiversityReport diversity;
  CoverageReport coverage;
};

inline DesignMetrics compute_metrics(const DesignSpec& spec, const DesignResult& design) {
  DesignMetrics m;
  m.enhancement = throughput_enhancement(spec, design);
  // Diversity is defined per original link; left empty when some pair has none.
  bool all_linked = true;
  for (const DemandPair& s : spec.demands.pairs) all_linked = all_linked && find_link(spec.network, s.origin, s.destination) >= 0;
  if (all_linked) m.diversity = travel_diversity(spec.network, spec.demands, spec.topology, design.capacities);
  m.coverage = max_landing_distance(spec.network, spec.demands, spec.candidates, design.capacities);
  return m;
}

}  // namespace vertiflow
