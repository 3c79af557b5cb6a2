#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "vertiflow/extension.hpp"
#include "vertiflow/net_model.hpp"

namespace vertiflow::fixtures {

// Four-node worked network: e0 v0->v1, e1 v0->v2, e2 v1->v3, e3 v2->v3.
inline RiskNetwork example_network() {
  RiskNetwork n;
  const std::vector<Point> pos{{0.0, 0.0}, {2.0, 1.0}, {2.0, -1.0}, {4.0, 0.0}};
  const std::vector<double> cv{10, 15, 15, 10};
  for (int i = 0; i < 4; ++i) n.nodes.push_back({i, pos[i], cv[i]});
  n.links = {{0, 0, 1, 8}, {1, 0, 2, 4}, {2, 1, 3, 4}, {3, 2, 3, 8}};
  n.disruption.p_dis = 0.8;
  const ElementDisruption end{0.125, {{5, 0.5}, {0, 0.5}}};
  const ElementDisruption mid{0.1875, {{10, 2.0 / 3.0}, {5, 1.0 / 3.0}}};
  n.disruption.nodes = {end, mid, mid, end};
  const ElementDisruption wide{0.125, {{4, 0.5}, {0, 0.5}}};
  const ElementDisruption narrow{0.0625, {{2, 1.0}}};
  n.disruption.links = {wide, narrow, narrow, wide};
  return n;
}

inline DemandSet example_demands() { return DemandSet{{{0, 1}, {0, 3}, {2, 3}}}; }

// One candidate next to v1-v3, qualified only as a detour of e2.
inline CandidateSet example_candidates(const std::vector<double>& caps = {0, 2}, const std::vector<double>& costs = {0, 1}) {
  return CandidateSet::broadcast({{4, {3.2, 1.0}}}, caps, costs);
}

// Small random network with uniform disruption weights and up to two levels per element.
inline RiskNetwork random_network(std::mt19937_64& rng, int nv, int max_links, double p_dis = 0.6) {
  std::uniform_real_distribution<double> coord(0.0, 10.0), unit(0.0, 1.0);
  std::uniform_int_distribution<int> cap(1, 10);
  RiskNetwork n;
  for (int i = 0; i < nv; ++i) n.nodes.push_back({i, {coord(rng), coord(rng)}, static_cast<double>(cap(rng))});
  std::vector<std::pair<int, int>> all;
  for (int a = 0; a < nv; ++a) {
    for (int b = 0; b < nv; ++b) {
      if (a != b) all.emplace_back(a, b);
    }
  }
  std::shuffle(all.begin(), all.end(), rng);
  const int ne = std::min<int>(max_links, static_cast<int>(all.size()));
  for (int j = 0; j < ne; ++j) n.links.push_back({j, all[j].first, all[j].second, static_cast<double>(cap(rng))});
  n.disruption.p_dis = p_dis;
  auto levels = [&](double c) {
    ElementDisruption el;
    if (c <= 0.0) return el;
    if (unit(rng) < 0.5) {
      el.levels = {{std::floor(c / 2.0), 1.0}};
    } else {
      el.levels = {{std::floor(c / 2.0), 0.6}, {0.0, 0.4}};
    }
    if (el.levels.size() == 2 && el.levels[0].capacity == 0.0) el.levels = {{0.0, 1.0}};
    return el;
  };
  for (const Node& v : n.nodes) n.disruption.nodes.push_back(levels(v.capacity));
  for (const Link& e : n.links) n.disruption.links.push_back(levels(e.capacity));
  n.disruption.set_uniform_weights();
  return n;
}

inline DemandSet random_demands(std::mt19937_64& rng, int nv, int count) {
  std::vector<DemandPair> all;
  for (int a = 0; a < nv; ++a) {
    for (int b = 0; b < nv; ++b) {
      if (a != b) all.push_back({a, b});
    }
  }
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min<std::size_t>(count, all.size()));
  return DemandSet{all};
}

}  // namespace vertiflow::fixtures
