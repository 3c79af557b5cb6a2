#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vertiflow/extension.hpp"
#include "vertiflow/lp.hpp"
#include "vertiflow/mip.hpp"
#include "vertiflow/net_model.hpp"
#include "vertiflow/throughput.hpp"

namespace vertiflow {

struct DesignSpec {
  RiskNetwork network;
  DemandSet demands;
  CandidateSet candidates;
  BackupTopology topology;
  double budget = 0.0;
  double valuation = 1.0;  // w
  double big_m = 0.0;         // demand bound; 0 selects the total node capacity
  double big_m_lambda = 0.0;  // dual-product bound; 0 selects (N_S + 1) * max level capacity

  double demand_big_m() const { return big_m > 0.0 ? big_m : network.total_node_capacity(); }

  double lambda_big_m() const {
    if (big_m_lambda > 0.0) return big_m_lambda;
    const double cmax = candidates.size() > 0 ? candidates.capacity_levels.maxCoeff() : 0.0;
    return (demands.size() + 1) * std::max(cmax, 1.0);
  }

  ValidationReport validate() const {
    ValidationReport r = validate_network(network);
    for (auto& i : validate_demands(network, demands).issues) r.issues.push_back(i);
    for (auto& i : candidates.validate(network.num_nodes()).issues) r.issues.push_back(i);
    if (topology.num_nodes != network.num_nodes() || topology.num_candidates != candidates.size()) {
      r.add("topology", "does not match the network and candidate set");
    }
    if (!(budget >= 0.0) || !std::isfinite(budget)) r.add("design", "budget must be a nonnegative number");
    if (!(valuation >= 0.0) || !std::isfinite(valuation)) r.add("design", "valuation w must be nonnegative");
    if (big_m < 0.0 || big_m_lambda < 0.0) r.add("design", "big-M values must be positive");
    return r;
  }
};

inline DesignSpec make_design_spec(RiskNetwork network, DemandSet demands, CandidateSet candidates,
                                   const BackupPolicy& policy, double budget, double valuation) {
  DesignSpec s;
  s.topology = build_backup_topology(network, candidates, policy);
  s.network = std::move(network);
  s.demands = std::move(demands);
  s.candidates = std::move(candidates);
  s.budget = budget;
  s.valuation = valuation;
  return s;
}

struct SelectionMatrix {
  Eigen::MatrixXi z;  // N_Vb x K_Z, one 1 per row

  static SelectionMatrix from_choices(const std::vector<int>& choice, int levels) {
    SelectionMatrix s;
    s.z = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(choice.size()), levels);
    for (std::size_t c = 0; c < choice.size(); ++c) s.z(static_cast<Eigen::Index>(c), choice[c]) = 1;
    return s;
  }

  static SelectionMatrix null(int candidates, int levels) {
    return from_choices(std::vector<int>(candidates, 0), levels);
  }

  void validate() const {
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
      int sum = 0;
      for (Eigen::Index m = 0; m < z.cols(); ++m) {
        if (z(c, m) != 0 && z(c, m) != 1) throw ValidationError("selection entries must be 0 or 1");
        sum += z(c, m);
      }
      if (sum != 1) throw ValidationError("selection row " + std::to_string(c) + " does not sum to 1");
    }
  }

  std::vector<int> choices() const {
    validate();
    std::vector<int> out(z.rows());
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
      for (Eigen::Index m = 0; m < z.cols(); ++m) {
        if (z(c, m) == 1) out[c] = static_cast<int>(m);
      }
    }
    return out;
  }

  // Row-major comparison of the binary entries.
  bool lexicographically_less(const SelectionMatrix& o) const {
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
      for (Eigen::Index m = 0; m < z.cols(); ++m) {
        if (z(c, m) != o.z(c, m)) return z(c, m) < o.z(c, m);
      }
    }
    return false;
  }
};

inline Eigen::VectorXd capacity_from_selection(const SelectionMatrix& s, const CandidateSet& cs) {
  s.validate();
  if (s.z.rows() != cs.size() || s.z.cols() != cs.levels()) throw std::invalid_argument("selection shape mismatch");
  return cs.capacity_levels.cwiseProduct(s.z.cast<double>()).rowwise().sum();
}

inline double selection_cost(const SelectionMatrix& s, const CandidateSet& cs) {
  s.validate();
  if (s.z.rows() != cs.size() || s.z.cols() != cs.levels()) throw std::invalid_argument("selection shape mismatch");
  return cs.costs.cwiseProduct(s.z.cast<double>()).sum();
}

inline bool integral_costs(const CandidateSet& cs) {
  for (Eigen::Index i = 0; i < cs.costs.size(); ++i) {
    if (cs.costs.data()[i] != std::floor(cs.costs.data()[i])) return false;
  }
  return true;
}

// Exact comparison when every cost is an integer, 1e-9 slack otherwise.
inline bool within_budget(double cost, double budget, const CandidateSet& cs) {
  return integral_costs(cs) ? cost <= budget : cost <= budget + 1e-9;
}

struct ScenarioThroughput {
  ElementRef element;
  int level = 0;
  double probability = 0.0;
  double original = 0.0;  // S* of the momentary network
  double extended = 0.0;  // S* with the reserve of the design
};

struct DesignEvaluation {
  double expected_throughput = 0.0;
  std::vector<ScenarioThroughput> scenarios;
};

inline IndicatorMatrices design_indicators(const DesignSpec& spec) {
  IndicatorMatrices ind = build_incidence(spec.network, spec.demands);
  ind.big_m = spec.demand_big_m();
  return ind;
}

// Per-scenario original and extended throughput for the given backup capacities.
inline DesignEvaluation evaluate_capacities(const DesignSpec& spec, const Eigen::VectorXd& caps,
                                            const SolverConfig& cfg = {}) {
  const IndicatorMatrices ind = design_indicators(spec);
  DesignEvaluation ev;
  for (const Scenario& s : enumerate_scenarios(spec.network)) {
    ScenarioThroughput st{s.element, s.level, s.probability, 0.0, 0.0};
    st.original = throughput(s, ind, cfg).throughput();
    st.extended = s.disturbed() ? extended_throughput(extend_scenario(s, ind, spec.topology, caps), cfg).throughput()
                                : st.original;
    ev.expected_throughput += s.probability * st.extended;
    ev.scenarios.push_back(st);
  }
  return ev;
}

inline double expected_throughput(const DesignSpec& spec, const SelectionMatrix& z, const SolverConfig& cfg = {}) {
  const Eigen::VectorXd caps = capacity_from_selection(z, spec.candidates);
  const IndicatorMatrices ind = design_indicators(spec);
  double total = 0.0;
  for (const Scenario& s : enumerate_scenarios(spec.network)) {
    total += s.probability * extended_throughput(extend_scenario(s, ind, spec.topology, caps), cfg).throughput();
  }
  return total;
}

namespace detail {

// Extended network of one disturbed scenario restricted to the backup nodes and
// links that carry incidence, with capacities affine in Z.
struct BlockNetwork {
  ExtensionCase kind = ExtensionCase::undisturbed;
  Eigen::MatrixXd incidence;
  Eigen::MatrixXd destination;
  Eigen::MatrixXd origin;
  Eigen::VectorXd link_const;
  Eigen::VectorXd node_const;
  std::vector<int> link_candidate;                // -1 when the capacity is constant
  std::vector<std::vector<int>> node_candidates;  // candidates adding to the node capacity
  std::vector<int> backup_nodes;                  // candidate index per appended node row
  double big_m = 0.0;

  bool depends_on_z() const {
    for (int c : link_candidate) {
      if (c >= 0) return true;
    }
    for (const auto& v : node_candidates) {
      if (!v.empty()) return true;
    }
    return false;
  }

  FlowProblem at(const Eigen::VectorXd& caps) const {
    FlowProblem p{incidence, destination, origin, link_const, node_const, big_m};
    for (std::size_t j = 0; j < link_candidate.size(); ++j) {
      if (link_candidate[j] >= 0) p.link_caps[j] += caps[link_candidate[j]];
    }
    for (std::size_t i = 0; i < node_candidates.size(); ++i) {
      for (int c : node_candidates[i]) p.node_caps[i] += caps[c];
    }
    return p;
  }
};

inline BlockNetwork block_network(const Scenario& s, const IndicatorMatrices& ind, const BackupTopology& topo) {
  const int nv = static_cast<int>(ind.incidence.rows());
  const int ne = static_cast<int>(ind.incidence.cols());
  BlockNetwork b;
  b.big_m = ind.big_m;
  b.link_const = s.link_caps;
  b.node_const = s.node_caps;
  b.link_candidate.assign(ne, -1);
  b.node_candidates.assign(nv, {});
  b.incidence = ind.incidence;
  b.destination = ind.destination;
  b.origin = ind.origin;
  if (s.element.kind == ElementKind::node) {
    b.kind = ExtensionCase::node;
    const int v = s.element.index;
    for (int c = 0; c < topo.num_candidates; ++c) {
      if (topo.adjacency(v, c) != 0.0) b.node_candidates[v].push_back(c);
    }
    return b;
  }
  if (s.element.kind != ElementKind::link) return b;
  b.kind = ExtensionCase::link;
  const int e = s.element.index;
  const auto [tau, sigma] = topo.original_links[e];
  const std::vector<int>& act = topo.detours[e];
  const int na = static_cast<int>(act.size());
  b.backup_nodes = act;
  b.incidence = Eigen::MatrixXd::Zero(nv + na, ne + 2 * na);
  b.incidence.topLeftCorner(nv, ne) = ind.incidence;
  b.destination = Eigen::MatrixXd::Zero(nv + na, ind.destination.cols());
  b.origin = Eigen::MatrixXd::Zero(nv + na, ind.origin.cols());
  b.destination.topRows(nv) = ind.destination;
  b.origin.topRows(nv) = ind.origin;
  b.link_const.conservativeResize(ne + 2 * na);
  b.node_const.conservativeResize(nv + na);
  for (int t = 0; t < na; ++t) {
    b.incidence(tau, ne + 2 * t) = -1.0;
    b.incidence(nv + t, ne + 2 * t) = 1.0;
    b.incidence(nv + t, ne + 2 * t + 1) = -1.0;
    b.incidence(sigma, ne + 2 * t + 1) = 1.0;
    b.link_const[ne + 2 * t] = 0.0;
    b.link_const[ne + 2 * t + 1] = 0.0;
    b.node_const[nv + t] = 0.0;
    b.link_candidate.push_back(act[t]);
    b.link_candidate.push_back(act[t]);
    b.node_candidates.push_back({act[t]});
  }
  return b;
}

struct PrimalBlock {
  ThroughputLayout layout;
  int var0 = 0;
  int row0 = 0;
};

inline PrimalBlock add_primal_block(LpModel& m, const BlockNetwork& b, double weight, const std::vector<int>& zvar,
                                    const CandidateSet& cs, const std::string& tag) {
  FlowProblem p{b.incidence, b.destination, b.origin, b.link_const, b.node_const, b.big_m};
  ThroughputLp lp = build_throughput_lp(p);
  PrimalBlock pb{lp.layout, m.num_variables(), m.num_rows()};
  const int k = cs.levels();
  for (int j = 0; j < lp.model.num_variables(); ++j) {
    m.add_variable(lp.model.lower[j], lp.model.upper[j], weight * lp.model.objective[j], tag + lp.model.names[j]);
  }
  const ThroughputLayout& L = lp.layout;
  for (int i = 0; i < lp.model.num_rows(); ++i) {
    Row row = lp.model.rows[i];
    for (Term& t : row.terms) t.var += pb.var0;
    row.name = tag + row.name;
    if (i >= L.link_row(0) && i < L.link_row(0) + L.ne) {
      const int c = b.link_candidate[i - L.link_row(0)];
      if (c >= 0) {
        for (int lv = 1; lv < k; ++lv) row.terms.push_back({zvar[c * k + lv], -cs.capacity_levels(c, lv)});
      }
    } else if (i >= L.node_row(0) && i < L.node_row(0) + L.nv) {
      for (int c : b.node_candidates[i - L.node_row(0)]) {
        for (int lv = 1; lv < k; ++lv) row.terms.push_back({zvar[c * k + lv], -cs.capacity_levels(c, lv)});
      }
    }
    m.rows.push_back(std::move(row));
  }
  return pb;
}

// Arcs that lie on some walk o -> d avoiding d before the end and o after the start.
// Flow elsewhere only forms cycles, so dropping those arcs keeps the optimum.
inline std::vector<bool> useful_arcs(const Eigen::MatrixXd& incidence, int o, int d) {
  const int nv = static_cast<int>(incidence.rows());
  const int ne = static_cast<int>(incidence.cols());
  std::vector<int> tail(ne, -1), head(ne, -1);
  for (int j = 0; j < ne; ++j) {
    for (int i = 0; i < nv; ++i) {
      if (incidence(i, j) < 0.0) tail[j] = i;
      if (incidence(i, j) > 0.0) head[j] = i;
    }
  }
  auto sweep = [&](int start, int blocked, bool forward) {
    std::vector<bool> seen(nv, false);
    std::vector<int> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      if (u == blocked) continue;
      for (int j = 0; j < ne; ++j) {
        const int from = forward ? tail[j] : head[j];
        const int to = forward ? head[j] : tail[j];
        if (from == u && to >= 0 && !seen[to]) {
          seen[to] = true;
          stack.push_back(to);
        }
      }
    }
    return seen;
  };
  const std::vector<bool> from_o = sweep(o, d, true);
  const std::vector<bool> to_d = sweep(d, o, false);
  std::vector<bool> keep(ne, false);
  for (int j = 0; j < ne; ++j) {
    if (tail[j] < 0 || head[j] < 0) continue;
    keep[j] = tail[j] != d && head[j] != o && from_o[tail[j]] && to_d[head[j]];
  }
  return keep;
}

// Direct-form block: the demand indicator rows become variable bounds, the
// demand variables fixed at zero by them are dropped, and each commodity keeps
// only the arcs from useful_arcs.
inline void add_compact_primal_block(LpModel& m, const BlockNetwork& b, double weight, const std::vector<int>& zvar,
                                     const CandidateSet& cs, const std::string& tag) {
  const int nv = static_cast<int>(b.incidence.rows());
  const int ne = static_cast<int>(b.incidence.cols());
  const int ns = static_cast<int>(b.destination.cols());
  const int k = cs.levels();
  std::vector<std::vector<Term>> cons(static_cast<std::size_t>(nv) * ns);
  std::vector<std::vector<Term>> link_rows(ne), node_rows(nv);
  for (int l = 0; l < ns; ++l) {
    int o = -1, d = -1;
    for (int i = 0; i < nv; ++i) {
      if (b.origin(i, l) != 0.0) o = i;
      if (b.destination(i, l) != 0.0) d = i;
    }
    const std::vector<bool> keep = useful_arcs(b.incidence, o, d);
    const std::string sl = "_s" + std::to_string(l);
    for (int j = 0; j < ne; ++j) {
      if (!keep[j]) continue;
      const int x = m.add_variable(0.0, kInf, 0.0, tag + "X_e" + std::to_string(j) + sl);
      link_rows[j].push_back({x, 1.0});
      for (int i = 0; i < nv; ++i) {
        if (b.incidence(i, j) == 0.0) continue;
        cons[static_cast<std::size_t>(i) * ns + l].push_back({x, b.incidence(i, j)});
        node_rows[i].push_back({x, std::abs(b.incidence(i, j))});
      }
    }
    const int d1 = m.add_variable(0.0, b.big_m, weight, tag + "D1_v" + std::to_string(d) + sl);
    const int d2 = m.add_variable(-b.big_m, 0.0, 0.0, tag + "D2_v" + std::to_string(o) + sl);
    cons[static_cast<std::size_t>(d) * ns + l].push_back({d1, -1.0});
    cons[static_cast<std::size_t>(o) * ns + l].push_back({d2, -1.0});
    m.add_row({{d1, 1.0}, {d2, 1.0}}, Relation::equal, 0.0, tag + "balance" + sl);
  }
  for (int i = 0; i < nv; ++i) {
    for (int l = 0; l < ns; ++l) {
      auto& t = cons[static_cast<std::size_t>(i) * ns + l];
      if (!t.empty()) m.add_row(std::move(t), Relation::equal, 0.0, tag + "cons_v" + std::to_string(i) + "_s" + std::to_string(l));
    }
  }
  auto add_cap = [&](std::vector<Term> t, double cap, const std::vector<int>& cands, const std::string& name) {
    for (int c : cands) {
      for (int lv = 1; lv < k; ++lv) t.push_back({zvar[c * k + lv], -cs.capacity_levels(c, lv)});
    }
    bool has_flow = false;
    for (const Term& term : t) has_flow = has_flow || term.coef > 0.0;
    if (has_flow) m.add_row(std::move(t), Relation::less_equal, cap, name);
  };
  for (int j = 0; j < ne; ++j) {
    const std::vector<int> cands = b.link_candidate[j] >= 0 ? std::vector<int>{b.link_candidate[j]} : std::vector<int>{};
    add_cap(std::move(link_rows[j]), b.link_const[j], cands, tag + "linkcap_e" + std::to_string(j));
  }
  for (int i = 0; i < nv; ++i) add_cap(std::move(node_rows[i]), b.node_const[i], b.node_candidates[i], tag + "nodecap_v" + std::to_string(i));
}

struct DualBlock {
  int nv = 0, ne = 0, ns = 0;
  int u1 = 0, u2 = 0, u3 = 0, u4 = 0, u5 = 0, u6 = 0, h1 = 0, h2 = 0, h3 = 0;
  int zero_gap_row = -1;
  std::vector<int> lambda;  // base index of each N_Vb x K_Z block: full, linear, [full, linear]

  int U(int base, int i, int l) const { return base + i * ns + l; }
};

}  // namespace detail

enum class DesignMethod { dual_milp, direct_milp, brute_force };

inline const char* to_string(DesignMethod m) {
  switch (m) {
    case DesignMethod::dual_milp:
      return "dual-milp";
    case DesignMethod::direct_milp:
      return "direct-milp";
    case DesignMethod::brute_force:
      return "brute-force";
  }
  return "?";
}

inline DesignMethod parse_design_method(const std::string& s) {
  if (s == "dual-milp") return DesignMethod::dual_milp;
  if (s == "direct-milp") return DesignMethod::direct_milp;
  if (s == "brute-force") return DesignMethod::brute_force;
  throw std::invalid_argument("unknown design method '" + s + "'");
}

struct ScenarioBlockInfo {
  ElementRef element;
  int level = 0;
  double probability = 0.0;
  ExtensionCase kind = ExtensionCase::undisturbed;
  detail::BlockNetwork network;
  detail::PrimalBlock primal;
  detail::DualBlock dual;  // dual-milp only
};

struct DesignMilp {
  MipModel mip;
  std::vector<int> z_vars;  // candidate-major: c * K_Z + m
  double constant = 0.0;    // added to the MILP objective to obtain the design objective
  bool dual_form = false;
  double demand_big_m = 0.0;
  double lambda_big_m = 0.0;
  std::vector<ScenarioBlockInfo> blocks;
};

namespace detail {

inline DesignMilp milp_skeleton(const DesignSpec& spec) {
  DesignMilp d;
  const int nb = spec.candidates.size();
  const int k = spec.candidates.levels();
  LpModel& m = d.mip.lp;
  for (int c = 0; c < nb; ++c) {
    for (int lv = 0; lv < k; ++lv) {
      const int var = m.add_variable(0.0, 1.0, -spec.valuation * spec.candidates.costs(c, lv),
                                     "Z_c" + std::to_string(c) + "_m" + std::to_string(lv));
      d.z_vars.push_back(var);
      d.mip.binaries.push_back(var);
    }
  }
  for (int c = 0; c < nb; ++c) {
    std::vector<Term> t;
    for (int lv = 0; lv < k; ++lv) t.push_back({d.z_vars[c * k + lv], 1.0});
    m.add_row(std::move(t), Relation::equal, 1.0, "select_c" + std::to_string(c));
  }
  std::vector<Term> t;
  for (int c = 0; c < nb; ++c) {
    for (int lv = 0; lv < k; ++lv) {
      if (spec.candidates.costs(c, lv) != 0.0) t.push_back({d.z_vars[c * k + lv], spec.candidates.costs(c, lv)});
    }
  }
  // With integer costs, cost <= budget is equivalent to cost <= floor(budget).
  const double rhs = integral_costs(spec.candidates) ? std::floor(spec.budget) : spec.budget + 1e-9;
  m.add_row(std::move(t), Relation::less_equal, rhs, "budget");
  return d;
}

// Candidates with the same adjacency, detour memberships, levels and costs are
// interchangeable; ordering their chosen levels removes mirror-image subtrees.
// Candidates that appear in no scenario block are held at level 0.
inline void add_symmetry_rows(DesignMilp& d, const DesignSpec& spec) {
  const BackupTopology& t = spec.topology;
  const CandidateSet& cs = spec.candidates;
  const int k = cs.levels();
  std::map<std::vector<double>, std::vector<int>> groups;
  for (int c = 0; c < cs.size(); ++c) {
    std::vector<double> key;
    bool used = false;
    for (int v = 0; v < t.num_nodes; ++v) {
      key.push_back(t.adjacency(v, c));
      used = used || t.adjacency(v, c) != 0.0;
    }
    for (const std::vector<int>& det : t.detours) {
      const bool in = std::find(det.begin(), det.end(), c) != det.end();
      key.push_back(in ? 1.0 : 0.0);
      used = used || in;
    }
    if (!used) {
      for (int lv = 1; lv < k; ++lv) d.mip.lp.upper[d.z_vars[c * k + lv]] = 0.0;
      continue;
    }
    for (int lv = 0; lv < k; ++lv) {
      key.push_back(cs.capacity_levels(c, lv));
      key.push_back(cs.costs(c, lv));
    }
    groups[key].push_back(c);
  }
  for (const auto& [key, members] : groups) {
    for (std::size_t i = 1; i < members.size(); ++i) {
      std::vector<Term> row;
      for (int lv = 1; lv < k; ++lv) {
        row.push_back({d.z_vars[members[i - 1] * k + lv], static_cast<double>(lv)});
        row.push_back({d.z_vars[members[i] * k + lv], -static_cast<double>(lv)});
      }
      d.mip.lp.add_row(std::move(row), Relation::greater_equal, 0.0,
                       "sym_c" + std::to_string(members[i - 1]) + "_c" + std::to_string(members[i]));
    }
  }
}

inline std::string block_tag(const Scenario& s) { return to_string(s.element) + "k" + std::to_string(s.level) + "_"; }

inline DualBlock add_dual_block(LpModel& m, const BlockNetwork& b, const std::vector<int>& zvar, const CandidateSet& cs,
                                double lambda_m, const PrimalBlock& pb, const std::string& tag) {
  DualBlock d;
  d.nv = static_cast<int>(b.incidence.rows());
  d.ne = static_cast<int>(b.incidence.cols());
  d.ns = static_cast<int>(b.destination.cols());
  const int nv = d.nv, ne = d.ne, ns = d.ns;
  auto block = [&](int rows, double lo, const std::string& name) {
    const int base = m.num_variables();
    for (int r = 0; r < rows; ++r) {
      for (int l = 0; l < ns; ++l) {
        m.add_variable(lo, kInf, 0.0, tag + name + "_" + std::to_string(r) + "_s" + std::to_string(l));
      }
    }
    return base;
  };
  d.u1 = block(nv, -kInf, "U1");
  d.u2 = block(ne, 0.0, "U2");
  d.u3 = block(nv, 0.0, "U3");
  d.u4 = block(nv, 0.0, "U4");
  d.u5 = block(nv, 0.0, "U5");
  d.u6 = block(nv, 0.0, "U6");
  d.h1 = m.num_variables();
  for (int j = 0; j < ne; ++j) m.add_variable(0.0, kInf, 0.0, tag + "h1_" + std::to_string(j));
  d.h2 = m.num_variables();
  for (int i = 0; i < nv; ++i) m.add_variable(0.0, kInf, 0.0, tag + "h2_" + std::to_string(i));
  d.h3 = m.num_variables();
  for (int l = 0; l < ns; ++l) m.add_variable(-kInf, kInf, 0.0, tag + "h3_" + std::to_string(l));

  // Stationarity in X, D1, D2.
  for (int j = 0; j < ne; ++j) {
    for (int l = 0; l < ns; ++l) {
      std::vector<Term> t;
      for (int i = 0; i < nv; ++i) {
        const double e = b.incidence(i, j);
        if (e == 0.0) continue;
        t.push_back({d.U(d.u1, i, l), e});
        t.push_back({d.h2 + i, std::abs(e)});
      }
      t.push_back({d.U(d.u2, j, l), -1.0});
      t.push_back({d.h1 + j, 1.0});
      m.add_row(std::move(t), Relation::equal, 0.0, tag + "dX_" + std::to_string(j) + "_s" + std::to_string(l));
    }
  }
  for (int i = 0; i < nv; ++i) {
    for (int l = 0; l < ns; ++l) {
      m.add_row({{d.h3 + l, 1.0}, {d.U(d.u1, i, l), -1.0}, {d.U(d.u3, i, l), 1.0}, {d.U(d.u5, i, l), -1.0}},
                Relation::equal, 1.0, tag + "dD1_" + std::to_string(i) + "_s" + std::to_string(l));
      m.add_row({{d.h3 + l, 1.0}, {d.U(d.u1, i, l), -1.0}, {d.U(d.u4, i, l), -1.0}, {d.U(d.u6, i, l), 1.0}},
                Relation::equal, 0.0, tag + "dD2_" + std::to_string(i) + "_s" + std::to_string(l));
    }
  }

  // Lambda blocks. Link case: (full, linear) for the link products then for
  // the backup-node products. Node case: one pair for the disturbed node.
  const int nb = cs.size();
  const int k = cs.levels();
  const int pairs = b.kind == ExtensionCase::link ? 2 : 1;
  for (int p = 0; p < pairs; ++p) {
    for (const char* part : {"full", "lin"}) {
      d.lambda.push_back(m.num_variables());
      const std::string name = std::string(b.kind == ExtensionCase::link ? (p == 0 ? "L1" : "L2") : "L3") +
                               (part[0] == 'l' ? "p" : "");
      for (int c = 0; c < nb; ++c) {
        for (int lv = 0; lv < k; ++lv) {
          m.add_variable(0.0, 0.0, 0.0, tag + name + "_c" + std::to_string(c) + "_m" + std::to_string(lv));
        }
      }
    }
  }
  // h-terms multiplying each candidate's capacity, per Lambda pair.
  std::vector<std::vector<std::vector<int>>> h_of(pairs, std::vector<std::vector<int>>(nb));
  const int ne0 = static_cast<int>(b.link_candidate.size());
  for (int j = 0; j < ne0; ++j) {
    if (b.link_candidate[j] >= 0) h_of[0][b.link_candidate[j]].push_back(d.h1 + j);
  }
  for (int i = 0; i < nv; ++i) {
    for (int c : b.node_candidates[i]) h_of[pairs - 1][c].push_back(d.h2 + i);
  }
  for (int p = 0; p < pairs; ++p) {
    const int full = d.lambda[2 * p];
    const int lin = d.lambda[2 * p + 1];
    for (int c = 0; c < nb; ++c) {
      if (h_of[p][c].empty()) continue;
      for (int lv = 0; lv < k; ++lv) {
        const int idx = c * k + lv;
        const double cap = cs.capacity_levels(c, lv);
        m.upper[full + idx] = kInf;
        m.upper[lin + idx] = kInf;
        std::vector<Term> def{{full + idx, 1.0}};
        for (int h : h_of[p][c]) def.push_back({h, -cap});
        m.add_row(std::move(def), Relation::equal, 0.0, tag + "Ldef" + std::to_string(p) + "_" + std::to_string(idx));
        const int z = zvar[idx];
        m.add_row({{lin + idx, 1.0}, {z, -lambda_m}}, Relation::less_equal, 0.0,
                  tag + "Lz" + std::to_string(p) + "_" + std::to_string(idx));
        m.add_row({{full + idx, 1.0}, {lin + idx, -1.0}}, Relation::greater_equal, 0.0,
                  tag + "Llo" + std::to_string(p) + "_" + std::to_string(idx));
        m.add_row({{full + idx, 1.0}, {lin + idx, -1.0}, {z, lambda_m}}, Relation::less_equal, lambda_m,
                  tag + "Lhi" + std::to_string(p) + "_" + std::to_string(idx));
      }
    }
  }

  // Zero duality gap with the Z-dependent products replaced by the linear Lambda parts.
  std::vector<Term> gap;
  for (int i = 0; i < nv; ++i) {
    for (int l = 0; l < ns; ++l) gap.push_back({pb.var0 + pb.layout.d1(i, l), 1.0});
  }
  for (int j = 0; j < ne; ++j) {
    if (b.link_const[j] != 0.0) gap.push_back({d.h1 + j, -b.link_const[j]});
  }
  for (int i = 0; i < nv; ++i) {
    if (b.node_const[i] != 0.0) gap.push_back({d.h2 + i, -b.node_const[i]});
  }
  for (int i = 0; i < nv; ++i) {
    for (int l = 0; l < ns; ++l) {
      if (b.destination(i, l) != 0.0) gap.push_back({d.U(d.u3, i, l), -b.big_m * b.destination(i, l)});
      if (b.origin(i, l) != 0.0) gap.push_back({d.U(d.u4, i, l), b.big_m * b.origin(i, l)});
    }
  }
  for (int p = 0; p < pairs; ++p) {
    for (int c = 0; c < nb; ++c) {
      if (h_of[p][c].empty()) continue;
      for (int lv = 0; lv < k; ++lv) gap.push_back({d.lambda[2 * p + 1] + c * k + lv, -1.0});
    }
  }
  d.zero_gap_row = m.add_row(std::move(gap), Relation::equal, 0.0, tag + "zerogap");
  return d;
}

}  // namespace detail

inline DesignMilp build_design_milp(const DesignSpec& spec, bool dual_form, const SolverConfig& cfg = {}) {
  const ValidationReport vr = spec.validate();
  if (!vr.ok()) throw ValidationError(vr.str());
  DesignMilp d = detail::milp_skeleton(spec);
  detail::add_symmetry_rows(d, spec);
  d.dual_form = dual_form;
  d.demand_big_m = spec.demand_big_m();
  d.lambda_big_m = spec.lambda_big_m();
  const IndicatorMatrices ind = design_indicators(spec);
  for (const Scenario& s : enumerate_scenarios(spec.network)) {
    if (!s.disturbed()) {
      d.constant += s.probability * throughput(s, ind, cfg).throughput();
      continue;
    }
    ScenarioBlockInfo info;
    info.element = s.element;
    info.level = s.level;
    info.probability = s.probability;
    info.network = detail::block_network(s, ind, spec.topology);
    info.kind = info.network.kind;
    if (!dual_form && !info.network.depends_on_z()) {
      d.constant += s.probability * throughput(s, ind, cfg).throughput();
      continue;
    }
    const std::string tag = detail::block_tag(s);
    if (!dual_form) {
      detail::add_compact_primal_block(d.mip.lp, info.network, s.probability, d.z_vars, spec.candidates, tag);
      d.blocks.push_back(std::move(info));
      continue;
    }
    info.primal = detail::add_primal_block(d.mip.lp, info.network, s.probability, d.z_vars, spec.candidates, tag);
    {
      info.dual = detail::add_dual_block(d.mip.lp, info.network, d.z_vars, spec.candidates, d.lambda_big_m,
                                         info.primal, tag);
    }
    d.blocks.push_back(std::move(info));
  }
  return d;
}

inline DesignMilp build_dual_milp(const DesignSpec& spec, const SolverConfig& cfg = {}) {
  return build_design_milp(spec, true, cfg);
}

inline DesignMilp build_direct_milp(const DesignSpec& spec, const SolverConfig& cfg = {}) {
  return build_design_milp(spec, false, cfg);
}

struct LambdaPair {
  Eigen::MatrixXd full;    // Lambda
  Eigen::MatrixXd linear;  // Lambda', stands for Lambda (.) Z
};

struct LambdaBlocks {
  ElementRef element;
  int level = 0;
  std::vector<LambdaPair> pairs;  // link scenario: link then node products; node scenario: one pair
};

// Elementwise big-M conditions tying Lambda' to Lambda (.) Z.
inline bool lambda_big_m_holds(const Eigen::MatrixXi& z, const Eigen::MatrixXd& full, const Eigen::MatrixXd& linear,
                               double big_m, double tol = 1e-9) {
  const Eigen::MatrixXd zd = z.cast<double>();
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(z.rows(), z.cols());
  const Eigen::MatrixXd rest = full - linear;
  return linear.minCoeff() >= -tol && (linear - big_m * zd).maxCoeff() <= tol && rest.minCoeff() >= -tol &&
         (rest - big_m * (ones - zd)).maxCoeff() <= tol;
}

struct BigMReport {
  enum class Status { clean, resolved, suspect, not_applicable };
  Status status = Status::not_applicable;
  std::vector<std::string> flags;
  int retries = 0;
  double demand_big_m = 0.0;
  double lambda_big_m = 0.0;
};

inline const char* to_string(BigMReport::Status s) {
  switch (s) {
    case BigMReport::Status::clean:
      return "clean";
    case BigMReport::Status::resolved:
      return "resolved";
    case BigMReport::Status::suspect:
      return "bigM-suspect";
    case BigMReport::Status::not_applicable:
      return "n/a";
  }
  return "?";
}

struct DesignStats {
  long nodes = 0;
  long lp_iterations = 0;
  long evaluations = 0;  // brute force
  double seconds = 0.0;
  int variables = 0;
  int rows = 0;
  int binaries = 0;
  bool proven_optimal = true;
};

struct DesignResult {
  DesignMethod method = DesignMethod::direct_milp;
  bool feasible = false;
  SelectionMatrix z;
  Eigen::VectorXd capacities;
  double cost = 0.0;
  double objective = 0.0;            // E[S*] - w * cost, re-evaluated scenario by scenario
  double expected_throughput = 0.0;
  double solver_objective = 0.0;     // MILP optimum plus constants (equals objective up to tolerance)
  std::vector<ScenarioThroughput> per_scenario;
  std::vector<double> zero_gap_residuals;  // dual-milp: per block, with the exact bilinear terms
  std::vector<LambdaBlocks> lambdas;       // dual-milp
  std::vector<std::string> big_m_flags;    // dual-milp: entries at their big-M bound
  DesignStats stats;
  BigMReport bigm;
};

struct DesignOptions {
  MipConfig mip;
  long brute_force_cap = 59049;  // 3^10
  bool validate_big_m = true;
  int max_big_m_retries = 3;
  MipSolver* solver = nullptr;  // external engine; null uses the bundled branch and bound
};

namespace detail {

inline SelectionMatrix selection_from_solution(const DesignMilp& d, const std::vector<double>& x, int nb, int k) {
  std::vector<int> choice(nb, 0);
  for (int c = 0; c < nb; ++c) {
    for (int lv = 0; lv < k; ++lv) {
      if (x[d.z_vars[c * k + lv]] > 0.5) choice[c] = lv;
    }
  }
  return SelectionMatrix::from_choices(choice, k);
}

// Fixes Z and re-solves so the dual blocks sit at the smallest Lambda among the
// optimal solutions; big-M flags then report genuine binding.
inline std::vector<double> polish_dual_solution(const DesignMilp& d, const std::vector<double>& x,
                                                const SolverConfig& cfg) {
  LpModel lp = d.mip.lp;
  for (int v : d.z_vars) {
    lp.lower[v] = x[v];
    lp.upper[v] = x[v];
  }
  const LpSolution first = solve_lp(lp, cfg);
  if (first.status != LpStatus::optimal) return x;
  std::vector<Term> obj_row;
  for (int j = 0; j < lp.num_variables(); ++j) {
    if (lp.objective[j] != 0.0) obj_row.push_back({j, lp.objective[j]});
  }
  lp.add_row(std::move(obj_row), Relation::greater_equal, first.objective - 1e-7 * std::max(1.0, std::abs(first.objective)),
             "keep_optimum");
  std::fill(lp.objective.begin(), lp.objective.end(), 0.0);
  for (const ScenarioBlockInfo& b : d.blocks) {
    const int size = static_cast<int>(d.z_vars.size());
    for (int base : b.dual.lambda) {
      for (int i = 0; i < size; ++i) lp.objective[base + i] = -1.0;
    }
  }
  const LpSolution second = solve_lp(lp, cfg);
  return second.status == LpStatus::optimal ? second.primal : first.primal;
}

inline void inspect_dual_solution(const DesignMilp& d, const DesignSpec& spec, const std::vector<double>& x,
                                  DesignResult& r) {
  const int nb = spec.candidates.size();
  const int k = spec.candidates.levels();
  const double lm = d.lambda_big_m;
  const double dm = d.demand_big_m;
  for (const ScenarioBlockInfo& b : d.blocks) {
    const std::string where = to_string(b.element) + "@" + std::to_string(b.level);
    LambdaBlocks lb{b.element, b.level, {}};
    for (std::size_t p = 0; p + 1 < b.dual.lambda.size(); p += 2) {
      LambdaPair pair{Eigen::MatrixXd(nb, k), Eigen::MatrixXd(nb, k)};
      for (int c = 0; c < nb; ++c) {
        for (int lv = 0; lv < k; ++lv) {
          pair.full(c, lv) = x[b.dual.lambda[p] + c * k + lv];
          pair.linear(c, lv) = x[b.dual.lambda[p + 1] + c * k + lv];
          const bool built = r.z.z(c, lv) == 1;
          const double slack = built ? lm - pair.linear(c, lv) : lm - (pair.full(c, lv) - pair.linear(c, lv));
          if (slack <= 1e-6 * lm) {
            r.big_m_flags.push_back(where + ": Lambda[" + std::to_string(c) + "," + std::to_string(lv) + "] at M_Lambda");
          }
        }
      }
      lb.pairs.push_back(std::move(pair));
    }
    r.lambdas.push_back(std::move(lb));

    const ThroughputLayout& L = b.primal.layout;
    const int v0 = b.primal.var0;
    FlowProblem p = b.network.at(r.capacities);
    for (int i = 0; i < L.nv; ++i) {
      for (int l = 0; l < L.ns; ++l) {
        if (p.destination(i, l) != 0.0 && dm - x[v0 + L.d1(i, l)] <= 1e-6 * dm) {
          r.big_m_flags.push_back(where + ": D1 at M");
        }
        if (p.origin(i, l) != 0.0 && dm + x[v0 + L.d2(i, l)] <= 1e-6 * dm) r.big_m_flags.push_back(where + ": -D2 at M");
      }
    }
    // Zero gap with exact products of the duals and the built capacities.
    double primal = 0.0;
    for (int i = 0; i < L.nv; ++i) {
      for (int l = 0; l < L.ns; ++l) primal += x[v0 + L.d1(i, l)];
    }
    double dual = 0.0;
    for (int j = 0; j < L.ne; ++j) dual += x[b.dual.h1 + j] * p.link_caps[j];
    for (int i = 0; i < L.nv; ++i) dual += x[b.dual.h2 + i] * p.node_caps[i];
    for (int i = 0; i < L.nv; ++i) {
      for (int l = 0; l < L.ns; ++l) {
        dual += p.big_m * p.destination(i, l) * x[b.dual.U(b.dual.u3, i, l)];
        dual -= p.big_m * p.origin(i, l) * x[b.dual.U(b.dual.u4, i, l)];
      }
    }
    r.zero_gap_residuals.push_back(std::abs(primal - dual));
  }
}

inline void finish_result(const DesignSpec& spec, DesignResult& r, const SolverConfig& cfg) {
  r.capacities = capacity_from_selection(r.z, spec.candidates);
  r.cost = selection_cost(r.z, spec.candidates);
  if (!within_budget(r.cost, spec.budget, spec.candidates)) throw std::logic_error("design exceeds the budget");
  const DesignEvaluation ev = evaluate_capacities(spec, r.capacities, cfg);
  r.expected_throughput = ev.expected_throughput;
  r.per_scenario = ev.scenarios;
  r.objective = r.expected_throughput - spec.valuation * r.cost;
}

inline DesignResult solve_milp_design(const DesignSpec& spec, bool dual_form, const DesignOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const DesignMilp d = build_design_milp(spec, dual_form, opt.mip.lp);
  DesignResult r;
  r.method = dual_form ? DesignMethod::dual_milp : DesignMethod::direct_milp;
  r.stats.variables = d.mip.lp.num_variables();
  r.stats.rows = d.mip.lp.num_rows();
  r.stats.binaries = static_cast<int>(d.mip.binaries.size());
  const MipResult mr = opt.solver != nullptr ? opt.solver->solve(d.mip, opt.mip) : solve_mip(d.mip, opt.mip);
  r.stats.nodes = mr.nodes;
  r.stats.lp_iterations = mr.lp_iterations;
  r.stats.proven_optimal = mr.proven_optimal;
  r.bigm.demand_big_m = d.demand_big_m;
  r.bigm.lambda_big_m = d.lambda_big_m;
  if (mr.solution.status != LpStatus::optimal) {
    r.feasible = false;
    r.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }
  r.feasible = true;
  const int nb = spec.candidates.size();
  const int k = spec.candidates.levels();
  r.z = selection_from_solution(d, mr.solution.primal, nb, k);
  r.solver_objective = mr.solution.objective + d.constant;
  finish_result(spec, r, opt.mip.lp);
  if (dual_form) {
    const std::vector<double> x = polish_dual_solution(d, mr.solution.primal, opt.mip.lp);
    inspect_dual_solution(d, spec, x, r);
  }
  r.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline DesignResult solve_brute_force(const DesignSpec& spec, const DesignOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const ValidationReport vr = spec.validate();
  if (!vr.ok()) throw ValidationError(vr.str());
  const int nb = spec.candidates.size();
  const int k = spec.candidates.levels();
  double combos = 1.0;
  for (int c = 0; c < nb; ++c) combos *= k;
  if (combos > static_cast<double>(opt.brute_force_cap)) {
    throw std::invalid_argument("brute force refused: " + std::to_string(static_cast<long long>(combos)) +
                                " selections exceed the cap of " + std::to_string(opt.brute_force_cap));
  }
  const IndicatorMatrices ind = design_indicators(spec);
  const std::vector<Scenario> scenarios = enumerate_scenarios(spec.network);
  // Each scenario only sees the candidates that can extend it.
  std::vector<BlockNetwork> nets;
  std::vector<std::vector<int>> relevant;
  double constant = 0.0;
  std::vector<std::size_t> live;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    BlockNetwork b = block_network(scenarios[s], ind, spec.topology);
    std::vector<int> rel;
    for (int c : b.link_candidate) {
      if (c >= 0) rel.push_back(c);
    }
    for (const auto& v : b.node_candidates) rel.insert(rel.end(), v.begin(), v.end());
    std::sort(rel.begin(), rel.end());
    rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
    if (rel.empty()) {
      constant += scenarios[s].probability * throughput(scenarios[s], ind, opt.mip.lp).throughput();
      continue;
    }
    live.push_back(s);
    nets.push_back(std::move(b));
    relevant.push_back(std::move(rel));
  }
  std::vector<std::map<std::vector<double>, double>> memo(live.size());

  DesignResult best;
  best.method = DesignMethod::brute_force;
  bool have = false;
  std::vector<int> choice(nb, 0);
  long evaluations = 0;
  while (true) {
    const SelectionMatrix z = SelectionMatrix::from_choices(choice, k);
    const double cost = selection_cost(z, spec.candidates);
    if (within_budget(cost, spec.budget, spec.candidates)) {
      const Eigen::VectorXd caps = capacity_from_selection(z, spec.candidates);
      double expected = constant;
      for (std::size_t t = 0; t < live.size(); ++t) {
        std::vector<double> key;
        for (int c : relevant[t]) key.push_back(caps[c]);
        auto it = memo[t].find(key);
        if (it == memo[t].end()) {
          ++evaluations;
          it = memo[t].emplace(key, solve_flow(nets[t].at(caps), opt.mip.lp).throughput()).first;
        }
        expected += scenarios[live[t]].probability * it->second;
      }
      const double obj = expected - spec.valuation * cost;
      const bool better = !have || obj > best.solver_objective + 1e-9 ||
                          (obj >= best.solver_objective - 1e-9 && z.lexicographically_less(best.z));
      if (better) {
        best.z = z;
        best.solver_objective = obj;
        have = true;
      }
    }
    int c = nb - 1;
    while (c >= 0 && ++choice[c] == k) choice[c--] = 0;
    if (c < 0) break;
  }
  best.feasible = have;
  best.stats.evaluations = evaluations;
  if (have) finish_result(spec, best, opt.mip.lp);
  best.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return best;
}

inline void collect_flags(const DesignResult& r, std::vector<std::string>& flags) {
  if (!r.feasible) {
    flags.push_back("MILP infeasible under the current big-M values");
    return;
  }
  flags.insert(flags.end(), r.big_m_flags.begin(), r.big_m_flags.end());
}

}  // namespace detail

// Flags dual-milp entries at their big-M bound (or an infeasible MILP); on
// flags doubles M and M_Lambda and re-solves, up to the retry limit. `result`
// is replaced by the last re-solve.
inline BigMReport validate_bigM(DesignResult& result, const DesignSpec& spec, const DesignOptions& opt = {}) {
  BigMReport rep;
  rep.demand_big_m = spec.demand_big_m();
  rep.lambda_big_m = spec.lambda_big_m();
  if (result.method != DesignMethod::dual_milp) return rep;
  detail::collect_flags(result, rep.flags);
  if (rep.flags.empty()) {
    rep.status = BigMReport::Status::clean;
    return rep;
  }
  DesignSpec s = spec;
  for (int attempt = 0; attempt < opt.max_big_m_retries; ++attempt) {
    s.big_m = 2.0 * s.demand_big_m();
    s.big_m_lambda = 2.0 * s.lambda_big_m();
    ++rep.retries;
    result = detail::solve_milp_design(s, true, opt);
    std::vector<std::string> flags;
    detail::collect_flags(result, flags);
    rep.demand_big_m = s.big_m;
    rep.lambda_big_m = s.big_m_lambda;
    if (flags.empty()) {
      rep.status = BigMReport::Status::resolved;
      return rep;
    }
    rep.flags.insert(rep.flags.end(), flags.begin(), flags.end());
  }
  rep.status = BigMReport::Status::suspect;
  return rep;
}

inline DesignResult solve_design(const DesignSpec& spec, DesignMethod method, const DesignOptions& opt = {}) {
  if (method == DesignMethod::brute_force) return detail::solve_brute_force(spec, opt);
  DesignResult r = detail::solve_milp_design(spec, method == DesignMethod::dual_milp, opt);
  if (method == DesignMethod::dual_milp && opt.validate_big_m) {
    BigMReport rep = validate_bigM(r, spec, opt);
    r.bigm = std::move(rep);
  }
  return r;
}

struct BigMStability {
  double objective = 0.0;
  double doubled_objective = 0.0;
  bool stable = false;
};

// Re-solves with both big-M values doubled and compares objectives.
inline BigMStability check_bigM_stability(const DesignSpec& spec, const DesignOptions& opt = {}, double tol = 1e-6) {
  DesignOptions o = opt;
  o.validate_big_m = false;
  const DesignResult a = solve_design(spec, DesignMethod::dual_milp, o);
  DesignSpec doubled = spec;
  doubled.big_m = 2.0 * spec.demand_big_m();
  doubled.big_m_lambda = 2.0 * spec.lambda_big_m();
  const DesignResult b = solve_design(doubled, DesignMethod::dual_milp, o);
  BigMStability st{a.solver_objective, b.solver_objective, false};
  st.stable = a.feasible && b.feasible && std::abs(a.solver_objective - b.solver_objective) <= tol;
  return st;
}

}  // namespace vertiflow
