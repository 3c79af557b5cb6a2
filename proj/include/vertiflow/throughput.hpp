#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "vertiflow/lp.hpp"
#include "vertiflow/net_model.hpp"

namespace vertiflow {

// Data of one momentary LP, original or extended.
struct FlowProblem {
  Eigen::MatrixXd incidence;    // nodes x links
  Eigen::MatrixXd destination;  // nodes x demands, +1 entries
  Eigen::MatrixXd origin;       // nodes x demands, -1 entries
  Eigen::VectorXd link_caps;
  Eigen::VectorXd node_caps;
  double big_m = 0.0;

  int num_nodes() const { return static_cast<int>(incidence.rows()); }
  int num_links() const { return static_cast<int>(incidence.cols()); }
  int num_demands() const { return static_cast<int>(destination.cols()); }

  void check_shapes() const {
    const auto nv = incidence.rows();
    const auto ns = destination.cols();
    if (destination.rows() != nv || origin.rows() != nv || origin.cols() != ns ||
        link_caps.size() != incidence.cols() || node_caps.size() != nv) {
      throw std::invalid_argument("flow problem blocks have inconsistent shapes");
    }
  }
};

inline FlowProblem make_flow_problem(const Scenario& scenario, const IndicatorMatrices& ind) {
  FlowProblem p{ind.incidence, ind.destination, ind.origin, scenario.link_caps, scenario.node_caps, ind.big_m};
  p.check_shapes();
  return p;
}

// Column and row positions of the throughput LP. Variables: X (link-major),
// then D1, then D2 (node-major). Rows: conservation EX - D1 - D2 = 0, link
// capacity, node capacity, balance D1'1 + D2'1 = 0, D1 <= Delta1 M,
// -D2 <= -Delta2 M.
struct ThroughputLayout {
  int nv = 0;
  int ne = 0;
  int ns = 0;

  int x(int j, int l) const { return j * ns + l; }
  int d1(int i, int l) const { return ne * ns + i * ns + l; }
  int d2(int i, int l) const { return ne * ns + nv * ns + i * ns + l; }
  int num_variables() const { return (ne + 2 * nv) * ns; }

  int conservation_row(int i, int l) const { return i * ns + l; }
  int link_row(int j) const { return nv * ns + j; }
  int node_row(int i) const { return nv * ns + ne + i; }
  int balance_row(int l) const { return nv * ns + ne + nv + l; }
  int destination_row(int i, int l) const { return nv * ns + ne + nv + ns + i * ns + l; }
  int origin_row(int i, int l) const { return 2 * nv * ns + ne + nv + ns + i * ns + l; }
  int num_rows() const { return 3 * nv * ns + ne + nv + ns; }
};

struct ThroughputLp {
  LpModel model;
  ThroughputLayout layout;
};

inline ThroughputLp build_throughput_lp(const FlowProblem& p) {
  p.check_shapes();
  ThroughputLp out;
  ThroughputLayout& L = out.layout;
  L.nv = p.num_nodes();
  L.ne = p.num_links();
  L.ns = p.num_demands();
  LpModel& m = out.model;
  const std::string sfx = "_s";
  for (int j = 0; j < L.ne; ++j) {
    for (int l = 0; l < L.ns; ++l) {
      m.add_variable(0.0, kInf, 0.0, "X_e" + std::to_string(j) + sfx + std::to_string(l));
    }
  }
  for (int i = 0; i < L.nv; ++i) {
    for (int l = 0; l < L.ns; ++l) {
      m.add_variable(0.0, kInf, 1.0, "D1_v" + std::to_string(i) + sfx + std::to_string(l));
    }
  }
  for (int i = 0; i < L.nv; ++i) {
    for (int l = 0; l < L.ns; ++l) {
      m.add_variable(-kInf, 0.0, 0.0, "D2_v" + std::to_string(i) + sfx + std::to_string(l));
    }
  }

  std::vector<std::vector<int>> links_at(L.nv);
  for (int j = 0; j < L.ne; ++j) {
    for (int i = 0; i < L.nv; ++i) {
      if (p.incidence(i, j) != 0.0) links_at[i].push_back(j);
    }
  }
  for (int i = 0; i < L.nv; ++i) {
    for (int l = 0; l < L.ns; ++l) {
      std::vector<Term> t;
      for (int j : links_at[i]) t.push_back({L.x(j, l), p.incidence(i, j)});
      t.push_back({L.d1(i, l), -1.0});
      t.push_back({L.d2(i, l), -1.0});
      m.add_row(std::move(t), Relation::equal, 0.0, "cons_v" + std::to_string(i) + sfx + std::to_string(l));
    }
  }
  for (int j = 0; j < L.ne; ++j) {
    std::vector<Term> t;
    for (int l = 0; l < L.ns; ++l) t.push_back({L.x(j, l), 1.0});
    m.add_row(std::move(t), Relation::less_equal, p.link_caps[j], "linkcap_e" + std::to_string(j));
  }
  for (int i = 0; i < L.nv; ++i) {
    std::vector<Term> t;
    for (int j : links_at[i]) {
      for (int l = 0; l < L.ns; ++l) t.push_back({L.x(j, l), std::abs(p.incidence(i, j))});
    }
    m.add_row(std::move(t), Relation::less_equal, p.node_caps[i], "nodecap_v" + std::to_string(i));
  }
  for (int l = 0; l < L.ns; ++l) {
    std::vector<Term> t;
    for (int i = 0; i < L.nv; ++i) {
      t.push_back({L.d1(i, l), 1.0});
      t.push_back({L.d2(i, l), 1.0});
    }
    m.add_row(std::move(t), Relation::equal, 0.0, "balance_s" + std::to_string(l));
  }
  for (int i = 0; i < L.nv; ++i) {
    for (int l = 0; l < L.ns; ++l) {
      m.add_row({{L.d1(i, l), 1.0}}, Relation::less_equal, p.destination(i, l) * p.big_m,
                "dest_v" + std::to_string(i) + sfx + std::to_string(l));
    }
  }
  for (int i = 0; i < L.nv; ++i) {
    for (int l = 0; l < L.ns; ++l) {
      m.add_row({{L.d2(i, l), -1.0}}, Relation::less_equal, -p.origin(i, l) * p.big_m,
                "orig_v" + std::to_string(i) + sfx + std::to_string(l));
    }
  }
  return out;
}

inline ThroughputLp build_throughput_lp(const Scenario& scenario, const IndicatorMatrices& ind) {
  return build_throughput_lp(make_flow_problem(scenario, ind));
}

struct FlowSolution {
  Eigen::MatrixXd X;   // links x demands
  Eigen::MatrixXd D1;  // nodes x demands, >= 0
  Eigen::MatrixXd D2;  // nodes x demands, <= 0
  Eigen::VectorXd fulfilled;
  double throughput = 0.0;
};

struct DualCertificate {
  Eigen::MatrixXd U1;  // conservation, nodes x demands
  Eigen::MatrixXd U2;  // X >= 0, links x demands
  Eigen::MatrixXd U3;  // D1 <= Delta1 M
  Eigen::MatrixXd U4;  // -D2 <= -Delta2 M
  Eigen::MatrixXd U5;  // D1 >= 0
  Eigen::MatrixXd U6;  // D2 <= 0
  Eigen::VectorXd h1;  // link capacity
  Eigen::VectorXd h2;  // node capacity
  Eigen::VectorXd h3;  // demand balance
};

struct CertificateReport {
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap_residual = 0.0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  bool verified = false;

  double max_residual() const { return std::max({primal_residual, dual_residual, gap_residual}); }
};

struct ThroughputResult {
  ElementRef element;
  int level = 0;
  double probability = 0.0;
  FlowSolution flow;
  DualCertificate certificate;
  CertificateReport report;
  bool verified = false;

  double throughput() const { return flow.throughput; }
};

inline double dual_objective(const DualCertificate& c, const FlowProblem& p) {
  return c.h1.dot(p.link_caps) + c.h2.dot(p.node_caps) + p.big_m * (c.U3.cwiseProduct(p.destination)).sum() -
         p.big_m * (c.U4.cwiseProduct(p.origin)).sum();
}

// Checks primal feasibility, dual feasibility and the zero-gap equality.
// Throws std::invalid_argument when block shapes do not match the problem.
inline CertificateReport verify_certificate(const FlowSolution& f, const DualCertificate& c, const FlowProblem& p,
                                            double tol = 1e-6) {
  p.check_shapes();
  const auto nv = p.incidence.rows();
  const auto ne = p.incidence.cols();
  const auto ns = p.destination.cols();
  auto shape = [](const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index cc) { return m.rows() == r && m.cols() == cc; };
  if (!shape(f.X, ne, ns) || !shape(f.D1, nv, ns) || !shape(f.D2, nv, ns) || !shape(c.U1, nv, ns) ||
      !shape(c.U2, ne, ns) || !shape(c.U3, nv, ns) || !shape(c.U4, nv, ns) || !shape(c.U5, nv, ns) ||
      !shape(c.U6, nv, ns) || c.h1.size() != ne || c.h2.size() != nv || c.h3.size() != ns) {
    throw std::invalid_argument("certificate shapes do not match the network");
  }
  auto pos = [](const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseMax(0.0).maxCoeff(); };
  auto neg = [](const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : (-m).cwiseMax(0.0).maxCoeff(); };
  auto absmax = [](const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); };

  CertificateReport r;
  const Eigen::MatrixXd abs_inc = p.incidence.cwiseAbs();
  const Eigen::VectorXd ones_s = Eigen::VectorXd::Ones(ns);
  const Eigen::VectorXd ones_v = Eigen::VectorXd::Ones(nv);
  r.primal_residual = std::max({absmax(p.incidence * f.X - f.D1 - f.D2), neg(f.X),
                                pos(f.X * ones_s - p.link_caps), pos(abs_inc * f.X * ones_s - p.node_caps),
                                absmax(f.D1.transpose() * ones_v + f.D2.transpose() * ones_v),
                                pos(f.D1 - p.destination * p.big_m), pos(-f.D2 + p.origin * p.big_m), neg(f.D1),
                                pos(f.D2)});

  const Eigen::MatrixXd ones_ss = Eigen::MatrixXd::Ones(nv, ns);
  const Eigen::MatrixXd grad_x =
      p.incidence.transpose() * c.U1 - c.U2 + (c.h1 + abs_inc.transpose() * c.h2) * ones_s.transpose();
  const Eigen::MatrixXd grad_d1 = -ones_ss + ones_v * c.h3.transpose() - c.U1 + c.U3 - c.U5;
  const Eigen::MatrixXd grad_d2 = ones_v * c.h3.transpose() - c.U1 - c.U4 + c.U6;
  r.dual_residual = std::max({absmax(grad_x), absmax(grad_d1), absmax(grad_d2), neg(c.U2), neg(c.U3), neg(c.U4),
                              neg(c.U5), neg(c.U6), neg(c.h1), neg(c.h2)});

  r.primal_objective = f.D1.sum();
  r.dual_objective = dual_objective(c, p);
  r.gap_residual = std::abs(r.primal_objective - r.dual_objective);
  r.verified = r.primal_residual <= tol && r.dual_residual <= tol && r.gap_residual <= tol;
  return r;
}

inline CertificateReport verify_certificate(const FlowSolution& f, const DualCertificate& c, const Scenario& s,
                                            const IndicatorMatrices& ind, double tol = 1e-6) {
  return verify_certificate(f, c, make_flow_problem(s, ind), tol);
}

// Reads the flow and the dual blocks out of an optimal throughput LP solution.
inline void extract_blocks(const ThroughputLayout& L, const LpSolution& s, FlowSolution& f, DualCertificate& c) {
  f.X.resize(L.ne, L.ns);
  f.D1.resize(L.nv, L.ns);
  f.D2.resize(L.nv, L.ns);
  c.U2.resize(L.ne, L.ns);
  c.U1.resize(L.nv, L.ns);
  c.U3.resize(L.nv, L.ns);
  c.U4.resize(L.nv, L.ns);
  c.U5.resize(L.nv, L.ns);
  c.U6.resize(L.nv, L.ns);
  c.h1.resize(L.ne);
  c.h2.resize(L.nv);
  c.h3.resize(L.ns);
  for (int l = 0; l < L.ns; ++l) {
    for (int j = 0; j < L.ne; ++j) {
      f.X(j, l) = s.primal[L.x(j, l)];
      c.U2(j, l) = -s.reduced_costs[L.x(j, l)];
    }
    for (int i = 0; i < L.nv; ++i) {
      f.D1(i, l) = s.primal[L.d1(i, l)];
      f.D2(i, l) = s.primal[L.d2(i, l)];
      c.U1(i, l) = s.duals[L.conservation_row(i, l)];
      c.U3(i, l) = s.duals[L.destination_row(i, l)];
      c.U4(i, l) = s.duals[L.origin_row(i, l)];
      c.U5(i, l) = -s.reduced_costs[L.d1(i, l)];
      c.U6(i, l) = s.reduced_costs[L.d2(i, l)];
    }
    c.h3[l] = s.duals[L.balance_row(l)];
  }
  for (int j = 0; j < L.ne; ++j) c.h1[j] = s.duals[L.link_row(j)];
  for (int i = 0; i < L.nv; ++i) c.h2[i] = s.duals[L.node_row(i)];
  f.fulfilled = f.D1.colwise().sum().transpose();
  f.throughput = f.D1.sum();
}

inline ThroughputResult solve_flow(const FlowProblem& p, const SolverConfig& cfg = {}) {
  const ThroughputLp lp = build_throughput_lp(p);
  const LpSolution s = solve_lp(lp.model, cfg);
  if (s.status != LpStatus::optimal) {
    throw std::logic_error(std::string("throughput LP reported ") + to_string(s.status) +
                           "; the zero flow is always feasible");
  }
  ThroughputResult r;
  extract_blocks(lp.layout, s, r.flow, r.certificate);
  r.report = verify_certificate(r.flow, r.certificate, p);
  r.verified = r.report.verified;
  return r;
}

inline ThroughputResult throughput(const Scenario& scenario, const IndicatorMatrices& ind,
                                   const SolverConfig& cfg = {}) {
  ThroughputResult r = solve_flow(make_flow_problem(scenario, ind), cfg);
  r.element = scenario.element;
  r.level = scenario.level;
  r.probability = scenario.probability;
  return r;
}

}  // namespace vertiflow
