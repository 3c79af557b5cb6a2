#pragma once

// Independent reference computations for the tests. None of these reuse the
// matrix-form LP builders of the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "vertiflow/lp.hpp"

namespace vertiflow::oracle {

struct Arc {
  int tail;
  int head;
  double capacity;
};

struct PathNetwork {
  std::vector<double> node_caps;
  std::vector<Arc> arcs;
  std::vector<std::pair<int, int>> demands;
};

// Simple paths (as arc lists) from o to d.
inline std::vector<std::vector<int>> simple_paths(const PathNetwork& n, int o, int d) {
  std::vector<std::vector<int>> out;
  std::vector<int> stack;
  std::vector<bool> seen(n.node_caps.size(), false);
  std::function<void(int)> walk = [&](int v) {
    if (v == d) {
      out.push_back(stack);
      return;
    }
    seen[v] = true;
    for (std::size_t a = 0; a < n.arcs.size(); ++a) {
      if (n.arcs[a].tail == v && !seen[n.arcs[a].head]) {
        stack.push_back(static_cast<int>(a));
        walk(n.arcs[a].head);
        stack.pop_back();
      }
    }
    seen[v] = false;
  };
  walk(o);
  return out;
}

// Path-flow constraint system A f <= b, f >= 0. Each node counts every path
// arc touching it, so a through node uses two units per unit of flow.
struct PathSystem {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  int paths = 0;
};

inline PathSystem path_system(const PathNetwork& n) {
  std::vector<std::vector<int>> paths;
  for (auto [o, d] : n.demands) {
    for (auto& p : simple_paths(n, o, d)) paths.push_back(p);
  }
  const int np = static_cast<int>(paths.size());
  const int na = static_cast<int>(n.arcs.size());
  const int nv = static_cast<int>(n.node_caps.size());
  PathSystem s;
  s.paths = np;
  s.a = Eigen::MatrixXd::Zero(na + nv, np);
  s.b.resize(na + nv);
  for (int a = 0; a < na; ++a) s.b[a] = n.arcs[a].capacity;
  for (int v = 0; v < nv; ++v) s.b[na + v] = n.node_caps[v];
  for (int p = 0; p < np; ++p) {
    for (int a : paths[p]) {
      s.a(a, p) += 1.0;
      s.a(na + n.arcs[a].tail, p) += 1.0;
      s.a(na + n.arcs[a].head, p) += 1.0;
    }
  }
  return s;
}

// Maximum of 1'f over {A f <= b, f >= 0} by enumerating every basic point.
inline double vertex_enumeration_max(const PathSystem& s) {
  const int np = s.paths;
  if (np == 0) return 0.0;
  const int m = static_cast<int>(s.a.rows());
  Eigen::MatrixXd full(m + np, np);
  full << s.a, -Eigen::MatrixXd::Identity(np, np);
  Eigen::VectorXd rhs(m + np);
  rhs << s.b, Eigen::VectorXd::Zero(np);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> pick(np);
  std::function<void(int, int)> choose = [&](int start, int depth) {
    if (depth == np) {
      Eigen::MatrixXd sub(np, np);
      Eigen::VectorXd r(np);
      for (int k = 0; k < np; ++k) {
        sub.row(k) = full.row(pick[k]);
        r[k] = rhs[pick[k]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
      if (lu.rank() < np) return;
      const Eigen::VectorXd f = lu.solve(r);
      if (((full * f - rhs).array() <= 1e-9).all()) best = std::max(best, f.sum());
      return;
    }
    for (int i = start; i < m + np; ++i) {
      pick[depth] = i;
      choose(i + 1, depth + 1);
    }
  };
  choose(0, 0);
  return best;
}

// Same optimum through the path-variable LP.
inline double path_lp_max(const PathSystem& s) {
  LpModel m;
  for (int p = 0; p < s.paths; ++p) m.add_variable(0.0, kInf, 1.0);
  for (int r = 0; r < s.a.rows(); ++r) {
    std::vector<Term> t;
    for (int p = 0; p < s.paths; ++p) {
      if (s.a(r, p) != 0.0) t.push_back({p, s.a(r, p)});
    }
    if (!t.empty()) m.add_row(std::move(t), Relation::less_equal, s.b[r]);
  }
  const LpSolution sol = solve_lp(m);
  return sol.objective;
}

inline double max_throughput(const PathNetwork& n) {
  const PathSystem s = path_system(n);
  return s.paths <= 6 ? vertex_enumeration_max(s) : path_lp_max(s);
}

}  // namespace vertiflow::oracle
