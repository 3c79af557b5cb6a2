#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "vertiflow/lp.hpp"

namespace vertiflow {

struct MipModel {
  LpModel lp;
  std::vector<int> binaries;

  void validate() const {
    lp.validate();
    for (int j : binaries) {
      if (j < 0 || j >= lp.num_variables()) throw std::invalid_argument("binary index out of range");
    }
  }
};

struct MipConfig {
  SolverConfig lp;
  long node_limit = 200000;
  double integrality_tol = 1e-6;
  double improvement_tol = 1e-9;  // an incumbent must be strictly better by this much
  long dive_interval = 50;         // run the diving heuristic at every n-th node, 0 disables
};

struct MipResult {
  LpSolution solution;      // incumbent; binaries are exactly 0 or 1
  bool proven_optimal = false;
  double best_bound = 0.0;  // upper bound on the optimum
  long nodes = 0;
  long lp_iterations = 0;
  double seconds = 0.0;
};

// Pluggable MILP backend; the bundled one is BranchAndBound.
class MipSolver {
 public:
  virtual ~MipSolver() = default;
  virtual MipResult solve(const MipModel& model, const MipConfig& config) = 0;
};

namespace detail {

struct BnbNode {
  long id = 0;
  double bound = 0.0;
  std::vector<signed char> fixed;  // per binary: -1 free, 0 or 1
  std::shared_ptr<const Basis> warm;
};

struct BnbOrder {
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.id > b.id;
  }
};

}  // namespace detail

// Best-first branch and bound; ties on bound go to the older node. Branches on
// the most fractional binary, ties to the lowest index. Child nodes start from
// the parent's optimal basis.
class BranchAndBound : public MipSolver {
 public:
  MipResult solve(const MipModel& model, const MipConfig& config) override {
    model.validate();
    const auto start = std::chrono::steady_clock::now();
    MipResult result;
    const int nb = static_cast<int>(model.binaries.size());
    std::vector<double> base_lo(nb), base_hi(nb);
    for (int b = 0; b < nb; ++b) {
      const int j = model.binaries[b];
      base_lo[b] = std::max(0.0, std::ceil(model.lp.lower[j] - config.integrality_tol));
      base_hi[b] = std::min(1.0, std::floor(model.lp.upper[j] + config.integrality_tol));
    }

    detail::RevisedSimplex simplex(model.lp, config.lp);
    auto apply = [&](const std::vector<signed char>& fixed) {
      for (int b = 0; b < nb; ++b) {
        const int j = model.binaries[b];
        if (fixed[b] >= 0) {
          simplex.set_column_bounds(j, fixed[b], fixed[b]);
        } else {
          simplex.set_column_bounds(j, base_lo[b], base_hi[b]);
        }
      }
    };

    bool have_incumbent = false;
    double incumbent = -kInf;
    std::priority_queue<detail::BnbNode, std::vector<detail::BnbNode>, detail::BnbOrder> open;
    long next_id = 0;
    open.push({next_id++, kInf, std::vector<signed char>(nb, -1), nullptr});
    bool empty_domain = false;
    for (int b = 0; b < nb; ++b) empty_domain = empty_domain || base_lo[b] > base_hi[b];

    while (!open.empty() && !empty_domain) {
      if (result.nodes >= config.node_limit) break;
      detail::BnbNode node = open.top();
      open.pop();
      if (have_incumbent && node.bound <= incumbent + config.improvement_tol) continue;
      ++result.nodes;

      apply(node.fixed);
      if (node.warm) {
        simplex.load_basis(*node.warm);
      } else {
        simplex.reset_basis();
      }
      const LpStatus status = simplex.solve();
      result.lp_iterations += simplex.iterations();
      if (status == LpStatus::unbounded) throw std::runtime_error("MILP relaxation is unbounded");
      if (status == LpStatus::infeasible) continue;
      LpSolution relax = simplex.solution(status);
      if (have_incumbent && relax.objective <= incumbent + config.improvement_tol) continue;

      int branch = -1;
      double frac_best = config.integrality_tol;
      for (int b = 0; b < nb; ++b) {
        const double v = relax.primal[model.binaries[b]];
        const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
        if (frac > frac_best) {
          frac_best = frac;
          branch = b;
        }
      }
      auto warm = std::make_shared<const detail::Basis>(simplex.basis());

      if (branch >= 0 && config.dive_interval > 0 && (result.nodes - 1) % config.dive_interval == 0) {
        dive(model, config, simplex, apply, node.fixed, relax, result, incumbent, have_incumbent);
        simplex.load_basis(*warm);
      }

      if (branch < 0) {
        // Integral within tolerance: confirm with the binaries fixed exactly.
        std::vector<signed char> fixed(nb);
        for (int b = 0; b < nb; ++b) fixed[b] = relax.primal[model.binaries[b]] > 0.5 ? 1 : 0;
        apply(fixed);
        simplex.load_basis(*warm);
        const LpStatus st = simplex.solve();
        result.lp_iterations += simplex.iterations();
        if (st != LpStatus::optimal) continue;
        LpSolution confirmed = simplex.solution(st);
        if (!have_incumbent || confirmed.objective > incumbent + config.improvement_tol) {
          for (int b = 0; b < nb; ++b) confirmed.primal[model.binaries[b]] = fixed[b];
          incumbent = confirmed.objective;
          result.solution = std::move(confirmed);
          have_incumbent = true;
        }
        continue;
      }

      detail::BnbNode down{next_id++, relax.objective, node.fixed, warm};
      down.fixed[branch] = 0;
      detail::BnbNode up{next_id++, relax.objective, node.fixed, warm};
      up.fixed[branch] = 1;
      if (base_lo[branch] <= 0.0) open.push(std::move(down));
      if (base_hi[branch] >= 1.0) open.push(std::move(up));
    }

    const bool exhausted = open.empty() || empty_domain;
    double bound = have_incumbent ? incumbent : -kInf;
    while (!open.empty()) {
      bound = std::max(bound, open.top().bound);
      open.pop();
    }
    result.best_bound = bound;
    result.proven_optimal = exhausted || (have_incumbent && bound <= incumbent + config.improvement_tol);
    if (!have_incumbent) {
      result.solution.status = LpStatus::infeasible;
      result.solution.primal.assign(model.lp.num_variables(), 0.0);
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

 private:
  // Fractional diving: round the least fractional binary, re-solve, repeat until
  // the relaxation is integral (a new incumbent) or infeasible.
  template <class Apply>
  static void dive(const MipModel& model, const MipConfig& config, detail::RevisedSimplex& simplex, Apply& apply,
                   std::vector<signed char> fixed, LpSolution relax, MipResult& result, double& incumbent,
                   bool& have_incumbent) {
    const int nb = static_cast<int>(model.binaries.size());
    for (int step = 0; step <= nb; ++step) {
      if (have_incumbent && relax.objective <= incumbent + config.improvement_tol) return;
      int pick = -1;
      double pick_frac = kInf;
      bool integral = true;
      for (int b = 0; b < nb; ++b) {
        if (fixed[b] >= 0) continue;
        const double v = relax.primal[model.binaries[b]];
        const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
        if (frac <= config.integrality_tol) continue;
        integral = false;
        if (frac < pick_frac) {
          pick_frac = frac;
          pick = b;
        }
      }
      if (integral) {
        for (int b = 0; b < nb; ++b) fixed[b] = relax.primal[model.binaries[b]] > 0.5 ? 1 : 0;
      } else {
        fixed[pick] = relax.primal[model.binaries[pick]] > 0.5 ? 1 : 0;
      }
      apply(fixed);
      const LpStatus st = simplex.solve();
      result.lp_iterations += simplex.iterations();
      if (st != LpStatus::optimal) return;
      relax = simplex.solution(st);
      if (integral) {
        if (!have_incumbent || relax.objective > incumbent + config.improvement_tol) {
          for (int b = 0; b < nb; ++b) relax.primal[model.binaries[b]] = fixed[b];
          incumbent = relax.objective;
          result.solution = std::move(relax);
          have_incumbent = true;
        }
        return;
      }
    }
  }
};

inline MipResult solve_mip(const MipModel& model, const MipConfig& config = {}) {
  BranchAndBound bnb;
  return bnb.solve(model, config);
}

}  // namespace vertiflow
