#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace vertiflow {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { less_equal, equal, greater_equal };

struct Term {
  int var = 0;
  double coef = 0.0;
};

struct Row {
  std::vector<Term> terms;
  Relation relation = Relation::less_equal;
  double rhs = 0.0;
  std::string name;
};

// Maximization LP. Variable bounds default to [0, +inf).
struct LpModel {
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::string> names;
  std::vector<Row> rows;

  int add_variable(double lo = 0.0, double hi = kInf, double obj = 0.0, std::string name = {}) {
    objective.push_back(obj);
    lower.push_back(lo);
    upper.push_back(hi);
    names.push_back(std::move(name));
    return static_cast<int>(objective.size()) - 1;
  }

  int add_row(std::vector<Term> terms, Relation rel, double rhs, std::string name = {}) {
    rows.push_back({std::move(terms), rel, rhs, std::move(name)});
    return static_cast<int>(rows.size()) - 1;
  }

  int num_variables() const { return static_cast<int>(objective.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }

  void validate() const {
    const std::size_t n = objective.size();
    if (lower.size() != n || upper.size() != n) throw std::invalid_argument("bound vectors do not match variable count");
    for (std::size_t j = 0; j < n; ++j) {
      if (!(lower[j] <= upper[j])) throw std::invalid_argument("variable " + std::to_string(j) + ": lower > upper");
      if (std::isnan(objective[j]) || std::isinf(objective[j])) {
        throw std::invalid_argument("variable " + std::to_string(j) + ": non-finite objective");
      }
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!std::isfinite(rows[i].rhs)) throw std::invalid_argument("row " + std::to_string(i) + ": non-finite rhs");
      for (const Term& t : rows[i].terms) {
        if (t.var < 0 || static_cast<std::size_t>(t.var) >= n) {
          throw std::invalid_argument("row " + std::to_string(i) + ": coefficient on undeclared variable");
        }
        if (!std::isfinite(t.coef)) throw std::invalid_argument("row " + std::to_string(i) + ": non-finite coefficient");
      }
    }
  }
};

struct SolverConfig {
  double feasibility_tol = 1e-7;
  double dual_tol = 1e-7;
  double optimality_tol = 1e-6;
  double pivot_tol = 1e-9;
  long max_iterations = 0;  // 0 picks a limit from the model size
  int refactor_interval = 64;
};

class SolverStalled : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal:
      return "optimal";
    case LpStatus::infeasible:
      return "infeasible";
    case LpStatus::unbounded:
      return "unbounded";
  }
  return "?";
}

// Row duals follow the maximization convention: dual_i is the rate of change of
// the optimum per unit increase of rhs_i (so >= 0 on binding <= rows).
// reduced_costs_j = c_j - a_j^T duals.
struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  double objective = 0.0;
  std::vector<double> primal;
  std::vector<double> duals;
  std::vector<double> reduced_costs;
  long iterations = 0;
};

namespace detail {

enum class VarState : unsigned char { basic, at_lower, at_upper, at_zero };

struct Basis {
  std::vector<int> head;
  std::vector<VarState> state;
};

// Bounded primal revised simplex on [A, -I] (x, r) with r = Ax held in the row
// bounds. Minimizes -c internally. Phase 1 minimizes the sum of bound
// infeasibilities of the basic variables and is re-entered whenever the basis
// drifts infeasible.
class RevisedSimplex {
 public:
  RevisedSimplex(const LpModel& model, const SolverConfig& config)
      : cfg_(config), m_(model.num_rows()), n_(model.num_variables()) {
    const int total = n_ + m_;
    cost_.assign(total, 0.0);
    lo_.assign(total, 0.0);
    hi_.assign(total, 0.0);
    for (int j = 0; j < n_; ++j) {
      cost_[j] = -model.objective[j];
      lo_[j] = model.lower[j];
      hi_[j] = model.upper[j];
    }
    for (int i = 0; i < m_; ++i) {
      const Row& row = model.rows[i];
      lo_[n_ + i] = row.relation == Relation::less_equal ? -kInf : row.rhs;
      hi_[n_ + i] = row.relation == Relation::greater_equal ? kInf : row.rhs;
    }
    std::vector<int> count(n_ + 1, 0);
    for (const Row& row : model.rows) {
      for (const Term& t : row.terms) ++count[t.var + 1];
    }
    col_start_.assign(n_ + 1, 0);
    for (int j = 0; j < n_; ++j) col_start_[j + 1] = col_start_[j] + count[j + 1];
    row_idx_.resize(col_start_[n_]);
    val_.resize(col_start_[n_]);
    std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
    for (int i = 0; i < m_; ++i) {
      for (const Term& t : model.rows[i].terms) {
        row_idx_[fill[t.var]] = i;
        val_[fill[t.var]] = t.coef;
        ++fill[t.var];
      }
    }
    // Merge duplicate (row, column) entries so the basis matrix is well formed.
    std::vector<int> start(n_ + 1, 0);
    std::vector<int> ri;
    std::vector<double> va;
    std::vector<int> last(m_, -1);
    for (int j = 0; j < n_; ++j) {
      start[j] = static_cast<int>(ri.size());
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
        const int i = row_idx_[k];
        if (last[i] >= start[j]) {
          va[last[i]] += val_[k];
        } else {
          last[i] = static_cast<int>(ri.size());
          ri.push_back(i);
          va.push_back(val_[k]);
        }
      }
    }
    start[n_] = static_cast<int>(ri.size());
    col_start_ = std::move(start);
    row_idx_ = std::move(ri);
    val_ = std::move(va);

    max_iter_ = cfg_.max_iterations > 0 ? cfg_.max_iterations : 10000L + 200L * (m_ + n_);
    x_.assign(total, 0.0);
    reset_basis();
  }

  int rows() const { return m_; }
  int columns() const { return n_; }
  long iterations() const { return iterations_; }

  void set_column_bounds(int j, double lo, double hi) {
    lo_[j] = lo;
    hi_[j] = hi;
  }
  double column_lower(int j) const { return lo_[j]; }
  double column_upper(int j) const { return hi_[j]; }

  void reset_basis() {
    const int total = n_ + m_;
    state_.assign(total, VarState::at_lower);
    head_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      head_[i] = n_ + i;
      state_[n_ + i] = VarState::basic;
    }
    for (int j = 0; j < n_; ++j) state_[j] = resting_state(j, VarState::at_lower);
    have_basis_ = false;
  }

  Basis basis() const { return {head_, state_}; }

  void load_basis(const Basis& b) {
    head_ = b.head;
    state_ = b.state;
    for (int j = 0; j < n_ + m_; ++j) {
      if (state_[j] != VarState::basic) state_[j] = resting_state(j, state_[j]);
    }
    have_basis_ = false;
  }

  LpStatus solve() {
    iterations_ = 0;
    factor_failures_ = 0;
    if (!have_basis_ && !refactor()) {
      reset_basis();
      if (!refactor()) throw SolverStalled("slack basis factorization failed");
    }
    return iterate();
  }

  // Fills primal values and, when optimal, duals and reduced costs (max sense).
  LpSolution solution(LpStatus status) {
    LpSolution s;
    s.status = status;
    s.iterations = iterations_;
    s.primal.assign(x_.begin(), x_.begin() + n_);
    if (status != LpStatus::optimal) return s;
    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost_[head_[i]];
    const Eigen::VectorXd y = btran(cb);
    s.duals.resize(m_);
    for (int i = 0; i < m_; ++i) s.duals[i] = -y[i];
    s.reduced_costs.resize(n_);
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) {
      double d = cost_[j];
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) d -= y[row_idx_[k]] * val_[k];
      s.reduced_costs[j] = state_[j] == VarState::basic ? 0.0 : -d;
      obj -= cost_[j] * x_[j];
    }
    s.objective = obj;
    return s;
  }

 private:
  struct Eta {
    int r;
    std::vector<std::pair<int, double>> entries;  // eta vector, includes r
  };

  VarState resting_state(int j, VarState preferred) const {
    const bool has_lo = std::isfinite(lo_[j]);
    const bool has_hi = std::isfinite(hi_[j]);
    VarState st = preferred;
    if (st == VarState::at_lower && !has_lo) st = has_hi ? VarState::at_upper : VarState::at_zero;
    if (st == VarState::at_upper && !has_hi) st = has_lo ? VarState::at_lower : VarState::at_zero;
    if (st == VarState::at_zero && (has_lo || has_hi)) st = has_lo ? VarState::at_lower : VarState::at_upper;
    return st;
  }

  double nonbasic_value(int j) const {
    switch (state_[j]) {
      case VarState::at_lower:
        return lo_[j];
      case VarState::at_upper:
        return hi_[j];
      default:
        return 0.0;
    }
  }

  template <class F>
  void for_column(int j, F&& f) const {
    if (j < n_) {
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) f(row_idx_[k], val_[k]);
    } else {
      f(j - n_, -1.0);
    }
  }

  bool refactor() {
    std::vector<Eigen::Triplet<double>> trips;
    for (int p = 0; p < m_; ++p) {
      for_column(head_[p], [&](int i, double v) { trips.emplace_back(i, p, v); });
    }
    Eigen::SparseMatrix<double> b(m_, m_);
    b.setFromTriplets(trips.begin(), trips.end());
    b.makeCompressed();
    etas_.clear();
    if (m_ > 0) {
      lu_.analyzePattern(b);
      lu_.factorize(b);
      if (lu_.info() != Eigen::Success) return false;
    }
    for (int j = 0; j < n_ + m_; ++j) {
      if (state_[j] != VarState::basic) x_[j] = nonbasic_value(j);
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
    for (int j = 0; j < n_ + m_; ++j) {
      if (state_[j] == VarState::basic || x_[j] == 0.0) continue;
      const double xj = x_[j];
      for_column(j, [&](int i, double v) { rhs[i] -= v * xj; });
    }
    const Eigen::VectorXd xb = ftran(rhs);
    for (int p = 0; p < m_; ++p) {
      if (!std::isfinite(xb[p])) return false;
      x_[head_[p]] = xb[p];
    }
    have_basis_ = true;
    return true;
  }

  Eigen::VectorXd ftran(const Eigen::VectorXd& a) const {
    if (m_ == 0) return a;
    Eigen::VectorXd v = lu_.solve(a);
    for (const Eta& eta : etas_) {
      const double vr = v[eta.r];
      if (vr == 0.0) continue;
      v[eta.r] = 0.0;
      for (const auto& [i, e] : eta.entries) v[i] += e * vr;
    }
    return v;
  }

  Eigen::VectorXd btran(Eigen::VectorXd c) const {
    if (m_ == 0) return c;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = 0.0;
      for (const auto& [i, e] : it->entries) s += c[i] * e;
      c[it->r] = s;
    }
    return lu_.transpose().solve(c);
  }

  LpStatus iterate() {
    const double ftol = cfg_.feasibility_tol;
    const double dtol = cfg_.dual_tol;
    const int total = n_ + m_;
    long degenerate_run = 0;
    bool bland = false;
    Eigen::VectorXd cb(m_);
    Eigen::VectorXd aq(m_);

    while (true) {
      if (static_cast<int>(etas_.size()) >= cfg_.refactor_interval) {
        if (!refactor()) return recover_factor();
      }
      bool phase1 = false;
      for (int p = 0; p < m_; ++p) {
        const int j = head_[p];
        if (x_[j] < lo_[j] - ftol) {
          cb[p] = -1.0;
          phase1 = true;
        } else if (x_[j] > hi_[j] + ftol) {
          cb[p] = 1.0;
          phase1 = true;
        } else {
          cb[p] = 0.0;
        }
      }
      if (!phase1) {
        for (int p = 0; p < m_; ++p) cb[p] = cost_[head_[p]];
      }
      const Eigen::VectorXd y = btran(cb);

      // Pricing.
      int q = -1;
      double best = 0.0;
      double dq = 0.0;
      for (int j = 0; j < total; ++j) {
        const VarState st = state_[j];
        if (st == VarState::basic) continue;
        if (lo_[j] == hi_[j]) continue;
        double d = phase1 ? 0.0 : cost_[j];
        if (j < n_) {
          for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) d -= y[row_idx_[k]] * val_[k];
        } else {
          d += y[j - n_];
        }
        bool eligible = false;
        if (st == VarState::at_lower) {
          eligible = d < -dtol;
        } else if (st == VarState::at_upper) {
          eligible = d > dtol;
        } else {
          eligible = std::abs(d) > dtol;
        }
        if (!eligible) continue;
        if (bland) {
          q = j;
          dq = d;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          q = j;
          dq = d;
        }
      }

      if (q < 0) {
        if (!etas_.empty()) {
          // Confirm on a fresh factorization before terminating.
          if (!refactor()) return recover_factor();
          continue;
        }
        return phase1 ? LpStatus::infeasible : LpStatus::optimal;
      }

      if (++iterations_ > max_iter_) {
        throw SolverStalled("simplex iteration limit exceeded (" + std::to_string(max_iter_) + ")");
      }

      const double dir = dq < 0.0 ? 1.0 : -1.0;
      aq.setZero();
      for_column(q, [&](int i, double v) { aq[i] = v; });
      const Eigen::VectorXd w = ftran(aq);

      // Ratio test: basic p moves by -theta * dir * w[p].
      auto limit_of = [&](int p, double slack) -> double {
        const double alpha = dir * w[p];
        if (std::abs(alpha) <= cfg_.pivot_tol) return kInf;
        const int j = head_[p];
        const double xj = x_[j];
        if (alpha > 0.0) {
          if (phase1 && xj > hi_[j] + ftol) return (xj - hi_[j] + slack) / alpha;
          if (xj < lo_[j] - ftol) return kInf;
          if (!std::isfinite(lo_[j])) return kInf;
          return std::max(0.0, xj - lo_[j] + slack) / alpha;
        }
        if (phase1 && xj < lo_[j] - ftol) return (xj - lo_[j] - slack) / alpha;
        if (xj > hi_[j] + ftol) return kInf;
        if (!std::isfinite(hi_[j])) return kInf;
        return std::min(0.0, xj - hi_[j] - slack) / alpha;
      };

      int leave = -1;
      double theta = kInf;
      if (bland) {
        int leave_col = total;
        for (int p = 0; p < m_; ++p) {
          const double lim = limit_of(p, 0.0);
          if (!std::isfinite(lim)) continue;
          if (lim < theta - 1e-12 || (lim <= theta + 1e-12 && head_[p] < leave_col)) {
            theta = std::min(theta, lim);
            leave = p;
            leave_col = head_[p];
          }
        }
      } else {
        // Harris two-pass: bound the step with relaxed bounds, then pick the largest pivot.
        double relaxed = kInf;
        for (int p = 0; p < m_; ++p) relaxed = std::min(relaxed, limit_of(p, ftol));
        if (std::isfinite(relaxed)) {
          double best_alpha = 0.0;
          for (int p = 0; p < m_; ++p) {
            const double lim = limit_of(p, 0.0);
            if (lim <= relaxed && std::abs(w[p]) > best_alpha) {
              best_alpha = std::abs(w[p]);
              leave = p;
              theta = lim;
            }
          }
        }
      }

      const double range = hi_[q] - lo_[q];
      if (range <= theta) {
        if (!std::isfinite(range)) {
          if (phase1) throw SolverStalled("phase 1 found an unbounded improving ray");
          return LpStatus::unbounded;
        }
        // Bound flip of the entering variable.
        const double step = range;
        x_[q] = dir > 0.0 ? hi_[q] : lo_[q];
        state_[q] = dir > 0.0 ? VarState::at_upper : VarState::at_lower;
        for (int p = 0; p < m_; ++p) x_[head_[p]] -= step * dir * w[p];
        degenerate_run = 0;
        bland = false;
        continue;
      }

      const int out = head_[leave];
      const double alpha = dir * w[leave];
      bool to_upper;
      if (alpha > 0.0) {
        to_upper = phase1 && x_[out] > hi_[out] + ftol;
      } else {
        to_upper = !(phase1 && x_[out] < lo_[out] - ftol);
      }
      theta = std::max(theta, 0.0);
      for (int p = 0; p < m_; ++p) x_[head_[p]] -= theta * dir * w[p];
      x_[q] += theta * dir;

      // A leaving variable with an infinite side can only hit its finite one.
      if (to_upper && !std::isfinite(hi_[out])) to_upper = false;
      if (!to_upper && !std::isfinite(lo_[out])) to_upper = true;
      state_[out] = to_upper ? VarState::at_upper : VarState::at_lower;
      x_[out] = to_upper ? hi_[out] : lo_[out];
      state_[q] = VarState::basic;
      head_[leave] = q;

      Eta eta{leave, {}};
      const double wr = w[leave];
      for (int p = 0; p < m_; ++p) {
        if (p == leave) {
          eta.entries.emplace_back(p, 1.0 / wr);
        } else if (w[p] != 0.0) {
          eta.entries.emplace_back(p, -w[p] / wr);
        }
      }
      etas_.push_back(std::move(eta));

      if (theta <= 1e-12) {
        if (++degenerate_run > 2L * (m_ + n_)) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
    }
  }

  LpStatus recover_factor() {
    if (++factor_failures_ > 3) throw SolverStalled("basis factorization repeatedly singular");
    reset_basis();
    if (!refactor()) throw SolverStalled("slack basis factorization failed");
    return iterate();
  }

  SolverConfig cfg_;
  int m_;
  int n_;
  long max_iter_ = 0;
  long iterations_ = 0;
  std::vector<int> col_start_;
  std::vector<int> row_idx_;
  std::vector<double> val_;
  std::vector<double> cost_;
  std::vector<double> lo_;
  std::vector<double> hi_;
  std::vector<double> x_;
  std::vector<VarState> state_;
  std::vector<int> head_;
  std::vector<Eta> etas_;
  bool have_basis_ = false;
  int factor_failures_ = 0;
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;  // transpose() is non-const
};

}  // namespace detail

inline LpSolution solve_lp(const LpModel& model, const SolverConfig& config = {}) {
  model.validate();
  detail::RevisedSimplex simplex(model, config);
  const LpStatus status = simplex.solve();
  return simplex.solution(status);
}

struct KktReport {
  double primal_residual = 0.0;  // worst row or bound violation
  double dual_residual = 0.0;    // worst sign violation of duals / reduced costs
  double complementarity = 0.0;  // worst |multiplier * slack|
  double gap = 0.0;              // |primal objective - dual objective|

  bool ok(const SolverConfig& cfg = {}) const {
    return primal_residual <= cfg.feasibility_tol && dual_residual <= cfg.dual_tol &&
           complementarity <= cfg.optimality_tol && gap <= cfg.optimality_tol;
  }
};

// Independent post-solve check of an optimal LpSolution against the model.
inline KktReport check_kkt(const LpModel& model, const LpSolution& sol) {
  KktReport r;
  const int n = model.num_variables();
  const int m = model.num_rows();
  if (static_cast<int>(sol.primal.size()) != n || static_cast<int>(sol.duals.size()) != m ||
      static_cast<int>(sol.reduced_costs.size()) != n) {
    throw std::invalid_argument("solution shape does not match model");
  }
  std::vector<double> recomputed_d(model.objective);
  double dual_obj = 0.0;
  for (int i = 0; i < m; ++i) {
    const Row& row = model.rows[i];
    double act = 0.0;
    for (const Term& t : row.terms) {
      act += t.coef * sol.primal[t.var];
      recomputed_d[t.var] -= t.coef * sol.duals[i];
    }
    const double y = sol.duals[i];
    double viol = 0.0;
    if (row.relation != Relation::greater_equal) viol = std::max(viol, act - row.rhs);
    if (row.relation != Relation::less_equal) viol = std::max(viol, row.rhs - act);
    r.primal_residual = std::max(r.primal_residual, viol);
    if (row.relation == Relation::less_equal) r.dual_residual = std::max(r.dual_residual, -y);
    if (row.relation == Relation::greater_equal) r.dual_residual = std::max(r.dual_residual, y);
    r.complementarity = std::max(r.complementarity, std::abs(y * (row.rhs - act)));
    dual_obj += y * row.rhs;
  }
  double primal_obj = 0.0;
  for (int j = 0; j < n; ++j) {
    const double x = sol.primal[j];
    primal_obj += model.objective[j] * x;
    r.primal_residual = std::max(r.primal_residual, std::max(model.lower[j] - x, x - model.upper[j]));
    const double d = recomputed_d[j];
    r.dual_residual = std::max(r.dual_residual, std::abs(d - sol.reduced_costs[j]));
    // d > 0 pairs with the upper bound, d < 0 with the lower bound.
    if (d > 0.0) {
      if (std::isfinite(model.upper[j])) {
        dual_obj += d * model.upper[j];
        r.complementarity = std::max(r.complementarity, d * (model.upper[j] - x));
      } else {
        r.dual_residual = std::max(r.dual_residual, d);
      }
    } else if (d < 0.0) {
      if (std::isfinite(model.lower[j])) {
        dual_obj += d * model.lower[j];
        r.complementarity = std::max(r.complementarity, -d * (x - model.lower[j]));
      } else {
        r.dual_residual = std::max(r.dual_residual, -d);
      }
    }
  }
  r.gap = std::abs(primal_obj - dual_obj);
  return r;
}

namespace detail {

inline std::string lp_name(const std::string& given, char prefix, int index) {
  if (!given.empty()) return given;
  return prefix + std::to_string(index);
}

inline void write_lp_number(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

inline void write_lp_terms(std::ostream& out, const std::vector<Term>& terms, const LpModel& model) {
  if (terms.empty()) {
    out << " 0 " << lp_name(model.names.empty() ? std::string{} : model.names[0], 'x', 0);
    return;
  }
  bool first = true;
  for (const Term& t : terms) {
    const double c = t.coef;
    out << (c < 0.0 ? " - " : (first ? " " : " + "));
    write_lp_number(out, std::abs(c));
    out << " " << lp_name(model.names[t.var], 'x', t.var);
    first = false;
  }
}

}  // namespace detail

// Writes the model in the LP-text grammar documented in docs/formats.md.
inline void write_lp_text(std::ostream& out, const LpModel& model, const std::vector<int>& binaries = {}) {
  out << "\\ vertiflow LP dump: " << model.num_variables() << " variables, " << model.num_rows() << " rows\n";
  out << "Maximize\n obj:";
  std::vector<Term> obj;
  for (int j = 0; j < model.num_variables(); ++j) {
    if (model.objective[j] != 0.0) obj.push_back({j, model.objective[j]});
  }
  if (model.num_variables() == 0) {
    out << " 0\n";
  } else {
    detail::write_lp_terms(out, obj, model);
    out << "\n";
  }
  out << "Subject To\n";
  for (int i = 0; i < model.num_rows(); ++i) {
    const Row& row = model.rows[i];
    out << " " << detail::lp_name(row.name, 'r', i) << ":";
    detail::write_lp_terms(out, row.terms, model);
    out << (row.relation == Relation::less_equal ? " <= " : row.relation == Relation::equal ? " = " : " >= ");
    detail::write_lp_number(out, row.rhs);
    out << "\n";
  }
  out << "Bounds\n";
  for (int j = 0; j < model.num_variables(); ++j) {
    const std::string name = detail::lp_name(model.names[j], 'x', j);
    const double lo = model.lower[j];
    const double hi = model.upper[j];
    if (lo == 0.0 && hi == kInf) continue;
    if (lo == -kInf && hi == kInf) {
      out << " " << name << " free\n";
      continue;
    }
    out << " ";
    if (lo == -kInf) {
      out << "-inf";
    } else {
      detail::write_lp_number(out, lo);
    }
    out << " <= " << name << " <= ";
    if (hi == kInf) {
      out << "+inf";
    } else {
      detail::write_lp_number(out, hi);
    }
    out << "\n";
  }
  if (!binaries.empty()) {
    out << "Binaries\n";
    for (int j : binaries) out << " " << detail::lp_name(model.names[j], 'x', j) << "\n";
  }
  out << "End\n";
}

}  // namespace vertiflow
