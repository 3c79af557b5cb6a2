#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "vertiflow/lp.hpp"
#include "vertiflow/mip.hpp"

namespace vertiflow {
namespace {

TEST(SolveLp, SingleConstraint) {
  LpModel m;
  const int x = m.add_variable(0.0, kInf, 1.0);
  m.add_row({{x, 1.0}}, Relation::less_equal, 3.0);
  const LpSolution s = solve_lp(m);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.primal[0], 3.0, 1e-12);
  EXPECT_NEAR(s.duals[0], 1.0, 1e-12);
  EXPECT_NEAR(s.objective, 3.0, 1e-12);
}

TEST(SolveLp, TwoVariablesDuals) {
  // Basic feasible points: (0,0), (0.4,0), (0.4,0.6), (0,1); all of the last
  // two reach 1, and only the first row can be priced at 1.
  LpModel m;
  const int x = m.add_variable(0.0, kInf, 1.0);
  const int y = m.add_variable(0.0, kInf, 1.0);
  m.add_row({{x, 1.0}, {y, 1.0}}, Relation::less_equal, 1.0);
  m.add_row({{x, 1.0}}, Relation::less_equal, 0.4);
  const LpSolution s = solve_lp(m);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.objective, 1.0, 1e-12);
  EXPECT_NEAR(s.duals[0], 1.0, 1e-12);
  EXPECT_NEAR(s.duals[1], 0.0, 1e-12);
  EXPECT_TRUE(check_kkt(m, s).ok());
}

TEST(SolveLp, Infeasible) {
  LpModel m;
  const int x = m.add_variable(0.0, kInf, 1.0);
  m.add_row({{x, 1.0}}, Relation::less_equal, -1.0);
  EXPECT_EQ(solve_lp(m).status, LpStatus::infeasible);
}

TEST(SolveLp, Unbounded) {
  LpModel m;
  const int x = m.add_variable(0.0, kInf, 1.0);
  const int y = m.add_variable(0.0, kInf, 0.0);
  m.add_row({{x, 1.0}, {y, -1.0}}, Relation::less_equal, 2.0);
  EXPECT_EQ(solve_lp(m).status, LpStatus::unbounded);
}

TEST(SolveLp, EqualityGreaterAndFreeVariables) {
  // max x + 2y - z  s.t. x + y + z = 4, y - z >= -1, y <= 2, z free, x in [0,1]
  LpModel m;
  const int x = m.add_variable(0.0, 1.0, 1.0);
  const int y = m.add_variable(0.0, 2.0, 2.0);
  const int z = m.add_variable(-kInf, kInf, -1.0);
  m.add_row({{x, 1.0}, {y, 1.0}, {z, 1.0}}, Relation::equal, 4.0);
  m.add_row({{y, 1.0}, {z, -1.0}}, Relation::greater_equal, -1.0);
  const LpSolution s = solve_lp(m);
  ASSERT_EQ(s.status, LpStatus::optimal);
  // z = 4 - x - y and z <= y + 1 force x + 2y >= 3; objective = 2x + 3y - 4.
  EXPECT_NEAR(s.objective, 2.0 + 6.0 - 4.0, 1e-9);
  EXPECT_TRUE(check_kkt(m, s).ok());
}

TEST(SolveLp, DegenerateCyclingExample) {
  // Beale's example cycles under textbook Dantzig pricing without safeguards.
  LpModel m;
  const int x1 = m.add_variable(0.0, kInf, 0.75);
  const int x2 = m.add_variable(0.0, kInf, -150.0);
  const int x3 = m.add_variable(0.0, kInf, 0.02);
  const int x4 = m.add_variable(0.0, kInf, -6.0);
  m.add_row({{x1, 0.25}, {x2, -60.0}, {x3, -0.04}, {x4, 9.0}}, Relation::less_equal, 0.0);
  m.add_row({{x1, 0.5}, {x2, -90.0}, {x3, -0.02}, {x4, 3.0}}, Relation::less_equal, 0.0);
  m.add_row({{x3, 1.0}}, Relation::less_equal, 1.0);
  const LpSolution s = solve_lp(m);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.objective, 0.05, 1e-9);
  EXPECT_TRUE(check_kkt(m, s).ok());
}

TEST(SolveLp, IterationLimitIsReportedAsStalled) {
  LpModel m;
  for (int j = 0; j < 5; ++j) m.add_variable(0.0, kInf, 1.0);
  for (int j = 0; j < 5; ++j) m.add_row({{j, 1.0}}, Relation::less_equal, 1.0 + j);
  SolverConfig cfg;
  cfg.max_iterations = 2;
  EXPECT_THROW(solve_lp(m, cfg), SolverStalled);
}

TEST(SolveLp, RejectsUndeclaredVariable) {
  LpModel m;
  m.add_variable();
  m.add_row({{3, 1.0}}, Relation::less_equal, 1.0);
  EXPECT_THROW(solve_lp(m), std::invalid_argument);
}

LpModel random_feasible_lp(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nvar(1, 8), nrow(1, 8), rel(0, 2);
  std::uniform_real_distribution<double> coef(-3.0, 3.0), unit(0.0, 1.0);
  LpModel m;
  const int n = nvar(rng);
  std::vector<double> x0(n);
  for (int j = 0; j < n; ++j) {
    const double kind = unit(rng);
    double lo = 0.0, hi = kInf;
    if (kind < 0.2) {
      lo = -kInf;
    } else if (kind < 0.5) {
      hi = 1.0 + 4.0 * unit(rng);
    }
    if (kind < 0.2) hi = kInf;
    // Keep the objective bounded by boxing free columns through a row below.
    m.add_variable(lo, hi, coef(rng));
    x0[j] = std::isfinite(hi) ? hi * unit(rng) : 2.0 * unit(rng);
  }
  const int rows = nrow(rng);
  for (int i = 0; i < rows; ++i) {
    std::vector<Term> t;
    double act = 0.0;
    for (int j = 0; j < n; ++j) {
      if (unit(rng) < 0.6) {
        const double c = std::round(coef(rng) * 4.0) / 4.0;
        if (c == 0.0) continue;
        t.push_back({j, c});
        act += c * x0[j];
      }
    }
    const int r = rel(rng);
    if (r == 0) m.add_row(t, Relation::less_equal, act + unit(rng));
    if (r == 1) m.add_row(t, Relation::greater_equal, act - unit(rng));
    if (r == 2) m.add_row(t, Relation::equal, act);
  }
  for (int j = 0; j < n; ++j) {
    m.add_row({{j, 1.0}}, Relation::less_equal, 10.0);
    m.add_row({{j, 1.0}}, Relation::greater_equal, -10.0);
  }
  return m;
}

TEST(SolveLp, RandomModelsSatisfyKkt) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const LpModel m = random_feasible_lp(rng);
    const LpSolution s = solve_lp(m);
    ASSERT_EQ(s.status, LpStatus::optimal) << "trial " << trial;
    const KktReport k = check_kkt(m, s);
    EXPECT_LE(k.primal_residual, 1e-7) << "trial " << trial;
    EXPECT_LE(k.dual_residual, 1e-7) << "trial " << trial;
    EXPECT_LE(k.complementarity, 1e-6) << "trial " << trial;
    EXPECT_LE(k.gap, 1e-6) << "trial " << trial;
  }
}

TEST(SolveLp, Deterministic) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const LpModel m = random_feasible_lp(rng);
    const LpSolution a = solve_lp(m);
    const LpSolution b = solve_lp(m);
    EXPECT_EQ(a.primal, b.primal);
    EXPECT_EQ(a.duals, b.duals);
  }
}

TEST(SolveMip, UnitKnapsack) {
  MipModel mm;
  const int a = mm.lp.add_variable(0.0, 1.0, 3.0);
  const int b = mm.lp.add_variable(0.0, 1.0, 2.0);
  mm.lp.add_row({{a, 1.0}, {b, 1.0}}, Relation::less_equal, 1.0);
  mm.binaries = {a, b};
  const MipResult r = solve_mip(mm);
  ASSERT_EQ(r.solution.status, LpStatus::optimal);
  EXPECT_TRUE(r.proven_optimal);
  EXPECT_EQ(r.solution.primal[a], 1.0);
  EXPECT_EQ(r.solution.primal[b], 0.0);
  EXPECT_NEAR(r.solution.objective, 3.0, 1e-12);
}

TEST(SolveMip, ZeroObjective) {
  MipModel mm;
  const int a = mm.lp.add_variable(0.0, 1.0, 0.0);
  const int b = mm.lp.add_variable(0.0, 1.0, 0.0);
  mm.lp.add_row({{a, 1.0}, {b, 1.0}}, Relation::greater_equal, 1.0);
  mm.binaries = {a, b};
  const MipResult r = solve_mip(mm);
  ASSERT_EQ(r.solution.status, LpStatus::optimal);
  EXPECT_EQ(r.solution.objective, 0.0);
  EXPECT_GE(r.solution.primal[a] + r.solution.primal[b], 1.0);
}

TEST(SolveMip, InfeasibleIntegerProblem) {
  MipModel mm;
  const int a = mm.lp.add_variable(0.0, 1.0, 1.0);
  mm.lp.add_row({{a, 2.0}}, Relation::equal, 1.0);
  mm.binaries = {a};
  EXPECT_EQ(solve_mip(mm).solution.status, LpStatus::infeasible);
}

// Oracle: fix every binary assignment and solve the remaining LP.
double enumerate_mip(const MipModel& mm) {
  const int nb = static_cast<int>(mm.binaries.size());
  double best = -kInf;
  for (long mask = 0; mask < (1L << nb); ++mask) {
    LpModel lp = mm.lp;
    for (int b = 0; b < nb; ++b) {
      const double v = (mask >> b) & 1;
      lp.lower[mm.binaries[b]] = v;
      lp.upper[mm.binaries[b]] = v;
    }
    const LpSolution s = solve_lp(lp);
    if (s.status == LpStatus::optimal) best = std::max(best, s.objective);
  }
  return best;
}

TEST(SolveMip, FourItemKnapsackMatchesEnumeration) {
  const std::vector<double> values{7.0, 4.0, 5.0, 3.0};
  const std::vector<double> costs{5.0, 3.0, 4.0, 2.0};
  for (double budget : {0.0, 3.0, 6.0, 7.0, 9.0, 14.0}) {
    MipModel mm;
    std::vector<Term> row;
    for (int i = 0; i < 4; ++i) {
      mm.binaries.push_back(mm.lp.add_variable(0.0, 1.0, values[i]));
      row.push_back({i, costs[i]});
    }
    mm.lp.add_row(row, Relation::less_equal, budget);
    double best = 0.0;
    for (int mask = 0; mask < 16; ++mask) {
      double v = 0.0, c = 0.0;
      for (int i = 0; i < 4; ++i) {
        if ((mask >> i) & 1) {
          v += values[i];
          c += costs[i];
        }
      }
      if (c <= budget) best = std::max(best, v);
    }
    const MipResult r = solve_mip(mm);
    EXPECT_NEAR(r.solution.objective, best, 1e-6) << "budget " << budget;
  }
}

TEST(SolveMip, RandomMixedProblemsMatchEnumeration) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coef(-2.0, 4.0), unit(0.0, 1.0);
  std::uniform_int_distribution<int> nbin(1, 8), ncont(0, 4), nrow(1, 6);
  for (int trial = 0; trial < 60; ++trial) {
    MipModel mm;
    const int nb = nbin(rng);
    const int nc = ncont(rng);
    for (int b = 0; b < nb; ++b) mm.binaries.push_back(mm.lp.add_variable(0.0, 1.0, coef(rng)));
    for (int c = 0; c < nc; ++c) mm.lp.add_variable(0.0, 3.0, coef(rng));
    const int rows = nrow(rng);
    for (int i = 0; i < rows; ++i) {
      std::vector<Term> t;
      double sum_pos = 0.0;
      for (int j = 0; j < nb + nc; ++j) {
        if (unit(rng) < 0.7) {
          const double c = std::round(coef(rng) * 2.0) / 2.0;
          if (c == 0.0) continue;
          t.push_back({j, c});
          sum_pos += std::max(c, 0.0);
        }
      }
      mm.lp.add_row(t, Relation::less_equal, std::round(unit(rng) * sum_pos));
    }
    const double oracle = enumerate_mip(mm);
    const MipResult r = solve_mip(mm);
    if (!std::isfinite(oracle)) {
      EXPECT_EQ(r.solution.status, LpStatus::infeasible) << "trial " << trial;
      continue;
    }
    ASSERT_EQ(r.solution.status, LpStatus::optimal) << "trial " << trial;
    EXPECT_TRUE(r.proven_optimal);
    EXPECT_NEAR(r.solution.objective, oracle, 1e-6) << "trial " << trial;
    for (int b : mm.binaries) {
      EXPECT_TRUE(r.solution.primal[b] == 0.0 || r.solution.primal[b] == 1.0);
    }
  }
}

TEST(SolveMip, NodeLimitFlagsNonOptimal) {
  MipModel mm;
  std::vector<Term> row;
  for (int i = 0; i < 12; ++i) {
    mm.binaries.push_back(mm.lp.add_variable(0.0, 1.0, 1.0 + 0.01 * i));
    row.push_back({i, 2.0 + 0.1 * i});
  }
  mm.lp.add_row(row, Relation::less_equal, 11.5);
  MipConfig cfg;
  cfg.node_limit = 2;
  const MipResult r = solve_mip(mm, cfg);
  EXPECT_FALSE(r.proven_optimal);
  EXPECT_GE(r.best_bound, r.solution.status == LpStatus::optimal ? r.solution.objective : -kInf);
}

TEST(LpText, DumpsAllSections) {
  MipModel mm;
  const int a = mm.lp.add_variable(0.0, 1.0, 3.0, "a");
  const int b = mm.lp.add_variable(-kInf, 0.0, -2.0, "b");
  const int c = mm.lp.add_variable(-kInf, kInf, 0.0, "c");
  mm.lp.add_row({{a, 1.0}, {b, -1.0}, {c, 0.5}}, Relation::less_equal, 1.0, "cap");
  mm.lp.add_row({{c, 1.0}}, Relation::equal, 2.0);
  mm.binaries = {a};
  std::ostringstream out;
  write_lp_text(out, mm.lp, mm.binaries);
  const std::string expected =
      "\\ vertiflow LP dump: 3 variables, 2 rows\n"
      "Maximize\n"
      " obj: 3 a - 2 b\n"
      "Subject To\n"
      " cap: 1 a - 1 b + 0.5 c <= 1\n"
      " r1: 1 c = 2\n"
      "Bounds\n"
      " 0 <= a <= 1\n"
      " -inf <= b <= 0\n"
      " c free\n"
      "Binaries\n"
      " a\n"
      "End\n";
  EXPECT_EQ(out.str(), expected);
}

}  // namespace
}  // namespace vertiflow
