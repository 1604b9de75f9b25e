#include "legend/sat.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "legend/dimacs.hpp"
#include "legend/rng.hpp"

using namespace legend;
using namespace legend::sat;

namespace {

std::vector<Var> vars(Solver& s, int n) {
  std::vector<Var> v;
  for (int i = 0; i < n; ++i) v.push_back(s.new_var());
  return v;
}

using Cnf = std::vector<std::vector<Lit>>;

bool brute_force_sat(const Cnf& cnf, std::size_t n, std::span<const Lit> assumptions) {
  for (std::uint64_t m = 0; m < (1ull << n); ++m) {
    auto val = [&](Lit l) { return (((m >> l.var()) & 1) != 0) != l.negated(); };
    bool ok = std::all_of(assumptions.begin(), assumptions.end(), val);
    for (const auto& c : cnf) {
      if (!ok) break;
      ok = std::any_of(c.begin(), c.end(), val);
    }
    if (ok) return true;
  }
  return false;
}

Cnf random_cnf(Xorshift64& rng, std::size_t n, std::size_t clauses, std::size_t width) {
  Cnf cnf;
  for (std::size_t i = 0; i < clauses; ++i) {
    std::vector<Lit> c;
    for (std::size_t k = 0; k < width; ++k)
      c.push_back(Lit(static_cast<Var>(rng.below(n)), rng.coin()));
    cnf.push_back(c);
  }
  return cnf;
}

}  // namespace

TEST(Sat, ContradictoryUnits) {
  Solver s;
  auto x = s.new_var();
  s.add_clause({pos(x)});
  s.add_clause({neg(x)});
  EXPECT_EQ(s.solve(), Result::Unsat);
  EXPECT_TRUE(s.core().empty());
  EXPECT_FALSE(s.okay());
}

TEST(Sat, TautologyIsIgnored) {
  Solver s;
  auto x = s.new_var();
  s.add_clause({pos(x), neg(x)});
  EXPECT_EQ(s.solve(), Result::Sat);
  EXPECT_EQ(s.solve({neg(x)}), Result::Sat);
  EXPECT_EQ(s.solve({pos(x)}), Result::Sat);
}

TEST(Sat, UnitForcesModel) {
  Solver s;
  auto x = s.new_var();
  s.add_clause({pos(x)});
  ASSERT_EQ(s.solve(), Result::Sat);
  EXPECT_TRUE(s.model_true(pos(x)));
}

TEST(Sat, AssumptionSteersModel) {
  Solver s;
  auto v = vars(s, 2);
  s.add_clause({pos(v[0]), pos(v[1])});
  ASSERT_EQ(s.solve({neg(v[0])}), Result::Sat);
  EXPECT_TRUE(s.model_true(pos(v[1])));
}

TEST(Sat, CoreIsSubsetOfAssumptions) {
  Solver s;
  auto v = vars(s, 3);
  s.add_clause({neg(v[0]), neg(v[1])});
  std::vector<Lit> a{pos(v[0]), pos(v[1]), pos(v[2])};
  ASSERT_EQ(s.solve(a), Result::Unsat);
  auto core = std::vector<Lit>(s.core().begin(), s.core().end());
  for (Lit l : core) EXPECT_NE(std::find(a.begin(), a.end(), l), a.end());
  EXPECT_EQ(std::count(core.begin(), core.end(), pos(v[2])), 0);
  EXPECT_EQ(s.solve(core), Result::Unsat);
  EXPECT_TRUE(s.okay());
}

TEST(Sat, ContradictoryAssumptions) {
  Solver s;
  auto x = s.new_var();
  ASSERT_EQ(s.solve({pos(x), neg(x)}), Result::Unsat);
  EXPECT_EQ(s.solve(s.core()), Result::Unsat);
}

TEST(Sat, UnallocatedVariableIsRejected) {
  Solver s;
  s.new_var();
  EXPECT_THROW(s.add_clause({pos(5)}), std::out_of_range);
  EXPECT_THROW(s.solve({pos(3)}), std::out_of_range);
}

TEST(Sat, ActivationLiteralRetraction) {
  Solver s;
  auto x = s.new_var();
  auto act = s.new_var();
  s.add_clause({neg(act), pos(x)});
  EXPECT_EQ(s.solve({pos(act), neg(x)}), Result::Unsat);
  s.release(pos(act));
  EXPECT_EQ(s.solve({neg(x)}), Result::Sat);
}

TEST(Sat, PigeonHoleIsUnsat) {
  // 5 pigeons, 4 holes.
  Solver s;
  const int P = 5, H = 4;
  std::vector<std::vector<Var>> x(P, std::vector<Var>(H));
  for (auto& row : x)
    for (auto& v : row) v = s.new_var();
  for (int p = 0; p < P; ++p) {
    std::vector<Lit> c;
    for (int h = 0; h < H; ++h) c.push_back(pos(x[p][h]));
    s.add_clause(c);
  }
  for (int h = 0; h < H; ++h)
    for (int p = 0; p < P; ++p)
      for (int q = p + 1; q < P; ++q) s.add_clause({neg(x[p][h]), neg(x[q][h])});
  EXPECT_EQ(s.solve(), Result::Unsat);
  EXPECT_GT(s.stats().conflicts, 0u);
}

// Random 3-CNF near the threshold, compared against enumeration; SAT models
// are checked clause by clause and cores are re-solved.
TEST(Sat, RandomAgainstBruteForce) {
  Xorshift64 rng(2024);
  for (int round = 0; round < 300; ++round) {
    const std::size_t n = 4 + rng.below(9);
    Cnf cnf = random_cnf(rng, n, static_cast<std::size_t>(4.0 * n), 3);
    Solver s;
    vars(s, static_cast<int>(n));
    for (const auto& c : cnf) s.add_clause(c);
    std::vector<Lit> a;
    for (std::size_t k = rng.below(4); k > 0; --k) a.push_back(Lit(static_cast<Var>(rng.below(n)), rng.coin()));
    const bool expected = brute_force_sat(cnf, n, a);
    const Result r = s.solve(a);
    ASSERT_EQ(r == Result::Sat, expected) << "round " << round;
    if (r == Result::Sat) {
      for (const auto& c : cnf)
        EXPECT_TRUE(std::any_of(c.begin(), c.end(), [&](Lit l) { return s.model_true(l); }));
      for (Lit l : a) EXPECT_TRUE(s.model_true(l));
    } else {
      std::vector<Lit> core(s.core().begin(), s.core().end());
      for (Lit l : core) EXPECT_NE(std::find(a.begin(), a.end(), l), a.end());
      EXPECT_FALSE(brute_force_sat(cnf, n, core));
    }
  }
}

// Interleaved clause additions and assumption solves never disagree with a
// from-scratch enumeration of the same clause set.
TEST(Sat, IncrementalMatchesFromScratch) {
  Xorshift64 rng(99);
  for (int round = 0; round < 40; ++round) {
    const std::size_t n = 10;
    Solver s;
    vars(s, static_cast<int>(n));
    Cnf so_far;
    for (int step = 0; step < 40; ++step) {
      auto c = random_cnf(rng, n, 1, 2 + rng.below(2))[0];
      so_far.push_back(c);
      s.add_clause(c);
      std::vector<Lit> a{Lit(static_cast<Var>(rng.below(n)), rng.coin())};
      ASSERT_EQ(s.solve(a) == Result::Sat, brute_force_sat(so_far, n, a));
    }
  }
}

TEST(Sat, DeterministicAcrossRuns) {
  auto run = [] {
    Xorshift64 rng(5);
    Solver s;
    vars(s, 60);
    for (const auto& c : random_cnf(rng, 60, 250, 3)) s.add_clause(c);
    s.solve();
    return std::make_pair(s.stats().conflicts, s.stats().decisions);
  };
  EXPECT_EQ(run(), run());
}

TEST(Sat, DimacsEmission) {
  Solver s;
  auto v = vars(s, 3);
  s.add_clause({pos(v[0]), neg(v[1])});
  s.add_clause({pos(v[2])});
  std::ostringstream os;
  s.write_dimacs(os, std::vector<Lit>{neg(v[0])});
  std::istringstream in(os.str());
  auto p = read_dimacs(in);
  EXPECT_EQ(os.str().substr(0, 10), "p cnf 3 3\n");
  EXPECT_EQ(p.num_vars, 3u);
  ASSERT_EQ(p.clauses.size(), 3u);
  Solver t;
  vars(t, 3);
  for (const auto& c : p.clauses) t.add_clause(c);
  ASSERT_EQ(t.solve(), Result::Sat);
  EXPECT_TRUE(t.model_true(neg(v[1])));
}

TEST(Sat, DiversifyChangesModelsDeterministically) {
  auto model_with = [](std::uint64_t seed) {
    Solver s;
    auto v = vars(s, 16);
    s.add_clause({pos(v[0]), pos(v[1]), pos(v[2])});
    s.diversify(seed);
    s.solve();
    std::uint64_t m = 0;
    for (Var x = 0; x < 16; ++x) m |= static_cast<std::uint64_t>(s.model_true(pos(x))) << x;
    return m;
  };
  EXPECT_EQ(model_with(3), model_with(3));
  std::set<std::uint64_t> distinct;
  for (std::uint64_t seed = 0; seed < 8; ++seed) distinct.insert(model_with(seed));
  EXPECT_GT(distinct.size(), 1u);
}
