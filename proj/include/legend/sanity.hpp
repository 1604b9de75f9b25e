#pragma once

// Two-query filter for clauses meant for F_1:
//   initiation: I & ~C is UNSAT
//   one step:   I & T & ~C' is UNSAT

#include <algorithm>
#include <span>
#include <vector>

#include "legend/aiger.hpp"
#include "legend/cnf.hpp"
#include "legend/cube.hpp"
#include "legend/sat.hpp"

namespace legend {

struct SanityVerdict {
  bool initiation = false;
  bool one_step = false;
  bool accepted() const noexcept { return initiation && one_step; }
};

// One solver holding I (under an activation literal) and T; every candidate
// is checked by assuming the literals of its negation.
class SanityChecker {
 public:
  explicit SanityChecker(const TransitionSystem& ts) : enc_(solver_, ts) {
    enc_.encode_transition();
    init_ = sat::pos(solver_.new_var());
    enc_.encode_init(init_);
  }

  bool initiation(const Clause& c) { return holds(c, TimeFrame::current); }
  bool one_step(const Clause& c) { return holds(c, TimeFrame::next); }
  SanityVerdict check(const Clause& c) { return {initiation(c), one_step(c)}; }

  // Raw literal list: a list containing both polarities of some latch is a
  // tautology and passes both checks.
  SanityVerdict check(std::span<const Literal> lits) {
    for (auto a : lits)
      for (auto b : lits)
        if (a.latch == b.latch && a.value != b.value) return {true, true};
    return check(Clause(std::vector<Literal>(lits.begin(), lits.end())));
  }

  std::uint64_t queries() const noexcept { return queries_; }

 private:
  bool holds(const Clause& c, TimeFrame f) {
    std::vector<sat::Lit> a{init_};
    for (auto l : c) a.push_back(~enc_.lit(l, f));
    ++queries_;
    return solver_.solve(a) == sat::Result::Unsat;
  }

  sat::Solver solver_;
  CnfEncoder enc_;
  sat::Lit init_;
  std::uint64_t queries_ = 0;
};

inline bool check_initiation(const TransitionSystem& ts, const Clause& c) {
  return SanityChecker(ts).initiation(c);
}
inline bool check_one_step(const TransitionSystem& ts, const Clause& c) {
  return SanityChecker(ts).one_step(c);
}

struct FilterResult {
  std::vector<Clause> accepted;         // C*, duplicate- and subsumption-free
  std::vector<SanityVerdict> verdicts;  // aligned with the candidates
  std::uint64_t queries = 0;
};

// Keeps the candidates passing both checks, then removes duplicates and any
// clause whose literal set is a superset of another accepted clause.
inline FilterResult filter_candidates(const TransitionSystem& ts, std::span<const Clause> candidates) {
  FilterResult r;
  SanityChecker checker(ts);
  std::vector<Clause> pass;
  for (const auto& c : candidates) {
    r.verdicts.push_back(checker.check(c));
    if (r.verdicts.back().accepted()) pass.push_back(c);
  }
  r.queries = checker.queries();
  // Shorter clauses first so that subsumers are seen before what they subsume;
  // ties keep the candidate order.
  std::stable_sort(pass.begin(), pass.end(), [](const Clause& a, const Clause& b) { return a.size() < b.size(); });
  for (const auto& c : pass) {
    bool subsumed = std::any_of(r.accepted.begin(), r.accepted.end(), [&](const Clause& d) { return d.subset_of(c); });
    if (!subsumed) r.accepted.push_back(c);
  }
  return r;
}

}  // namespace legend
