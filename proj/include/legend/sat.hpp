#pragma once

// Incremental CDCL solver with assumptions and final-conflict cores.
//
// Two watched literals, first-UIP learning with local minimization, phase
// saving, Luby restarts and activity-based learnt-clause reduction. Decisions
// follow VSIDS with a fixed decay of 0.95; ties go to the lowest variable id,
// so runs are reproducible bit for bit.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "legend/rng.hpp"

namespace legend::sat {

using Var = std::uint32_t;

class Lit {
 public:
  constexpr Lit() noexcept = default;
  constexpr Lit(Var v, bool negated) noexcept : code_(2 * v + (negated ? 1u : 0u)) {}

  static constexpr Lit from_code(std::uint32_t c) noexcept {
    Lit l;
    l.code_ = c;
    return l;
  }
  static constexpr Lit undef() noexcept { return from_code(std::numeric_limits<std::uint32_t>::max()); }

  constexpr Var var() const noexcept { return code_ >> 1; }
  constexpr bool negated() const noexcept { return (code_ & 1u) != 0; }
  constexpr std::uint32_t code() const noexcept { return code_; }
  constexpr Lit operator~() const noexcept { return from_code(code_ ^ 1u); }
  constexpr Lit operator^(bool flip) const noexcept { return from_code(code_ ^ (flip ? 1u : 0u)); }

  // DIMACS integer (1-based, sign = polarity).
  constexpr long long dimacs() const noexcept {
    return negated() ? -static_cast<long long>(var() + 1) : static_cast<long long>(var() + 1);
  }

  friend constexpr bool operator==(Lit, Lit) = default;
  friend constexpr auto operator<=>(Lit, Lit) = default;

 private:
  std::uint32_t code_ = 0;
};

constexpr Lit pos(Var v) noexcept { return Lit(v, false); }
constexpr Lit neg(Var v) noexcept { return Lit(v, true); }

enum class Value : std::uint8_t { False = 0, True = 1, Undef = 2 };

constexpr Value operator^(Value v, bool flip) noexcept {
  return v == Value::Undef ? v : static_cast<Value>(static_cast<std::uint8_t>(v) ^ (flip ? 1 : 0));
}

enum class Result { Sat, Unsat, Unknown };

inline const char* to_string(Result r) {
  switch (r) {
    case Result::Sat: return "SAT";
    case Result::Unsat: return "UNSAT";
    case Result::Unknown: return "UNKNOWN";
  }
  return "?";
}

struct SolverStats {
  std::uint64_t solves = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t decisions = 0;
  std::uint64_t propagations = 0;
  std::uint64_t restarts = 0;
};

// Common interface shared by the built-in solver and the external-process
// backend. A live instance must be used by one thread at a time.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual Var new_var() = 0;
  virtual std::size_t num_vars() const = 0;
  virtual void add_clause(std::span<const Lit> lits) = 0;
  virtual Result solve(std::span<const Lit> assumptions) = 0;
  // Valid after Sat: value of a literal in the model.
  virtual Value model_value(Lit l) const = 0;
  // Valid after Unsat: subset of the assumptions that is already unsatisfiable
  // with the clause database.
  virtual std::span<const Lit> core() const = 0;
  // False once the clause database is unsatisfiable without assumptions.
  virtual bool okay() const = 0;
  virtual void set_deadline(std::optional<std::chrono::steady_clock::time_point> deadline) = 0;
  virtual const SolverStats& stats() const = 0;

  void add_clause(std::initializer_list<Lit> lits) {
    add_clause(std::span<const Lit>(lits.begin(), lits.size()));
  }
  Result solve() { return solve(std::span<const Lit>{}); }
  Result solve(std::initializer_list<Lit> a) { return solve(std::span<const Lit>(a.begin(), a.size())); }
  bool model_true(Lit l) const { return model_value(l) == Value::True; }

  // Retires an activation literal: its guarded clauses become satisfied.
  void release(Lit activation) { add_clause({~activation}); }
};

class Solver final : public Backend {
 public:
  Solver() = default;

  Var new_var() override {
    Var v = static_cast<Var>(assigns_.size());
    assigns_.push_back(Value::Undef);
    level_.push_back(0);
    reason_.push_back(no_reason);
    phase_.push_back(0);
    seen_.push_back(0);
    activity_.push_back(0.0);
    heap_index_.push_back(-1);
    watches_.emplace_back();
    watches_.emplace_back();
    heap_insert(v);
    return v;
  }
  std::size_t num_vars() const override { return assigns_.size(); }

  void add_clause(std::span<const Lit> input) override {
    for (Lit l : input)
      if (l.var() >= num_vars())
        throw std::out_of_range("literal references unallocated variable " + std::to_string(l.var()));
    if (!ok_) return;
    cancel_until(0);
    scratch_.assign(input.begin(), input.end());
    std::sort(scratch_.begin(), scratch_.end());
    std::size_t j = 0;
    Lit prev = Lit::undef();
    for (Lit l : scratch_) {
      Value v = value(l);
      if (v == Value::True || l == ~prev) return;  // satisfied or tautology
      if (v == Value::False || l == prev) continue;
      scratch_[j++] = prev = l;
    }
    scratch_.resize(j);
    if (scratch_.empty()) {
      ok_ = false;
      return;
    }
    if (scratch_.size() == 1) {
      enqueue(scratch_[0], no_reason);
      if (propagate() != no_reason) ok_ = false;
      return;
    }
    attach(alloc_clause(scratch_, false));
  }
  using Backend::add_clause;

  Result solve(std::span<const Lit> assumptions) override {
    ++stats_.solves;
    model_.clear();
    core_.clear();
    for (Lit l : assumptions)
      if (l.var() >= num_vars())
        throw std::out_of_range("assumption references unallocated variable " + std::to_string(l.var()));
    if (!ok_) return Result::Unsat;
    cancel_until(0);
    simplify();
    if (!ok_) return Result::Unsat;
    assumptions_.assign(assumptions.begin(), assumptions.end());

    if (max_learnts_ < 1.0) max_learnts_ = std::max(1000.0, num_clauses_ / 3.0);
    Result status = Result::Unknown;
    for (std::uint32_t restart = 0; status == Result::Unknown; ++restart) {
      if (deadline_passed()) break;
      double limit = luby(2.0, restart) * 100.0;
      status = search(static_cast<std::uint64_t>(limit));
      if (status == Result::Unknown) ++stats_.restarts;
    }
    if (status == Result::Sat) {
      model_ = assigns_;
    }
    cancel_until(0);
    assumptions_.clear();
    return status;
  }
  using Backend::solve;

  Value model_value(Lit l) const override {
    if (l.var() >= model_.size()) return Value::Undef;
    return model_[l.var()] ^ l.negated();
  }
  std::span<const Lit> core() const override { return core_; }
  bool okay() const override { return ok_; }
  void set_deadline(std::optional<std::chrono::steady_clock::time_point> d) override { deadline_ = d; }
  const SolverStats& stats() const override { return stats_; }

  // Perturbs initial activities and phases so that otherwise identical
  // databases produce different models. Deterministic given the seed.
  void diversify(std::uint64_t seed) {
    Xorshift64 rng(seed);
    for (Var v = 0; v < num_vars(); ++v) {
      activity_[v] += rng.uniform() * 1e-5 * var_inc_;
      phase_[v] = rng.coin() ? 1 : 0;
    }
    rebuild_heap();
  }

  std::size_t num_clauses() const noexcept { return num_clauses_; }
  std::size_t num_learnts() const noexcept { return num_learnts_; }

  // Emits the current database (root-level units plus live clauses) in DIMACS
  // format, with the given assumptions appended as unit clauses.
  void write_dimacs(std::ostream& os, std::span<const Lit> assumptions = {}) const {
    std::vector<std::vector<Lit>> out;
    if (!ok_) out.push_back({});
    for (std::size_t i = 0; i < trail_.size() && (trail_lim_.empty() || i < trail_lim_[0]); ++i)
      out.push_back({trail_[i]});
    for (const auto& c : clauses_)
      if (!c.removed && !c.learnt) out.push_back(c.lits);
    for (Lit a : assumptions) out.push_back({a});
    os << "p cnf " << num_vars() << " " << out.size() << "\n";
    for (const auto& c : out) {
      for (Lit l : c) os << l.dimacs() << " ";
      os << "0\n";
    }
  }

 private:
  static constexpr std::uint32_t no_reason = std::numeric_limits<std::uint32_t>::max();

  struct ClauseData {
    std::vector<Lit> lits;
    double activity = 0.0;
    bool learnt = false;
    bool removed = false;
  };
  struct Watch {
    std::uint32_t cref;
    Lit blocker;
  };

  Value value(Lit l) const noexcept { return assigns_[l.var()] ^ l.negated(); }
  std::uint32_t decision_level() const noexcept { return static_cast<std::uint32_t>(trail_lim_.size()); }

  std::uint32_t alloc_clause(const std::vector<Lit>& lits, bool learnt) {
    std::uint32_t cref;
    if (!free_.empty()) {
      cref = free_.back();
      free_.pop_back();
      clauses_[cref] = ClauseData{lits, 0.0, learnt, false};
    } else {
      cref = static_cast<std::uint32_t>(clauses_.size());
      clauses_.push_back(ClauseData{lits, 0.0, learnt, false});
    }
    if (learnt) ++num_learnts_;
    else ++num_clauses_;
    return cref;
  }

  void attach(std::uint32_t cref) {
    const auto& c = clauses_[cref].lits;
    watches_[(~c[0]).code()].push_back({cref, c[1]});
    watches_[(~c[1]).code()].push_back({cref, c[0]});
  }

  void detach_and_free(std::uint32_t cref) {
    auto& cd = clauses_[cref];
    for (int k = 0; k < 2; ++k) {
      auto& ws = watches_[(~cd.lits[k]).code()];
      for (std::size_t i = 0; i < ws.size(); ++i)
        if (ws[i].cref == cref) {
          ws[i] = ws.back();
          ws.pop_back();
          break;
        }
    }
    if (cd.learnt) --num_learnts_;
    else --num_clauses_;
    cd.removed = true;
    cd.lits.clear();
    cd.lits.shrink_to_fit();
    free_.push_back(cref);
  }

  bool locked(std::uint32_t cref) const {
    const auto& c = clauses_[cref].lits;
    return reason_[c[0].var()] == cref && value(c[0]) == Value::True;
  }

  void enqueue(Lit p, std::uint32_t from) {
    assigns_[p.var()] = p.negated() ? Value::False : Value::True;
    level_[p.var()] = decision_level();
    reason_[p.var()] = from;
    trail_.push_back(p);
  }

  std::uint32_t propagate() {
    std::uint32_t confl = no_reason;
    while (qhead_ < trail_.size()) {
      Lit p = trail_[qhead_++];
      Lit false_lit = ~p;
      auto& ws = watches_[p.code()];
      ++stats_.propagations;
      std::size_t i = 0, j = 0;
      while (i < ws.size()) {
        Watch w = ws[i];
        if (value(w.blocker) == Value::True) {
          ws[j++] = ws[i++];
          continue;
        }
        auto& c = clauses_[w.cref].lits;
        if (c[0] == false_lit) std::swap(c[0], c[1]);
        ++i;
        Lit first = c[0];
        Watch nw{w.cref, first};
        if (first != w.blocker && value(first) == Value::True) {
          ws[j++] = nw;
          continue;
        }
        bool found = false;
        for (std::size_t k = 2; k < c.size(); ++k)
          if (value(c[k]) != Value::False) {
            c[1] = c[k];
            c[k] = false_lit;
            watches_[(~c[1]).code()].push_back(nw);
            found = true;
            break;
          }
        if (found) continue;
        ws[j++] = nw;
        if (value(first) == Value::False) {
          confl = w.cref;
          qhead_ = trail_.size();
          while (i < ws.size()) ws[j++] = ws[i++];
        } else {
          enqueue(first, w.cref);
        }
      }
      ws.resize(j);
      if (confl != no_reason) break;
    }
    return confl;
  }

  void analyze(std::uint32_t confl, std::vector<Lit>& out, std::uint32_t& bt_level) {
    int path = 0;
    Lit p = Lit::undef();
    out.clear();
    out.push_back(Lit::undef());
    std::size_t index = trail_.size();
    do {
      auto& cd = clauses_[confl];
      if (cd.learnt) bump_clause(cd);
      for (std::size_t j = (p == Lit::undef() ? 0 : 1); j < cd.lits.size(); ++j) {
        Lit q = cd.lits[j];
        Var v = q.var();
        if (!seen_[v] && level_[v] > 0) {
          bump_var(v);
          seen_[v] = 1;
          if (level_[v] >= decision_level()) ++path;
          else out.push_back(q);
        }
      }
      while (!seen_[trail_[--index].var()]) {
      }
      p = trail_[index];
      confl = reason_[p.var()];
      seen_[p.var()] = 0;
      --path;
    } while (path > 0);
    out[0] = ~p;

    // Local minimization: drop literals implied by other literals of the clause.
    analyze_toclear_.assign(out.begin(), out.end());
    std::size_t j = 1;
    for (std::size_t i = 1; i < out.size(); ++i) {
      std::uint32_t r = reason_[out[i].var()];
      bool redundant = r != no_reason;
      if (redundant) {
        const auto& c = clauses_[r].lits;
        for (std::size_t k = 1; k < c.size(); ++k)
          if (!seen_[c[k].var()] && level_[c[k].var()] > 0) {
            redundant = false;
            break;
          }
      }
      if (!redundant) out[j++] = out[i];
    }
    out.resize(j);

    bt_level = 0;
    if (out.size() > 1) {
      std::size_t max_i = 1;
      for (std::size_t i = 2; i < out.size(); ++i)
        if (level_[out[i].var()] > level_[out[max_i].var()]) max_i = i;
      std::swap(out[1], out[max_i]);
      bt_level = level_[out[1].var()];
    }
    for (Lit l : analyze_toclear_) seen_[l.var()] = 0;
  }

  // Collects the assumptions responsible for `p` being false.
  void analyze_final(Lit p) {
    core_.clear();
    core_.push_back(~p);
    if (decision_level() == 0) return;
    seen_[p.var()] = 1;
    for (std::size_t i = trail_.size(); i-- > trail_lim_[0];) {
      Var v = trail_[i].var();
      if (!seen_[v]) continue;
      if (reason_[v] == no_reason) {
        if (level_[v] > 0 && trail_[i] != ~p) core_.push_back(trail_[i]);
      } else {
        const auto& c = clauses_[reason_[v]].lits;
        for (std::size_t k = 1; k < c.size(); ++k)
          if (level_[c[k].var()] > 0) seen_[c[k].var()] = 1;
      }
      seen_[v] = 0;
    }
    seen_[p.var()] = 0;
    std::sort(core_.begin(), core_.end());
    core_.erase(std::unique(core_.begin(), core_.end()), core_.end());
  }

  void cancel_until(std::uint32_t lvl) {
    if (decision_level() <= lvl) return;
    for (std::size_t c = trail_.size(); c-- > trail_lim_[lvl];) {
      Var v = trail_[c].var();
      assigns_[v] = Value::Undef;
      reason_[v] = no_reason;
      phase_[v] = trail_[c].negated() ? 0 : 1;
      if (heap_index_[v] < 0) heap_insert(v);
    }
    qhead_ = trail_lim_[lvl];
    trail_.resize(trail_lim_[lvl]);
    trail_lim_.resize(lvl);
  }

  Lit pick_branch() {
    while (!heap_.empty()) {
      Var v = heap_pop();
      if (assigns_[v] == Value::Undef) return Lit(v, phase_[v] == 0);
    }
    return Lit::undef();
  }

  Result search(std::uint64_t conflict_limit) {
    std::uint64_t conflicts = 0;
    std::vector<Lit> learnt;
    for (;;) {
      std::uint32_t confl = propagate();
      if (confl != no_reason) {
        ++stats_.conflicts;
        ++conflicts;
        if (decision_level() == 0) {
          ok_ = false;
          return Result::Unsat;
        }
        std::uint32_t bt;
        analyze(confl, learnt, bt);
        cancel_until(bt);
        if (learnt.size() == 1) {
          enqueue(learnt[0], no_reason);
        } else {
          std::uint32_t cref = alloc_clause(learnt, true);
          attach(cref);
          bump_clause(clauses_[cref]);
          enqueue(learnt[0], cref);
        }
        var_inc_ /= var_decay;
        cla_inc_ /= clause_decay;
        if ((stats_.conflicts & 255) == 0 && deadline_passed()) {
          cancel_until(0);
          return Result::Unknown;
        }
        continue;
      }
      if (conflicts >= conflict_limit) {
        cancel_until(0);
        return Result::Unknown;
      }
      if (decision_level() == 0) simplify();
      if (static_cast<double>(num_learnts_) - static_cast<double>(trail_.size()) >= max_learnts_) {
        reduce_db();
        max_learnts_ *= 1.1;
      }

      Lit next = Lit::undef();
      while (decision_level() < assumptions_.size()) {
        Lit a = assumptions_[decision_level()];
        Value v = value(a);
        if (v == Value::True) {
          trail_lim_.push_back(static_cast<std::uint32_t>(trail_.size()));
        } else if (v == Value::False) {
          analyze_final(~a);
          return Result::Unsat;
        } else {
          next = a;
          break;
        }
      }
      if (next == Lit::undef()) {
        ++stats_.decisions;
        next = pick_branch();
        if (next == Lit::undef()) return Result::Sat;
      }
      trail_lim_.push_back(static_cast<std::uint32_t>(trail_.size()));
      enqueue(next, no_reason);
    }
  }

  // Removes clauses satisfied at the root level.
  void simplify() {
    if (decision_level() != 0 || trail_.size() == simplified_trail_) return;
    if (propagate() != no_reason) {
      ok_ = false;
      return;
    }
    for (std::uint32_t cref = 0; cref < clauses_.size(); ++cref) {
      auto& cd = clauses_[cref];
      if (cd.removed) continue;
      bool sat = false;
      for (Lit l : cd.lits)
        if (value(l) == Value::True) {
          sat = true;
          break;
        }
      if (sat && !locked(cref)) detach_and_free(cref);
    }
    simplified_trail_ = trail_.size();
  }

  void reduce_db() {
    std::vector<std::uint32_t> learnts;
    for (std::uint32_t cref = 0; cref < clauses_.size(); ++cref)
      if (!clauses_[cref].removed && clauses_[cref].learnt) learnts.push_back(cref);
    std::sort(learnts.begin(), learnts.end(), [&](std::uint32_t a, std::uint32_t b) {
      const auto& x = clauses_[a];
      const auto& y = clauses_[b];
      if ((x.lits.size() > 2) != (y.lits.size() > 2)) return x.lits.size() > 2;
      if (x.activity != y.activity) return x.activity < y.activity;
      return a < b;
    });
    double extra_lim = cla_inc_ / std::max<std::size_t>(learnts.size(), 1);
    for (std::size_t i = 0; i < learnts.size(); ++i) {
      auto cref = learnts[i];
      const auto& cd = clauses_[cref];
      if (cd.lits.size() > 2 && !locked(cref) && (i < learnts.size() / 2 || cd.activity < extra_lim))
        detach_and_free(cref);
    }
  }

  void bump_var(Var v) {
    if ((activity_[v] += var_inc_) > 1e100) {
      for (auto& a : activity_) a *= 1e-100;
      var_inc_ *= 1e-100;
    }
    if (heap_index_[v] >= 0) heap_up(static_cast<std::size_t>(heap_index_[v]));
  }
  void bump_clause(ClauseData& c) {
    if ((c.activity += cla_inc_) > 1e20) {
      for (auto& cd : clauses_)
        if (cd.learnt) cd.activity *= 1e-20;
      cla_inc_ *= 1e-20;
    }
  }

  static double luby(double y, std::uint32_t x) {
    std::uint32_t size = 1, seq = 0;
    while (size < x + 1) {
      ++seq;
      size = 2 * size + 1;
    }
    while (size - 1 != x) {
      size = (size - 1) >> 1;
      --seq;
      x = x % size;
    }
    double r = 1;
    for (std::uint32_t i = 0; i < seq; ++i) r *= y;
    return r;
  }

  bool deadline_passed() const {
    return deadline_ && std::chrono::steady_clock::now() >= *deadline_;
  }

  // Binary max-heap over activity; ties broken towards the lower variable id.
  bool heap_before(Var a, Var b) const {
    return activity_[a] > activity_[b] || (activity_[a] == activity_[b] && a < b);
  }
  void heap_up(std::size_t i) {
    Var v = heap_[i];
    while (i > 0) {
      std::size_t parent = (i - 1) / 2;
      if (!heap_before(v, heap_[parent])) break;
      heap_[i] = heap_[parent];
      heap_index_[heap_[i]] = static_cast<std::int64_t>(i);
      i = parent;
    }
    heap_[i] = v;
    heap_index_[v] = static_cast<std::int64_t>(i);
  }
  void heap_down(std::size_t i) {
    Var v = heap_[i];
    for (;;) {
      std::size_t child = 2 * i + 1;
      if (child >= heap_.size()) break;
      if (child + 1 < heap_.size() && heap_before(heap_[child + 1], heap_[child])) ++child;
      if (!heap_before(heap_[child], v)) break;
      heap_[i] = heap_[child];
      heap_index_[heap_[i]] = static_cast<std::int64_t>(i);
      i = child;
    }
    heap_[i] = v;
    heap_index_[v] = static_cast<std::int64_t>(i);
  }
  void heap_insert(Var v) {
    heap_index_[v] = static_cast<std::int64_t>(heap_.size());
    heap_.push_back(v);
    heap_up(heap_.size() - 1);
  }
  Var heap_pop() {
    Var top = heap_[0];
    heap_index_[top] = -1;
    Var last = heap_.back();
    heap_.pop_back();
    if (!heap_.empty()) {
      heap_[0] = last;
      heap_index_[last] = 0;
      heap_down(0);
    }
    return top;
  }
  void rebuild_heap() {
    heap_.clear();
    for (Var v = 0; v < num_vars(); ++v) heap_index_[v] = -1;
    for (Var v = 0; v < num_vars(); ++v)
      if (assigns_[v] == Value::Undef) heap_insert(v);
  }

  static constexpr double var_decay = 0.95;
  static constexpr double clause_decay = 0.999;

  bool ok_ = true;
  std::vector<ClauseData> clauses_;
  std::vector<std::uint32_t> free_;
  std::vector<std::vector<Watch>> watches_;
  std::vector<Value> assigns_;
  std::vector<std::uint32_t> level_;
  std::vector<std::uint32_t> reason_;
  std::vector<std::uint8_t> phase_;
  std::vector<std::uint8_t> seen_;
  std::vector<double> activity_;
  std::vector<Var> heap_;
  std::vector<std::int64_t> heap_index_;
  std::vector<Lit> trail_;
  std::vector<std::uint32_t> trail_lim_;
  std::size_t qhead_ = 0;
  std::size_t simplified_trail_ = 0;
  std::vector<Lit> assumptions_;
  std::vector<Value> model_;
  std::vector<Lit> core_;
  std::vector<Lit> scratch_;
  std::vector<Lit> analyze_toclear_;
  std::size_t num_clauses_ = 0;
  std::size_t num_learnts_ = 0;
  double max_learnts_ = 0.0;
  double var_inc_ = 1.0;
  double cla_inc_ = 1.0;
  std::optional<std::chrono::steady_clock::time_point> deadline_;
  SolverStats stats_;
};

}  // namespace legend::sat
