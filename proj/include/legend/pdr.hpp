#pragma once

// IC3/PDR with delta-encoded frames and clause side-loading into F_1.
//
// Frames are stored as blocked cubes: frame j holds the cubes whose negations
// were learned at level j, and F_i is the conjunction of the clauses stored in
// frames i..top. Every frame owns an activation literal in a single solver, so
// a query against F_i assumes the activation literals of frames i..top. Frame 0
// is I itself.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "legend/certify.hpp"
#include "legend/cnf.hpp"
#include "legend/cube.hpp"
#include "legend/dimacs.hpp"
#include "legend/sat.hpp"

namespace legend {

struct PdrBudget {
  double time_limit_s = 0.0;      // 0: unlimited
  std::uint64_t max_queries = 0;  // 0: unlimited
  std::size_t max_frames = 0;     // 0: unlimited
};

struct PdrOptions {
  PdrBudget budget;
  sat::BackendConfig backend;
  // Re-check the three invariant conditions before reporting Safe.
  bool certify = true;
};

struct PdrStats {
  std::uint64_t sat_queries = 0;
  std::uint64_t obligations = 0;
  std::uint64_t clauses_learned = 0;
  std::uint64_t sideload_offered = 0;
  std::uint64_t sideload_accepted = 0;
  std::size_t frames = 0;
  double wall_seconds = 0.0;

  // Everything except wall time.
  friend bool same_counters(const PdrStats& a, const PdrStats& b) {
    return std::tie(a.sat_queries, a.obligations, a.clauses_learned, a.sideload_offered,
                    a.sideload_accepted, a.frames) ==
           std::tie(b.sat_queries, b.obligations, b.clauses_learned, b.sideload_offered,
                    b.sideload_accepted, b.frames);
  }
};

enum class Verdict { safe, unsafe, unknown };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::safe: return "SAFE";
    case Verdict::unsafe: return "UNSAFE";
    case Verdict::unknown: return "UNKNOWN";
  }
  return "?";
}

// An invariant clause together with the frame it was first learned at.
struct Lemma {
  Clause clause;
  std::size_t frame = 0;
};

struct VerificationResult {
  Verdict verdict = Verdict::unknown;
  std::vector<Lemma> invariant;  // Safe
  Trace trace;                   // Unsafe
  std::string note;              // Unknown: which bound was hit

  std::vector<Clause> invariant_clauses() const {
    std::vector<Clause> out;
    out.reserve(invariant.size());
    for (const auto& l : invariant) out.push_back(l.clause);
    return out;
  }
};

// Outcome of the relative-induction query F_i & ~c & T & c'.
struct RelativeInduction {
  bool inductive = false;
  // On failure: lifted predecessor cube, the full model state it came from and
  // the inputs under which every state of the cube steps into c.
  Cube predecessor;
  std::vector<std::uint8_t> state;
  std::vector<std::uint8_t> inputs;
};

class PdrEngine {
 public:
  struct Frame {
    sat::Lit activation;
    std::vector<Cube> cubes;
  };

  explicit PdrEngine(TransitionSystem ts, PdrOptions opts = {})
      : ts_(std::move(ts)),
        opts_(std::move(opts)),
        solver_(sat::make_backend(opts_.backend)),
        enc_(*solver_, ts_),
        lift_(std::make_unique<sat::Solver>()),
        lift_enc_(*lift_, ts_) {
    enc_.encode_transition();
    lift_enc_.encode_transition();
    bad_ = enc_.encode(ts_.bad);
    lift_bad_ = lift_enc_.encode(ts_.bad);
    frames_.push_back({new_activation(), {}});
    enc_.encode_init(frames_[0].activation);
    frames_.push_back({new_activation(), {}});
  }

  PdrEngine(const PdrEngine&) = delete;
  PdrEngine& operator=(const PdrEngine&) = delete;

  const TransitionSystem& system() const noexcept { return ts_; }
  const PdrStats& stats() const noexcept { return stats_; }
  const std::vector<Frame>& frames() const noexcept { return frames_; }
  std::size_t top_frame() const noexcept { return frames_.size() - 1; }
  const Trace& last_trace() const noexcept { return trace_; }

  // Adds clauses to F_1 before the main loop starts. Each clause is re-checked
  // for initiation and one-step consistency; violators are skipped.
  std::size_t inject_sideload(std::span<const Clause> clauses) {
    if (started_) throw std::logic_error("inject_sideload called after the main loop started");
    std::size_t accepted = 0;
    for (const auto& c : clauses) {
      ++stats_.sideload_offered;
      Cube cube = negate(c);
      if (cube.intersects(ts_.init_cube)) continue;
      auto assumptions = enc_.cube_lits(cube, TimeFrame::next);
      assumptions.push_back(frames_[0].activation);
      if (query(assumptions) != sat::Result::Unsat) continue;
      if (add_lemma(cube, 1)) {
        ++accepted;
        ++stats_.sideload_accepted;
      }
    }
    return accepted;
  }

  VerificationResult check() {
    started_ = true;
    start_ = std::chrono::steady_clock::now();
    if (opts_.budget.time_limit_s > 0)
      solver_->set_deadline(start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                         std::chrono::duration<double>(opts_.budget.time_limit_s)));
    VerificationResult result;
    try {
      result = run();
    } catch (const BudgetExceeded& e) {
      result = VerificationResult{};
      result.verdict = Verdict::unknown;
      result.note = e.what();
    }
    stats_.frames = frames_.size();
    stats_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return result;
  }

  // Is ~c inductive relative to F_i?
  RelativeInduction is_relative_inductive(const Cube& c, std::size_t i) {
    return relative_induction(c, i, true);
  }

  // Blocks c at frame i, recursively blocking predecessors. False means a
  // path from I into c exists; last_trace() then holds it.
  bool block_cube(const Cube& c, std::size_t i) {
    if (i == 0) return false;
    while (top_frame() < i) frames_.push_back({new_activation(), {}});
    Node root{c, {}, {}, -1};
    return block(std::move(root), i, i);
  }

  // Drops literals in ascending latch order while ~g stays inductive relative
  // to F_i and g stays disjoint from I.
  Cube generalize_cube(Cube c, std::size_t i) {
    for (std::size_t idx = 0; idx < c.size() && c.size() > 1;) {
      Cube candidate = c.without(idx);
      if (!candidate.intersects(ts_.init_cube) && relative_induction(candidate, i, false).inductive) {
        c = std::move(candidate);
      } else {
        ++idx;
      }
    }
    return c;
  }

  // Pushes clauses of frames 1..k forward where possible. True iff some frame
  // in 1..k ends up with an empty delta while being free of bad states.
  bool propagate(std::size_t k) {
    while (top_frame() < k + 1) frames_.push_back({new_activation(), {}});
    for (std::size_t i = 1; i <= k; ++i) {
      auto cubes = frames_[i].cubes;
      for (const auto& c : cubes) {
        auto& current = frames_[i].cubes;
        auto it = std::find(current.begin(), current.end(), c);
        if (it == current.end()) continue;
        if (blocked_syntactically(c, i + 1)) {
          current.erase(it);
          continue;
        }
        auto assumptions = frame_assumptions(i);
        auto primed = enc_.cube_lits(c, TimeFrame::next);
        assumptions.insert(assumptions.end(), primed.begin(), primed.end());
        if (query(assumptions) == sat::Result::Unsat) add_lemma(c, i + 1);
      }
      if (frames_[i].cubes.empty() && bad_free(i)) {
        fixpoint_ = i;
        return true;
      }
    }
    return false;
  }

  // Current invariant candidate after a successful propagate().
  std::vector<Lemma> invariant() const {
    std::vector<Lemma> out;
    if (!fixpoint_) return out;
    for (std::size_t j = *fixpoint_ + 1; j < frames_.size(); ++j)
      for (const auto& c : frames_[j].cubes) out.push_back({negate(c), discovered_.at(c)});
    return out;
  }

 private:
  struct BudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
  };

  // Proof obligation node: cube plus how its states lead towards the root.
  struct Node {
    Cube cube;
    std::vector<std::uint8_t> state;   // concrete model state inside cube
    std::vector<std::uint8_t> inputs;  // inputs moving this state into the parent cube
    std::int64_t parent;
  };

  sat::Lit new_activation() { return sat::pos(solver_->new_var()); }

  std::vector<sat::Lit> frame_assumptions(std::size_t i) const {
    if (i == 0) return {frames_[0].activation};
    std::vector<sat::Lit> a;
    for (std::size_t j = i; j < frames_.size(); ++j) a.push_back(frames_[j].activation);
    return a;
  }

  sat::Result query(std::span<const sat::Lit> assumptions) {
    check_budget();
    ++stats_.sat_queries;
    auto r = solver_->solve(assumptions);
    if (r == sat::Result::Unknown) throw BudgetExceeded("time limit reached inside SAT query");
    return r;
  }

  void check_budget() const {
    const auto& b = opts_.budget;
    if (b.max_queries && stats_.sat_queries >= b.max_queries)
      throw BudgetExceeded("query limit reached");
    if (b.time_limit_s > 0 && started_ &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count() >=
            b.time_limit_s)
      throw BudgetExceeded("time limit reached");
  }

  std::vector<std::uint8_t> model_state(sat::Backend& s, CnfEncoder& e) const {
    std::vector<std::uint8_t> st(ts_.num_latches());
    for (std::size_t i = 0; i < st.size(); ++i) st[i] = s.model_true(e.latch(i)) ? 1 : 0;
    return st;
  }
  std::vector<std::uint8_t> model_inputs(sat::Backend& s, CnfEncoder& e) const {
    std::vector<std::uint8_t> in(ts_.num_inputs());
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = s.model_true(e.input(i)) ? 1 : 0;
    return in;
  }

  // Shrinks a concrete state to the literals that, under fixed inputs, force
  // `target` (a literal of the lifting solver).
  Cube lift(const std::vector<std::uint8_t>& state, const std::vector<std::uint8_t>& inputs,
            std::span<const sat::Lit> extra) {
    std::vector<sat::Lit> assumptions;
    for (std::size_t i = 0; i < state.size(); ++i)
      assumptions.push_back(lift_enc_.latch(i) ^ (state[i] == 0));
    for (std::size_t i = 0; i < inputs.size(); ++i)
      assumptions.push_back(lift_enc_.input(i) ^ (inputs[i] == 0));
    assumptions.insert(assumptions.end(), extra.begin(), extra.end());
    ++stats_.sat_queries;
    std::vector<Literal> lits;
    if (lift_->solve(assumptions) == sat::Result::Unsat) {
      auto core = lift_->core();
      for (std::size_t i = 0; i < state.size(); ++i)
        if (std::binary_search(core.begin(), core.end(), assumptions[i]))
          lits.push_back({static_cast<std::uint32_t>(i), state[i] != 0});
    } else {
      for (std::size_t i = 0; i < state.size(); ++i)
        lits.push_back({static_cast<std::uint32_t>(i), state[i] != 0});
    }
    return Cube(std::move(lits));
  }

  RelativeInduction relative_induction(const Cube& c, std::size_t i, bool want_predecessor) {
    // ~c as a temporary clause under its own activation literal.
    const sat::Lit act = new_activation();
    std::vector<sat::Lit> clause{~act};
    for (auto l : c) clause.push_back(~enc_.lit(l));
    solver_->add_clause(clause);

    auto assumptions = frame_assumptions(i);
    assumptions.push_back(act);
    auto primed = enc_.cube_lits(c, TimeFrame::next);
    assumptions.insert(assumptions.end(), primed.begin(), primed.end());
    sat::Result r;
    try {
      r = query(assumptions);
    } catch (...) {
      solver_->release(act);
      throw;
    }
    RelativeInduction out;
    out.inductive = r == sat::Result::Unsat;
    if (!out.inductive && want_predecessor) {
      out.state = model_state(*solver_, enc_);
      out.inputs = model_inputs(*solver_, enc_);
      // Lift against ~c': all states of the predecessor cube step into c.
      const sat::Lit lact = sat::pos(lift_->new_var());
      std::vector<sat::Lit> not_next{~lact};
      for (auto l : c) not_next.push_back(~lift_enc_.lit(l, TimeFrame::next));
      lift_->add_clause(not_next);
      std::vector<sat::Lit> extra{lact};
      out.predecessor = lift(out.state, out.inputs, extra);
      lift_->release(lact);
    }
    solver_->release(act);
    return out;
  }

  // Query F_i & bad; caches the highest frame known to be free of bad states.
  bool bad_free(std::size_t i) {
    if (bad_free_upto_ && *bad_free_upto_ >= i) return true;
    auto assumptions = frame_assumptions(i);
    assumptions.push_back(bad_);
    bool ok = query(assumptions) == sat::Result::Unsat;
    if (ok && (!bad_free_upto_ || i > *bad_free_upto_)) bad_free_upto_ = i;
    return ok;
  }

  // Adds ~cube to frames 1..level. Returns false if it was already subsumed.
  bool add_lemma(const Cube& cube, std::size_t level) {
    for (std::size_t j = level; j < frames_.size(); ++j)
      for (const auto& d : frames_[j].cubes)
        if (d.subset_of(cube)) return false;
    for (std::size_t j = 1; j <= level; ++j) {
      auto& cubes = frames_[j].cubes;
      cubes.erase(std::remove_if(cubes.begin(), cubes.end(),
                                 [&](const Cube& d) { return cube.subset_of(d); }),
                  cubes.end());
    }
    frames_[level].cubes.push_back(cube);
    discovered_.try_emplace(cube, level);
    std::vector<sat::Lit> clause{~frames_[level].activation};
    for (auto l : cube) clause.push_back(~enc_.lit(l));
    solver_->add_clause(clause);
    return true;
  }

  Trace build_trace(const std::vector<Node>& nodes, std::int64_t leaf) const {
    // Pick an initial state inside the leaf cube and I.
    const Node& first = nodes[static_cast<std::size_t>(leaf)];
    Trace t;
    t.initial_state = first.state;
    if (t.initial_state.size() != ts_.num_latches()) t.initial_state.assign(ts_.num_latches(), 0);
    for (auto l : ts_.init_cube) t.initial_state[l.latch] = l.value;
    for (auto l : first.cube) t.initial_state[l.latch] = l.value;
    for (std::int64_t n = leaf; n >= 0; n = nodes[static_cast<std::size_t>(n)].parent) {
      auto in = nodes[static_cast<std::size_t>(n)].inputs;
      in.resize(ts_.num_inputs(), 0);
      t.inputs.push_back(std::move(in));
    }
    return t;
  }

  // Obligation-queue blocking, ordered by (frame, cube size, insertion order).
  bool block(Node root, std::size_t frame, std::size_t k) {
    std::vector<Node> nodes;
    using Entry = std::tuple<std::size_t, std::size_t, std::uint64_t, std::int64_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    std::uint64_t seq = 0;
    auto push = [&](std::size_t f, std::int64_t node) {
      queue.emplace(f, nodes[static_cast<std::size_t>(node)].cube.size(), seq++, node);
    };
    nodes.push_back(std::move(root));
    if (nodes[0].cube.intersects(ts_.init_cube)) {
      trace_ = build_trace(nodes, 0);
      return false;
    }
    push(frame, 0);
    while (!queue.empty()) {
      auto [f, size, order, id] = queue.top();
      queue.pop();
      (void)size, (void)order;
      ++stats_.obligations;
      check_budget();
      const Cube cube = nodes[static_cast<std::size_t>(id)].cube;
      if (f == 0) {
        trace_ = build_trace(nodes, id);
        return false;
      }
      if (blocked_syntactically(cube, f)) {
        if (f < k) push(f + 1, id);
        continue;
      }
      auto rel = relative_induction(cube, f - 1, true);
      if (rel.inductive) {
        Cube g = generalize_cube(cube, f - 1);
        if (add_lemma(g, f)) ++stats_.clauses_learned;
        if (f < k) push(f + 1, id);
        continue;
      }
      nodes.push_back(Node{std::move(rel.predecessor), std::move(rel.state), std::move(rel.inputs), id});
      auto pred = static_cast<std::int64_t>(nodes.size() - 1);
      if (nodes.back().cube.intersects(ts_.init_cube)) {
        trace_ = build_trace(nodes, pred);
        return false;
      }
      push(f - 1, pred);
      push(f, id);
    }
    return true;
  }

  bool blocked_syntactically(const Cube& c, std::size_t f) const {
    for (std::size_t j = f; j < frames_.size(); ++j)
      for (const auto& d : frames_[j].cubes)
        if (d.subset_of(c)) return true;
    return false;
  }

  VerificationResult run() {
    VerificationResult result;
    // Initial states that are already bad.
    {
      std::vector<sat::Lit> a{frames_[0].activation, bad_};
      if (query(a) == sat::Result::Sat) {
        result.verdict = Verdict::unsafe;
        Node n{Cube{}, model_state(*solver_, enc_), model_inputs(*solver_, enc_), -1};
        result.trace = build_trace(std::vector<Node>{n}, 0);
        return result;
      }
    }
    for (std::size_t k = 1;; ++k) {
      if (opts_.budget.max_frames && k > opts_.budget.max_frames)
        throw BudgetExceeded("frame limit reached");
      while (top_frame() < k) frames_.push_back({new_activation(), {}});
      for (;;) {
        auto a = frame_assumptions(k);
        a.push_back(bad_);
        if (query(a) == sat::Result::Unsat) break;
        auto state = model_state(*solver_, enc_);
        auto inputs = model_inputs(*solver_, enc_);
        std::vector<sat::Lit> extra{~lift_bad_};
        Cube c = lift(state, inputs, extra);
        if (!block(Node{std::move(c), std::move(state), std::move(inputs), -1}, k, k)) {
          result.verdict = Verdict::unsafe;
          result.trace = trace_;
          return result;
        }
      }
      if (!bad_free_upto_ || *bad_free_upto_ < k) bad_free_upto_ = k;
      if (propagate(k)) {
        result.verdict = Verdict::safe;
        result.invariant = invariant();
        if (opts_.certify) {
          auto clauses = result.invariant_clauses();
          if (!certify_invariant(ts_, clauses).ok())
            throw std::logic_error("internal error: invariant failed certification");
        }
        return result;
      }
    }
  }

  TransitionSystem ts_;
  PdrOptions opts_;
  std::unique_ptr<sat::Backend> solver_;
  CnfEncoder enc_;
  std::unique_ptr<sat::Solver> lift_;
  CnfEncoder lift_enc_;
  sat::Lit bad_;
  sat::Lit lift_bad_;
  std::vector<Frame> frames_;
  std::map<Cube, std::size_t> discovered_;
  std::optional<std::size_t> bad_free_upto_;
  std::optional<std::size_t> fixpoint_;
  Trace trace_;
  PdrStats stats_;
  bool started_ = false;
  std::chrono::steady_clock::time_point start_;
};

// One-shot model check with optional side-loaded clauses.
inline VerificationResult check(const TransitionSystem& ts, std::span<const Clause> sideload = {},
                                const PdrOptions& opts = {}, PdrStats* stats = nullptr) {
  PdrEngine engine(ts, opts);
  if (!sideload.empty()) engine.inject_sideload(sideload);
  auto r = engine.check();
  if (stats) *stats = engine.stats();
  return r;
}

}  // namespace legend
