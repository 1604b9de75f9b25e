#pragma once

// Tseitin encoding of AIG cones into a SAT backend, over two time frames.
// Current-frame latches and inputs get their own variables; next-frame latches
// are the primed copies (tied to their next-state functions by
// encode_transition), next-frame inputs are fresh.

#include <algorithm>
#include <optional>
#include <vector>

#include "legend/aiger.hpp"
#include "legend/cube.hpp"
#include "legend/sat.hpp"

namespace legend {

enum class TimeFrame { current, next };

class CnfEncoder {
 public:
  CnfEncoder(sat::Backend& solver, const TransitionSystem& ts) : solver_(solver), ts_(ts) {
    const Aig& aig = ts.aig;
    false_lit_ = sat::pos(solver_.new_var());
    solver_.add_clause({~false_lit_});
    and_index_.assign(aig.max_var + 1, -1);
    for (std::size_t i = 0; i < aig.ands.size(); ++i)
      and_index_[aig_var(aig.ands[i].lhs)] = static_cast<std::int64_t>(i);
    for (auto& m : map_) m.assign(aig.max_var + 1, std::nullopt);
    for (auto& m : map_) m[0] = false_lit_;
    for (auto v : ts.latch_vars) {
      map_[0][v] = sat::pos(solver_.new_var());
      map_[1][v] = sat::pos(solver_.new_var());
    }
    for (auto l : aig.inputs) map_[0][aig_var(l)] = sat::pos(solver_.new_var());
  }

  sat::Backend& solver() noexcept { return solver_; }
  const TransitionSystem& system() const noexcept { return ts_; }
  sat::Lit false_lit() const noexcept { return false_lit_; }
  sat::Lit true_lit() const noexcept { return ~false_lit_; }

  sat::Lit latch(std::size_t ordinal, TimeFrame f = TimeFrame::current) const {
    return *map_[index(f)][ts_.latch_vars[ordinal]];
  }
  sat::Lit lit(Literal l, TimeFrame f = TimeFrame::current) const {
    return latch(l.latch, f) ^ !l.value;
  }
  sat::Lit input(std::size_t i, TimeFrame f = TimeFrame::current) {
    auto v = aig_var(ts_.aig.inputs[i]);
    auto& slot = map_[index(f)][v];
    if (!slot) slot = sat::pos(solver_.new_var());
    return *slot;
  }

  // Returns a literal equivalent to `root` in the given frame, adding the
  // Tseitin clauses of every not-yet-encoded gate in its cone.
  sat::Lit encode(AigLit root, TimeFrame f = TimeFrame::current) {
    auto& m = map_[index(f)];
    AigVar rv = aig_var(root);
    if (!m[rv]) {
      std::vector<AigVar> cone;
      std::vector<AigVar> stack{rv};
      std::vector<std::uint8_t> visited(m.size(), 0);
      while (!stack.empty()) {
        AigVar v = stack.back();
        stack.pop_back();
        if (visited[v] || m[v]) continue;
        visited[v] = 1;
        if (and_index_[v] < 0) {
          // Input of the next frame (latches are pre-mapped).
          m[v] = sat::pos(solver_.new_var());
          continue;
        }
        cone.push_back(v);
        const auto& g = ts_.aig.ands[static_cast<std::size_t>(and_index_[v])];
        stack.push_back(aig_var(g.rhs0));
        stack.push_back(aig_var(g.rhs1));
      }
      std::sort(cone.begin(), cone.end());
      for (AigVar v : cone) {
        const auto& g = ts_.aig.ands[static_cast<std::size_t>(and_index_[v])];
        sat::Lit a = *m[aig_var(g.rhs0)] ^ aig_sign(g.rhs0);
        sat::Lit b = *m[aig_var(g.rhs1)] ^ aig_sign(g.rhs1);
        sat::Lit out = sat::pos(solver_.new_var());
        solver_.add_clause({~out, a});
        solver_.add_clause({~out, b});
        solver_.add_clause({out, ~a, ~b});
        m[v] = out;
        ++gates_encoded_;
      }
    }
    return *m[rv] ^ aig_sign(root);
  }

  // primed(l) <-> next_fn(l) for every latch.
  void encode_transition() {
    if (transition_encoded_) return;
    for (std::size_t i = 0; i < ts_.num_latches(); ++i) {
      sat::Lit f = encode(ts_.next_fn[i], TimeFrame::current);
      sat::Lit p = latch(i, TimeFrame::next);
      solver_.add_clause({~p, f});
      solver_.add_clause({p, ~f});
    }
    transition_encoded_ = true;
  }

  // Unit clauses for the initial-state cube, optionally guarded by `guard`.
  void encode_init(std::optional<sat::Lit> guard = std::nullopt) {
    for (auto l : ts_.init_cube) {
      if (guard) solver_.add_clause({~*guard, lit(l)});
      else solver_.add_clause({lit(l)});
    }
  }

  std::vector<sat::Lit> cube_lits(const Cube& c, TimeFrame f = TimeFrame::current) const {
    std::vector<sat::Lit> out;
    out.reserve(c.size());
    for (auto l : c) out.push_back(lit(l, f));
    return out;
  }

  std::size_t gates_encoded() const noexcept { return gates_encoded_; }

 private:
  static std::size_t index(TimeFrame f) noexcept { return f == TimeFrame::current ? 0 : 1; }

  sat::Backend& solver_;
  const TransitionSystem& ts_;
  sat::Lit false_lit_;
  std::vector<std::int64_t> and_index_;
  std::vector<std::optional<sat::Lit>> map_[2];
  bool transition_encoded_ = false;
  std::size_t gates_encoded_ = 0;
};

}  // namespace legend
