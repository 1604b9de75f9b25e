#pragma once

// Independent checks of model-checking answers: inductive-invariant
// certification by three SAT queries, and counterexample replay by simulation.

#include <cstdint>
#include <string>
#include <vector>

#include "legend/aiger.hpp"
#include "legend/cnf.hpp"
#include "legend/cube.hpp"
#include "legend/sat.hpp"

namespace legend {

// Initial latch values plus one input vector per time frame. The bad literal
// must hold in the last frame.
struct Trace {
  std::vector<std::uint8_t> initial_state;
  std::vector<std::vector<std::uint8_t>> inputs;

  std::size_t steps() const noexcept { return inputs.empty() ? 0 : inputs.size() - 1; }
};

struct CertificateCheck {
  bool initiation = false;   // I => Inv
  bool consecution = false;  // Inv & T => Inv'
  bool safety = false;       // Inv => P
  bool ok() const noexcept { return initiation && consecution && safety; }
};

inline CertificateCheck certify_invariant(const TransitionSystem& ts, std::span<const Clause> inv) {
  sat::Solver solver;
  CnfEncoder enc(solver, ts);
  enc.encode_transition();
  auto act = [&] { return sat::pos(solver.new_var()); };
  const sat::Lit act_init = act(), act_inv = act(), act_not_inv = act(), act_not_inv_next = act();
  enc.encode_init(act_init);

  std::vector<sat::Lit> some_cube{~act_not_inv}, some_cube_next{~act_not_inv_next};
  for (const auto& c : inv) {
    std::vector<sat::Lit> clause{~act_inv};
    const sat::Lit t = sat::pos(solver.new_var()), tn = sat::pos(solver.new_var());
    for (auto l : c) {
      clause.push_back(enc.lit(l));
      // t -> cube(~c), tn -> cube(~c)'
      solver.add_clause({~t, ~enc.lit(l)});
      solver.add_clause({~tn, ~enc.lit(l, TimeFrame::next)});
    }
    solver.add_clause(clause);
    some_cube.push_back(t);
    some_cube_next.push_back(tn);
  }
  solver.add_clause(some_cube);
  solver.add_clause(some_cube_next);
  const sat::Lit bad = enc.encode(ts.bad);

  CertificateCheck r;
  r.initiation = solver.solve({act_init, act_not_inv}) == sat::Result::Unsat;
  r.consecution = solver.solve({act_inv, act_not_inv_next}) == sat::Result::Unsat;
  r.safety = solver.solve({act_inv, bad}) == sat::Result::Unsat;
  return r;
}

inline bool satisfies_init(const TransitionSystem& ts, std::span<const std::uint8_t> state) {
  for (auto l : ts.init_cube)
    if ((state[l.latch] != 0) != l.value) return false;
  return true;
}

// Simulates the trace from its initial state; true when it starts in I and
// the bad literal holds in the final frame.
inline bool replay_trace(const TransitionSystem& ts, const Trace& trace) {
  if (trace.initial_state.size() != ts.num_latches() || trace.inputs.empty()) return false;
  if (!satisfies_init(ts, trace.initial_state)) return false;
  std::vector<std::uint8_t> state = trace.initial_state;
  for (std::size_t t = 0; t < trace.inputs.size(); ++t) {
    if (trace.inputs[t].size() != ts.num_inputs()) return false;
    auto vals = evaluate(ts.aig, trace.inputs[t], state);
    if (t + 1 == trace.inputs.size()) return literal_value(vals, ts.bad);
    for (std::size_t i = 0; i < ts.num_latches(); ++i) state[i] = literal_value(vals, ts.next_fn[i]);
  }
  return false;
}

// AIGER witness format for a failed safety property.
inline std::string format_witness(const Trace& trace, std::size_t bad_index = 0) {
  std::string out = "1\nb" + std::to_string(bad_index) + "\n";
  for (auto v : trace.initial_state) out += v ? '1' : '0';
  out += '\n';
  for (const auto& in : trace.inputs) {
    for (auto v : in) out += v ? '1' : '0';
    out += '\n';
  }
  return out + ".\n";
}

}  // namespace legend
