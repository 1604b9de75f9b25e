#pragma once

// Counterexamples to induction: states satisfying P with a successor in ~P,
// sampled from P & T & ~P' and shrunk with an input-fixed UNSAT core.

#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "legend/aiger.hpp"
#include "legend/cnf.hpp"
#include "legend/cube.hpp"
#include "legend/rng.hpp"
#include "legend/sat.hpp"

namespace legend {

struct CtiSample {
  Cube cube;        // minimized
  Cube full_state;  // the model state the cube was shrunk from
  // Input valuation of the witness: current frame first, then next frame.
  std::vector<std::uint8_t> inputs;
};

struct CtiOptions {
  std::uint64_t seed = 0;
  // Solver restart with reshuffled activities after this many samples.
  std::size_t restart_every = 64;
  // Models drawn per requested sample before giving up (duplicates after
  // minimization do not count as samples).
  std::size_t attempts_per_sample = 8;
};

namespace detail {

inline Cube state_cube(const std::vector<std::uint8_t>& state) {
  std::vector<Literal> lits;
  lits.reserve(state.size());
  for (std::size_t i = 0; i < state.size(); ++i)
    lits.push_back({static_cast<std::uint32_t>(i), state[i] != 0});
  return Cube(std::move(lits));
}

// Holds T with bad in the next frame guarded by an activation literal, for
// core-based shrinking under fixed inputs.
class CtiMinimizer {
 public:
  explicit CtiMinimizer(const TransitionSystem& ts) : ts_(ts), enc_(solver_, ts_) {
    enc_.encode_transition();
    act_ = sat::pos(solver_.new_var());
    solver_.add_clause({~act_, ~enc_.encode(ts_.bad, TimeFrame::next)});
  }

  Cube minimize(const Cube& full_state, std::span<const std::uint8_t> inputs) {
    const std::size_t ni = ts_.num_inputs();
    if (inputs.size() != 2 * ni) throw std::invalid_argument("CTI input valuation has the wrong width");
    std::vector<sat::Lit> a;
    for (auto l : full_state) a.push_back(enc_.lit(l));
    for (std::size_t i = 0; i < ni; ++i) a.push_back(enc_.input(i) ^ (inputs[i] == 0));
    for (std::size_t i = 0; i < ni; ++i) a.push_back(enc_.input(i, TimeFrame::next) ^ (inputs[ni + i] == 0));
    a.push_back(act_);
    if (solver_.solve(a) != sat::Result::Unsat)
      throw std::logic_error("CTI minimization query is satisfiable: state does not force a bad successor");
    auto core = solver_.core();
    std::vector<Literal> kept;
    std::size_t idx = 0;
    for (auto l : full_state) {
      if (std::binary_search(core.begin(), core.end(), a[idx])) kept.push_back(l);
      ++idx;
    }
    return Cube(std::move(kept));
  }

 private:
  const TransitionSystem& ts_;
  sat::Solver solver_;
  CnfEncoder enc_;
  sat::Lit act_;
};

}  // namespace detail

// Sub-cube of full_state that, under the given inputs, forces every successor
// into ~P. Throws std::logic_error if full_state does not.
inline Cube minimize_cti(const TransitionSystem& ts, const Cube& full_state,
                         std::span<const std::uint8_t> inputs) {
  detail::CtiMinimizer m(ts);
  return m.minimize(full_state, inputs);
}

// Up to n CTIs with pairwise-distinct minimized cubes. Each model's full state
// is blocked afterwards so later models differ.
inline std::vector<CtiSample> sample_ctis(const TransitionSystem& ts, std::size_t n,
                                          const CtiOptions& opts = {}) {
  if (n == 0) throw std::invalid_argument("sample_ctis needs n >= 1");
  std::vector<CtiSample> out;
  std::set<Cube> seen;
  std::vector<Cube> blocked;
  detail::CtiMinimizer minimizer(ts);

  std::unique_ptr<sat::Solver> solver;
  std::unique_ptr<CnfEncoder> enc;
  std::uint64_t restarts = 0;
  auto restart = [&] {
    enc.reset();
    solver = std::make_unique<sat::Solver>();
    enc = std::make_unique<CnfEncoder>(*solver, ts);
    enc->encode_transition();
    solver->add_clause({~enc->encode(ts.bad)});
    solver->add_clause({enc->encode(ts.bad, TimeFrame::next)});
    for (const auto& b : blocked) {
      std::vector<sat::Lit> c;
      for (auto l : b) c.push_back(~enc->lit(l));
      solver->add_clause(c);
    }
    solver->diversify(mix_seed(opts.seed, restarts++));
  };
  restart();

  const std::size_t ni = ts.num_inputs();
  std::size_t since_restart = 0;
  for (std::size_t attempt = 0; out.size() < n && attempt < n * opts.attempts_per_sample; ++attempt) {
    if (solver->solve() != sat::Result::Sat) break;
    std::vector<std::uint8_t> state(ts.num_latches()), inputs(2 * ni);
    for (std::size_t i = 0; i < state.size(); ++i) state[i] = solver->model_true(enc->latch(i));
    for (std::size_t i = 0; i < ni; ++i) {
      inputs[i] = solver->model_true(enc->input(i));
      inputs[ni + i] = solver->model_true(enc->input(i, TimeFrame::next));
    }
    Cube full = detail::state_cube(state);
    Cube cube = minimizer.minimize(full, inputs);

    std::vector<sat::Lit> block;
    for (auto l : full) block.push_back(~enc->lit(l));
    solver->add_clause(block);
    blocked.push_back(full);

    if (!seen.insert(cube).second) continue;
    out.push_back({std::move(cube), std::move(full), std::move(inputs)});
    if (++since_restart == opts.restart_every && out.size() < n) {
      since_restart = 0;
      restart();
    }
  }
  return out;
}

// One line per sample: signed latch ordinals of the minimized cube, "|", the
// input bits (current frame, then next frame; "-" when there are none).
inline void write_cti_pool(std::ostream& os, std::span<const CtiSample> ctis, std::size_t latches) {
  os << "# cti-pool v1 latches=" << latches << " samples=" << ctis.size() << '\n';
  for (const auto& s : ctis) {
    for (auto l : s.cube) os << l.signed_ordinal() << ' ';
    os << "| ";
    for (auto b : s.inputs) os << (b ? '1' : '0');
    if (s.inputs.empty()) os << '-';
    os << '\n';
  }
}

struct CtiPoolEntry {
  Cube cube;
  std::vector<std::uint8_t> inputs;
  std::string extra;  // trailing columns after the input bits, if any
};

inline std::vector<CtiPoolEntry> read_cti_pool(std::istream& in) {
  std::vector<CtiPoolEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto bar = line.find('|');
    if (bar == std::string::npos)
      throw std::runtime_error("CTI pool line " + std::to_string(lineno) + ": missing '|'");
    std::istringstream lits(line.substr(0, bar));
    std::vector<Literal> cube;
    long long v;
    while (lits >> v) cube.push_back(Literal::from_signed_ordinal(v));
    if (!lits.eof()) throw std::runtime_error("CTI pool line " + std::to_string(lineno) + ": bad literal");
    std::istringstream rest(line.substr(bar + 1));
    std::string bits;
    CtiPoolEntry e{Cube(std::move(cube)), {}, {}};
    if (rest >> bits && bits != "-") {
      for (char c : bits) {
        if (c != '0' && c != '1')
          throw std::runtime_error("CTI pool line " + std::to_string(lineno) + ": bad input bit");
        e.inputs.push_back(c == '1');
      }
    }
    std::getline(rest >> std::ws, e.extra);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace legend
