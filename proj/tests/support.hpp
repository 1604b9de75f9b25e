#pragma once

// Test-only circuits and brute-force oracles. The evaluator here is written
// independently of legend::evaluate so that oracle and implementation do not
// share a code path.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "legend/aig_builder.hpp"
#include "legend/aiger.hpp"
#include "legend/flip_sim.hpp"
#include "legend/cube.hpp"
#include "legend/rng.hpp"

namespace legend::fixtures {

// Single latch with next = !l, bad = l.
inline Aig toggle_circuit(LatchInit init = LatchInit::zero) {
  AigBuilder b;
  auto l = b.latch(init);
  b.set_next(l, aig_not(l));
  b.output(l);
  return b.build();
}

// next = l.
inline Aig frozen_circuit(LatchInit init = LatchInit::zero) {
  AigBuilder b;
  auto l = b.latch(init);
  b.set_next(l, l);
  b.output(l);
  return b.build();
}

// Free-running n-bit binary counter from 0, bad when the count equals `target`.
inline Aig counter_circuit(unsigned bits, unsigned target) {
  AigBuilder b;
  std::vector<AigLit> q;
  for (unsigned i = 0; i < bits; ++i) q.push_back(b.latch());
  AigLit carry = aig_true;
  for (unsigned i = 0; i < bits; ++i) {
    b.set_next(q[i], b.xor_(q[i], carry));
    carry = b.and_(carry, q[i]);
  }
  std::vector<AigLit> eq;
  for (unsigned i = 0; i < bits; ++i) eq.push_back((target >> i) & 1 ? q[i] : aig_not(q[i]));
  b.output(b.and_all(eq));
  return b.build();
}

// Safe, with exactly four CTIs: from an even-parity state all latches jump to
// 1 (bad = all ones); odd-parity states hold. Starts at q0 = 1.
inline Aig parity_trap_circuit() {
  AigBuilder b;
  auto q0 = b.latch(LatchInit::one), q1 = b.latch(), q2 = b.latch();
  auto even = aig_not(b.xor_(b.xor_(q0, q1), q2));
  for (auto q : {q0, q1, q2}) b.set_next(q, b.or_(even, q));
  b.output(b.and_all({q0, q1, q2}));
  return b.build();
}

// k-bit counter that advances when its input is high and wraps from m-1 to 0;
// bad = all ones, unreachable for m < 2^k - 1. Returns the circuit together
// with an inductive invariant encoding count <= m-1.
struct CircuitWithInvariant {
  Aig aig;
  std::vector<Clause> invariant;
};

inline CircuitWithInvariant modular_counter(unsigned bits, unsigned modulus) {
  AigBuilder b;
  std::vector<AigLit> q;
  for (unsigned i = 0; i < bits; ++i) q.push_back(b.latch());
  const AigLit en = b.input();
  const unsigned top = modulus - 1;
  std::vector<AigLit> at_top;
  for (unsigned i = 0; i < bits; ++i) at_top.push_back((top >> i) & 1 ? q[i] : aig_not(q[i]));
  const AigLit wrap = b.and_(b.and_all(at_top), en);
  AigLit carry = en;
  for (unsigned i = 0; i < bits; ++i) {
    b.set_next(q[i], b.and_(aig_not(wrap), b.xor_(q[i], carry)));
    carry = b.and_(carry, q[i]);
  }
  b.output(b.and_all(q));

  // count <= top: for every 0 bit of top, that bit set while all higher 1 bits
  // of top are set is excluded.
  std::vector<Clause> inv;
  for (unsigned i = 0; i < bits; ++i) {
    if ((top >> i) & 1) continue;
    std::vector<Literal> lits{{i, false}};
    for (unsigned j = i + 1; j < bits; ++j)
      if ((top >> j) & 1) lits.push_back({j, false});
    inv.push_back(Clause(std::move(lits)));
  }
  return {b.build(), std::move(inv)};
}

// Evaluates literal `root` bottom-up by recursion over the gate list.
class Evaluator {
 public:
  explicit Evaluator(const Aig& aig) : aig_(aig) {
    for (std::size_t i = 0; i < aig.ands.size(); ++i) gate_of_[aig_var(aig.ands[i].lhs)] = i;
    for (std::size_t i = 0; i < aig.inputs.size(); ++i) input_of_[aig_var(aig.inputs[i])] = i;
    for (std::size_t i = 0; i < aig.latches.size(); ++i) latch_of_[aig_var(aig.latches[i].lit)] = i;
  }

  bool eval(AigLit root, const std::vector<bool>& latches, const std::vector<bool>& inputs) const {
    std::unordered_map<AigVar, bool> memo;
    std::function<bool(AigVar)> var = [&](AigVar v) -> bool {
      if (v == 0) return false;
      if (auto it = memo.find(v); it != memo.end()) return it->second;
      bool r;
      if (auto it = input_of_.find(v); it != input_of_.end()) r = inputs[it->second];
      else if (auto it2 = latch_of_.find(v); it2 != latch_of_.end()) r = latches[it2->second];
      else {
        const auto& g = aig_.ands[gate_of_.at(v)];
        r = (var(aig_var(g.rhs0)) != aig_sign(g.rhs0)) && (var(aig_var(g.rhs1)) != aig_sign(g.rhs1));
      }
      memo[v] = r;
      return r;
    };
    return var(aig_var(root)) != aig_sign(root);
  }

  std::vector<bool> next_state(const std::vector<bool>& latches, const std::vector<bool>& inputs) const {
    std::vector<bool> out(aig_.latches.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = eval(aig_.latches[i].next, latches, inputs);
    return out;
  }

 private:
  const Aig& aig_;
  std::unordered_map<AigVar, std::size_t> gate_of_, input_of_, latch_of_;
};

inline std::vector<bool> bits_of(std::uint64_t x, std::size_t n) {
  std::vector<bool> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = (x >> i) & 1;
  return v;
}
inline std::uint64_t pack(const std::vector<bool>& v) {
  std::uint64_t x = 0;
  for (std::size_t i = 0; i < v.size(); ++i) x |= static_cast<std::uint64_t>(v[i]) << i;
  return x;
}

inline bool in_init(const Aig& aig, std::uint64_t state) {
  for (std::size_t i = 0; i < aig.latches.size(); ++i) {
    bool v = (state >> i) & 1;
    if (aig.latches[i].init == LatchInit::zero && v) return false;
    if (aig.latches[i].init == LatchInit::one && !v) return false;
  }
  return true;
}

struct ReachabilityVerdict {
  bool unsafe = false;
  std::size_t depth = 0;  // shortest number of transitions to a bad state
  std::vector<std::uint8_t> reachable;  // per packed state
};

// Explicit-state BFS from all initial states; bad is checked under every input.
inline ReachabilityVerdict bfs_oracle(const Aig& aig, AigLit bad) {
  const std::size_t L = aig.latches.size(), I = aig.inputs.size();
  const std::uint64_t states = 1ull << L, inputs = 1ull << I;
  Evaluator ev(aig);
  ReachabilityVerdict out;
  out.reachable.assign(states, 0);
  std::vector<std::size_t> dist(states, 0);
  std::deque<std::uint64_t> queue;
  for (std::uint64_t s = 0; s < states; ++s)
    if (in_init(aig, s)) {
      out.reachable[s] = 1;
      queue.push_back(s);
    }
  bool found = false;
  while (!queue.empty()) {
    auto s = queue.front();
    queue.pop_front();
    auto sv = bits_of(s, L);
    for (std::uint64_t x = 0; x < inputs; ++x) {
      auto xv = bits_of(x, I);
      if (!found && ev.eval(bad, sv, xv)) {
        out.unsafe = found = true;
        out.depth = dist[s];
      }
      auto n = pack(ev.next_state(sv, xv));
      if (!out.reachable[n]) {
        out.reachable[n] = 1;
        dist[n] = dist[s] + 1;
        queue.push_back(n);
      }
    }
  }
  return out;
}

struct RandomAigShape {
  unsigned latches = 4;
  unsigned inputs = 2;
  unsigned gates = 20;
  bool allow_uninitialized = true;
};

// Random sequential circuit; the first output is a random gate.
inline Aig random_aig(Xorshift64& rng, const RandomAigShape& shape) {
  AigBuilder b;
  std::vector<AigLit> pool;
  std::vector<AigLit> latches;
  for (unsigned i = 0; i < shape.inputs; ++i) pool.push_back(b.input());
  for (unsigned i = 0; i < shape.latches; ++i) {
    LatchInit init = LatchInit::zero;
    auto r = rng.below(10);
    if (r < 3) init = LatchInit::one;
    else if (r == 3 && shape.allow_uninitialized) init = LatchInit::undefined;
    latches.push_back(b.latch(init));
    pool.push_back(latches.back());
  }
  auto pick = [&] { return pool[rng.below(pool.size())] ^ static_cast<AigLit>(rng.coin()); };
  std::vector<AigLit> gates;
  for (unsigned i = 0; i < shape.gates; ++i) {
    auto g = b.and_(pick(), pick());
    if (aig_var(g) != 0) {
      pool.push_back(aig_lit(aig_var(g)));
      gates.push_back(g);
    }
  }
  for (auto l : latches) b.set_next(l, pick());
  // Bad: a conjunction of two late signals, so that properties are neither
  // trivially true nor almost always false.
  AigLit bad = b.and_(pick(), pick());
  if (aig_var(bad) == 0 && !gates.empty()) bad = gates.back();
  b.output(bad);
  return b.build();
}

inline bool satisfied_by(const std::vector<bool>& s, const Clause& c) {
  for (auto l : c)
    if (s[l.latch] == l.value) return true;
  return false;
}

struct BruteSanity {
  bool initiation = true;
  bool one_step = true;
};

// Both sanity conditions by enumeration over initial states and inputs.
inline BruteSanity brute_sanity(const Aig& aig, const Clause& c) {
  const std::size_t L = aig.latches.size(), I = aig.inputs.size();
  Evaluator ev(aig);
  BruteSanity v;
  for (std::uint64_t s = 0; s < (1ull << L); ++s) {
    if (!in_init(aig, s)) continue;
    auto sv = bits_of(s, L);
    if (!satisfied_by(sv, c)) v.initiation = false;
    for (std::uint64_t x = 0; x < (1ull << I); ++x)
      if (!satisfied_by(ev.next_state(sv, bits_of(x, I)), c)) v.one_step = false;
  }
  return v;
}

// Lane-by-lane flip-rate reference: the same bit streams, one boolean state
// per lane.
inline std::vector<double> scalar_flip_rates(const Aig& aig, std::size_t cycles, std::uint64_t seed) {
  Evaluator ev(aig);
  const std::size_t L = aig.latches.size(), I = aig.inputs.size();
  std::vector<std::uint64_t> flips(L, 0);
  for (std::size_t j = 0; j < kSimLanes; ++j) {
    LaneBits bits(seed, j);
    std::vector<bool> s(L);
    for (std::size_t i = 0; i < L; ++i) s[i] = aig.latches[i].init == LatchInit::one;
    for (std::size_t i = 0; i < L; ++i)
      if (aig.latches[i].init == LatchInit::undefined) s[i] = bits.next();
    for (std::size_t t = 0; t < cycles; ++t) {
      std::vector<bool> in(I);
      for (std::size_t k = 0; k < I; ++k) in[k] = bits.next();
      auto n = ev.next_state(s, in);
      for (std::size_t i = 0; i < L; ++i) flips[i] += n[i] != s[i];
      s = n;
    }
  }
  std::vector<double> r(L);
  for (std::size_t i = 0; i < L; ++i) r[i] = static_cast<double>(flips[i]) / (double(cycles) * kSimLanes);
  return r;
}

}  // namespace legend::fixtures
