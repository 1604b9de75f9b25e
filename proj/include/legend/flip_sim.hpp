#pragma once

// Random simulation measuring how often each latch changes value.
//
// 64 independent trajectories run side by side, one per bit of a machine
// word. Lane j draws its random bits from its own generator seeded with
// mix_seed(seed, j): first one bit per uninitialized latch (latch order), then
// per cycle one bit per input (input order). A scalar run of a single lane
// therefore reproduces that lane of the packed run exactly.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "legend/aiger.hpp"
#include "legend/rng.hpp"

namespace legend {

inline constexpr std::size_t kSimLanes = 64;

struct FlipRates {
  std::vector<double> rate;  // per latch, in [0, 1]
  std::size_t cycles = 0;
  std::uint64_t seed = 0;
};

// Random bit source of one lane.
class LaneBits {
 public:
  LaneBits(std::uint64_t seed, std::size_t lane) : rng_(mix_seed(seed, lane)) {}
  bool next() noexcept { return rng_.coin(); }

 private:
  Xorshift64 rng_;
};

namespace detail {

inline std::vector<std::size_t> gate_order(const Aig& aig) {
  std::vector<std::size_t> order(aig.ands.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return aig.ands[a].lhs < aig.ands[b].lhs; });
  return order;
}

inline std::uint64_t word_of(const std::vector<std::uint64_t>& v, AigLit l) {
  std::uint64_t w = v[aig_var(l)];
  return aig_sign(l) ? ~w : w;
}

}  // namespace detail

// Packed simulator; step() advances all lanes by one cycle.
class PackedSimulator {
 public:
  PackedSimulator(const Aig& aig, std::uint64_t seed) : aig_(aig), order_(detail::gate_order(aig)) {
    lanes_.reserve(kSimLanes);
    for (std::size_t j = 0; j < kSimLanes; ++j) lanes_.emplace_back(seed, j);
    state_.assign(aig.latches.size(), 0);
    for (std::size_t i = 0; i < aig.latches.size(); ++i)
      if (aig.latches[i].init == LatchInit::one) state_[i] = ~std::uint64_t{0};
    for (std::size_t j = 0; j < kSimLanes; ++j)
      for (std::size_t i = 0; i < aig.latches.size(); ++i)
        if (aig.latches[i].init == LatchInit::undefined && lanes_[j].next())
          state_[i] |= std::uint64_t{1} << j;
    vals_.assign(aig.max_var + 1, 0);
  }

  const std::vector<std::uint64_t>& state() const noexcept { return state_; }

  void step() {
    std::vector<std::uint64_t> in(aig_.inputs.size(), 0);
    for (std::size_t j = 0; j < kSimLanes; ++j)
      for (auto& w : in)
        if (lanes_[j].next()) w |= std::uint64_t{1} << j;
    vals_[0] = 0;
    for (std::size_t i = 0; i < in.size(); ++i) vals_[aig_var(aig_.inputs[i])] = in[i];
    for (std::size_t i = 0; i < state_.size(); ++i) vals_[aig_var(aig_.latches[i].lit)] = state_[i];
    for (auto gi : order_) {
      const auto& g = aig_.ands[gi];
      vals_[aig_var(g.lhs)] = detail::word_of(vals_, g.rhs0) & detail::word_of(vals_, g.rhs1);
    }
    for (std::size_t i = 0; i < state_.size(); ++i) state_[i] = detail::word_of(vals_, aig_.latches[i].next);
  }

 private:
  const Aig& aig_;
  std::vector<std::size_t> order_;
  std::vector<LaneBits> lanes_;
  std::vector<std::uint64_t> state_;
  std::vector<std::uint64_t> vals_;
};

// Flip rate per latch, averaged over cycles and lanes.
inline FlipRates compute_flip_rates(const Aig& aig, std::size_t cycles, std::uint64_t seed) {
  if (cycles == 0) throw std::invalid_argument("flip-rate simulation needs at least one cycle");
  PackedSimulator sim(aig, seed);
  std::vector<std::uint64_t> flips(aig.latches.size(), 0);
  for (std::size_t t = 0; t < cycles; ++t) {
    auto prev = sim.state();
    sim.step();
    for (std::size_t i = 0; i < flips.size(); ++i)
      flips[i] += static_cast<std::uint64_t>(std::popcount(prev[i] ^ sim.state()[i]));
  }
  FlipRates r;
  r.cycles = cycles;
  r.seed = seed;
  r.rate.resize(flips.size());
  const double denom = static_cast<double>(cycles) * kSimLanes;
  for (std::size_t i = 0; i < flips.size(); ++i) r.rate[i] = static_cast<double>(flips[i]) / denom;
  return r;
}

inline void write_flip_csv(std::ostream& os, const FlipRates& r) {
  os << "latch,rate\n";
  auto old = os.precision(17);
  for (std::size_t i = 0; i < r.rate.size(); ++i) os << i << ',' << r.rate[i] << '\n';
  os.precision(old);
}

}  // namespace legend
