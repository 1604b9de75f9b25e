#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace legend {

// A literal over a state variable. `latch` is the 0-based latch ordinal of
// the transition system; `value` is the polarity (true: latch = 1).
struct Literal {
  std::uint32_t latch = 0;
  bool value = true;

  constexpr Literal operator~() const noexcept { return {latch, !value}; }
  constexpr std::uint32_t code() const noexcept { return 2 * latch + (value ? 0u : 1u); }

  // Signed, 1-based ordinal as used in clause and CTI files.
  constexpr long long signed_ordinal() const noexcept {
    return value ? static_cast<long long>(latch) + 1 : -(static_cast<long long>(latch) + 1);
  }
  static Literal from_signed_ordinal(long long v) {
    if (v == 0) throw std::invalid_argument("literal ordinal 0 is not allowed");
    return v > 0 ? Literal{static_cast<std::uint32_t>(v - 1), true}
                 : Literal{static_cast<std::uint32_t>(-v - 1), false};
  }

  friend constexpr bool operator==(Literal, Literal) = default;
  friend constexpr auto operator<=>(Literal a, Literal b) noexcept {
    return a.code() <=> b.code();
  }
};

namespace detail {

// Sorted, duplicate-free literal set; at most one polarity per latch.
class LiteralSet {
 public:
  LiteralSet() = default;

  explicit LiteralSet(std::vector<Literal> lits) : lits_(std::move(lits)) {
    std::sort(lits_.begin(), lits_.end());
    lits_.erase(std::unique(lits_.begin(), lits_.end()), lits_.end());
    for (std::size_t i = 1; i < lits_.size(); ++i)
      if (lits_[i].latch == lits_[i - 1].latch)
        throw std::invalid_argument("latch " + std::to_string(lits_[i].latch) +
                                    " appears with both polarities");
  }

  std::span<const Literal> literals() const noexcept { return lits_; }
  std::size_t size() const noexcept { return lits_.size(); }
  bool empty() const noexcept { return lits_.empty(); }
  auto begin() const noexcept { return lits_.begin(); }
  auto end() const noexcept { return lits_.end(); }
  const Literal& operator[](std::size_t i) const { return lits_[i]; }

  bool contains(Literal l) const noexcept {
    return std::binary_search(lits_.begin(), lits_.end(), l);
  }
  bool subset_of(const LiteralSet& other) const noexcept {
    return std::includes(other.lits_.begin(), other.lits_.end(), lits_.begin(), lits_.end());
  }

  LiteralSet without(std::size_t index) const {
    LiteralSet r;
    r.lits_.reserve(lits_.size() - 1);
    for (std::size_t i = 0; i < lits_.size(); ++i)
      if (i != index) r.lits_.push_back(lits_[i]);
    return r;
  }

  LiteralSet negated() const {
    LiteralSet r;
    r.lits_.reserve(lits_.size());
    for (auto l : lits_) r.lits_.push_back(~l);
    return r;
  }

  friend bool operator==(const LiteralSet&, const LiteralSet&) = default;
  friend auto operator<=>(const LiteralSet& a, const LiteralSet& b) {
    return std::lexicographical_compare_three_way(a.lits_.begin(), a.lits_.end(),
                                                  b.lits_.begin(), b.lits_.end());
  }

 private:
  std::vector<Literal> lits_;
};

}  // namespace detail

class Clause;

// Conjunction of literals.
class Cube : public detail::LiteralSet {
 public:
  Cube() = default;
  explicit Cube(std::vector<Literal> lits) : LiteralSet(std::move(lits)) {}
  Cube(std::initializer_list<Literal> lits) : LiteralSet(std::vector<Literal>(lits)) {}

  Cube without(std::size_t index) const { return Cube(LiteralSet::without(index)); }

  // True when some assignment satisfies both cubes.
  bool intersects(const Cube& other) const noexcept {
    auto a = begin(), b = other.begin();
    while (a != end() && b != other.end()) {
      if (a->latch < b->latch) ++a;
      else if (b->latch < a->latch) ++b;
      else {
        if (a->value != b->value) return false;
        ++a, ++b;
      }
    }
    return true;
  }

  friend bool operator==(const Cube&, const Cube&) = default;

 private:
  friend class Clause;
  friend Cube negate(const Clause&);
  explicit Cube(LiteralSet s) : LiteralSet(std::move(s)) {}
};

// Disjunction of literals.
class Clause : public detail::LiteralSet {
 public:
  Clause() = default;
  explicit Clause(std::vector<Literal> lits) : LiteralSet(std::move(lits)) {}
  Clause(std::initializer_list<Literal> lits) : LiteralSet(std::vector<Literal>(lits)) {}

  friend bool operator==(const Clause&, const Clause&) = default;

 private:
  friend Clause negate(const Cube&);
  explicit Clause(LiteralSet s) : LiteralSet(std::move(s)) {}
};

inline Clause negate(const Cube& c) { return Clause(c.negated()); }
inline Cube negate(const Clause& c) { return Cube(c.negated()); }

inline std::ostream& operator<<(std::ostream& os, const detail::LiteralSet& s) {
  os << '{';
  bool first = true;
  for (auto l : s) {
    os << (first ? "" : " ") << l.signed_ordinal();
    first = false;
  }
  return os << '}';
}

}  // namespace legend
