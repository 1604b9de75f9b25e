#pragma once

// AIGER 1.0 / 1.9 reader and writer (ASCII "aag" and binary "aig"), plus the
// extraction of a single-property safety problem <I, T, P>.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "legend/cube.hpp"

namespace legend {

using AigLit = std::uint32_t;
using AigVar = std::uint32_t;

constexpr AigLit aig_false = 0;
constexpr AigLit aig_true = 1;
constexpr AigVar aig_var(AigLit l) noexcept { return l >> 1; }
constexpr bool aig_sign(AigLit l) noexcept { return (l & 1u) != 0; }
constexpr AigLit aig_not(AigLit l) noexcept { return l ^ 1u; }
constexpr AigLit aig_lit(AigVar v, bool sign = false) noexcept { return 2 * v + (sign ? 1u : 0u); }

enum class LatchInit : std::uint8_t { zero, one, undefined };

struct AigLatch {
  AigLit lit = 0;
  AigLit next = 0;
  LatchInit init = LatchInit::zero;
  friend bool operator==(const AigLatch&, const AigLatch&) = default;
};

struct AigAnd {
  AigLit lhs = 0;
  AigLit rhs0 = 0;
  AigLit rhs1 = 0;
  friend bool operator==(const AigAnd&, const AigAnd&) = default;
};

struct AigSymbol {
  char kind = 'i';  // one of i, l, o, b
  std::uint32_t index = 0;
  std::string name;
  friend bool operator==(const AigSymbol&, const AigSymbol&) = default;
};

struct Aig {
  std::uint32_t max_var = 0;
  std::vector<AigLit> inputs;
  std::vector<AigLatch> latches;
  std::vector<AigLit> outputs;
  std::vector<AigLit> bads;
  std::vector<AigAnd> ands;
  std::vector<AigSymbol> symbols;
  std::string comment;

  friend bool operator==(const Aig&, const Aig&) = default;

  // Number of property candidates: bad literals when present, outputs otherwise.
  std::size_t num_properties() const noexcept {
    return bads.empty() ? outputs.size() : bads.size();
  }
  AigLit property_literal(std::size_t index) const {
    if (index >= num_properties())
      throw std::out_of_range("bad index " + std::to_string(index) + " out of range (" +
                              std::to_string(num_properties()) + " properties)");
    return bads.empty() ? outputs[index] : bads[index];
  }
};

class AigerError : public std::runtime_error {
 public:
  AigerError(const std::string& what, std::size_t line, std::size_t offset)
      : std::runtime_error("line " + std::to_string(line) + ", byte " + std::to_string(offset) +
                           ": " + what),
        line_(line),
        offset_(offset) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

namespace detail {

class AigerReader {
 public:
  explicit AigerReader(std::string_view data) : data_(data) {}

  Aig read() {
    Aig aig;
    std::string magic = word();
    bool binary;
    if (magic == "aag") binary = false;
    else if (magic == "aig") binary = true;
    else fail("expected 'aag' or 'aig' header, got '" + magic + "'");

    std::vector<std::uint64_t> h;
    while (!at_eol()) {
      skip_spaces();
      if (at_eol()) break;
      h.push_back(number());
    }
    if (h.size() < 5 || h.size() > 9) fail("header must have 5 to 9 counts");
    h.resize(9, 0);
    if (h[6] || h[7] || h[8])
      fail("constraint, justice and fairness sections are not supported");
    end_line();

    const auto M = h[0], I = h[1], L = h[2], O = h[3], A = h[4], B = h[5];
    if (M > 0x3FFFFFFFull) fail("maximum variable index too large");
    if (binary && M != I + L + A) fail("binary header requires M = I + L + A");
    if (I + L + A > M) fail("M is smaller than I + L + A");
    aig.max_var = static_cast<std::uint32_t>(M);
    max_lit_ = 2 * aig.max_var + 1;

    aig.inputs.reserve(I);
    for (std::uint64_t i = 0; i < I; ++i) {
      if (binary) {
        aig.inputs.push_back(static_cast<AigLit>(2 * (i + 1)));
      } else {
        aig.inputs.push_back(literal());
        end_line();
      }
    }
    aig.latches.reserve(L);
    for (std::uint64_t i = 0; i < L; ++i) {
      AigLatch latch;
      if (binary) latch.lit = static_cast<AigLit>(2 * (I + i + 1));
      else latch.lit = literal();
      latch.next = literal();
      skip_spaces();
      if (!at_eol()) {
        std::size_t where = pos_;
        auto init = number();
        if (init == 0) latch.init = LatchInit::zero;
        else if (init == 1) latch.init = LatchInit::one;
        else if (init == latch.lit) latch.init = LatchInit::undefined;
        else fail("invalid latch reset value", where);
      }
      end_line();
      aig.latches.push_back(latch);
    }
    for (std::uint64_t i = 0; i < O; ++i) {
      aig.outputs.push_back(literal());
      end_line();
    }
    for (std::uint64_t i = 0; i < B; ++i) {
      aig.bads.push_back(literal());
      end_line();
    }
    aig.ands.reserve(A);
    for (std::uint64_t i = 0; i < A; ++i) {
      AigAnd g;
      if (binary) {
        g.lhs = static_cast<AigLit>(2 * (I + L + i + 1));
        std::size_t where = pos_;
        auto d0 = varint();
        auto d1 = varint();
        if (d0 == 0 || d0 > g.lhs) fail("non-monotone binary AND encoding", where);
        g.rhs0 = static_cast<AigLit>(g.lhs - d0);
        if (d1 > g.rhs0) fail("non-monotone binary AND encoding", where);
        g.rhs1 = static_cast<AigLit>(g.rhs0 - d1);
      } else {
        g.lhs = literal();
        g.rhs0 = literal();
        g.rhs1 = literal();
        end_line();
      }
      aig.ands.push_back(g);
    }
    read_symbols(aig);
    validate(aig);
    return aig;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { fail(msg, pos_); }
  [[noreturn]] void fail(const std::string& msg, std::size_t where) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < where && i < data_.size(); ++i)
      if (data_[i] == '\n') ++line;
    throw AigerError(msg, line, where);
  }

  bool at_end() const { return pos_ >= data_.size(); }
  bool at_eol() const { return at_end() || data_[pos_] == '\n'; }
  void skip_spaces() {
    while (!at_end() && (data_[pos_] == ' ' || data_[pos_] == '\t' || data_[pos_] == '\r'))
      ++pos_;
  }
  void end_line() {
    skip_spaces();
    if (at_end()) return;
    if (data_[pos_] != '\n') fail("unexpected trailing characters");
    ++pos_;
  }
  std::string word() {
    skip_spaces();
    std::size_t start = pos_;
    while (!at_end() && data_[pos_] != ' ' && data_[pos_] != '\n' && data_[pos_] != '\r')
      ++pos_;
    return std::string(data_.substr(start, pos_ - start));
  }
  std::uint64_t number() {
    skip_spaces();
    if (at_end() || data_[pos_] < '0' || data_[pos_] > '9') fail("expected a number");
    std::uint64_t v = 0;
    while (!at_end() && data_[pos_] >= '0' && data_[pos_] <= '9') {
      v = v * 10 + static_cast<std::uint64_t>(data_[pos_] - '0');
      if (v > 0xFFFFFFFFull) fail("number too large");
      ++pos_;
    }
    return v;
  }
  AigLit literal() {
    std::size_t where = pos_;
    auto v = number();
    if (v > max_lit_) fail("literal " + std::to_string(v) + " out of range", where);
    return static_cast<AigLit>(v);
  }
  std::uint64_t varint() {
    std::uint64_t x = 0;
    unsigned shift = 0;
    for (;;) {
      if (at_end()) fail("truncated binary AND section");
      auto ch = static_cast<unsigned char>(data_[pos_++]);
      x |= static_cast<std::uint64_t>(ch & 0x7F) << shift;
      if (!(ch & 0x80)) break;
      shift += 7;
      if (shift > 35) fail("varint too long");
    }
    return x;
  }

  void read_symbols(Aig& aig) {
    while (!at_end()) {
      char kind = data_[pos_];
      if (kind == 'c') {
        ++pos_;
        end_line();
        aig.comment = std::string(data_.substr(pos_));
        pos_ = data_.size();
        return;
      }
      if (kind == '\n') {
        ++pos_;
        continue;
      }
      if (kind != 'i' && kind != 'l' && kind != 'o' && kind != 'b')
        fail(std::string("unexpected symbol table entry '") + kind + "'");
      ++pos_;
      std::size_t where = pos_;
      auto index = number();
      std::size_t limit = kind == 'i' ? aig.inputs.size()
                          : kind == 'l' ? aig.latches.size()
                          : kind == 'o' ? aig.outputs.size()
                                        : aig.bads.size();
      if (index >= limit) fail("symbol index out of range", where);
      if (at_end() || data_[pos_] != ' ') fail("expected space before symbol name");
      ++pos_;
      std::size_t start = pos_;
      while (!at_end() && data_[pos_] != '\n') ++pos_;
      aig.symbols.push_back({kind, static_cast<std::uint32_t>(index),
                             std::string(data_.substr(start, pos_ - start))});
      if (!at_end()) ++pos_;
    }
  }

  void validate(const Aig& aig) const {
    std::vector<std::uint8_t> defined(aig.max_var + 1, 0);
    auto define = [&](AigLit l, const char* what) {
      if (aig_sign(l) || l == 0) fail(std::string(what) + " literal must be even and non-zero", pos_);
      if (defined[aig_var(l)]) fail("variable " + std::to_string(aig_var(l)) + " defined twice", pos_);
      defined[aig_var(l)] = 1;
    };
    for (auto l : aig.inputs) define(l, "input");
    for (const auto& l : aig.latches) define(l.lit, "latch");
    for (const auto& g : aig.ands) {
      define(g.lhs, "AND");
      if (aig_var(g.rhs0) >= aig_var(g.lhs) || aig_var(g.rhs1) >= aig_var(g.lhs))
        fail("AND " + std::to_string(g.lhs) + " is not in topological order", pos_);
    }
    auto check_used = [&](AigLit l) {
      if (aig_var(l) != 0 && !defined[aig_var(l)])
        fail("literal " + std::to_string(l) + " is used but never defined", pos_);
    };
    for (const auto& l : aig.latches) check_used(l.next);
    for (auto l : aig.outputs) check_used(l);
    for (auto l : aig.bads) check_used(l);
    for (const auto& g : aig.ands) check_used(g.rhs0), check_used(g.rhs1);
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  std::uint64_t max_lit_ = 1;
};

inline void write_varint(std::string& out, std::uint32_t x) {
  while (x & ~0x7Fu) {
    out.push_back(static_cast<char>((x & 0x7F) | 0x80));
    x >>= 7;
  }
  out.push_back(static_cast<char>(x));
}

inline std::string header(const Aig& a, const char* magic) {
  std::string h = std::string(magic) + " " + std::to_string(a.max_var) + " " +
                  std::to_string(a.inputs.size()) + " " + std::to_string(a.latches.size()) + " " +
                  std::to_string(a.outputs.size()) + " " + std::to_string(a.ands.size());
  if (!a.bads.empty()) h += " " + std::to_string(a.bads.size());
  return h + "\n";
}

inline std::string init_suffix(const AigLatch& l) {
  switch (l.init) {
    case LatchInit::zero: return "";
    case LatchInit::one: return " 1";
    case LatchInit::undefined: return " " + std::to_string(l.lit);
  }
  return "";
}

inline void write_trailer(std::string& out, const Aig& a) {
  for (const auto& s : a.symbols)
    out += s.kind + std::to_string(s.index) + " " + s.name + "\n";
  if (!a.comment.empty()) out += "c\n" + a.comment;
}

}  // namespace detail

inline Aig parse_aiger(std::string_view bytes) { return detail::AigerReader(bytes).read(); }

inline Aig read_aiger_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_aiger(data);
}

inline std::string write_ascii(const Aig& a) {
  std::string out = detail::header(a, "aag");
  for (auto l : a.inputs) out += std::to_string(l) + "\n";
  for (const auto& l : a.latches)
    out += std::to_string(l.lit) + " " + std::to_string(l.next) + detail::init_suffix(l) + "\n";
  for (auto l : a.outputs) out += std::to_string(l) + "\n";
  for (auto l : a.bads) out += std::to_string(l) + "\n";
  for (const auto& g : a.ands)
    out += std::to_string(g.lhs) + " " + std::to_string(g.rhs0) + " " + std::to_string(g.rhs1) + "\n";
  detail::write_trailer(out, a);
  return out;
}

// True when the variable numbering matches what the binary format implies:
// inputs, then latches, then ANDs, consecutively from 1, with rhs0 >= rhs1.
inline bool has_binary_numbering(const Aig& a) {
  std::uint32_t v = 1;
  for (auto l : a.inputs)
    if (l != aig_lit(v++)) return false;
  for (const auto& l : a.latches)
    if (l.lit != aig_lit(v++)) return false;
  for (const auto& g : a.ands)
    if (g.lhs != aig_lit(v++) || g.rhs0 < g.rhs1) return false;
  return a.max_var == v - 1;
}

inline std::string write_binary(const Aig& a) {
  if (!has_binary_numbering(a))
    throw std::invalid_argument("AIG numbering is not compatible with the binary AIGER format");
  std::string out = detail::header(a, "aig");
  for (const auto& l : a.latches) out += std::to_string(l.next) + detail::init_suffix(l) + "\n";
  for (auto l : a.outputs) out += std::to_string(l) + "\n";
  for (auto l : a.bads) out += std::to_string(l) + "\n";
  for (const auto& g : a.ands) {
    detail::write_varint(out, g.lhs - g.rhs0);
    detail::write_varint(out, g.rhs0 - g.rhs1);
  }
  detail::write_trailer(out, a);
  return out;
}

// Single-property safety problem over an AIG. Latches are addressed by their
// 0-based ordinal in `aig.latches`.
struct TransitionSystem {
  Aig aig;
  std::vector<AigVar> latch_vars;
  std::vector<AigLit> next_fn;  // indexed by latch ordinal
  Cube init_cube;
  AigLit bad = aig_false;
  AigLit property() const noexcept { return aig_not(bad); }

  std::size_t num_latches() const noexcept { return latch_vars.size(); }
  std::size_t num_inputs() const noexcept { return aig.inputs.size(); }
};

inline TransitionSystem to_transition_system(Aig aig, std::size_t bad_index = 0) {
  TransitionSystem ts;
  ts.bad = aig.property_literal(bad_index);
  std::vector<Literal> init;
  for (std::uint32_t i = 0; i < aig.latches.size(); ++i) {
    const auto& l = aig.latches[i];
    ts.latch_vars.push_back(aig_var(l.lit));
    ts.next_fn.push_back(l.next);
    if (l.init == LatchInit::zero) init.push_back({i, false});
    else if (l.init == LatchInit::one) init.push_back({i, true});
  }
  ts.init_cube = Cube(std::move(init));
  ts.aig = std::move(aig);
  return ts;
}

// Combinational evaluation: values indexed by AIG variable, given input and
// latch values in declaration order.
inline std::vector<std::uint8_t> evaluate(const Aig& aig, std::span<const std::uint8_t> inputs,
                                          std::span<const std::uint8_t> latches) {
  std::vector<std::uint8_t> val(aig.max_var + 1, 0);
  for (std::size_t i = 0; i < aig.inputs.size(); ++i) val[aig_var(aig.inputs[i])] = inputs[i] & 1;
  for (std::size_t i = 0; i < aig.latches.size(); ++i)
    val[aig_var(aig.latches[i].lit)] = latches[i] & 1;
  auto lit = [&](AigLit l) -> std::uint8_t { return val[aig_var(l)] ^ (l & 1u); };
  auto eval_gate = [&](const AigAnd& g) { val[aig_var(g.lhs)] = lit(g.rhs0) & lit(g.rhs1); };
  auto by_lhs = [](const AigAnd& a, const AigAnd& b) { return a.lhs < b.lhs; };
  if (std::is_sorted(aig.ands.begin(), aig.ands.end(), by_lhs)) {
    for (const auto& g : aig.ands) eval_gate(g);
  } else {
    auto sorted = aig.ands;
    std::sort(sorted.begin(), sorted.end(), by_lhs);
    for (const auto& g : sorted) eval_gate(g);
  }
  return val;
}

inline bool literal_value(std::span<const std::uint8_t> values, AigLit l) {
  return (values[aig_var(l)] ^ (l & 1u)) != 0;
}

}  // namespace legend
