#pragma once

// Programmatic AIG construction. Literals handed out before build() are
// builder-internal; build() renumbers everything into binary-AIGER order
// (inputs, latches, then gates in creation order).

#include <stdexcept>
#include <string>
#include <vector>

#include "legend/aiger.hpp"

namespace legend {

class AigBuilder {
 public:
  AigLit input(std::string name = {}) {
    auto v = add(Kind::input);
    if (!name.empty()) names_.push_back({'i', v, std::move(name)});
    return aig_lit(v);
  }

  AigLit latch(LatchInit init = LatchInit::zero, std::string name = {}) {
    auto v = add(Kind::latch);
    nodes_[v].init = init;
    if (!name.empty()) names_.push_back({'l', v, std::move(name)});
    return aig_lit(v);
  }

  void set_next(AigLit latch_lit, AigLit next) {
    auto v = aig_var(latch_lit);
    if (aig_sign(latch_lit) || v >= nodes_.size() || nodes_[v].kind != Kind::latch)
      throw std::invalid_argument("set_next expects a positive latch literal");
    nodes_[v].a = next;
    nodes_[v].has_next = true;
  }

  AigLit and_(AigLit a, AigLit b) {
    if (a == aig_false || b == aig_false || a == aig_not(b)) return aig_false;
    if (a == aig_true) return b;
    if (b == aig_true || a == b) return a;
    auto v = add(Kind::gate);
    nodes_[v].a = a;
    nodes_[v].b = b;
    return aig_lit(v);
  }
  AigLit or_(AigLit a, AigLit b) { return aig_not(and_(aig_not(a), aig_not(b))); }
  AigLit xor_(AigLit a, AigLit b) { return or_(and_(a, aig_not(b)), and_(aig_not(a), b)); }
  AigLit xnor_(AigLit a, AigLit b) { return aig_not(xor_(a, b)); }
  AigLit mux(AigLit sel, AigLit then_, AigLit else_) {
    return or_(and_(sel, then_), and_(aig_not(sel), else_));
  }
  AigLit and_all(const std::vector<AigLit>& lits) {
    AigLit r = aig_true;
    for (auto l : lits) r = and_(r, l);
    return r;
  }
  AigLit or_all(const std::vector<AigLit>& lits) {
    AigLit r = aig_false;
    for (auto l : lits) r = or_(r, l);
    return r;
  }

  void output(AigLit l) { outputs_.push_back(l); }
  void bad(AigLit l) { bads_.push_back(l); }

  Aig build() const {
    std::vector<AigVar> map(nodes_.size(), 0);
    AigVar next = 1;
    for (auto kind : {Kind::input, Kind::latch, Kind::gate})
      for (std::size_t v = 1; v < nodes_.size(); ++v)
        if (nodes_[v].kind == kind) map[v] = next++;
    auto tr = [&](AigLit l) { return aig_lit(map[aig_var(l)], aig_sign(l)); };

    Aig aig;
    aig.max_var = next - 1;
    std::vector<std::uint32_t> ordinal(nodes_.size(), 0);
    for (std::size_t v = 1; v < nodes_.size(); ++v) {
      const auto& n = nodes_[v];
      if (n.kind == Kind::input) {
        ordinal[v] = static_cast<std::uint32_t>(aig.inputs.size());
        aig.inputs.push_back(aig_lit(map[v]));
      }
    }
    for (std::size_t v = 1; v < nodes_.size(); ++v) {
      const auto& n = nodes_[v];
      if (n.kind != Kind::latch) continue;
      if (!n.has_next) throw std::logic_error("latch without next-state function");
      ordinal[v] = static_cast<std::uint32_t>(aig.latches.size());
      aig.latches.push_back({aig_lit(map[v]), tr(n.a), n.init});
    }
    for (std::size_t v = 1; v < nodes_.size(); ++v) {
      const auto& n = nodes_[v];
      if (n.kind != Kind::gate) continue;
      AigLit r0 = tr(n.a), r1 = tr(n.b);
      if (r0 < r1) std::swap(r0, r1);
      aig.ands.push_back({aig_lit(map[v]), r0, r1});
    }
    for (auto l : outputs_) aig.outputs.push_back(tr(l));
    for (auto l : bads_) aig.bads.push_back(tr(l));
    for (const auto& s : names_) aig.symbols.push_back({s.kind, ordinal[s.var], s.name});
    return aig;
  }

 private:
  enum class Kind { constant, input, latch, gate };
  struct Node {
    Kind kind = Kind::constant;
    AigLit a = 0, b = 0;
    LatchInit init = LatchInit::zero;
    bool has_next = false;
  };
  struct Name {
    char kind;
    AigVar var;
    std::string name;
  };

  AigVar add(Kind k) {
    nodes_.push_back(Node{k});
    return static_cast<AigVar>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_{Node{}};
  std::vector<AigLit> outputs_;
  std::vector<AigLit> bads_;
  std::vector<Name> names_;
};

}  // namespace legend
