#include "legend/cnf.hpp"

#include <gtest/gtest.h>

#include "legend/aig_builder.hpp"
#include "support.hpp"

using namespace legend;

TEST(Cnf, AndGateClauses) {
  AigBuilder b;
  auto x = b.input(), y = b.input();
  b.output(b.and_(x, y));
  auto ts = to_transition_system(b.build());
  sat::Solver s;
  CnfEncoder enc(s, ts);
  auto g = enc.encode(ts.bad);
  EXPECT_EQ(enc.gates_encoded(), 1u);
  auto a = enc.input(0), c = enc.input(1);
  // g <-> a & b: every assignment of (a, b) fixes g.
  for (int m = 0; m < 4; ++m) {
    sat::Lit la = a ^ !(m & 1), lb = c ^ !(m & 2);
    bool expect = (m & 1) && (m & 2);
    EXPECT_EQ(s.solve({la, lb, g}), expect ? sat::Result::Sat : sat::Result::Unsat);
    EXPECT_EQ(s.solve({la, lb, ~g}), expect ? sat::Result::Unsat : sat::Result::Sat);
  }
  // Encoding the same root again adds nothing.
  enc.encode(ts.bad);
  EXPECT_EQ(enc.gates_encoded(), 1u);
}

TEST(Cnf, ConstantFalseRoot) {
  auto ts = to_transition_system(parse_aiger("aag 0 0 0 1 0\n0\n"));
  sat::Solver s;
  CnfEncoder enc(s, ts);
  EXPECT_EQ(enc.encode(aig_false), enc.false_lit());
  EXPECT_EQ(enc.encode(aig_true), enc.true_lit());
  EXPECT_EQ(s.solve({enc.false_lit()}), sat::Result::Unsat);
}

// Every random cone over at most 8 leaves: the CNF-implied value of the root
// equals direct evaluation for all 2^8 leaf assignments.
TEST(Cnf, ConesMatchTruthTables) {
  Xorshift64 rng(11);
  for (int round = 0; round < 30; ++round) {
    const unsigned L = 4, I = 4;
    Aig aig = fixtures::random_aig(rng, {L, I, 30, false});
    auto ts = to_transition_system(aig);
    fixtures::Evaluator ev(ts.aig);
    sat::Solver s;
    CnfEncoder enc(s, ts);
    // Pick a few roots: every gate output.
    for (const auto& g : ts.aig.ands) {
      auto root = enc.encode(g.lhs);
      for (std::uint64_t m = 0; m < 256; ++m) {
        std::vector<sat::Lit> a;
        auto latches = fixtures::bits_of(m, L), inputs = fixtures::bits_of(m >> L, I);
        for (unsigned i = 0; i < L; ++i) a.push_back(enc.latch(i) ^ !latches[i]);
        for (unsigned i = 0; i < I; ++i) a.push_back(enc.input(i) ^ !inputs[i]);
        a.push_back(root);
        bool expected = ev.eval(g.lhs, latches, inputs);
        ASSERT_EQ(s.solve(a) == sat::Result::Sat, expected);
      }
    }
  }
}

TEST(Cnf, NextFrameUsesPrimedLatches) {
  // Two-bit shift register; bad = q1. In the next frame q1' = q0.
  AigBuilder b;
  auto q0 = b.latch(), q1 = b.latch();
  auto in = b.input();
  b.set_next(q0, in);
  b.set_next(q1, q0);
  b.output(q1);
  auto ts = to_transition_system(b.build());
  sat::Solver s;
  CnfEncoder enc(s, ts);
  enc.encode_transition();
  auto bad_next = enc.encode(ts.bad, TimeFrame::next);
  EXPECT_EQ(bad_next, enc.latch(1, TimeFrame::next));
  EXPECT_EQ(s.solve({bad_next, ~enc.latch(0)}), sat::Result::Unsat);
  EXPECT_EQ(s.solve({bad_next, enc.latch(0)}), sat::Result::Sat);
}
