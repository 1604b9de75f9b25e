#include "legend/aiger.hpp"

#include <gtest/gtest.h>

#include "legend/aig_builder.hpp"
#include "support.hpp"

using namespace legend;

TEST(Aiger, EmptyCircuit) {
  Aig a = parse_aiger("aag 0 0 0 0 0\n");
  EXPECT_EQ(a.max_var, 0u);
  EXPECT_TRUE(a.inputs.empty());
  EXPECT_TRUE(a.latches.empty());
  EXPECT_TRUE(a.outputs.empty());
  EXPECT_TRUE(a.ands.empty());
}

TEST(Aiger, IdentityWire) {
  Aig a = parse_aiger("aag 1 1 0 1 0\n2\n2\n");
  ASSERT_EQ(a.inputs, std::vector<AigLit>{2});
  ASSERT_EQ(a.outputs, std::vector<AigLit>{2});
  EXPECT_TRUE(a.latches.empty());
  EXPECT_TRUE(a.ands.empty());
}

TEST(Aiger, ToggleLatch) {
  Aig a = parse_aiger("aag 1 0 1 1 0\n2 3\n2\n");
  ASSERT_EQ(a.latches.size(), 1u);
  EXPECT_EQ(a.latches[0].lit, 2u);
  EXPECT_EQ(a.latches[0].next, 3u);
  EXPECT_EQ(a.latches[0].init, LatchInit::zero);
  EXPECT_EQ(a.outputs, std::vector<AigLit>{2});
}

TEST(Aiger, BinaryToggleMatchesAscii) {
  Aig ascii = parse_aiger("aag 1 0 1 1 0\n2 3\n2\n");
  std::string bin = write_binary(ascii);
  EXPECT_EQ(bin.substr(0, 3), "aig");
  EXPECT_EQ(parse_aiger(bin), ascii);
}

TEST(Aiger, BinaryAndDeltaEncoding) {
  // Half adder with symbols; exercises the varint section.
  Aig a = parse_aiger(
      "aag 5 2 0 2 3\n2\n4\n10\n6\n6 4 2\n8 5 3\n10 9 7\ni0 x\ni1 y\no0 s\no1 c\nc\nhalf adder\n");
  std::string bin = write_binary(a);
  EXPECT_EQ(parse_aiger(bin), a);
  EXPECT_EQ(parse_aiger(write_ascii(a)), a);
  EXPECT_EQ(a.symbols.size(), 4u);
  EXPECT_EQ(a.comment, "half adder\n");
}

TEST(Aiger, LatchInitValues) {
  Aig a = parse_aiger("aag 3 0 3 1 0\n2 2 1\n4 4 4\n6 7 0\n2\n");
  EXPECT_EQ(a.latches[0].init, LatchInit::one);
  EXPECT_EQ(a.latches[1].init, LatchInit::undefined);
  EXPECT_EQ(a.latches[2].init, LatchInit::zero);

  auto ts = to_transition_system(a);
  EXPECT_EQ(ts.init_cube, (Cube{{0, true}, {2, false}}));
  EXPECT_EQ(ts.bad, 2u);
  EXPECT_EQ(ts.property(), 3u);
}

TEST(Aiger, ToggleTransitionSystem) {
  auto ts = to_transition_system(parse_aiger("aag 1 0 1 1 0\n2 3\n2\n"));
  EXPECT_EQ(ts.init_cube, (Cube{{0, false}}));
  EXPECT_EQ(ts.next_fn, std::vector<AigLit>{3});
  EXPECT_EQ(ts.bad, 2u);
}

TEST(Aiger, BadSectionPreferredOverOutputs) {
  Aig a = parse_aiger("aag 2 1 1 1 0 1\n2\n4 2\n4\n5\n");
  EXPECT_EQ(to_transition_system(a).bad, 5u);
  EXPECT_THROW(to_transition_system(a, 1), std::out_of_range);
}

TEST(Aiger, Errors) {
  auto expect_error_at_line = [](std::string_view text, std::size_t line) {
    try {
      parse_aiger(text);
      ADD_FAILURE() << "no error for: " << text;
    } catch (const AigerError& e) {
      EXPECT_EQ(e.line(), line) << e.what();
    }
  };
  expect_error_at_line("agg 0 0 0 0 0\n", 1);
  expect_error_at_line("aag 1 1 0 1\n2\n2\n", 1);
  expect_error_at_line("aag 1 1 0 1 0\n2\n9\n", 3);           // literal out of range
  expect_error_at_line("aag 1 0 1 1 0\n2 3 5\n2\n", 2);       // bad reset
  expect_error_at_line("aag 1 0 0 0 0 0 1\n", 1);             // constraints rejected
  EXPECT_THROW(parse_aiger("aag 3 1 0 1 2\n2\n4\n4 6 2\n6 2 2\n"), AigerError);  // not topological
  EXPECT_THROW(parse_aiger("aag 1 2 0 0 0\n2\n2\n"), AigerError);         // M too small
  // Binary AND whose delta points above the gate.
  std::string bad = "aig 2 1 0 1 1\n4\n";
  bad += static_cast<char>(7);
  bad += static_cast<char>(0);
  EXPECT_THROW(parse_aiger(bad), AigerError);
  EXPECT_THROW(parse_aiger("aig 3 1 0 1 2\n4\n\x02"), AigerError);  // truncated
}

TEST(Aiger, RandomRoundTrips) {
  Xorshift64 rng(7);
  for (int i = 0; i < 50; ++i) {
    Aig a = fixtures::random_aig(rng, {static_cast<unsigned>(1 + rng.below(8)),
                                      static_cast<unsigned>(rng.below(4)),
                                      static_cast<unsigned>(rng.below(40)), true});
    EXPECT_EQ(parse_aiger(write_ascii(a)), a);
    EXPECT_EQ(parse_aiger(write_binary(a)), a);
  }
}

TEST(Aiger, EvaluateFollowsGateOrder) {
  // Gates listed out of order in ASCII are still evaluated correctly.
  Aig a = parse_aiger("aag 4 2 0 1 2\n2\n4\n8\n8 6 2\n6 2 4\n");
  std::vector<std::uint8_t> in{1, 1}, none;
  EXPECT_TRUE(literal_value(evaluate(a, in, none), 8));
  in = {1, 0};
  EXPECT_FALSE(literal_value(evaluate(a, in, none), 8));
}
