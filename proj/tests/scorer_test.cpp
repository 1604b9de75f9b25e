#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "legend/scorer.hpp"
#include "scorer_oracles.hpp"
#include "support.hpp"

namespace legend {
namespace {

using fixtures::random_cube;
using fixtures::random_tables;

Clause clause(std::initializer_list<long long> ords) {
  std::vector<Literal> l;
  for (auto o : ords) l.push_back(Literal::from_signed_ordinal(o));
  return Clause(std::move(l));
}
Cube cube(std::initializer_list<long long> ords) {
  std::vector<Literal> l;
  for (auto o : ords) l.push_back(Literal::from_signed_ordinal(o));
  return Cube(std::move(l));
}

TEST(Scorer, ShapesAndZeroWeights) {
  auto w = init_scorer<float>(1);
  EXPECT_EQ(w.input, kEmbeddingWidth + 2);
  EXPECT_EQ(w.psi.l1.in, w.input + kScorerHidden);
  Xorshift64 rng(2);
  auto tables = random_tables(rng, 1, 6);
  auto s = score_clause_literals(cube({1, -3, 4}), tables[0], w.zeros_like());
  ASSERT_EQ(s.size(), 3u);
  for (float x : s) EXPECT_EQ(x, 0.5f);
}

TEST(Scorer, ShuffledCubesScoreIdentically) {
  Xorshift64 rng(3);
  auto tables = random_tables(rng, 1, 10);
  auto w = init_scorer<float>(4);
  for (int round = 0; round < 100; ++round) {
    auto c = random_cube(rng, 10, 1, 6);
    auto base = score_clause_literals(c, tables[0], w);
    std::vector<Literal> lits(c.begin(), c.end());
    for (std::size_t i = lits.size(); i > 1; --i) std::swap(lits[i - 1], lits[rng.below(i)]);
    Cube shuffled(lits);
    auto again = score_clause_literals(shuffled, tables[0], w);
    for (std::size_t i = 0; i < lits.size(); ++i) {
      // Score of literal lits[i] under both orders.
      auto pos = [&](const Cube& k) { return std::find(k.begin(), k.end(), lits[i]) - k.begin(); };
      EXPECT_EQ(std::bit_cast<std::uint32_t>(base[pos(c)]), std::bit_cast<std::uint32_t>(again[pos(shuffled)]));
    }
  }
}

TEST(Scorer, ForwardIsEquivariantOnRawRows) {
  // Below the canonical ordering: permuting input rows permutes the logits,
  // up to floating-point summation order.
  Xorshift64 rng(5);
  auto tables = random_tables(rng, 1, 8);
  auto w = init_scorer<double>(6);
  auto xs = scorer_inputs<double>(cube({1, 2, -5, 7}), tables[0], w.input);
  auto a = scorer_forward(w, xs);
  std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<std::vector<double>> ys;
  for (auto p : perm) ys.push_back(xs[p]);
  auto b = scorer_forward(w, ys);
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_NEAR(a.logits[perm[i]], b.logits[i], 1e-12);
}

TEST(Scorer, WidthMismatchRejected) {
  Xorshift64 rng(1);
  auto tables = random_tables(rng, 1, 4, kEmbeddingWidth);
  EXPECT_THROW(score_clause_literals(cube({1}), tables[0], init_scorer<float>(1)), std::invalid_argument);
}

TEST(Scorer, WeightsRoundTrip) {
  auto w = init_scorer<float>(9);
  auto bytes = export_scorer_weights(w);
  auto back = load_scorer_weights(bytes);
  EXPECT_EQ(export_scorer_weights(back), bytes);
  EXPECT_EQ(back.input, w.input);
  EXPECT_EQ(back.hidden, w.hidden);
  EXPECT_EQ(export_scorer_weights(load_scorer_weights(tensors_to_json(to_tensors(w)))), bytes);
  auto cut = bytes.substr(0, bytes.size() - 4);
  try {
    load_scorer_weights(cut);
    FAIL();
  } catch (const WeightsError& e) {
    EXPECT_NE(std::string(e.what()).find("psi.b2"), std::string::npos) << e.what();
  }
}

TEST(Assembly, KeepsLiteralsAboveThreshold) {
  auto c = cube({1, -2, 3});
  std::vector<float> s{0.9f, 0.2f, 0.5f};
  auto r = assemble_clause(c, std::span<const float>(s), {});
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, clause({-1, -3}));
}

TEST(Assembly, DecaysUntilOneSurvives) {
  // 0.5 -> 0.45 -> 0.405 -> 0.3645 -> 0.328 -> 0.295: only then 0.3 passes.
  auto c = cube({1, 2});
  std::vector<double> s{0.3, 0.2};
  auto r = assemble_clause(c, std::span<const double>(s), {0.5, 0.9, 0.25});
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, clause({-1}));
  std::vector<double> s2{0.26, 0.2};  // 0.2657 misses it, the next step is below the floor
  EXPECT_FALSE(assemble_clause(c, std::span<const double>(s2), {0.5, 0.9, 0.25}));
}

TEST(Assembly, ValidatesConfig) {
  auto c = cube({1});
  std::vector<float> s{1.0f};
  std::span<const float> sp(s);
  EXPECT_THROW(assemble_clause(c, sp, {0.0, 0.9, 0.05}), std::invalid_argument);
  EXPECT_THROW(assemble_clause(c, sp, {1.5, 0.9, 0.05}), std::invalid_argument);
  EXPECT_THROW(assemble_clause(c, sp, {0.5, 1.0, 0.05}), std::invalid_argument);
  EXPECT_THROW(assemble_clause(c, sp, {0.5, 0.9, 0.6}), std::invalid_argument);
  EXPECT_THROW(assemble_clause(c, std::span<const float>(), {}), std::invalid_argument);
}

TEST(Labels, LatestFrameThenShortestThenSmallest) {
  std::vector<CtiSample> ctis{{cube({1, 2, -3}), {}, {}}, {cube({-1, -2}), {}, {}}, {cube({4}), {}, {}}};
  std::vector<Lemma> inv{{clause({-1}), 1}, {clause({-1, -2}), 2}, {clause({-2, 3}), 2}, {clause({1, 2}), 1},
                         {clause({2}), 1}, {clause({1}), 1}};
  LabelStats st;
  auto labels = generate_labels(ctis, inv, &st);
  EXPECT_EQ(st.labeled, 2u);
  EXPECT_EQ(st.skipped, 1u);
  ASSERT_EQ(labels.size(), 2u);
  // Frame 2 ties between {1,2} and {2,-3}; same size, {1,2} is smaller.
  EXPECT_EQ(labels[0].covering, clause({-1, -2}));
  EXPECT_EQ(labels[0].frame, 2u);
  EXPECT_EQ(labels[0].keep, (std::vector<std::uint8_t>{1, 1, 0}));
  // Frame 1: {-1} and {-2} beat {-1,-2}; {-1} sorts first.
  EXPECT_EQ(labels[1].covering, clause({1}));
  EXPECT_EQ(labels[1].keep, (std::vector<std::uint8_t>{1, 0}));
}

TEST(Labels, PoolRoundTrip) {
  std::vector<LabeledCti> data{{cube({1, -2, 3}), {1, 0, 1}, clause({-1, -3}), 4, {0, 1}}};
  std::stringstream ss;
  write_labeled_pool(ss, data, 3);
  auto back = read_labeled_pool(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].cube, data[0].cube);
  EXPECT_EQ(back[0].keep, data[0].keep);
  EXPECT_EQ(back[0].covering, data[0].covering);
  EXPECT_EQ(back[0].frame, 4u);
  EXPECT_EQ(back[0].inputs, data[0].inputs);
}

TEST(Training, GradientMatchesFiniteDifferences) {
  Xorshift64 rng(12);
  auto tables = random_tables(rng, 1, 8);
  for (int point = 0; point < 3; ++point) {
    auto w = init_scorer<double>(rng());
    std::vector<TrainingExample> batch{{0, random_cube(rng, 8, 3, 3), {}}};
    batch[0].keep = {1, 0, static_cast<std::uint8_t>(rng.coin())};
    auto r = fixtures::gradient_check(w, batch, tables, 37, rng);
    EXPECT_GT(r.checked, 300u);
    EXPECT_LE(r.max_rel_error, 1e-3) << "point " << point;
  }
}

TEST(Training, SeparableSetIsLearnedWithMonotoneLoss) {
  auto set = fixtures::separable_set(1);
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.batch_size = 0;
  cfg.optimizer = Optimizer::sgd;
  cfg.learning_rate = 0.05;
  cfg.seed = 2;
  auto r = train_scorer(set.data, set.tables, cfg);
  ASSERT_EQ(r.loss.size(), 500u);
  for (std::size_t e = 1; e < r.loss.size(); ++e) EXPECT_LE(r.loss[e], r.loss[e - 1] + 1e-6) << "epoch " << e;
  EXPECT_EQ(fixtures::class_margin(r.weights, set) > 0, true);
  EXPECT_EQ(scorer_accuracy(r.weights, set.data, set.tables), 1.0);
}

TEST(Training, FlipRateRuleSeparatesWithMargin) {
  auto set = fixtures::flip_rule_set(3);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 0;
  cfg.learning_rate = 3e-3;
  auto r = train_scorer(set.data, set.tables, cfg);
  EXPECT_GE(fixtures::class_margin(r.weights, set), 0.3);
}

TEST(Training, RejectsBadData) {
  Xorshift64 rng(1);
  auto tables = random_tables(rng, 1, 4);
  std::vector<TrainingExample> misaligned{{0, cube({1, 2}), {1}}};
  EXPECT_THROW(train_scorer(misaligned, tables, {}), std::invalid_argument);
  std::vector<TrainingExample> missing{{3, cube({1}), {1}}};
  EXPECT_THROW(train_scorer(missing, tables, {}), std::invalid_argument);
  EXPECT_THROW(train_scorer({}, tables, {}), std::invalid_argument);
}

}  // namespace
}  // namespace legend
