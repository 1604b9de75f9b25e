#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "legend/embedder.hpp"
#include "support.hpp"

namespace legend {
namespace {

// Straightforward double-precision GIN over the raw edge list.
std::vector<double> reference_gin(const CircuitGraph& g, const EncoderWeights& w) {
  const std::size_t n = g.num_nodes();
  std::size_t f = kNodeFeatures;
  std::vector<double> h(g.features.begin(), g.features.end());
  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    const auto& L = w.layers[li];
    const std::size_t zw = 2 * f + 2, d = L.out;
    std::vector<double> z(n * zw, 0.0), out(n * d, 0.0);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t k = 0; k < f; ++k) z[v * zw + k] = (1.0 + w.eps) * h[v * f + k];
    for (const auto& e : g.edges) {
      for (std::size_t k = 0; k < f; ++k) {
        z[e.dst * zw + k] += h[e.src * f + k];
        z[e.src * zw + f + k] += h[e.dst * f + k];
      }
      if (e.inverted) {
        z[e.dst * zw + 2 * f] += 1;
        z[e.src * zw + 2 * f + 1] += 1;
      }
    }
    for (std::size_t v = 0; v < n; ++v) {
      std::vector<double> hid(d);
      for (std::size_t r = 0; r < d; ++r) {
        double a = L.b1[r];
        for (std::size_t k = 0; k < zw; ++k) a += double(L.W1[r * zw + k]) * z[v * zw + k];
        hid[r] = std::max(a, 0.0);
      }
      for (std::size_t r = 0; r < d; ++r) {
        double a = L.b2[r];
        for (std::size_t k = 0; k < d; ++k) a += double(L.W2[r * d + k]) * hid[k];
        out[v * d + r] = li + 1 == w.layers.size() ? a : std::max(a, 0.0);
      }
    }
    h = std::move(out);
    f = d;
  }
  std::vector<double> rows;
  for (auto node : g.latch_nodes) rows.insert(rows.end(), h.begin() + node * f, h.begin() + (node + 1) * f);
  return rows;
}

// Three latches a, b, c declared in the given order:
// a' = b & x, b' = !c, c' = a | b, bad = a & c.
Aig three_latch(std::array<int, 3> order) {
  AigBuilder b;
  auto x = b.input();
  std::array<AigLit, 3> q{};
  for (int i : order) q[i] = b.latch();
  b.set_next(q[0], b.and_(q[1], x));
  b.set_next(q[1], aig_not(q[2]));
  b.set_next(q[2], b.or_(q[0], q[1]));
  b.output(b.and_(q[0], q[2]));
  return b.build();
}

TEST(Embedder, WeightsRoundTripIsBitwise) {
  auto w = init_encoder(17);
  auto bytes = export_encoder_weights(w);
  auto back = load_encoder_weights(bytes);
  EXPECT_EQ(export_encoder_weights(back), bytes);
  ASSERT_EQ(back.layers.size(), kGinLayers);
  EXPECT_EQ(back.layers[0].in, kNodeFeatures);
  EXPECT_EQ(back.layers[0].W1.size(), kEmbeddingWidth * (2 * kNodeFeatures + 2));
  EXPECT_EQ(back.output_width(), kEmbeddingWidth);
  EXPECT_EQ(back.layers[2].W2, w.layers[2].W2);
}

TEST(Embedder, JsonRenderingLoadsToSameWeights) {
  auto w = init_encoder(4);
  auto json = tensors_to_json(to_tensors(w));
  EXPECT_EQ(export_encoder_weights(load_encoder_weights(json)), export_encoder_weights(w));
}

TEST(Embedder, TruncatedFileNamesTensor) {
  auto bytes = export_encoder_weights(init_encoder(1));
  bytes.resize(bytes.size() - 10);
  try {
    load_encoder_weights(bytes);
    FAIL() << "expected an error";
  } catch (const WeightsError& e) {
    EXPECT_NE(std::string(e.what()).find("layer3.b2"), std::string::npos) << e.what();
  }
}

TEST(Embedder, VersionAndKindAreChecked) {
  auto bytes = export_encoder_weights(init_encoder(1));
  auto v2 = bytes;
  v2[4] = 2;
  EXPECT_THROW(load_encoder_weights(v2), WeightsError);
  auto k = bytes;
  k[8] = 2;
  EXPECT_THROW(load_encoder_weights(k), WeightsError);
  EXPECT_THROW(load_encoder_weights("XXXX"), WeightsError);
  EXPECT_THROW(load_encoder_weights(bytes + "x"), WeightsError);
}

TEST(Embedder, NonFiniteWeightsRejected) {
  auto w = init_encoder(1);
  w.layers[1].b1[3] = std::nanf("");
  EXPECT_THROW(load_encoder_weights(export_encoder_weights(w)), WeightsError);
}

TEST(Embedder, WrongInputWidthRejected) {
  auto g = build_graph(fixtures::toggle_circuit());
  EXPECT_THROW(gin_forward(g, init_encoder(1, kNodeFeatures + 1)), std::invalid_argument);
}

TEST(Embedder, ZeroWeightsGiveZeroEmbeddings) {
  auto w = init_encoder(3);
  for (auto& l : w.layers)
    for (auto* v : {&l.W1, &l.b1, &l.W2, &l.b2}) std::fill(v->begin(), v->end(), 0.0f);
  auto t = gin_forward(build_graph(fixtures::counter_circuit(3, 5)), w);
  EXPECT_EQ(t.rows, 3u);
  EXPECT_EQ(t.width, kEmbeddingWidth);
  for (float x : t.data) EXPECT_EQ(x, 0.0f);
  EXPECT_EQ(t.source, EmbeddingSource::pretrained);
}

TEST(Embedder, GinMatchesReference) {
  Xorshift64 rng(21);
  for (int round = 0; round < 20; ++round) {
    auto g = build_graph(fixtures::random_aig(rng, {5, 2, 20, true}));
    auto w = init_encoder(rng());
    w.eps = round % 2 ? 0.25f : 0.0f;
    auto t = gin_forward(g, w);
    auto ref = reference_gin(g, w);
    ASSERT_EQ(t.data.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(t.data[i], ref[i], 1e-4 * (1 + std::abs(ref[i])));
  }
}

TEST(Embedder, PermutingLatchesPermutesRows) {
  auto base = three_latch({0, 1, 2});
  auto perm = three_latch({2, 0, 1});  // ordinals: c=0, a=1, b=2
  const std::array<std::size_t, 3> where{1, 2, 0};
  auto w = init_encoder(8);
  auto gb = build_graph(base), gp = build_graph(perm);
  auto tb = gin_forward(gb, w), tp = gin_forward(gp, w);
  auto fb = structural_fallback_embed(gb, 5), fp = structural_fallback_embed(gp, 5);
  for (std::size_t i = 0; i < 3; ++i) {
    auto rb = tb.row(i), rp = tp.row(where[i]);
    for (std::size_t k = 0; k < rb.size(); ++k) EXPECT_NEAR(rb[k], rp[k], 1e-5);
    auto sb = fb.row(i), sp = fp.row(where[i]);
    EXPECT_TRUE(std::equal(sb.begin(), sb.end(), sp.begin(), sp.end()));
  }
}

TEST(Embedder, FallbackIsDeterministicAndSeeded) {
  auto g = build_graph(fixtures::counter_circuit(4, 9));
  auto a = structural_fallback_embed(g, 1), b = structural_fallback_embed(g, 1), c = structural_fallback_embed(g, 2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.data, c.data);
  EXPECT_EQ(a.width, kEmbeddingWidth);
  EXPECT_EQ(a.source, EmbeddingSource::fallback);
}

TEST(Embedder, FallbackSeparatesToggleFromFrozen) {
  // Same size, different structure: the inverted self edge shows up in the
  // latch features and hence in the row.
  auto t = structural_fallback_embed(build_graph(fixtures::toggle_circuit()), 0);
  auto f = structural_fallback_embed(build_graph(fixtures::frozen_circuit()), 0);
  EXPECT_NE(t.data, f.data);
}

TEST(Embedder, TraversalCounterCountsPasses) {
  auto g = build_graph(fixtures::counter_circuit(3, 2));
  auto before = graph_traversals().load();
  gin_forward(g, init_encoder(1));
  structural_fallback_embed(g, 1);
  EXPECT_EQ(graph_traversals().load(), before + 2);
}

TEST(Embedder, AugmentAppendsFlipRate) {
  auto aig = fixtures::counter_circuit(3, 5);
  auto raw = structural_fallback_embed(build_graph(aig), 0);
  auto rates = compute_flip_rates(aig, 16, 0);
  auto t = augment_with_flip_rate(raw, rates);
  EXPECT_EQ(t.width, kEmbeddingWidth + 1);
  EXPECT_TRUE(t.augmented);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(t.row(i).back(), static_cast<float>(rates.rate[i]));
    EXPECT_TRUE(std::equal(raw.row(i).begin(), raw.row(i).end(), t.row(i).begin()));
  }
  EXPECT_THROW(augment_with_flip_rate(t, rates), std::invalid_argument);
  rates.rate.pop_back();
  EXPECT_THROW(augment_with_flip_rate(raw, rates), std::invalid_argument);
  EXPECT_THROW(t.row(3), std::out_of_range);
}

TEST(Embedder, TableRoundTrip) {
  auto aig = fixtures::counter_circuit(3, 5);
  auto t = augment_with_flip_rate(gin_forward(build_graph(aig), init_encoder(2)), compute_flip_rates(aig, 16, 0));
  EXPECT_EQ(load_table(export_table(t)), t);
  EXPECT_THROW(load_table(export_encoder_weights(init_encoder(2))), WeightsError);
}

}  // namespace
}  // namespace legend
