#pragma once

// Per-latch embeddings, computed once per circuit.
//
// GIN layer (input width f, output width d):
//   z_v = [ (1 + eps) h_v + sum_{u -> v} h_u  |  sum_{v -> w} h_w  |  n_inv_in(v), n_inv_out(v) ]
//   h'_v = W2 relu(W1 z_v + b1) + b2
// with W1: d x (2f + 2), W2: d x d. Layers are chained with a rectifier in
// between; the last layer's node states are the embeddings. Neighbour sums run
// in ascending neighbour id order.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "legend/flip_sim.hpp"
#include "legend/graph.hpp"
#include "legend/rng.hpp"
#include "legend/tensor_io.hpp"

namespace legend {

inline constexpr std::size_t kEmbeddingWidth = 32;
inline constexpr std::size_t kGinLayers = 3;

struct GinLayer {
  std::size_t in = 0, out = 0;
  std::vector<float> W1, b1, W2, b2;  // row-major
};

struct EncoderWeights {
  float eps = 0.0f;
  std::vector<GinLayer> layers;

  std::size_t input_width() const { return layers.empty() ? 0 : layers.front().in; }
  std::size_t output_width() const { return layers.empty() ? 0 : layers.back().out; }
};

enum class EmbeddingSource { pretrained, fallback };

// rows x width, row i belongs to latch ordinal i.
struct EmbeddingTable {
  std::size_t rows = 0, width = 0;
  std::vector<float> data;
  EmbeddingSource source = EmbeddingSource::fallback;
  bool augmented = false;

  std::span<const float> row(std::size_t i) const {
    if (i >= rows) throw std::out_of_range("no embedding row for latch " + std::to_string(i));
    return {data.data() + i * width, width};
  }
  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

// Seeded uniform +-1/sqrt(fan_in) initialization, as used for fresh weights.
inline EncoderWeights init_encoder(std::uint64_t seed, std::size_t in = kNodeFeatures,
                                   std::size_t d = kEmbeddingWidth, std::size_t layers = kGinLayers) {
  Xorshift64 rng(seed);
  EncoderWeights w;
  std::size_t f = in;
  for (std::size_t l = 0; l < layers; ++l) {
    GinLayer g{f, d, {}, {}, {}, {}};
    auto fill = [&](std::vector<float>& v, std::size_t n, std::size_t fan_in) {
      const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
      v.resize(n);
      for (auto& x : v) x = static_cast<float>(rng.uniform(-a, a));
    };
    fill(g.W1, d * (2 * f + 2), 2 * f + 2);
    fill(g.b1, d, 2 * f + 2);
    fill(g.W2, d * d, d);
    fill(g.b2, d, d);
    w.layers.push_back(std::move(g));
    f = d;
  }
  return w;
}

inline TensorFile to_tensors(const EncoderWeights& w) {
  TensorFile f{WeightsKind::encoder, {}};
  f.tensors.push_back({"eps", {1}, {w.eps}});
  std::size_t idx = 1;
  for (const auto& l : w.layers) {
    auto in2 = static_cast<std::uint32_t>(2 * l.in + 2), d = static_cast<std::uint32_t>(l.out);
    f.tensors.push_back({tensor_name(WeightsKind::encoder, idx++), {d, in2}, l.W1});
    f.tensors.push_back({tensor_name(WeightsKind::encoder, idx++), {d}, l.b1});
    f.tensors.push_back({tensor_name(WeightsKind::encoder, idx++), {d, d}, l.W2});
    f.tensors.push_back({tensor_name(WeightsKind::encoder, idx++), {d}, l.b2});
  }
  return f;
}

inline EncoderWeights encoder_from_tensors(const TensorFile& f) {
  const auto& t = f.tensors;
  if (t.empty() || t[0].shape != std::vector<std::uint32_t>{1})
    throw WeightsError("encoder weights: first tensor must be eps with shape [1]");
  if ((t.size() - 1) % 4 != 0 || t.size() == 1)
    throw WeightsError("encoder weights: expected 1 + 4 x layers tensors, got " + std::to_string(t.size()));
  EncoderWeights w;
  w.eps = t[0].data[0];
  std::size_t f_in = 0;
  for (std::size_t i = 1; i < t.size(); i += 4) {
    const auto &W1 = t[i], &b1 = t[i + 1], &W2 = t[i + 2], &b2 = t[i + 3];
    auto bad = [&](const Tensor& x) { throw WeightsError("encoder weights: tensor " + x.name + " has the wrong shape"); };
    if (W1.shape.size() != 2 || W1.shape[1] < 2 || W1.shape[1] % 2 != 0) bad(W1);
    const std::size_t d = W1.shape[0], in = (W1.shape[1] - 2) / 2;
    if (i > 1 && in != f_in) bad(W1);
    if (b1.shape != std::vector<std::uint32_t>{static_cast<std::uint32_t>(d)}) bad(b1);
    if (W2.shape != std::vector<std::uint32_t>{static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d)}) bad(W2);
    if (b2.shape != std::vector<std::uint32_t>{static_cast<std::uint32_t>(d)}) bad(b2);
    w.layers.push_back({in, d, W1.data, b1.data, W2.data, b2.data});
    f_in = d;
  }
  return w;
}

inline EncoderWeights load_encoder_weights(std::string_view bytes) {
  return encoder_from_tensors(parse_tensors(bytes, WeightsKind::encoder));
}
inline std::string export_encoder_weights(const EncoderWeights& w) { return encode_tensors(to_tensors(w)); }

// Full GIN pass over the graph; returns latch rows.
inline EmbeddingTable gin_forward(const CircuitGraph& g, const EncoderWeights& w) {
  if (w.layers.empty()) throw std::invalid_argument("encoder has no layers");
  if (w.input_width() != kNodeFeatures)
    throw std::invalid_argument("encoder input width " + std::to_string(w.input_width()) +
                                " does not match the node feature width " + std::to_string(kNodeFeatures));
  ++graph_traversals();
  const std::size_t n = g.num_nodes();
  std::vector<float> inv_in(n, 0.0f), inv_out(n, 0.0f);
  for (const auto& e : g.edges)
    if (e.inverted) {
      inv_in[e.dst] += 1.0f;
      inv_out[e.src] += 1.0f;
    }
  std::vector<float> h = g.features, next;
  std::size_t f = kNodeFeatures;
  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    const auto& L = w.layers[li];
    const std::size_t zw = 2 * f + 2, d = L.out;
    next.assign(n * d, 0.0f);
    std::vector<float> z(zw), hidden(d);
    for (std::size_t v = 0; v < n; ++v) {
      const float* hv = h.data() + v * f;
      for (std::size_t k = 0; k < f; ++k) z[k] = (1.0f + w.eps) * hv[k];
      for (std::size_t k = f; k < 2 * f; ++k) z[k] = 0.0f;
      for (auto e : g.in_edges[v]) {
        const float* hu = h.data() + g.edges[e].src * f;
        for (std::size_t k = 0; k < f; ++k) z[k] += hu[k];
      }
      for (auto e : g.out_edges[v]) {
        const float* hw = h.data() + g.edges[e].dst * f;
        for (std::size_t k = 0; k < f; ++k) z[f + k] += hw[k];
      }
      z[2 * f] = inv_in[v];
      z[2 * f + 1] = inv_out[v];
      for (std::size_t r = 0; r < d; ++r) {
        float acc = L.b1[r];
        const float* wr = L.W1.data() + r * zw;
        for (std::size_t k = 0; k < zw; ++k) acc += wr[k] * z[k];
        hidden[r] = acc > 0.0f ? acc : 0.0f;
      }
      float* out = next.data() + v * d;
      const bool last = li + 1 == w.layers.size();
      for (std::size_t r = 0; r < d; ++r) {
        float acc = L.b2[r];
        const float* wr = L.W2.data() + r * d;
        for (std::size_t k = 0; k < d; ++k) acc += wr[k] * hidden[k];
        out[r] = last || acc > 0.0f ? acc : 0.0f;
      }
    }
    h.swap(next);
    f = d;
  }
  EmbeddingTable t;
  t.rows = g.num_latches();
  t.width = f;
  t.source = EmbeddingSource::pretrained;
  t.data.reserve(t.rows * f);
  for (auto node : g.latch_nodes) t.data.insert(t.data.end(), h.begin() + node * f, h.begin() + (node + 1) * f);
  return t;
}

// Latch features concatenated with the mean features of its fanin cone up to
// depth 3 (latch excluded), then a seeded random projection to `width`. The
// cone mean is summed in sorted value order so that it depends only on the
// multiset of cone features.
inline EmbeddingTable structural_fallback_embed(const CircuitGraph& g, std::uint64_t seed,
                                                std::size_t width = kEmbeddingWidth) {
  ++graph_traversals();
  constexpr std::size_t F = kNodeFeatures, in = 2 * F;
  Xorshift64 rng(mix_seed(seed, 0xFA11BAC4));
  const double a = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> P(width * in);
  for (auto& x : P) x = rng.uniform(-a, a);

  EmbeddingTable t;
  t.rows = g.num_latches();
  t.width = width;
  t.source = EmbeddingSource::fallback;
  t.data.resize(t.rows * width);
  std::vector<std::uint32_t> mark(g.num_nodes(), 0);
  std::uint32_t stamp = 0;
  for (std::size_t li = 0; li < g.num_latches(); ++li) {
    const auto root = g.latch_nodes[li];
    ++stamp;
    mark[root] = stamp;
    std::vector<std::uint32_t> frontier{root}, cone;
    for (int depth = 0; depth < 3; ++depth) {
      std::vector<std::uint32_t> nxt;
      for (auto v : frontier)
        for (auto e : g.in_edges[v]) {
          auto u = g.edges[e].src;
          if (mark[u] == stamp) continue;
          mark[u] = stamp;
          nxt.push_back(u);
          cone.push_back(u);
        }
      frontier = std::move(nxt);
    }
    std::vector<double> x(in, 0.0);
    for (std::size_t k = 0; k < F; ++k) x[k] = g.feature_row(root)[k];
    if (!cone.empty()) {
      std::vector<float> col(cone.size());
      for (std::size_t k = 0; k < F; ++k) {
        for (std::size_t c = 0; c < cone.size(); ++c) col[c] = g.feature_row(cone[c])[k];
        std::sort(col.begin(), col.end());
        double s = 0.0;
        for (float v : col) s += v;
        x[F + k] = s / static_cast<double>(cone.size());
      }
    }
    for (std::size_t r = 0; r < width; ++r) {
      double acc = 0.0;
      for (std::size_t k = 0; k < in; ++k) acc += P[r * in + k] * x[k];
      t.data[li * width + r] = static_cast<float>(acc);
    }
  }
  return t;
}

// v_l = [e_l, r_flip(l)].
inline EmbeddingTable augment_with_flip_rate(const EmbeddingTable& raw, const FlipRates& rates) {
  if (raw.augmented) throw std::invalid_argument("table is already augmented");
  if (rates.rate.size() != raw.rows)
    throw std::invalid_argument("flip-rate count " + std::to_string(rates.rate.size()) +
                                " does not match embedding rows " + std::to_string(raw.rows));
  EmbeddingTable t = raw;
  t.width = raw.width + 1;
  t.augmented = true;
  t.data.clear();
  t.data.reserve(t.rows * t.width);
  for (std::size_t i = 0; i < raw.rows; ++i) {
    auto r = raw.row(i);
    t.data.insert(t.data.end(), r.begin(), r.end());
    t.data.push_back(static_cast<float>(rates.rate[i]));
  }
  return t;
}

// Tables are stored as a single rows x width tensor of kind `table`, with the
// provenance in a second tensor: [source, augmented].
inline std::string export_table(const EmbeddingTable& t) {
  TensorFile f{WeightsKind::table, {}};
  f.tensors.push_back({"table", {static_cast<std::uint32_t>(t.rows), static_cast<std::uint32_t>(t.width)}, t.data});
  f.tensors.push_back({"meta", {2}, {t.source == EmbeddingSource::pretrained ? 1.0f : 0.0f, t.augmented ? 1.0f : 0.0f}});
  return encode_tensors(f);
}

inline EmbeddingTable load_table(std::string_view bytes) {
  auto f = parse_tensors(bytes, WeightsKind::table);
  if (f.tensors.size() != 2 || f.tensors[0].shape.size() != 2 || f.tensors[1].shape != std::vector<std::uint32_t>{2})
    throw WeightsError("embedding table file: unexpected tensor layout");
  EmbeddingTable t;
  t.rows = f.tensors[0].shape[0];
  t.width = f.tensors[0].shape[1];
  t.data = std::move(f.tensors[0].data);
  t.source = f.tensors[1].data[0] != 0.0f ? EmbeddingSource::pretrained : EmbeddingSource::fallback;
  t.augmented = f.tensors[1].data[1] != 0.0f;
  return t;
}

}  // namespace legend
