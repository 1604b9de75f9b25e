#pragma once

// Clause-conditioned literal scorer.
//
// For a cube with literals l_1..l_m, x_i = [v_{l_i}, polarity(l_i)] and
//   g   = rho( sum_i phi(x_i) )
//   s_i = sigmoid( psi([x_i, g]) )
// where every MLP is Dense -> relu -> Dense. Literals are always visited in
// the cube's canonical order, so g and every s_i are independent of the order
// in which a caller listed the literals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "legend/cti.hpp"
#include "legend/cube.hpp"
#include "legend/embedder.hpp"
#include "legend/pdr.hpp"
#include "legend/rng.hpp"
#include "legend/tensor_io.hpp"

namespace legend {

inline constexpr std::size_t kScorerHidden = 64;

template <class T>
struct Dense {
  std::size_t in = 0, out = 0;
  std::vector<T> W, b;  // W: out x in, row-major

  void apply(std::span<const T> x, std::span<T> y) const {
    for (std::size_t r = 0; r < out; ++r) {
      T acc = b[r];
      const T* w = W.data() + r * in;
      for (std::size_t k = 0; k < in; ++k) acc += w[k] * x[k];
      y[r] = acc;
    }
  }
};

template <class T>
struct Mlp {
  Dense<T> l1, l2;
};

template <class T>
struct ScorerWeights {
  std::size_t input = 0;   // d + 2: augmented embedding plus polarity bit
  std::size_t hidden = 0;
  Mlp<T> phi, rho, psi;

  // Visits the twelve parameter tensors in file order.
  template <class F>
  void for_each_tensor(F&& f) { visit(*this, f); }
  template <class F>
  void for_each_tensor(F&& f) const { visit(*this, f); }

  // Same shapes, all zeros.
  ScorerWeights zeros_like() const {
    ScorerWeights z = *this;
    z.for_each_tensor([](std::vector<T>& v) { std::fill(v.begin(), v.end(), T(0)); });
    return z;
  }

  template <class U>
  ScorerWeights<U> cast() const {
    ScorerWeights<U> o;
    o.input = input;
    o.hidden = hidden;
    auto conv = [](const Dense<T>& d) {
      return Dense<U>{d.in, d.out, std::vector<U>(d.W.begin(), d.W.end()), std::vector<U>(d.b.begin(), d.b.end())};
    };
    o.phi = {conv(phi.l1), conv(phi.l2)};
    o.rho = {conv(rho.l1), conv(rho.l2)};
    o.psi = {conv(psi.l1), conv(psi.l2)};
    return o;
  }

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    for (auto* m : {&self.phi, &self.rho, &self.psi}) {
      f(m->l1.W);
      f(m->l1.b);
      f(m->l2.W);
      f(m->l2.b);
    }
  }
};

template <class T = float>
ScorerWeights<T> init_scorer(std::uint64_t seed, std::size_t embedding_width = kEmbeddingWidth + 1,
                             std::size_t hidden = kScorerHidden) {
  Xorshift64 rng(seed);
  ScorerWeights<T> w;
  w.input = embedding_width + 1;
  w.hidden = hidden;
  auto dense = [&](std::size_t in, std::size_t out) {
    Dense<T> d{in, out, std::vector<T>(in * out), std::vector<T>(out)};
    const double a = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& x : d.W) x = static_cast<T>(rng.uniform(-a, a));
    for (auto& x : d.b) x = static_cast<T>(rng.uniform(-a, a));
    return d;
  };
  w.phi = {dense(w.input, hidden), dense(hidden, hidden)};
  w.rho = {dense(hidden, hidden), dense(hidden, hidden)};
  w.psi = {dense(w.input + hidden, hidden), dense(hidden, 1)};
  return w;
}

// ---------------------------------------------------------------------------
// Forward and backward passes.

namespace detail {

template <class T>
T sigmoid(T z) {
  return z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

// Binary cross-entropy with logits.
template <class T>
T bce_logit(T z, T y) {
  return std::max(z, T(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
}

template <class T>
struct MlpTrace {
  std::vector<T> a;  // pre-activation of the hidden layer
  std::vector<T> r;  // relu(a)
  std::vector<T> y;  // output
};

template <class T>
void mlp_forward(const Mlp<T>& m, std::span<const T> x, MlpTrace<T>& t) {
  t.a.resize(m.l1.out);
  t.r.resize(m.l1.out);
  t.y.resize(m.l2.out);
  m.l1.apply(x, t.a);
  for (std::size_t i = 0; i < t.a.size(); ++i) t.r[i] = t.a[i] > T(0) ? t.a[i] : T(0);
  m.l2.apply(t.r, t.y);
}

// Accumulates parameter gradients of m into gm given dL/dy; writes dL/dx to dx
// when non-empty.
template <class T>
void mlp_backward(const Mlp<T>& m, std::span<const T> x, const MlpTrace<T>& t, std::span<const T> dy,
                  Mlp<T>& gm, std::span<T> dx) {
  std::vector<T> dr(m.l1.out, T(0));
  for (std::size_t o = 0; o < m.l2.out; ++o) {
    gm.l2.b[o] += dy[o];
    const T* w = m.l2.W.data() + o * m.l2.in;
    T* gw = gm.l2.W.data() + o * m.l2.in;
    for (std::size_t k = 0; k < m.l2.in; ++k) {
      gw[k] += dy[o] * t.r[k];
      dr[k] += dy[o] * w[k];
    }
  }
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), T(0));
  for (std::size_t h = 0; h < m.l1.out; ++h) {
    if (!(t.a[h] > T(0))) continue;
    const T da = dr[h];
    gm.l1.b[h] += da;
    const T* w = m.l1.W.data() + h * m.l1.in;
    T* gw = gm.l1.W.data() + h * m.l1.in;
    for (std::size_t k = 0; k < m.l1.in; ++k) {
      gw[k] += da * x[k];
      if (!dx.empty()) dx[k] += da * w[k];
    }
  }
}

}  // namespace detail

// Scorer input rows for a cube, in canonical literal order.
template <class T>
std::vector<std::vector<T>> scorer_inputs(const Cube& cube, const EmbeddingTable& table, std::size_t input_width) {
  if (table.width + 1 != input_width)
    throw std::invalid_argument("embedding width " + std::to_string(table.width) +
                                " does not match scorer input width " + std::to_string(input_width));
  std::vector<std::vector<T>> xs;
  xs.reserve(cube.size());
  for (auto l : cube) {
    auto row = table.row(l.latch);
    std::vector<T> x(row.begin(), row.end());
    x.push_back(l.value ? T(1) : T(0));
    xs.push_back(std::move(x));
  }
  return xs;
}

template <class T>
struct ClauseTrace {
  std::vector<detail::MlpTrace<T>> phi;
  std::vector<T> sum;
  detail::MlpTrace<T> rho;
  std::vector<std::vector<T>> u;  // [x_i, g]
  std::vector<detail::MlpTrace<T>> psi;
  std::vector<T> logits;
};

template <class T>
ClauseTrace<T> scorer_forward(const ScorerWeights<T>& w, const std::vector<std::vector<T>>& xs) {
  ClauseTrace<T> t;
  const std::size_t m = xs.size(), h = w.hidden;
  t.phi.resize(m);
  t.sum.assign(h, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    detail::mlp_forward(w.phi, std::span<const T>(xs[i]), t.phi[i]);
    for (std::size_t k = 0; k < h; ++k) t.sum[k] += t.phi[i].y[k];
  }
  detail::mlp_forward(w.rho, std::span<const T>(t.sum), t.rho);
  t.u.resize(m);
  t.psi.resize(m);
  t.logits.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    t.u[i] = xs[i];
    t.u[i].insert(t.u[i].end(), t.rho.y.begin(), t.rho.y.end());
    detail::mlp_forward(w.psi, std::span<const T>(t.u[i]), t.psi[i]);
    t.logits[i] = t.psi[i].y[0];
  }
  return t;
}

// dlogits: dL/dz_i. Accumulates into grad.
template <class T>
void scorer_backward(const ScorerWeights<T>& w, const std::vector<std::vector<T>>& xs, const ClauseTrace<T>& t,
                     std::span<const T> dlogits, ScorerWeights<T>& grad) {
  const std::size_t m = xs.size(), h = w.hidden, D = w.input;
  std::vector<T> dg(h, T(0)), du(D + h);
  for (std::size_t i = 0; i < m; ++i) {
    T dz[1] = {dlogits[i]};
    detail::mlp_backward(w.psi, std::span<const T>(t.u[i]), t.psi[i], std::span<const T>(dz, 1), grad.psi,
                         std::span<T>(du));
    for (std::size_t k = 0; k < h; ++k) dg[k] += du[D + k];
  }
  std::vector<T> dsum(h);
  detail::mlp_backward(w.rho, std::span<const T>(t.sum), t.rho, std::span<const T>(dg), grad.rho, std::span<T>(dsum));
  for (std::size_t i = 0; i < m; ++i)
    detail::mlp_backward(w.phi, std::span<const T>(xs[i]), t.phi[i], std::span<const T>(dsum), grad.phi, std::span<T>{});
}

// Scores in canonical literal order. Only the table is consulted.
template <class T>
std::vector<T> score_clause_literals(const Cube& cube, const EmbeddingTable& table, const ScorerWeights<T>& w) {
  auto xs = scorer_inputs<T>(cube, table, w.input);
  auto t = scorer_forward(w, xs);
  std::vector<T> s(t.logits.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = detail::sigmoid(t.logits[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Weights files.

inline TensorFile to_tensors(const ScorerWeights<float>& w) {
  TensorFile f{WeightsKind::scorer, {}};
  std::size_t idx = 0;
  for (const auto* m : {&w.phi, &w.rho, &w.psi})
    for (const auto* d : {&m->l1, &m->l2}) {
      f.tensors.push_back({tensor_name(WeightsKind::scorer, idx++),
                           {static_cast<std::uint32_t>(d->out), static_cast<std::uint32_t>(d->in)}, d->W});
      f.tensors.push_back({tensor_name(WeightsKind::scorer, idx++), {static_cast<std::uint32_t>(d->out)}, d->b});
    }
  return f;
}

inline ScorerWeights<float> scorer_from_tensors(const TensorFile& f) {
  if (f.tensors.size() != 12)
    throw WeightsError("scorer weights: expected 12 tensors, got " + std::to_string(f.tensors.size()));
  auto dense = [&](std::size_t i) {
    const auto &W = f.tensors[i], &b = f.tensors[i + 1];
    if (W.shape.size() != 2 || b.shape != std::vector<std::uint32_t>{W.shape[0]})
      throw WeightsError("scorer weights: tensor " + W.name + " or " + b.name + " has the wrong shape");
    return Dense<float>{W.shape[1], W.shape[0], W.data, b.data};
  };
  ScorerWeights<float> w;
  w.phi = {dense(0), dense(2)};
  w.rho = {dense(4), dense(6)};
  w.psi = {dense(8), dense(10)};
  w.input = w.phi.l1.in;
  w.hidden = w.phi.l1.out;
  const std::size_t D = w.input, h = w.hidden;
  auto check = [&](const Dense<float>& d, std::size_t in, std::size_t out, const char* name) {
    if (d.in != in || d.out != out) throw WeightsError(std::string("scorer weights: ") + name + " has the wrong shape");
  };
  check(w.phi.l2, h, h, "phi.W2");
  check(w.rho.l1, h, h, "rho.W1");
  check(w.rho.l2, h, h, "rho.W2");
  check(w.psi.l1, D + h, h, "psi.W1");
  check(w.psi.l2, h, 1, "psi.W2");
  return w;
}

inline ScorerWeights<float> load_scorer_weights(std::string_view bytes) {
  return scorer_from_tensors(parse_tensors(bytes, WeightsKind::scorer));
}
inline std::string export_scorer_weights(const ScorerWeights<float>& w) { return encode_tensors(to_tensors(w)); }

// ---------------------------------------------------------------------------
// Clause assembly.

struct AssemblyConfig {
  double theta = 0.5;
  double decay = 0.9;
  double floor = 0.05;
};

// Keeps literals scoring >= theta; when none survive, theta is multiplied by
// decay until one does or theta drops below floor (then: discarded).
template <class T>
std::optional<Clause> assemble_clause(const Cube& cube, std::span<const T> scores, const AssemblyConfig& cfg) {
  if (scores.size() != cube.size()) throw std::invalid_argument("scores are not aligned with the cube");
  if (!(cfg.theta > 0.0 && cfg.theta <= 1.0) || !(cfg.decay > 0.0 && cfg.decay < 1.0) ||
      !(cfg.floor > 0.0 && cfg.floor <= cfg.theta))
    throw std::invalid_argument("assembly config out of range");
  double theta = cfg.theta;
  for (;;) {
    std::vector<Literal> kept;
    for (std::size_t i = 0; i < cube.size(); ++i)
      if (static_cast<double>(scores[i]) >= theta) kept.push_back(cube[i]);
    if (!kept.empty()) return negate(Cube(std::move(kept)));
    theta *= cfg.decay;
    if (theta < cfg.floor) return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Labels from an oracle invariant.

struct LabeledCti {
  Cube cube;
  std::vector<std::uint8_t> keep;  // aligned with cube
  Clause covering;
  std::size_t frame = 0;
  std::vector<std::uint8_t> inputs;
};

struct LabelStats {
  std::size_t labeled = 0;
  std::size_t skipped = 0;  // no covering clause
};

// A clause c covers CTI cube s when the cube of ~c is a subset of s. Among
// covering clauses the latest discovery frame wins; then the shortest clause;
// then the lexicographically smallest.
inline std::vector<LabeledCti> generate_labels(std::span<const CtiSample> ctis, std::span<const Lemma> invariant,
                                               LabelStats* stats = nullptr) {
  std::vector<LabeledCti> out;
  LabelStats st;
  for (const auto& s : ctis) {
    const Lemma* best = nullptr;
    Cube best_cube;
    for (const auto& lem : invariant) {
      Cube c = negate(lem.clause);
      if (!c.subset_of(s.cube)) continue;
      bool better = !best || lem.frame > best->frame ||
                    (lem.frame == best->frame &&
                     (c.size() < best_cube.size() || (c.size() == best_cube.size() && c < best_cube)));
      if (better) {
        best = &lem;
        best_cube = c;
      }
    }
    if (!best) {
      ++st.skipped;
      continue;
    }
    LabeledCti l{s.cube, {}, best->clause, best->frame, s.inputs};
    for (auto lit : s.cube) l.keep.push_back(best_cube.contains(lit) ? 1 : 0);
    out.push_back(std::move(l));
    ++st.labeled;
  }
  if (stats) *stats = st;
  return out;
}

// CTI pool lines with a keep/drop mask column ('1' keep) and the frame.
inline void write_labeled_pool(std::ostream& os, std::span<const LabeledCti> data, std::size_t latches) {
  os << "# labeled-cti v1 latches=" << latches << " samples=" << data.size() << '\n';
  for (const auto& d : data) {
    for (auto l : d.cube) os << l.signed_ordinal() << ' ';
    os << "| ";
    for (auto b : d.inputs) os << (b ? '1' : '0');
    if (d.inputs.empty()) os << '-';
    os << ' ';
    for (auto k : d.keep) os << (k ? '1' : '0');
    os << ' ' << d.frame << '\n';
  }
}

inline std::vector<LabeledCti> read_labeled_pool(std::istream& in) {
  std::vector<LabeledCti> out;
  for (auto& e : read_cti_pool(in)) {
    std::istringstream extra(e.extra);
    std::string mask;
    LabeledCti l{std::move(e.cube), {}, {}, 0, std::move(e.inputs)};
    if (!(extra >> mask >> l.frame) || mask.size() != l.cube.size())
      throw std::runtime_error("labeled CTI line: mask does not match the cube");
    std::vector<Literal> kept;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i] != '0' && mask[i] != '1') throw std::runtime_error("labeled CTI line: bad mask");
      l.keep.push_back(mask[i] == '1');
      if (mask[i] == '1') kept.push_back(l.cube[i]);
    }
    l.covering = negate(Cube(std::move(kept)));
    out.push_back(std::move(l));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training.

enum class Optimizer { adam, sgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 256;  // clauses per step; 0 = full batch
  std::uint64_t seed = 0;
  std::size_t hidden = kScorerHidden;
  Optimizer optimizer = Optimizer::adam;
  AssemblyConfig assembly;
};

struct TrainingExample {
  std::size_t table = 0;  // index into the tables span
  Cube cube;
  std::vector<std::uint8_t> keep;
};

struct TrainResult {
  ScorerWeights<float> weights;
  std::vector<double> loss;  // mean literal loss seen during each epoch
};

// Sum of literal losses over the examples, accumulating gradients of the sum
// into grad when given.
template <class T>
double scorer_loss(const ScorerWeights<T>& w, std::span<const TrainingExample> data,
                   std::span<const EmbeddingTable> tables, ScorerWeights<T>* grad, std::size_t* literals = nullptr) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& ex : data) {
    auto xs = scorer_inputs<T>(ex.cube, tables[ex.table], w.input);
    auto t = scorer_forward(w, xs);
    std::vector<T> dz(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const T y = ex.keep[i] ? T(1) : T(0);
      total += static_cast<double>(detail::bce_logit(t.logits[i], y));
      dz[i] = detail::sigmoid(t.logits[i]) - y;
    }
    n += xs.size();
    if (grad) scorer_backward(w, xs, t, std::span<const T>(dz), *grad);
  }
  if (literals) *literals = n;
  return total;
}

inline TrainResult train_scorer(std::span<const TrainingExample> data, std::span<const EmbeddingTable> tables,
                                const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("no training data");
  for (const auto& ex : data) {
    if (ex.table >= tables.size()) throw std::invalid_argument("training example refers to a missing table");
    if (ex.keep.size() != ex.cube.size()) throw std::invalid_argument("labels are not aligned with the cube");
  }
  TrainResult res;
  res.weights = init_scorer<float>(cfg.seed, tables[data[0].table].width, cfg.hidden);
  auto& w = res.weights;

  std::vector<std::vector<float>*> params;
  w.for_each_tensor([&](std::vector<float>& v) { params.push_back(&v); });
  std::vector<std::vector<double>> m1, m2;
  for (auto* p : params) {
    m1.emplace_back(p->size(), 0.0);
    m2.emplace_back(p->size(), 0.0);
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::uint64_t step = 0;

  Xorshift64 rng(mix_seed(cfg.seed, 0x7EA1));
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t bs = cfg.batch_size == 0 ? data.size() : cfg.batch_size;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (bs < data.size())
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    std::size_t epoch_lits = 0;
    for (std::size_t start = 0; start < data.size(); start += bs) {
      std::vector<TrainingExample> batch;
      for (std::size_t i = start; i < std::min(start + bs, data.size()); ++i) batch.push_back(data[order[i]]);
      auto grad = w.zeros_like();
      std::size_t lits = 0;
      epoch_loss += scorer_loss(w, std::span<const TrainingExample>(batch), tables, &grad, &lits);
      epoch_lits += lits;
      if (lits == 0) continue;
      std::vector<std::vector<float>*> gparams;
      grad.for_each_tensor([&](std::vector<float>& v) { gparams.push_back(&v); });
      ++step;
      const double scale = 1.0 / static_cast<double>(lits);
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto& x = *params[p];
        const auto& g = *gparams[p];
        for (std::size_t k = 0; k < x.size(); ++k) {
          const double gk = g[k] * scale;
          if (cfg.optimizer == Optimizer::sgd) {
            x[k] = static_cast<float>(x[k] - cfg.learning_rate * gk);
          } else {
            m1[p][k] = beta1 * m1[p][k] + (1 - beta1) * gk;
            m2[p][k] = beta2 * m2[p][k] + (1 - beta2) * gk * gk;
            const double mh = m1[p][k] / (1 - std::pow(beta1, static_cast<double>(step)));
            const double vh = m2[p][k] / (1 - std::pow(beta2, static_cast<double>(step)));
            x[k] = static_cast<float>(x[k] - cfg.learning_rate * mh / (std::sqrt(vh) + adam_eps));
          }
        }
      }
    }
    res.loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(epoch_lits, 1)));
  }
  return res;
}

// Fraction of literals whose thresholded score matches the label.
inline double scorer_accuracy(const ScorerWeights<float>& w, std::span<const TrainingExample> data,
                              std::span<const EmbeddingTable> tables, double theta = 0.5) {
  std::size_t right = 0, total = 0;
  for (const auto& ex : data) {
    auto s = score_clause_literals(ex.cube, tables[ex.table], w);
    for (std::size_t i = 0; i < s.size(); ++i) {
      right += (static_cast<double>(s[i]) >= theta) == (ex.keep[i] != 0);
      ++total;
    }
  }
  return total ? static_cast<double>(right) / static_cast<double>(total) : 0.0;
}

}  // namespace legend
