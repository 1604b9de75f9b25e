#pragma once

// Weight interchange files.
//
// Binary layout, all integers u32 little-endian:
//   "LGWT" version kind count
//   count x { rank dims[rank] data[prod(dims)] as f32 little-endian, row-major }
// Tensors carry no names in the file; their order is fixed per kind and the
// names below are derived from position. A JSON rendering with the same
// content ({"format", "version", "kind", "tensors": [{"name", "shape",
// "data"}]}) is accepted wherever the binary form is.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace legend {

inline constexpr std::uint32_t kWeightsVersion = 1;

enum class WeightsKind : std::uint32_t { encoder = 1, scorer = 2, table = 3 };

inline const char* to_string(WeightsKind k) {
  switch (k) {
    case WeightsKind::encoder: return "encoder";
    case WeightsKind::scorer: return "scorer";
    case WeightsKind::table: return "table";
  }
  return "?";
}

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  std::size_t numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct TensorFile {
  WeightsKind kind = WeightsKind::encoder;
  std::vector<Tensor> tensors;
  friend bool operator==(const TensorFile&, const TensorFile&) = default;
};

class WeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "weights I/O assumes a little-endian host");

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : b_(bytes) {}
  bool u32(std::uint32_t& v) {
    if (pos_ + 4 > b_.size()) return false;
    std::memcpy(&v, b_.data() + pos_, 4);
    pos_ += 4;
    return true;
  }
  bool floats(std::vector<float>& v, std::size_t n) {
    if (n > (b_.size() - pos_) / 4) return false;
    v.resize(n);
    std::memcpy(v.data(), b_.data() + pos_, n * 4);
    pos_ += n * 4;
    return true;
  }
  bool at_end() const noexcept { return pos_ == b_.size(); }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Position-derived tensor names.
inline std::string tensor_name(WeightsKind kind, std::size_t index) {
  static const char* part[] = {"W1", "b1", "W2", "b2"};
  switch (kind) {
    case WeightsKind::encoder:
      if (index == 0) return "eps";
      return "layer" + std::to_string((index - 1) / 4 + 1) + "." + part[(index - 1) % 4];
    case WeightsKind::scorer: {
      static const char* mlp[] = {"phi", "rho", "psi"};
      if (index >= 12) break;
      return std::string(mlp[index / 4]) + "." + part[index % 4];
    }
    case WeightsKind::table:
      if (index == 0) return "table";
      if (index == 1) return "meta";
      break;
  }
  return "tensor" + std::to_string(index);
}

inline std::string encode_tensors(const TensorFile& f) {
  std::string out = "LGWT";
  detail::put_u32(out, kWeightsVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(f.kind));
  detail::put_u32(out, static_cast<std::uint32_t>(f.tensors.size()));
  for (const auto& t : f.tensors) {
    if (t.data.size() != t.numel()) throw WeightsError("tensor " + t.name + ": data does not match shape");
    detail::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) detail::put_u32(out, d);
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * 4);
  }
  return out;
}

// Shapes are validated by the caller.
inline TensorFile decode_tensors(std::string_view bytes, WeightsKind expected) {
  if (bytes.substr(0, 4) != "LGWT") throw WeightsError("not a weights file (bad magic)");
  detail::ByteReader r(bytes.substr(4));
  std::uint32_t version, kind, count;
  if (!r.u32(version) || !r.u32(kind) || !r.u32(count)) throw WeightsError("truncated header");
  if (version != kWeightsVersion) throw WeightsError("unsupported weights version " + std::to_string(version));
  if (kind != static_cast<std::uint32_t>(expected))
    throw WeightsError(std::string("expected ") + to_string(expected) + " weights, found kind " + std::to_string(kind));
  TensorFile f{expected, {}};
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = tensor_name(expected, i);
    Tensor t{name, {}, {}};
    std::uint32_t rank;
    if (!r.u32(rank)) throw WeightsError("truncated file: missing tensor " + name);
    if (rank > 4) throw WeightsError("tensor " + name + ": rank " + std::to_string(rank) + " too large");
    t.shape.resize(rank);
    for (auto& d : t.shape)
      if (!r.u32(d)) throw WeightsError("truncated file: shape of tensor " + name);
    if (!r.floats(t.data, t.numel())) throw WeightsError("truncated file: data of tensor " + name);
    for (float x : t.data)
      if (!std::isfinite(x)) throw WeightsError("tensor " + name + " has a non-finite entry");
    f.tensors.push_back(std::move(t));
  }
  if (!r.at_end()) throw WeightsError("trailing bytes after the last tensor");
  return f;
}

inline std::string tensors_to_json(const TensorFile& f) {
  nlohmann::json j;
  j["format"] = "legend-weights";
  j["version"] = kWeightsVersion;
  j["kind"] = to_string(f.kind);
  j["tensors"] = nlohmann::json::array();
  for (const auto& t : f.tensors) j["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"data", t.data}});
  return j.dump(1);
}

inline TensorFile tensors_from_json(std::string_view text, WeightsKind expected) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw WeightsError(std::string("weights JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "legend-weights") throw WeightsError("weights JSON: unknown format");
    if (j.at("version") != kWeightsVersion)
      throw WeightsError("unsupported weights version " + j.at("version").dump());
    if (j.at("kind") != to_string(expected))
      throw WeightsError(std::string("expected ") + to_string(expected) + " weights, found " + j.at("kind").dump());
    const auto& ts = j.at("tensors");
    TensorFile f{expected, {}};
    for (std::size_t i = 0; i < ts.size(); ++i) {
      Tensor t{tensor_name(expected, i), ts[i].at("shape").get<std::vector<std::uint32_t>>(),
               ts[i].at("data").get<std::vector<float>>()};
      if (t.data.size() != t.numel()) throw WeightsError("tensor " + t.name + ": data does not match shape");
      for (float x : t.data)
        if (!std::isfinite(x)) throw WeightsError("tensor " + t.name + " has a non-finite entry");
      f.tensors.push_back(std::move(t));
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw WeightsError(std::string("weights JSON: ") + e.what());
  }
}

// Binary or JSON, by the first byte.
inline TensorFile parse_tensors(std::string_view bytes, WeightsKind expected) {
  auto p = bytes.find_first_not_of(" \t\r\n");
  if (p != std::string_view::npos && bytes[p] == '{') return tensors_from_json(bytes, expected);
  return decode_tensors(bytes, expected);
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace legend
