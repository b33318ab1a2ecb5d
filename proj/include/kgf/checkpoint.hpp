#pragma once

// KGF1 checkpoint container. Layout (all integers little-endian):
//
//   "KGF1"                      4-byte magic
//   u32 array_count
//   array_count times:
//     u32 name_length, name bytes (UTF-8, no terminator)
//     u8  dtype                 0 = f32, 1 = f64, 2 = i64, 3 = u8
//     u32 ndim, then ndim x u64 extents
//     payload                   row-major, product(extents) elements
//
// See docs/checkpoint_format.md for the arrays a training run writes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgf/error.hpp"
#include "kgf/matrix.hpp"
#include "kgf/models.hpp"
#include "kgf/text.hpp"

namespace kgf {

enum class DType : std::uint8_t { F32 = 0, F64 = 1, I64 = 2, U8 = 3 };

inline std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::I64: return 8;
    case DType::U8: return 1;
  }
  return 0;
}

struct NamedArray {
  std::string name;
  DType dtype = DType::F64;
  std::vector<std::uint64_t> shape;
  std::string payload;  // little-endian bytes

  std::size_t elements() const {
    return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1}, std::multiplies<>());
  }
};

namespace detail {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) fail(ErrorKind::CorruptDataset, "checkpoint truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return value;
}

}  // namespace detail

class Checkpoint {
 public:
  template <typename Real>
  void add_matrix(const std::string& name, const Matrix<Real>& m) {
    add_reals<Real>(name, {m.rows(), m.cols()}, m.data());
  }

  template <typename Real>
  void add_reals(const std::string& name, std::vector<std::uint64_t> shape, std::span<const Real> values) {
    static_assert(std::is_same_v<Real, float> || std::is_same_v<Real, double>);
    NamedArray a{name, std::is_same_v<Real, float> ? DType::F32 : DType::F64, std::move(shape), {}};
    a.payload.reserve(values.size() * sizeof(Real));
    for (Real v : values) {
      if constexpr (std::is_same_v<Real, float>) {
        detail::put_le(a.payload, std::bit_cast<std::uint32_t>(v));
      } else {
        detail::put_le(a.payload, std::bit_cast<std::uint64_t>(v));
      }
    }
    push(std::move(a));
  }

  void add_ints(const std::string& name, std::span<const std::int64_t> values) {
    NamedArray a{name, DType::I64, {values.size()}, {}};
    for (auto v : values) detail::put_le(a.payload, static_cast<std::uint64_t>(v));
    push(std::move(a));
  }

  void add_bytes(const std::string& name, std::string_view bytes) {
    push(NamedArray{name, DType::U8, {bytes.size()}, std::string(bytes)});
  }

  const NamedArray* find(std::string_view name) const {
    for (const auto& a : arrays_) {
      if (a.name == name) return &a;
    }
    return nullptr;
  }

  const NamedArray& require(std::string_view name) const {
    const auto* a = find(name);
    if (!a) fail(ErrorKind::CorruptDataset, "checkpoint lacks array '" + std::string(name) + "'");
    return *a;
  }

  /// Any real array, widened or narrowed to Real.
  template <typename Real>
  std::vector<Real> reals(std::string_view name) const {
    const auto& a = require(name);
    std::vector<Real> out(a.elements());
    std::size_t pos = 0;
    for (auto& v : out) {
      if (a.dtype == DType::F32) {
        v = static_cast<Real>(std::bit_cast<float>(detail::get_le<std::uint32_t>(a.payload, pos)));
      } else if (a.dtype == DType::F64) {
        v = static_cast<Real>(std::bit_cast<double>(detail::get_le<std::uint64_t>(a.payload, pos)));
      } else {
        fail(ErrorKind::CorruptDataset, "array '" + a.name + "' is not real-valued");
      }
    }
    return out;
  }

  template <typename Real>
  Matrix<Real> matrix(std::string_view name) const {
    const auto& a = require(name);
    if (a.shape.size() != 2) fail(ErrorKind::CorruptDataset, "array '" + a.name + "' is not a matrix");
    Matrix<Real> m(a.shape[0], a.shape[1]);
    const auto values = reals<Real>(name);
    std::copy(values.begin(), values.end(), m.data().begin());
    return m;
  }

  std::vector<std::int64_t> ints(std::string_view name) const {
    const auto& a = require(name);
    if (a.dtype != DType::I64) fail(ErrorKind::CorruptDataset, "array '" + a.name + "' is not i64");
    std::vector<std::int64_t> out(a.elements());
    std::size_t pos = 0;
    for (auto& v : out) v = static_cast<std::int64_t>(detail::get_le<std::uint64_t>(a.payload, pos));
    return out;
  }

  std::string bytes(std::string_view name) const {
    const auto& a = require(name);
    if (a.dtype != DType::U8) fail(ErrorKind::CorruptDataset, "array '" + a.name + "' is not u8");
    return a.payload;
  }

  const std::vector<NamedArray>& arrays() const { return arrays_; }

  std::string serialize() const {
    std::string out = "KGF1";
    detail::put_le(out, static_cast<std::uint32_t>(arrays_.size()));
    for (const auto& a : arrays_) {
      detail::put_le(out, static_cast<std::uint32_t>(a.name.size()));
      out += a.name;
      out.push_back(static_cast<char>(a.dtype));
      detail::put_le(out, static_cast<std::uint32_t>(a.shape.size()));
      for (auto e : a.shape) detail::put_le(out, e);
      out += a.payload;
    }
    return out;
  }

  static Checkpoint parse(std::string_view data) {
    if (data.substr(0, 4) != "KGF1") fail(ErrorKind::CorruptDataset, "not a KGF1 checkpoint");
    std::size_t pos = 4;
    Checkpoint c;
    const auto count = detail::get_le<std::uint32_t>(data, pos);
    for (std::uint32_t k = 0; k < count; ++k) {
      NamedArray a;
      const auto len = detail::get_le<std::uint32_t>(data, pos);
      if (pos + len > data.size()) fail(ErrorKind::CorruptDataset, "checkpoint truncated");
      a.name = std::string(data.substr(pos, len));
      pos += len;
      const auto code = detail::get_le<std::uint8_t>(data, pos);
      if (code > 3) fail(ErrorKind::CorruptDataset, "unknown dtype in array '" + a.name + "'");
      a.dtype = static_cast<DType>(code);
      const auto ndim = detail::get_le<std::uint32_t>(data, pos);
      for (std::uint32_t i = 0; i < ndim; ++i) a.shape.push_back(detail::get_le<std::uint64_t>(data, pos));
      const std::size_t bytes = a.elements() * dtype_size(a.dtype);
      if (pos + bytes > data.size()) fail(ErrorKind::CorruptDataset, "checkpoint truncated in '" + a.name + "'");
      a.payload = std::string(data.substr(pos, bytes));
      pos += bytes;
      c.push(std::move(a));
    }
    if (pos != data.size()) fail(ErrorKind::CorruptDataset, "trailing bytes after checkpoint arrays");
    return c;
  }

  void save(const std::filesystem::path& path) const { text::write_file_atomic(path, serialize()); }

  static Checkpoint load(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) fail(ErrorKind::FileNotFound, path.string());
    return parse(text::read_file(path));
  }

 private:
  void push(NamedArray a) {
    if (find(a.name)) fail(ErrorKind::InvalidConfig, "duplicate checkpoint array '" + a.name + "'");
    arrays_.push_back(std::move(a));
  }

  std::vector<NamedArray> arrays_;
};

namespace checkpoint_names {
inline constexpr const char* kEntity = "entity_embeddings";
inline constexpr const char* kRelation = "relation_embeddings";
inline constexpr const char* kFamily = "model_family";
inline constexpr const char* kEpoch = "epoch";
inline constexpr const char* kDigest = "config_digest";
}  // namespace checkpoint_names

template <typename Real>
void add_model(Checkpoint& c, const ModelParams<Real>& params) {
  c.add_matrix(checkpoint_names::kEntity, params.entity);
  c.add_matrix(checkpoint_names::kRelation, params.relation);
  const std::int64_t family = static_cast<std::int64_t>(params.spec.family);
  c.add_ints(checkpoint_names::kFamily, std::span(&family, 1));
}

template <typename Real>
ModelParams<Real> read_model(const Checkpoint& c) {
  ModelParams<Real> params;
  params.entity = c.matrix<Real>(checkpoint_names::kEntity);
  params.relation = c.matrix<Real>(checkpoint_names::kRelation);
  const auto family = c.ints(checkpoint_names::kFamily);
  if (family.size() != 1 || family[0] < 0 || family[0] > 2) fail(ErrorKind::CorruptDataset, "bad model_family");
  params.spec.family = static_cast<ModelFamily>(family[0]);
  params.spec.dim = params.entity.cols();
  if (params.relation.cols() != params.spec.dim) fail(ErrorKind::CorruptDataset, "embedding widths differ");
  params.spec.validate();
  return params;
}

inline std::int64_t read_epoch(const Checkpoint& c) {
  const auto* a = c.find(checkpoint_names::kEpoch);
  return a ? c.ints(checkpoint_names::kEpoch).at(0) : 0;
}

}  // namespace kgf
