#pragma once

// Dense row-major float32 embedding matrices and the "ADSK" binary format.
//
// On-disk layout (little-endian, no padding):
//
//   offset  size  field
//   0       4     magic "ADSK"
//   4       4     version (u32) = 1
//   8       4     dim (u32)
//   12      8     count (u64)
//   20      4*dim*count  float32 payload, row-major
//
// A file is accepted only if its size matches the header exactly.

#include "adkit/error.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adkit {

class EmbeddingMatrix
{
public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::size_t dim, std::size_t count)
    : EmbeddingMatrix(dim, count, std::vector<float>(dim * count, 0.0f))
  {}

  EmbeddingMatrix(std::size_t dim, std::size_t count, std::vector<float> data)
    : dim_(dim)
    , count_(count)
    , data_(std::move(data))
  {
    if (dim_ == 0)
      throw DimensionError("embedding dimension must be at least 1");
    if (data_.size() != dim_ * count_)
      throw DimensionError("embedding payload has " +
                           std::to_string(data_.size()) + " values, expected " +
                           std::to_string(dim_ * count_));
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i]))
        throw DataError("non-finite embedding value in row " +
                        std::to_string(i / dim_));
    }
  }

  // Single-row convenience constructor.
  static EmbeddingMatrix from_row(std::span<const float> row)
  {
    return EmbeddingMatrix(row.size(), 1, {row.begin(), row.end()});
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }

  std::span<const float> row(std::size_t i) const
  {
    return {data_.data() + i * dim_, dim_};
  }

  std::span<const float> data() const noexcept { return data_; }

  friend bool operator==(const EmbeddingMatrix&,
                         const EmbeddingMatrix&) = default;

private:
  std::size_t dim_ = 1;
  std::size_t count_ = 0;
  std::vector<float> data_;
};

// ---------------------------------------------------------------------------
// Vector helpers. Accumulation is in double.

inline double dot(std::span<const float> a, std::span<const float> b)
{
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

inline double l2_norm(std::span<const float> a)
{
  return std::sqrt(dot(a, a));
}

// Cosine similarity clamped to [-1, 1]. Zero vectors have similarity 0.
inline double cosine(std::span<const float> a, std::span<const float> b)
{
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0)
    return 0.0;
  const double c = dot(a, b) / (na * nb);
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

inline std::vector<float> normalized(std::span<const float> v)
{
  const double n = l2_norm(v);
  if (n == 0.0)
    throw DataError("cannot normalize a zero vector");
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = static_cast<float>(static_cast<double>(v[i]) / n);
  return out;
}

// Returns a copy with every row scaled to unit L2 norm. Zero rows are
// rejected with DataError.
inline EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m)
{
  std::vector<float> out;
  out.reserve(m.dim() * m.count());
  for (std::size_t r = 0; r < m.count(); ++r) {
    if (l2_norm(m.row(r)) == 0.0)
      throw DataError("zero vector at row " + std::to_string(r));
    const auto row = normalized(m.row(r));
    out.insert(out.end(), row.begin(), row.end());
  }
  return {m.dim(), m.count(), std::move(out)};
}

// Gathers the listed rows into a new matrix, in the given order.
inline EmbeddingMatrix gather_rows(const EmbeddingMatrix& m,
                                   std::span<const std::size_t> rows)
{
  std::vector<float> out;
  out.reserve(m.dim() * rows.size());
  for (const auto r : rows) {
    if (r >= m.count())
      throw DimensionError("row " + std::to_string(r) + " out of range");
    const auto src = m.row(r);
    out.insert(out.end(), src.begin(), src.end());
  }
  return {m.dim(), rows.size(), std::move(out)};
}

// ---------------------------------------------------------------------------
// Binary format

namespace format {

inline constexpr std::array<char, 4> magic = { 'A', 'D', 'S', 'K' };
inline constexpr std::uint32_t version = 1;
inline constexpr std::size_t header_size = 4 + 4 + 4 + 8;

namespace detail {

template<typename T>
void put_le(std::string& out, T value)
{
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

template<typename T>
T get_le(const char* p)
{
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<T>(bits);
}

} // namespace detail

inline std::string encode(const EmbeddingMatrix& m)
{
  if (m.dim() > std::numeric_limits<std::uint32_t>::max())
    throw DimensionError("dimension does not fit in u32");
  std::string out;
  out.reserve(header_size + 4 * m.data().size());
  out.append(magic.data(), magic.size());
  detail::put_le<std::uint32_t>(out, version);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.count()));
  for (const float v : m.data())
    detail::put_le<float>(out, v);
  return out;
}

inline EmbeddingMatrix decode(std::string_view bytes)
{
  if (bytes.size() < header_size)
    throw FormatError("embedding file shorter than its header");
  if (std::memcmp(bytes.data(), magic.data(), magic.size()) != 0)
    throw FormatError("bad magic, expected \"ADSK\"");
  const auto ver = detail::get_le<std::uint32_t>(bytes.data() + 4);
  if (ver != version)
    throw FormatError("unsupported embedding format version " +
                      std::to_string(ver));
  const auto dim = detail::get_le<std::uint32_t>(bytes.data() + 8);
  const auto count = detail::get_le<std::uint64_t>(bytes.data() + 12);
  if (dim == 0)
    throw FormatError("embedding header declares dim = 0");
  const std::uint64_t payload = bytes.size() - header_size;
  if (count > payload / 4 / dim)
    throw FormatError("embedding payload truncated: header declares " +
                      std::to_string(count) + " rows of dim " +
                      std::to_string(dim));
  if (payload != static_cast<std::uint64_t>(dim) * count * 4)
    throw FormatError("embedding payload size does not match header");

  std::vector<float> data(static_cast<std::size_t>(dim * count));
  const char* p = bytes.data() + header_size;
  for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
    data[i] = detail::get_le<float>(p);
    if (!std::isfinite(data[i]))
      throw DataError("non-finite value in embedding payload at row " +
                      std::to_string(i / dim));
  }
  return {dim, static_cast<std::size_t>(count), std::move(data)};
}

} // namespace format

inline std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError("cannot open " + path);
  return { std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>() };
}

inline void write_file(const std::string& path, std::string_view bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw FormatError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw FormatError("short write to " + path);
}

inline EmbeddingMatrix load_embeddings(const std::string& path)
{
  return format::decode(read_file(path));
}

inline void save_embeddings(const std::string& path, const EmbeddingMatrix& m)
{
  write_file(path, format::encode(m));
}

} // namespace adkit
