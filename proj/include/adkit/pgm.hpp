#pragma once

// Binary PGM (P5), 8-bit.

#include "adkit/embedding.hpp"
#include "adkit/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace adkit {

struct GrayImage
{
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels; // row-major
};

// Values in [0, 1] map to round(v * 255).
inline GrayImage quantize(std::span<const double> values, std::size_t height, std::size_t width)
{
  GrayImage img{ width, height, {} };
  img.pixels.reserve(values.size());
  for (const double v : values)
    img.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return img;
}

inline std::string encode_pgm(const GrayImage& img)
{
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

inline GrayImage decode_pgm(std::string_view bytes)
{
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n')
          ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_ws();
    std::size_t v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])))
      v = v * 10 + std::size_t(bytes[pos++] - '0');
    if (pos == start)
      throw FormatError("malformed PGM header");
    return v;
  };
  if (bytes.substr(0, 2) != "P5")
    throw FormatError("not a binary PGM (P5) file");
  pos = 2;
  GrayImage img;
  img.width = number();
  img.height = number();
  const auto maxval = number();
  if (maxval != 255)
    throw FormatError("only 8-bit PGM is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw FormatError("malformed PGM header");
  ++pos;
  if (bytes.size() - pos != img.width * img.height)
    throw FormatError("PGM payload size does not match header");
  img.pixels.assign(bytes.begin() + std::ptrdiff_t(pos), bytes.end());
  return img;
}

inline GrayImage load_pgm(const std::string& path)
{
  return decode_pgm(read_file(path));
}

inline void save_pgm(const std::string& path, const GrayImage& img)
{
  write_file(path, encode_pgm(img));
}

} // namespace adkit
