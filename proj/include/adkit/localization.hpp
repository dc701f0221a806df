#pragma once

// Anomaly localization from patch and prompt embeddings.
//
// For each patch the cosines to the two prompts are shifted into [0, 1] with
// a = (1 + cos) / 2, and the patch value is a_neg / (a_pos + a_neg): the
// share of prompt affinity held by the negative (anomaly-describing) prompt.
// The patch grid is then bilinearly upsampled (align_corners = false):
//
//   src = (dst + 0.5) * in / out - 0.5, clamped to [0, in - 1]
//   v   = lerp(lerp(p[y0][x0], p[y0][x1], fx), lerp(p[y1][x0], p[y1][x1], fx), fy)
//
// with y0 = floor(src_y), y1 = min(y0 + 1, in_h - 1), fy = src_y - y0, and
// the same along x.

#include "adkit/embedding.hpp"
#include "adkit/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

namespace adkit {

// Patch embeddings laid out row-major over an h x w grid, rows unit norm.
class PatchGrid
{
public:
  PatchGrid(std::size_t height, std::size_t width, const EmbeddingMatrix& patches)
    : height_(height)
    , width_(width)
    , patches_(normalize_rows(patches))
  {
    if (height == 0 || width == 0)
      throw DimensionError("patch grid must be at least 1x1");
    if (patches.count() != height * width)
      throw DimensionError("patch grid " + std::to_string(height) + "x" +
                           std::to_string(width) + " needs " +
                           std::to_string(height * width) + " embeddings, got " +
                           std::to_string(patches.count()));
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t dim() const noexcept { return patches_.dim(); }
  std::size_t size() const noexcept { return patches_.count(); }
  const EmbeddingMatrix& embeddings() const noexcept { return patches_; }
  std::span<const float> patch(std::size_t y, std::size_t x) const
  {
    return patches_.row(y * width_ + x);
  }

private:
  std::size_t height_;
  std::size_t width_;
  EmbeddingMatrix patches_;
};

struct Aggregator
{
  enum class Kind
  {
    max,
    top_fraction
  };
  Kind kind = Kind::top_fraction;
  double fraction = 0.01;

  static Aggregator max() { return { Kind::max, 1.0 }; }
  static Aggregator top(double q) { return { Kind::top_fraction, q }; }

  std::string name() const
  {
    if (kind == Kind::max)
      return "max";
    std::string q = std::to_string(fraction);
    q.erase(q.find_last_not_of('0') + 1);
    if (q.back() == '.')
      q.pop_back();
    return "topq(" + q + ")";
  }
};

// max, or the mean of the ceil(q * n) largest values (at least one).
inline double image_score(std::span<const double> values, const Aggregator& agg)
{
  if (values.empty())
    throw ArgumentError("image_score of an empty map");
  if (agg.kind == Aggregator::Kind::max)
    return *std::max_element(values.begin(), values.end());
  if (!(agg.fraction > 0.0) || agg.fraction > 1.0)
    throw ArgumentError("top fraction must lie in (0, 1]");
  const double want = std::ceil(agg.fraction * double(values.size()) - 1e-9);
  const auto m = std::clamp<std::size_t>(static_cast<std::size_t>(want), 1, values.size());
  std::vector<double> v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(m - 1), v.end(), std::greater<>());
  std::sort(v.begin(), v.begin() + std::ptrdiff_t(m), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    s += v[i];
  return s / double(m);
}

struct LocalizationMap
{
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values; // row-major, each in [0, 1]
  std::size_t patch_height = 0;
  std::size_t patch_width = 0;
  std::vector<double> patch_values; // before upsampling
  std::size_t degenerate_patches = 0;
  Aggregator aggregator;
  double image_score = 0.0;

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

inline double shifted_affinity(double cos) { return 0.5 * (1.0 + cos); }

// Patch value from raw cosines; 0.5 when both shifted affinities vanish.
inline double anomaly_ratio(double cos_pos, double cos_neg)
{
  const double a = shifted_affinity(cos_pos);
  const double b = shifted_affinity(cos_neg);
  if (a + b == 0.0)
    return 0.5;
  return b / (a + b);
}

inline std::vector<double> bilinear_upsample(std::span<const double> src,
                                             std::size_t in_h,
                                             std::size_t in_w,
                                             std::size_t out_h,
                                             std::size_t out_w)
{
  auto coord = [](std::size_t dst, std::size_t in, std::size_t out) {
    double s = (double(dst) + 0.5) * double(in) / double(out) - 0.5;
    s = std::clamp(s, 0.0, double(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(s));
    const auto i1 = std::min(i0 + 1, in - 1);
    return std::tuple{ i0, i1, s - double(i0) };
  };
  std::vector<double> out(out_h * out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto [y0, y1, fy] = coord(y, in_h, out_h);
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto [x0, x1, fx] = coord(x, in_w, out_w);
      const double top = src[y0 * in_w + x0] * (1.0 - fx) + src[y0 * in_w + x1] * fx;
      const double bot = src[y1 * in_w + x0] * (1.0 - fx) + src[y1 * in_w + x1] * fx;
      out[y * out_w + x] = top * (1.0 - fy) + bot * fy;
    }
  }
  return out;
}

inline LocalizationMap localization_map(const PatchGrid& patches,
                                        std::span<const float> positive_prompt,
                                        std::span<const float> negative_prompt,
                                        std::size_t out_h,
                                        std::size_t out_w,
                                        const Aggregator& agg = {})
{
  if (positive_prompt.size() != patches.dim() || negative_prompt.size() != patches.dim())
    throw DimensionError("prompt dim does not match patch dim " +
                         std::to_string(patches.dim()));
  if (out_h < patches.height() || out_w < patches.width())
    throw DimensionError("output resolution smaller than the patch grid");

  LocalizationMap map;
  map.patch_height = patches.height();
  map.patch_width = patches.width();
  map.patch_values.resize(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto e = patches.embeddings().row(i);
    const double cp = cosine(e, positive_prompt);
    const double cn = cosine(e, negative_prompt);
    if (shifted_affinity(cp) + shifted_affinity(cn) == 0.0)
      ++map.degenerate_patches;
    map.patch_values[i] = anomaly_ratio(cp, cn);
  }
  map.height = out_h;
  map.width = out_w;
  map.values = bilinear_upsample(map.patch_values, patches.height(), patches.width(), out_h, out_w);
  map.aggregator = agg;
  map.image_score = image_score(map.values, agg);
  return map;
}

// ---------------------------------------------------------------------------

// Flattened map values followed by the caller's visual embedding.
struct PriorEmbedding
{
  std::size_t loc_size = 0;
  std::size_t loc_height = 0;
  std::size_t loc_width = 0;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }

  std::pair<std::vector<double>, std::vector<float>> split() const
  {
    std::vector<double> loc(values.begin(), values.begin() + std::ptrdiff_t(loc_size));
    std::vector<float> vis;
    vis.reserve(values.size() - loc_size);
    for (std::size_t i = loc_size; i < values.size(); ++i)
      vis.push_back(static_cast<float>(values[i]));
    return { std::move(loc), std::move(vis) };
  }
};

inline PriorEmbedding assemble_prior(const LocalizationMap& map, std::span<const float> vis)
{
  PriorEmbedding e;
  e.loc_size = map.values.size();
  e.loc_height = map.height;
  e.loc_width = map.width;
  e.values.reserve(map.values.size() + vis.size());
  for (const double v : map.values) {
    if (!std::isfinite(v))
      throw DataError("non-finite localization value");
    e.values.push_back(v);
  }
  for (const float v : vis) {
    if (!std::isfinite(v))
      throw DataError("non-finite visual embedding value");
    e.values.push_back(v);
  }
  return e;
}

// Cosine similarity of every patch (rows) to every prompt (columns).
inline Eigen::MatrixXd prompt_similarity_matrix(const PatchGrid& patches,
                                                const EmbeddingMatrix& prompts)
{
  if (prompts.dim() != patches.dim())
    throw DimensionError("prompt dim " + std::to_string(prompts.dim()) +
                         " != patch dim " + std::to_string(patches.dim()));
  Eigen::MatrixXd out(patches.size(), prompts.count());
  for (std::size_t i = 0; i < patches.size(); ++i)
    for (std::size_t j = 0; j < prompts.count(); ++j)
      out(Eigen::Index(i), Eigen::Index(j)) = cosine(patches.embeddings().row(i), prompts.row(j));
  return out;
}

} // namespace adkit
