#pragma once

// Rank-based AUROC (Mann-Whitney U with average ranks for ties).

#include "adkit/error.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adkit {

struct LabeledScores
{
  std::vector<double> scores;
  std::vector<int> labels; // 0 = normal, 1 = anomalous
};

// Ranks are tracked doubled so every tie-averaged rank is an integer; the
// statistic is then exact and equals (wins + ties / 2) / (P * N).
inline double auroc(std::span<const double> scores, std::span<const int> labels)
{
  if (scores.size() != labels.size())
    throw DimensionError("auroc: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
  std::int64_t pos = 0;
  for (const int l : labels) {
    if (l != 0 && l != 1)
      throw DataError("auroc labels must be 0 or 1");
    pos += l;
  }
  const std::int64_t neg = std::int64_t(labels.size()) - pos;
  if (pos == 0 || neg == 0)
    throw DegenerateError("auroc needs both positive and negative samples");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  std::int64_t rank_sum2 = 0; // sum over positives of 2 * rank
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]])
      ++j;
    // Ranks i+1 .. j share the average (i + 1 + j) / 2.
    const auto twice_avg = std::int64_t(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1)
        rank_sum2 += twice_avg;
    i = j;
  }
  const std::int64_t u2 = rank_sum2 - pos * (pos + 1);
  return (double(u2) / 2.0) / (double(pos) * double(neg));
}

inline double auroc(const LabeledScores& d)
{
  return auroc(d.scores, d.labels);
}

// Pixel AUROC per image, macro-averaged over images that contain both
// classes. Returns nullopt when no image qualifies.
inline std::optional<double> pixel_auroc(const std::vector<std::vector<double>>& maps,
                                         const std::vector<std::vector<int>>& masks)
{
  if (maps.size() != masks.size())
    throw DimensionError("pixel_auroc: map and mask counts differ");
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].size() != masks[i].size())
      throw DimensionError("pixel_auroc: map " + std::to_string(i) +
                           " and its mask differ in size");
    const auto pos = std::count(masks[i].begin(), masks[i].end(), 1);
    if (pos == 0 || pos == std::ptrdiff_t(masks[i].size()))
      continue;
    sum += auroc(maps[i], masks[i]);
    ++used;
  }
  if (used == 0)
    return std::nullopt;
  return sum / double(used);
}

} // namespace adkit
