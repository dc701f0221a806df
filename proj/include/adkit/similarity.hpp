#pragma once

#include "adkit/embedding.hpp"
#include "adkit/error.hpp"
#include "adkit/knowledge.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adkit {

// Cosine similarity of the key to every lock, in index order. Each value lies
// in [-1, 1].
using SimilarityScores = std::vector<double>;

inline SimilarityScores score_all(std::span<const float> key,
                                  const KnowledgeIndex& index)
{
  if (key.size() != index.dim())
    throw DimensionError("key dim " + std::to_string(key.size()) +
                         " != index dim " + std::to_string(index.dim()));
  SimilarityScores scores(index.size());
  for (std::size_t i = 0; i < index.size(); ++i)
    scores[i] = cosine(key, index.locks().row(i));
  return scores;
}

struct RankedDoc
{
  std::size_t doc = 0;
  double score = 0.0;
  std::optional<std::size_t> cluster;

  friend bool operator==(const RankedDoc&, const RankedDoc&) = default;
};

// Document indices ordered by descending score; lower index first on ties.
inline std::vector<std::size_t> rank_order(std::span<const double> scores)
{
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

// The k best documents. k larger than the corpus returns everything.
inline std::vector<RankedDoc> top_k(std::span<const double> scores,
                                    std::size_t k)
{
  if (k == 0)
    throw ArgumentError("top_k requires k >= 1");
  auto order = rank_order(scores);
  order.resize(std::min(k, order.size()));
  std::vector<RankedDoc> out;
  out.reserve(order.size());
  for (const auto i : order)
    out.push_back({ i, scores[i], std::nullopt });
  return out;
}

} // namespace adkit
