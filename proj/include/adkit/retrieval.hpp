#pragma once

// Top-k and KDE-Sample retrieval over a knowledge index.
//
// KDE-Sample clusters the similarity scores with a 1-D GMM, weights each
// cluster by its deflated KDE mass, splits the budget across clusters in
// proportion to those weights (largest-remainder rounding, capped by cluster
// size), takes each cluster's best-scoring members, and returns the union
// re-sorted by score.

#include "adkit/error.hpp"
#include "adkit/gmm.hpp"
#include "adkit/kde.hpp"
#include "adkit/knowledge.hpp"
#include "adkit/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adkit {

enum class RetrievalMethod
{
  top_k,
  kde_sample
};

inline std::string to_string(RetrievalMethod m)
{
  return m == RetrievalMethod::top_k ? "topk" : "kde";
}

struct RetrievalOptions
{
  GmmOptions gmm;
  KdeOptions kde;
};

struct RetrievalResult
{
  RetrievalMethod method = RetrievalMethod::top_k;
  std::size_t budget = 0;
  std::vector<RankedDoc> docs;
  std::optional<ScoreClustering> clustering; // KDE-Sample only
  std::vector<std::size_t> allocations;      // slots per cluster
};

// Hamilton apportionment: splits `total` seats in proportion to `weights`.
// Fractional remainders are broken by lowest index.
inline std::vector<std::size_t> apportion_largest_remainder(
  std::size_t total,
  std::span<const double> weights)
{
  double sum = 0.0;
  for (const double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ArgumentError("apportionment weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0.0))
    throw ArgumentError("apportionment weights sum to zero");

  std::vector<std::size_t> seats(weights.size());
  std::vector<double> frac(weights.size());
  std::size_t given = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double q = double(total) * weights[i] / sum;
    seats[i] = static_cast<std::size_t>(std::floor(q));
    frac[i] = q - std::floor(q);
    given += seats[i];
  }
  // Rounding in q can push the floors one past the total.
  while (given > total) {
    const auto it = std::max_element(seats.begin(), seats.end());
    --*it;
    --given;
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frac[a] > frac[b];
  });
  for (std::size_t r = 0; given < total; ++r, ++given)
    ++seats[order[r % order.size()]];
  return seats;
}

// Apportions min(budget, sum(capacity)) slots. Clusters that saturate hand
// their excess to the remaining ones, again in proportion to weight; if the
// remaining clusters all have zero weight, spare capacity is the weight.
inline std::vector<std::size_t> allocate_budget(
  std::size_t budget,
  std::span<const double> weights,
  std::span<const std::size_t> capacity)
{
  const std::size_t k = weights.size();
  std::vector<std::size_t> alloc(k, 0);
  const std::size_t target =
    std::min(budget, std::accumulate(capacity.begin(), capacity.end(), std::size_t{ 0 }));
  std::size_t placed = 0;
  while (placed < target) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < k; ++i)
      if (alloc[i] < capacity[i])
        open.push_back(i);
    std::vector<double> w;
    for (const auto i : open)
      w.push_back(weights[i]);
    if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) {
      w.clear();
      for (const auto i : open)
        w.push_back(double(capacity[i] - alloc[i]));
    }
    const auto seats = apportion_largest_remainder(target - placed, w);
    for (std::size_t j = 0; j < open.size(); ++j) {
      const auto i = open[j];
      const auto add = std::min(seats[j], capacity[i] - alloc[i]);
      alloc[i] += add;
      placed += add;
    }
  }
  return alloc;
}

inline RetrievalResult retrieve_top_k(std::span<const double> scores,
                                      std::size_t budget)
{
  RetrievalResult r;
  r.method = RetrievalMethod::top_k;
  r.budget = budget;
  r.docs = top_k(scores, budget);
  return r;
}

// KDE-Sample over precomputed scores.
inline RetrievalResult kde_sample(std::span<const double> scores,
                                  std::size_t budget,
                                  const RetrievalOptions& opt = {})
{
  if (budget == 0)
    throw ArgumentError("retrieval budget must be >= 1");
  if (scores.empty())
    throw EmptyStoreError("knowledge index is empty");

  RetrievalResult r;
  r.method = RetrievalMethod::kde_sample;
  r.budget = budget;

  ScoreClustering cl;
  if (scores.size() == 1) {
    cl.k = 1;
    cl.components = { { scores[0], opt.gmm.variance_floor, 1.0 } };
    cl.assignments = { 0 };
    cl.bandwidth = opt.kde.bandwidth_floor;
    cl.kde_log_density = { 0.0 };
    cl.cluster_weights = { 1.0 };
    cl.degenerate = true;
  } else {
    cl = fit_score_gmm(scores, opt.gmm);
    kde_weights(cl, scores, opt.kde);
  }

  const auto order = rank_order(scores);
  std::vector<std::vector<std::size_t>> members(cl.k);
  for (const auto i : order)
    members[cl.assignments[i]].push_back(i);
  std::vector<std::size_t> capacity(cl.k);
  for (std::size_t c = 0; c < cl.k; ++c)
    capacity[c] = members[c].size();

  r.allocations = allocate_budget(budget, cl.cluster_weights, capacity);
  for (std::size_t c = 0; c < cl.k; ++c)
    for (std::size_t j = 0; j < r.allocations[c]; ++j) {
      const auto i = members[c][j];
      r.docs.push_back({ i, scores[i], c });
    }
  std::stable_sort(r.docs.begin(), r.docs.end(), [](const RankedDoc& a, const RankedDoc& b) {
    return a.score > b.score || (a.score == b.score && a.doc < b.doc);
  });
  if (r.docs.size() > budget)
    r.docs.resize(budget);
  r.clustering = std::move(cl);
  return r;
}

inline RetrievalResult kde_sample_retrieve(std::span<const float> key,
                                           const KnowledgeIndex& index,
                                           std::size_t budget,
                                           const RetrievalOptions& opt = {})
{
  return kde_sample(score_all(key, index), budget, opt);
}

inline RetrievalResult top_k_retrieve(std::span<const float> key,
                                      const KnowledgeIndex& index,
                                      std::size_t budget)
{
  if (budget == 0)
    throw ArgumentError("retrieval budget must be >= 1");
  return retrieve_top_k(score_all(key, index), budget);
}

} // namespace adkit
