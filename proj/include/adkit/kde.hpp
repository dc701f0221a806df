#pragma once

// Gaussian-kernel density of the similarity scores and the per-cluster
// "deflated" density weights used to split a retrieval budget.

#include "adkit/error.hpp"
#include "adkit/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace adkit {

struct KdeOptions
{
  double bandwidth_floor = 1e-6;
};

namespace kde {

// Sample quantile with linear interpolation between order statistics
// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
inline double quantile(std::span<const double> sorted, double p)
{
  const double h = (double(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
}

inline double sample_sd(std::span<const double> x)
{
  if (x.size() < 2)
    return 0.0;
  double mean = 0.0;
  for (const double v : x)
    mean += v;
  mean /= double(x.size());
  double ss = 0.0;
  for (const double v : x)
    ss += (v - mean) * (v - mean);
  return std::sqrt(ss / double(x.size() - 1));
}

} // namespace kde

// Silverman's rule of thumb, 0.9 * min(sd, IQR / 1.34) * n^(-1/5). A zero
// IQR falls back to the standard deviation; the result is floored.
inline double silverman_bandwidth(std::span<const double> x, double floor)
{
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = kde::sample_sd(x);
  const double iqr = kde::quantile(sorted, 0.75) - kde::quantile(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0))
    spread = sd;
  const double h = 0.9 * spread * std::pow(double(x.size()), -0.2);
  return std::max(h, floor);
}

// log f(x_m) for every sample, where f is the Gaussian KDE of the samples
// themselves. The self term keeps the kernel sum >= 1, so no underflow.
inline std::vector<double> kde_log_density(std::span<const double> x,
                                           double bandwidth)
{
  const double n = double(x.size());
  const double log_norm =
    std::log(n * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out(x.size());
  for (std::size_t m = 0; m < x.size(); ++m) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double z = (x[m] - x[j]) / bandwidth;
      s += std::exp(-0.5 * z * z);
    }
    out[m] = std::log(s) - log_norm;
  }
  return out;
}

// W_n = (1/K) * sum over members m of cluster n of exp(W*(m) - max W*).
inline std::vector<double> cluster_density_weights(
  std::span<const double> log_density,
  std::span<const std::size_t> assignments,
  std::size_t k)
{
  const double top = *std::max_element(log_density.begin(), log_density.end());
  std::vector<double> w(k, 0.0);
  for (std::size_t m = 0; m < log_density.size(); ++m)
    w[assignments[m]] += std::exp(log_density[m] - top);
  for (auto& v : w)
    v /= double(k);
  return w;
}

// Fills bandwidth, kde_log_density and cluster_weights. When every score is
// identical the bandwidth is meaningless; the single cluster gets weight 1.
inline void kde_weights(ScoreClustering& clustering,
                        std::span<const double> scores,
                        const KdeOptions& opt = {})
{
  if (clustering.assignments.size() != scores.size())
    throw DimensionError("clustering does not cover every score");
  if (scores.empty())
    throw DegenerateDataError("no scores to weight");
  clustering.bandwidth = silverman_bandwidth(scores, opt.bandwidth_floor);
  clustering.kde_log_density = kde_log_density(scores, clustering.bandwidth);
  clustering.degenerate = !(kde::sample_sd(scores) > 0.0);
  if (clustering.degenerate) {
    clustering.cluster_weights.assign(clustering.k, 0.0);
    clustering.cluster_weights[0] = 1.0;
    return;
  }
  clustering.cluster_weights = cluster_density_weights(
    clustering.kde_log_density, clustering.assignments, clustering.k);
}

} // namespace adkit
