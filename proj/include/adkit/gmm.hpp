#pragma once

// One-dimensional Gaussian mixtures fitted by EM, with the component count
// chosen by BIC over 1..k_max.

#include "adkit/error.hpp"
#include "adkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <set>
#include <vector>

namespace adkit {

struct GaussianComponent
{
  double mean = 0.0;
  double variance = 1.0;
  double weight = 1.0;
};

struct GmmOptions
{
  std::size_t k_max = 8;
  double variance_floor = 1e-8;
  std::size_t max_iter = 200;
  double tol = 1e-8; // on the change of mean log-likelihood per point
  std::size_t restarts = 1;
  std::uint64_t seed = 0;
  double min_component_mass = 2.0; // effective points a component needs to carry a variance
};

struct GmmFit
{
  std::vector<GaussianComponent> components;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  double bic = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
  bool valid = true;              // false if a component lost (nearly) all mass
  std::vector<double> ll_trace;   // total log-likelihood after init and each step
};

namespace gmm {

inline double log_normal(double x, double mean, double variance)
{
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

// E-step. Fills log responsibilities (n x K, row-major) and returns the total
// log-likelihood.
inline double expectation(std::span<const double> x,
                          const std::vector<GaussianComponent>& comps,
                          std::vector<double>& log_resp)
{
  const std::size_t k = comps.size();
  log_resp.resize(x.size() * k);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double* row = log_resp.data() + i * k;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      row[c] = std::log(comps[c].weight) +
               log_normal(x[i], comps[c].mean, comps[c].variance);
      mx = std::max(mx, row[c]);
    }
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c)
      s += std::exp(row[c] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < k; ++c)
      row[c] -= lse;
    total += lse;
  }
  return total;
}

// M-step. Returns false when a component has no responsibility mass left.
inline bool maximization(std::span<const double> x,
                         const std::vector<double>& log_resp,
                         double variance_floor,
                         std::vector<GaussianComponent>& comps)
{
  const std::size_t k = comps.size();
  const double n = static_cast<double>(x.size());
  for (std::size_t c = 0; c < k; ++c) {
    double nk = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = std::exp(log_resp[i * k + c]);
      nk += r;
      sx += r * x[i];
    }
    if (!(nk > 0.0))
      return false;
    const double mean = sx / nk;
    double sv = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean;
      sv += std::exp(log_resp[i * k + c]) * d * d;
    }
    comps[c] = { mean, std::max(sv / nk, variance_floor), nk / n };
  }
  return true;
}

// k-means++ seeding on the line, followed by hard assignment to the nearest
// seed to derive starting means, variances, and weights.
inline std::vector<GaussianComponent> kmeanspp_init(std::span<const double> x,
                                                    std::size_t k,
                                                    double variance_floor,
                                                    Rng& rng)
{
  const std::size_t n = x.size();
  std::vector<double> centers;
  centers.push_back(x[rng.below(n)]);
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const double c : centers)
        best = std::min(best, (x[i] - c) * (x[i] - c));
      d2[i] = best;
      total += best;
    }
    if (!(total > 0.0))
      break;
    double target = rng.uniform() * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0)
        continue;
      target -= d2[i];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
    // Rounding can leave pick on an existing center; walk back to one that
    // is not.
    while (d2[pick] <= 0.0 && pick > 0)
      --pick;
    centers.push_back(x[pick]);
  }

  double mean_all = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
  double var_all = 0.0;
  for (const double v : x)
    var_all += (v - mean_all) * (v - mean_all);
  var_all /= double(n);

  const std::size_t kk = centers.size();
  std::vector<double> sum(kk, 0.0), sum2(kk, 0.0), cnt(kk, 0.0);
  for (const double v : x) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kk; ++c)
      if (std::abs(v - centers[c]) < std::abs(v - centers[best]))
        best = c;
    sum[best] += v;
    cnt[best] += 1.0;
  }
  std::vector<GaussianComponent> comps(kk);
  for (std::size_t c = 0; c < kk; ++c)
    comps[c].mean = cnt[c] > 0 ? sum[c] / cnt[c] : centers[c];
  for (const double v : x) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kk; ++c)
      if (std::abs(v - centers[c]) < std::abs(v - centers[best]))
        best = c;
    sum2[best] += (v - comps[best].mean) * (v - comps[best].mean);
  }
  const double fallback =
    std::max(var_all / double(kk * kk), variance_floor);
  for (std::size_t c = 0; c < kk; ++c) {
    const double v = cnt[c] > 1 ? sum2[c] / cnt[c] : 0.0;
    comps[c].variance = v > variance_floor ? v : fallback;
    comps[c].weight = std::max(cnt[c], 1.0) / double(n);
  }
  const double wsum = std::accumulate(
    comps.begin(), comps.end(), 0.0, [](double a, const GaussianComponent& g) {
      return a + g.weight;
    });
  for (auto& g : comps)
    g.weight /= wsum;
  return comps;
}

inline std::size_t distinct_count(std::span<const double> x)
{
  return std::set<double>(x.begin(), x.end()).size();
}

} // namespace gmm

// Fits a K-component mixture by EM from one k-means++ start.
inline GmmFit fit_gmm(std::span<const double> x,
                      std::size_t k,
                      const GmmOptions& opt,
                      Rng& rng)
{
  GmmFit fit;
  fit.components = gmm::kmeanspp_init(x, k, opt.variance_floor, rng);
  if (fit.components.size() != k) {
    fit.valid = false;
    return fit;
  }
  const double n = static_cast<double>(x.size());
  std::vector<double> log_resp;
  double ll = gmm::expectation(x, fit.components, log_resp);
  fit.ll_trace.push_back(ll);
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    if (!gmm::maximization(x, log_resp, opt.variance_floor, fit.components)) {
      fit.valid = false;
      break;
    }
    const double next = gmm::expectation(x, fit.components, log_resp);
    fit.ll_trace.push_back(next);
    fit.iterations = it + 1;
    const bool done = std::abs(next - ll) / n < opt.tol;
    ll = next;
    if (done) {
      fit.converged = true;
      break;
    }
  }
  fit.log_likelihood = ll;
  if (k > 1)
    for (const auto& g : fit.components)
      if (g.weight * n < opt.min_component_mass)
        fit.valid = false;
  const double params = 3.0 * double(k) - 1.0;
  fit.bic = fit.valid ? -2.0 * ll + params * std::log(n)
                      : std::numeric_limits<double>::infinity();
  return fit;
}

// Result of clustering one score vector. Components are ordered by
// descending mean, so cluster 0 holds the highest scores.
struct ScoreClustering
{
  std::size_t k = 1;
  std::vector<GaussianComponent> components;
  std::vector<std::size_t> assignments;
  std::vector<GmmFit> candidates; // best fit per K = 1..k_max tried
  // Filled by kde_weights.
  double bandwidth = 0.0;
  std::vector<double> kde_log_density;
  std::vector<double> cluster_weights;
  bool degenerate = false;

  std::vector<std::size_t> cluster_sizes() const
  {
    std::vector<std::size_t> sizes(k, 0);
    for (const auto a : assignments)
      ++sizes[a];
    return sizes;
  }
};

// Posterior argmax per point; lowest component index wins ties.
inline std::vector<std::size_t> assign_points(
  std::span<const double> x,
  const std::vector<GaussianComponent>& comps)
{
  std::vector<std::size_t> out(x.size(), 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < comps.size(); ++c) {
      const double lp = std::log(comps[c].weight) +
                        gmm::log_normal(x[i], comps[c].mean, comps[c].variance);
      if (lp > best) {
        best = lp;
        out[i] = c;
      }
    }
  }
  return out;
}

// Fits mixtures for K = 1..k_max (capped at the number of distinct scores)
// and keeps the one with the smallest BIC, preferring smaller K on ties.
inline ScoreClustering fit_score_gmm(std::span<const double> scores,
                                     const GmmOptions& opt = {})
{
  if (scores.size() < 2)
    throw DegenerateDataError("score clustering needs at least 2 scores");
  if (opt.k_max == 0)
    throw ArgumentError("k_max must be >= 1");
  for (const double s : scores)
    if (!std::isfinite(s))
      throw DataError("non-finite similarity score");

  const std::size_t k_cap = std::min(opt.k_max, gmm::distinct_count(scores));
  Rng rng(opt.seed);
  ScoreClustering out;
  std::size_t best = 0;
  for (std::size_t k = 1; k <= k_cap; ++k) {
    GmmFit chosen = fit_gmm(scores, k, opt, rng);
    for (std::size_t r = 1; r < opt.restarts; ++r) {
      auto fit = fit_gmm(scores, k, opt, rng);
      if (fit.valid &&
          (!chosen.valid || fit.log_likelihood > chosen.log_likelihood))
        chosen = std::move(fit);
    }
    out.candidates.push_back(std::move(chosen));
    if (out.candidates.back().bic < out.candidates[best].bic)
      best = out.candidates.size() - 1;
  }

  out.components = out.candidates[best].components;
  std::stable_sort(out.components.begin(),
                   out.components.end(),
                   [](const GaussianComponent& a, const GaussianComponent& b) {
                     return a.mean > b.mean;
                   });
  out.k = out.components.size();
  out.assignments = assign_points(scores, out.components);
  return out;
}

} // namespace adkit
