#pragma once

// Repeated timing of a pipeline stage with wall-time and peak-memory
// summaries. Peak memory is the process high-water mark reported by the OS
// after each run, so it is approximate and only meaningful for comparisons.

#include "adkit/error.hpp"

#include <json.hpp>

#include <sys/resource.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace adkit {

struct SampleStats
{
  double mean = 0.0;
  double sd = 0.0; // sample SD; 0 for a single sample
};

inline SampleStats summarize(const std::vector<double>& xs)
{
  SampleStats s;
  if (xs.empty())
    return s;
  for (const double x : xs)
    s.mean += x;
  s.mean /= double(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (const double x : xs)
      ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / double(xs.size() - 1));
  }
  return s;
}

inline std::string fnv1a_hex(std::string_view bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline double peak_rss_kb()
{
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return double(ru.ru_maxrss); // kilobytes on Linux
}

struct BenchReport
{
  std::string stage;
  std::size_t repeats = 0;
  std::vector<double> wall_ms;
  std::vector<double> peak_rss_kb;
  std::string output_digest; // identical across runs of a deterministic stage
  bool outputs_identical = true;

  nlohmann::json to_json() const
  {
    const auto w = summarize(wall_ms);
    const auto m = summarize(peak_rss_kb);
    return { { "stage", stage },
             { "repeats", repeats },
             { "wall_ms", { { "mean", w.mean }, { "sd", w.sd }, { "samples", wall_ms } } },
             { "peak_rss_kb", { { "mean", m.mean }, { "sd", m.sd }, { "samples", peak_rss_kb } } },
             { "output_digest", output_digest },
             { "outputs_identical", outputs_identical } };
  }
};

// `stage` returns its output bytes; they are digested to confirm that every
// repetition produced the same result.
inline BenchReport run_bench(const std::string& name,
                             std::size_t repeats,
                             const std::function<std::string()>& stage)
{
  if (repeats == 0)
    throw ArgumentError("bench needs at least one repetition");
  BenchReport r;
  r.stage = name;
  r.repeats = repeats;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = stage();
    const auto t1 = std::chrono::steady_clock::now();
    r.wall_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    r.peak_rss_kb.push_back(peak_rss_kb());
    const auto digest = fnv1a_hex(out);
    if (i == 0)
      r.output_digest = digest;
    else if (digest != r.output_digest)
      r.outputs_identical = false;
  }
  return r;
}

} // namespace adkit
