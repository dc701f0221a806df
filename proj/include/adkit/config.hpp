#pragma once

// Run configuration: built-in defaults, overridden by a flat key = value
// file, overridden by command-line flags. Unknown keys are rejected.
//
// File syntax: one `key = value` per line; blank lines and lines starting
// with '#' are ignored; surrounding whitespace is trimmed.

#include "adkit/error.hpp"
#include "adkit/knowledge.hpp"
#include "adkit/localization.hpp"
#include "adkit/retrieval.hpp"
#include "adkit/sparse.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace adkit {

struct RunConfig
{
  // retrieval
  std::size_t k_max = 8;
  double bandwidth_floor = 1e-6;
  double variance_floor = 1e-8;
  std::size_t gmm_max_iter = 200;
  double gmm_tol = 1e-8;
  std::size_t gmm_restarts = 1;
  std::size_t budget = 10;
  std::uint64_t seed = 0;
  // prompts
  std::string positive_prompt_template = PromptTemplates{}.positive;
  std::string negative_prompt_template = PromptTemplates{}.negative;
  // sparse coding
  double hsp_lambda = 0.1;
  std::size_t hsp_iters = 200;
  double hsp_tol = 1e-8;
  double hsp_step = 1.0;
  std::size_t hsp_stages = 0; // 0 disables sparse preprocessing
  // scoring
  std::string aggregator = "topq";
  double top_q = 0.01;
  // execution
  std::size_t threads = 1;

  RetrievalOptions retrieval_options() const
  {
    RetrievalOptions o;
    o.gmm = { k_max, variance_floor, gmm_max_iter, gmm_tol, gmm_restarts, seed };
    o.kde = { bandwidth_floor };
    return o;
  }

  PromptTemplates prompt_templates() const
  {
    return { positive_prompt_template, negative_prompt_template };
  }

  SolverSettings solver_settings() const { return { hsp_step, hsp_iters, hsp_tol }; }

  Aggregator image_aggregator() const
  {
    return aggregator == "max" ? Aggregator::max() : Aggregator::top(top_q);
  }
};

struct ConfigKey
{
  const char* name;
  const char* help;
  std::function<void(RunConfig&, const std::string&)> set;
};

namespace config_detail {

inline std::string where(const std::string& key, const std::string& value)
{
  return "config key " + key + " = \"" + value + "\": ";
}

inline std::uint64_t parse_uint(const std::string& key,
                                const std::string& value,
                                std::uint64_t lo,
                                std::uint64_t hi)
{
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size())
    throw ConfigError(where(key, value) + "expected a non-negative integer");
  if (v < lo || v > hi)
    throw ConfigError(where(key, value) + "must lie in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  return v;
}

// Accepts (lo, hi] when lo_open, otherwise [lo, hi].
inline double parse_real(const std::string& key,
                         const std::string& value,
                         double lo,
                         bool lo_open,
                         double hi)
{
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(where(key, value) + "expected a number");
  }
  if (used != value.size() || !std::isfinite(v))
    throw ConfigError(where(key, value) + "expected a finite number");
  if ((lo_open ? v <= lo : v < lo) || v > hi)
    throw ConfigError(where(key, value) + "out of range");
  return v;
}

} // namespace config_detail

inline const std::vector<ConfigKey>& config_keys()
{
  using namespace config_detail;
  constexpr double inf = std::numeric_limits<double>::max();
  constexpr auto umax = std::numeric_limits<std::uint64_t>::max();
  static const std::vector<ConfigKey> keys = {
    { "k_max", "largest GMM component count tried (1-64)",
      [](RunConfig& c, const std::string& v) { c.k_max = parse_uint("k_max", v, 1, 64); } },
    { "bandwidth_floor", "lower bound on the KDE bandwidth (> 0)",
      [](RunConfig& c, const std::string& v) {
        c.bandwidth_floor = parse_real("bandwidth_floor", v, 0.0, true, 1.0);
      } },
    { "variance_floor", "lower bound on GMM component variance (> 0)",
      [](RunConfig& c, const std::string& v) {
        c.variance_floor = parse_real("variance_floor", v, 0.0, true, 1.0);
      } },
    { "gmm_max_iter", "EM iteration cap per fit (>= 1)",
      [](RunConfig& c, const std::string& v) { c.gmm_max_iter = parse_uint("gmm_max_iter", v, 1, 1000000); } },
    { "gmm_tol", "EM stop tolerance on mean log-likelihood change (> 0)",
      [](RunConfig& c, const std::string& v) { c.gmm_tol = parse_real("gmm_tol", v, 0.0, true, 1.0); } },
    { "gmm_restarts", "k-means++ restarts per component count (>= 1)",
      [](RunConfig& c, const std::string& v) { c.gmm_restarts = parse_uint("gmm_restarts", v, 1, 1000); } },
    { "budget", "number of documents to retrieve (>= 1)",
      [](RunConfig& c, const std::string& v) { c.budget = parse_uint("budget", v, 1, 1000000000); } },
    { "seed", "seed for every randomized step",
      [](RunConfig& c, const std::string& v) { c.seed = parse_uint("seed", v, 0, umax); } },
    { "positive_prompt_template", "defect prompt template; [cls] = defect type, [obj] = category",
      [](RunConfig& c, const std::string& v) { c.positive_prompt_template = v; } },
    { "negative_prompt_template", "defect-free prompt template; [obj] = category",
      [](RunConfig& c, const std::string& v) { c.negative_prompt_template = v; } },
    { "hsp_lambda", "sparse coding L1 weight (>= 0)",
      [](RunConfig& c, const std::string& v) { c.hsp_lambda = parse_real("hsp_lambda", v, 0.0, false, inf); } },
    { "hsp_iters", "sparse coding iteration cap (>= 1)",
      [](RunConfig& c, const std::string& v) { c.hsp_iters = parse_uint("hsp_iters", v, 1, 100000000); } },
    { "hsp_tol", "sparse coding stop tolerance on objective change (> 0)",
      [](RunConfig& c, const std::string& v) { c.hsp_tol = parse_real("hsp_tol", v, 0.0, true, inf); } },
    { "hsp_step", "step multiplier on 1/L, in (0, 1]",
      [](RunConfig& c, const std::string& v) { c.hsp_step = parse_real("hsp_step", v, 0.0, true, 1.0); } },
    { "hsp_stages", "number of sparse coding stages; 0 disables",
      [](RunConfig& c, const std::string& v) { c.hsp_stages = parse_uint("hsp_stages", v, 0, 64); } },
    { "aggregator", "image score aggregator: topq or max",
      [](RunConfig& c, const std::string& v) {
        if (v != "topq" && v != "max")
          throw ConfigError(where("aggregator", v) + "expected topq or max");
        c.aggregator = v;
      } },
    { "top_q", "fraction of pixels averaged by topq, in (0, 1]",
      [](RunConfig& c, const std::string& v) { c.top_q = parse_real("top_q", v, 0.0, true, 1.0); } },
    { "threads", "worker threads for batched queries (1-256)",
      [](RunConfig& c, const std::string& v) { c.threads = parse_uint("threads", v, 1, 256); } },
  };
  return keys;
}

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value)
{
  for (const auto& k : config_keys())
    if (key == k.name) {
      k.set(cfg, value);
      return;
    }
  throw ConfigError("unknown config key \"" + key + "\"");
}

inline void apply_config_text(RunConfig& cfg, std::istream& in, const std::string& origin = "config")
{
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
      return std::string{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#')
      continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    set_config_value(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file " + path);
  apply_config_text(cfg, in, path);
}

} // namespace adkit
