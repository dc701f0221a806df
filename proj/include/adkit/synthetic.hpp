#pragma once

// Deterministic synthetic fixtures: planted score mixtures, knowledge bases
// with planted relevance, and patch grids with a planted defect rectangle.
// Every generator is a pure function of its parameters (seed included).

#include "adkit/embedding.hpp"
#include "adkit/error.hpp"
#include "adkit/knowledge.hpp"
#include "adkit/localization.hpp"
#include "adkit/pgm.hpp"
#include "adkit/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace adkit {

namespace synth {

inline std::vector<double> random_unit(std::size_t dim, Rng& rng)
{
  std::vector<double> v(dim);
  double n = 0.0;
  while (n < 1e-6) {
    for (auto& x : v)
      x = rng.normal();
    n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  }
  for (auto& x : v)
    x /= n;
  return v;
}

// Random unit vector orthogonal to each (orthonormal) vector in `basis`.
inline std::vector<double> random_orthogonal(const std::vector<std::vector<double>>& basis,
                                             std::size_t dim,
                                             Rng& rng)
{
  for (;;) {
    auto v = random_unit(dim, rng);
    for (const auto& b : basis) {
      const double p = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
      for (std::size_t i = 0; i < dim; ++i)
        v[i] -= p * b[i];
    }
    const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (n < 1e-6)
      continue;
    for (auto& x : v)
      x /= n;
    return v;
  }
}

inline std::vector<float> to_float(const std::vector<double>& v)
{
  return { v.begin(), v.end() };
}

} // namespace synth

// ---------------------------------------------------------------------------
// Score mixtures

struct ScoreMixture
{
  std::vector<double> scores;
  std::vector<std::size_t> labels; // planted component per score
};

struct MixtureComponentSpec
{
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
};

inline ScoreMixture gen_score_mixture(const std::vector<MixtureComponentSpec>& comps,
                                      std::uint64_t seed)
{
  Rng rng(seed);
  ScoreMixture out;
  for (std::size_t c = 0; c < comps.size(); ++c)
    for (std::size_t i = 0; i < comps[c].count; ++i) {
      out.scores.push_back(rng.normal(comps[c].mean, comps[c].sd));
      out.labels.push_back(c);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Knowledge bases with planted relevance

// A block of documents whose similarity to the query is drawn from
// N(mean, spread^2), clamped to [-0.999, 0.999]. The `relevant_top`
// highest-scoring members are labeled relevant.
struct ScoreGroup
{
  std::string name;
  std::size_t count = 0;
  double mean = 0.0;
  double spread = 0.0;
  std::size_t relevant_top = 0;
};

struct PlantedKbSpec
{
  std::uint64_t seed = 0;
  std::size_t dim = 32;
  std::vector<ScoreGroup> groups;

  // A tight block of near-duplicate distractors outscores every relevant
  // document; the relevant ones top a second dense block further down.
  static PlantedKbSpec skewed(std::uint64_t seed)
  {
    return { seed,
             32,
             { { "distractor", 40, 0.86, 0.006, 0 },
               { "related", 40, 0.70, 0.010, 5 },
               { "background", 120, 0.20, 0.12, 0 } } };
  }

  // The single relevant document leads a dense block well clear of the
  // background.
  static PlantedKbSpec separated(std::uint64_t seed)
  {
    return { seed,
             32,
             { { "related", 40, 0.85, 0.010, 1 }, { "background", 120, 0.20, 0.10, 0 } } };
  }

  void validate() const
  {
    if (dim < 2)
      throw SpecError("planted KB needs dim >= 2");
    if (groups.empty())
      throw SpecError("planted KB needs at least one group");
    for (const auto& g : groups) {
      if (g.count == 0)
        throw SpecError("group \"" + g.name + "\" is empty");
      if (g.relevant_top > g.count)
        throw SpecError("group \"" + g.name + "\" marks more relevant docs than it has");
      if (!(std::abs(g.mean) < 1.0) || !(g.spread >= 0.0))
        throw SpecError("group \"" + g.name + "\" has an invalid score distribution");
    }
  }
};

struct PlantedQuery
{
  std::string query_id;
  std::vector<float> key;
  std::vector<std::size_t> relevant; // doc indices
};

struct PlantedKb
{
  std::vector<KnowledgeDocument> documents;
  EmbeddingMatrix embeddings; // raw (unit) lock rows, row i = document i
  std::vector<double> planted_scores;
  std::vector<PlantedQuery> queries;

  KnowledgeIndex index() const { return build_index(documents, embeddings); }
};

inline PlantedKb gen_planted_kb(const PlantedKbSpec& spec)
{
  spec.validate();
  Rng rng(spec.seed);
  const auto key = synth::random_unit(spec.dim, rng);

  struct Draft
  {
    std::size_t group;
    std::size_t member;
    double score;
    bool relevant;
  };
  std::vector<Draft> drafts;
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    const auto& grp = spec.groups[g];
    std::vector<double> s(grp.count);
    for (auto& v : s)
      v = std::clamp(rng.normal(grp.mean, grp.spread), -0.999, 0.999);
    std::vector<std::size_t> order(grp.count);
    std::iota(order.begin(), order.end(), std::size_t{ 0 });
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    std::vector<bool> rel(grp.count, false);
    for (std::size_t r = 0; r < grp.relevant_top; ++r)
      rel[order[r]] = true;
    for (std::size_t i = 0; i < grp.count; ++i)
      drafts.push_back({ g, i, s[i], rel[i] });
  }
  // Fisher-Yates so document order carries no group information.
  for (std::size_t i = drafts.size(); i > 1; --i)
    std::swap(drafts[i - 1], drafts[rng.below(i)]);

  PlantedKb kb;
  std::vector<float> data;
  PlantedQuery q{ "q0", synth::to_float(key), {} };
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const auto& d = drafts[i];
    const auto& grp = spec.groups[d.group];
    const auto u = synth::random_orthogonal({ key }, spec.dim, rng);
    const double perp = std::sqrt(1.0 - d.score * d.score);
    for (std::size_t c = 0; c < spec.dim; ++c)
      data.push_back(static_cast<float>(d.score * key[c] + perp * u[c]));
    char id[32];
    std::snprintf(id, sizeof id, "doc-%05zu", i);
    kb.documents.push_back({ id,
                             grp.name,
                             d.relevant ? "planted" : (grp.name == "distractor" ? "lookalike" : "normal"),
                             d.member,
                             "synthetic " + grp.name + " page",
                             i });
    kb.planted_scores.push_back(d.score);
    if (d.relevant)
      q.relevant.push_back(i);
  }
  kb.embeddings = EmbeddingMatrix(spec.dim, drafts.size(), std::move(data));
  kb.queries.push_back(std::move(q));
  return kb;
}

inline double recall(const std::vector<std::size_t>& relevant,
                     const std::vector<std::size_t>& retrieved)
{
  if (relevant.empty())
    return 1.0;
  const std::set<std::size_t> got(retrieved.begin(), retrieved.end());
  std::size_t hit = 0;
  for (const auto r : relevant)
    hit += got.count(r);
  return double(hit) / double(relevant.size());
}

// Writes embeddings.adsk, manifest.jsonl, query.adsk and relevance.json.
inline void write_planted_kb(const std::string& dir, const PlantedKb& kb)
{
  std::filesystem::create_directories(dir);
  save_embeddings(dir + "/embeddings.adsk", kb.embeddings);
  std::string lines;
  for (const auto& d : kb.documents)
    lines += manifest::to_line(d) + "\n";
  write_file(dir + "/manifest.jsonl", lines);
  std::vector<float> keys;
  nlohmann::json rel = nlohmann::json::array();
  for (const auto& q : kb.queries) {
    keys.insert(keys.end(), q.key.begin(), q.key.end());
    nlohmann::json ids = nlohmann::json::array();
    for (const auto i : q.relevant)
      ids.push_back(kb.documents[i].doc_id);
    rel.push_back({ { "query_id", q.query_id }, { "relevant", ids } });
  }
  save_embeddings(dir + "/query.adsk",
                  EmbeddingMatrix(kb.embeddings.dim(), kb.queries.size(), std::move(keys)));
  write_file(dir + "/relevance.json", rel.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Patch grids with a planted defect

struct DefectRect
{
  std::size_t y = 0, x = 0, height = 0, width = 0;
};

// Every patch is content + s * prompt direction + noise, where the direction
// is the negative prompt inside the rectangle and the positive prompt
// elsewhere. `noise` is the expected L2 norm of the noise vector.
struct DefectSpec
{
  std::uint64_t seed = 0;
  std::size_t dim = 64;
  std::size_t grid_h = 8;
  std::size_t grid_w = 8;
  std::size_t upscale = 4; // pixels per patch side in the output map
  DefectRect rect{ 2, 3, 3, 2 };
  bool defective = true;
  double signal = 0.5;
  double noise = 0.1;

  void validate() const
  {
    if (dim < 3)
      throw SpecError("defect grid needs dim >= 3");
    if (grid_h == 0 || grid_w == 0 || upscale == 0)
      throw SpecError("defect grid dimensions must be positive");
    if (defective && (rect.height == 0 || rect.width == 0 || rect.y + rect.height > grid_h ||
                      rect.x + rect.width > grid_w))
      throw SpecError("defect rectangle does not fit in the grid");
    if (!(signal >= 0.0) || !(noise >= 0.0))
      throw SpecError("signal and noise must be non-negative");
  }
};

struct DefectFixture
{
  std::size_t grid_h = 0, grid_w = 0;
  EmbeddingMatrix patches;
  std::size_t mask_h = 0, mask_w = 0;
  std::vector<int> mask; // pixel resolution, 1 inside the defect
  std::vector<float> positive_prompt;
  std::vector<float> negative_prompt;

  PatchGrid grid() const { return { grid_h, grid_w, patches }; }
};

// Prompt pair shared by all fixtures with the same prompt seed.
inline std::pair<std::vector<double>, std::vector<double>> gen_prompt_pair(std::size_t dim,
                                                                           std::uint64_t seed)
{
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  auto pos = synth::random_unit(dim, rng);
  auto neg = synth::random_orthogonal({ pos }, dim, rng);
  return { std::move(pos), std::move(neg) };
}

inline DefectFixture gen_defect_grid(const DefectSpec& spec, std::uint64_t prompt_seed = 0)
{
  spec.validate();
  const auto [pos, neg] = gen_prompt_pair(spec.dim, prompt_seed);
  Rng rng(spec.seed);
  const auto content = synth::random_orthogonal({ pos, neg }, spec.dim, rng);
  const double per_coord = spec.noise / std::sqrt(double(spec.dim));

  DefectFixture fx;
  fx.grid_h = spec.grid_h;
  fx.grid_w = spec.grid_w;
  auto inside = [&](std::size_t y, std::size_t x) {
    return spec.defective && y >= spec.rect.y && y < spec.rect.y + spec.rect.height &&
           x >= spec.rect.x && x < spec.rect.x + spec.rect.width;
  };
  std::vector<float> data;
  data.reserve(spec.grid_h * spec.grid_w * spec.dim);
  for (std::size_t y = 0; y < spec.grid_h; ++y)
    for (std::size_t x = 0; x < spec.grid_w; ++x) {
      const auto& dir = inside(y, x) ? neg : pos;
      for (std::size_t c = 0; c < spec.dim; ++c)
        data.push_back(static_cast<float>(content[c] + spec.signal * dir[c] + rng.normal(0.0, per_coord)));
    }
  fx.patches = EmbeddingMatrix(spec.dim, spec.grid_h * spec.grid_w, std::move(data));

  fx.mask_h = spec.grid_h * spec.upscale;
  fx.mask_w = spec.grid_w * spec.upscale;
  fx.mask.resize(fx.mask_h * fx.mask_w);
  for (std::size_t y = 0; y < fx.mask_h; ++y)
    for (std::size_t x = 0; x < fx.mask_w; ++x)
      fx.mask[y * fx.mask_w + x] = inside(y / spec.upscale, x / spec.upscale) ? 1 : 0;
  fx.positive_prompt = synth::to_float(pos);
  fx.negative_prompt = synth::to_float(neg);
  return fx;
}

// Writes patches.adsk, grid.json, mask.pgm, pos.adsk and neg.adsk.
inline void write_defect_fixture(const std::string& dir, const DefectFixture& fx)
{
  std::filesystem::create_directories(dir);
  save_embeddings(dir + "/patches.adsk", fx.patches);
  const nlohmann::json grid = { { "h", fx.grid_h },
                                { "w", fx.grid_w },
                                { "out_h", fx.mask_h },
                                { "out_w", fx.mask_w } };
  write_file(dir + "/grid.json", grid.dump() + "\n");
  GrayImage mask{ fx.mask_w, fx.mask_h, {} };
  for (const int m : fx.mask)
    mask.pixels.push_back(m ? 255 : 0);
  save_pgm(dir + "/mask.pgm", mask);
  save_embeddings(dir + "/pos.adsk", EmbeddingMatrix::from_row(fx.positive_prompt));
  save_embeddings(dir + "/neg.adsk", EmbeddingMatrix::from_row(fx.negative_prompt));
}

} // namespace adkit
