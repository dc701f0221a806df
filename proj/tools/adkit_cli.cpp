// adkit command-line front end.
//
//   adkit ingest   --manifest M.jsonl --embeddings E.adsk --out DIR
//   adkit retrieve --index DIR --key K.adsk [--method topk|kde]
//   adkit score    --patches P.adsk [prompt source] --out-map MAP.pgm
//   adkit eval     [--scores S.jsonl] [--map M.pgm --mask K.pgm ...]
//   adkit synth    kb|defect --out DIR
//   adkit bench    --stage gmm|retrieve|score|hsp --repeats R
//
// Exit codes: 0 success, 2 input/format error, 3 shape/config error,
// 4 numerical failure. JSON goes to stdout, diagnostics to stderr.

#include "adkit/adkit.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

using json = nlohmann::json;
using namespace adkit;

struct Shape
{
  std::size_t h = 0;
  std::size_t w = 0;
};

Shape parse_shape(const std::string& s, const char* what)
{
  const auto x = s.find('x');
  try {
    if (x == std::string::npos)
      throw std::invalid_argument(s);
    std::size_t used = 0;
    const auto h = std::stoul(s.substr(0, x), &used);
    const auto w = std::stoul(s.substr(x + 1));
    if (h == 0 || w == 0)
      throw std::invalid_argument(s);
    return { h, w };
  } catch (const std::exception&) {
    throw ConfigError(std::string(what) + " must look like HxW, got \"" + s + "\"");
  }
}

std::vector<float> load_single_vector(const std::string& path)
{
  const auto m = load_embeddings(path);
  if (m.count() != 1)
    throw DimensionError(path + " must hold exactly one vector, found " + std::to_string(m.count()));
  return { m.row(0).begin(), m.row(0).end() };
}

std::string labels_for(const std::string& embeddings, const std::string& explicit_labels)
{
  return explicit_labels.empty() ? default_labels_path(embeddings) : explicit_labels;
}

// ---------------------------------------------------------------------------

struct IngestArgs
{
  std::string manifest, embeddings, out;
};

int cmd_ingest(const IngestArgs& a)
{
  const auto index = build_index(a.manifest, load_embeddings(a.embeddings));
  save_index(a.out, index);
  std::cout << json{ { "documents", index.size() }, { "dim", index.dim() }, { "index", a.out } }.dump()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct RetrieveArgs
{
  std::string index, key, method = "kde", query_id;
};

json retrieval_json(const std::string& query_id,
                    const RetrievalResult& r,
                    const KnowledgeIndex& index)
{
  json results = json::array();
  for (const auto& d : r.docs) {
    results.push_back({ { "doc_id", index.document(d.doc).doc_id },
                        { "score", d.score },
                        { "cluster", d.cluster ? json(*d.cluster) : json(nullptr) } });
  }
  json clustering = nullptr;
  if (r.clustering) {
    const auto& c = *r.clustering;
    std::vector<double> means, vars;
    for (const auto& g : c.components) {
      means.push_back(g.mean);
      vars.push_back(g.variance);
    }
    clustering = { { "K", c.k },
                   { "means", means },
                   { "variances", vars },
                   { "weights", c.cluster_weights },
                   { "allocations", r.allocations },
                   { "bandwidth", c.bandwidth } };
  }
  return { { "query_id", query_id },
           { "method", to_string(r.method) },
           { "budget", r.budget },
           { "results", results },
           { "clustering", clustering } };
}

int cmd_retrieve(const RetrieveArgs& a, const RunConfig& cfg)
{
  if (a.method != "topk" && a.method != "kde")
    throw ConfigError("--method must be topk or kde");
  const auto index = load_index(a.index);
  const auto keys = load_embeddings(a.key);
  if (keys.dim() != index.dim())
    throw DimensionError("key dim " + std::to_string(keys.dim()) + " != index dim " +
                         std::to_string(index.dim()));
  if (keys.count() == 0)
    throw DataError(a.key + " holds no query vectors");

  std::vector<std::string> lines(keys.count());
  auto run = [&](std::size_t q) {
    const auto key = keys.row(q);
    const auto r = a.method == "topk" ? top_k_retrieve(key, index, cfg.budget)
                                      : kde_sample_retrieve(key, index, cfg.budget, cfg.retrieval_options());
    std::string id = a.query_id.empty() ? "q" + std::to_string(q) : a.query_id;
    if (!a.query_id.empty() && keys.count() > 1)
      id += "-" + std::to_string(q);
    lines[q] = retrieval_json(id, r, index).dump();
  };

  const std::size_t workers = std::min<std::size_t>(cfg.threads, keys.count());
  if (workers <= 1) {
    for (std::size_t q = 0; q < keys.count(); ++q)
      run(q);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t q = t; q < keys.count(); q += workers)
            run(q);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool)
      th.join();
    for (const auto& e : errors)
      if (e)
        std::rethrow_exception(e);
  }
  for (const auto& l : lines)
    std::cout << l << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ScoreArgs
{
  std::string patches, grid, out_size, out_map;
  std::string pos, neg;
  std::string label, category = "object", prompt_table, prompt_labels;
  std::string key, centroids, centroid_labels;
  std::vector<std::string> hsp_dicts;
  std::string vis, prior_out;
  bool diagnostics = false;
};

int cmd_score(const ScoreArgs& a, const RunConfig& cfg)
{
  const auto raw = load_embeddings(a.patches);
  Shape grid;
  if (!a.grid.empty()) {
    grid = parse_shape(a.grid, "--grid");
  } else {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(double(raw.count()))));
    if (side * side != raw.count())
      throw DimensionError("patch count " + std::to_string(raw.count()) +
                           " is not square; pass --grid HxW");
    grid = { side, side };
  }
  const Shape out = a.out_size.empty() ? Shape{ grid.h * 4, grid.w * 4 } : parse_shape(a.out_size, "--out-size");

  json diag = json::object();

  // Prompt vectors: explicit files, a defect label, or a key matched to the
  // nearest centroid. For label routes the defect prompt is the anomaly
  // (negative) side of the ratio and the flawless prompt the positive side.
  std::vector<float> pos, neg;
  if (!a.pos.empty() || !a.neg.empty()) {
    if (a.pos.empty() || a.neg.empty())
      throw ConfigError("--pos and --neg must be given together");
    pos = load_single_vector(a.pos);
    neg = load_single_vector(a.neg);
  } else {
    if (a.prompt_table.empty())
      throw ConfigError("score needs --pos/--neg, or --prompt-table with --label or --key");
    std::string label = a.label;
    if (label.empty()) {
      if (a.key.empty() || a.centroids.empty())
        throw ConfigError("give --label, or --key with --centroids");
      const auto store = load_labeled_store(a.centroids, labels_for(a.centroids, a.centroid_labels));
      const auto key = load_single_vector(a.key);
      const auto match = nearest_centroid(key, store);
      label = match.label;
      diag["centroid"] = { { "label", match.label }, { "similarity", match.similarity } };
    }
    const auto prompts = instantiate_prompts(label, a.category, cfg.prompt_templates());
    const auto table = load_labeled_store(a.prompt_table, labels_for(a.prompt_table, a.prompt_labels));
    const auto defect = table.find(prompts.positive);
    const auto flawless = table.find(prompts.negative);
    if (!defect || !flawless)
      throw DataError("prompt table lacks \"" + (defect ? prompts.negative : prompts.positive) + "\"");
    pos.assign(flawless->begin(), flawless->end());
    neg.assign(defect->begin(), defect->end());
    diag["prompts"] = { { "defect", prompts.positive }, { "flawless", prompts.negative } };
  }

  PatchGrid patches(grid.h, grid.w, raw);
  if (cfg.hsp_stages > 0) {
    if (a.hsp_dicts.empty())
      throw ConfigError("hsp_stages > 0 needs at least one --hsp-dict");
    std::vector<SparseStage> stages;
    for (std::size_t s = 0; s < cfg.hsp_stages; ++s) {
      const auto& path = a.hsp_dicts[std::min(s, a.hsp_dicts.size() - 1)];
      stages.push_back({ to_matrix(load_embeddings(path)), cfg.hsp_lambda });
    }
    const auto h = hierarchical_apply(stages, to_matrix(patches.embeddings()), cfg.solver_settings());
    try {
      patches = PatchGrid(grid.h, grid.w, to_embeddings(h.embeddings));
    } catch (const DataError& e) {
      throw DegenerateError(std::string("sparse coding shrank a patch to zero; lower hsp_lambda (") +
                            e.what() + ")");
    }
    json st = json::array();
    for (std::size_t s = 0; s < h.stages.size(); ++s)
      st.push_back({ { "stage", s },
                     { "lambda", h.stages[s].lambda },
                     { "sparsity", h.stages[s].sparsity },
                     { "iterations", h.stages[s].iterations },
                     { "converged", h.stages[s].converged },
                     { "objective_trace", h.stages[s].objective_trace } });
    diag["hsp"] = st;
  }

  const auto map = localization_map(patches, pos, neg, out.h, out.w, cfg.image_aggregator());
  if (map.degenerate_patches > 0)
    std::cerr << "warning: " << map.degenerate_patches
              << " patch(es) had zero affinity to both prompts; value set to 0.5\n";
  if (!a.out_map.empty())
    save_pgm(a.out_map, quantize(map.values, map.height, map.width));
  if (!a.vis.empty() || !a.prior_out.empty()) {
    if (a.vis.empty() || a.prior_out.empty())
      throw ConfigError("--vis and --prior-out must be given together");
    const auto prior = assemble_prior(map, load_single_vector(a.vis));
    std::vector<float> flat(prior.values.begin(), prior.values.end());
    save_embeddings(a.prior_out, EmbeddingMatrix::from_row(flat));
  }

  json outj = { { "image_score", map.image_score },
                { "aggregator", map.aggregator.name() },
                { "h", map.height },
                { "w", map.width } };
  if (a.diagnostics)
    outj["diagnostics"] = diag;
  std::cout << outj.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs
{
  std::string scores;
  std::vector<std::string> maps, masks;
};

int cmd_eval(const EvalArgs& a)
{
  if (a.scores.empty() && a.maps.empty())
    throw ConfigError("eval needs --scores and/or --map/--mask pairs");
  json out = { { "image_auroc", nullptr }, { "pixel_auroc", nullptr }, { "n", 0 } };

  if (!a.scores.empty()) {
    LabeledScores data;
    std::ifstream in(a.scores);
    if (!in)
      throw FormatError("cannot open " + a.scores);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos)
        continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error&) {
        throw FormatError(a.scores + ":" + std::to_string(n) + ": malformed JSON");
      }
      if (!j.is_object() || !j.contains("score") || !j["score"].is_number() || !j.contains("label") ||
          !j["label"].is_number_integer())
        throw FormatError(a.scores + ":" + std::to_string(n) + ": expected {id, score, label}");
      data.scores.push_back(j["score"].get<double>());
      data.labels.push_back(j["label"].get<int>());
    }
    out["image_auroc"] = auroc(data);
    out["n"] = data.scores.size();
  }

  if (!a.maps.empty()) {
    if (a.maps.size() != a.masks.size())
      throw ConfigError("--map and --mask must be given in pairs");
    std::vector<std::vector<double>> maps;
    std::vector<std::vector<int>> masks;
    for (std::size_t i = 0; i < a.maps.size(); ++i) {
      const auto m = load_pgm(a.maps[i]);
      const auto k = load_pgm(a.masks[i]);
      if (m.width != k.width || m.height != k.height)
        throw DimensionError(a.maps[i] + " and " + a.masks[i] + " differ in size");
      std::vector<double> mv;
      std::vector<int> kv;
      for (const auto p : m.pixels)
        mv.push_back(double(p) / 255.0);
      for (const auto p : k.pixels)
        kv.push_back(p > 127 ? 1 : 0);
      maps.push_back(std::move(mv));
      masks.push_back(std::move(kv));
    }
    const auto px = pixel_auroc(maps, masks);
    out["pixel_auroc"] = px ? json(*px) : json(nullptr);
    out["n_maps"] = maps.size();
  }
  std::cout << out.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SynthArgs
{
  std::string kind, scenario = "skewed", out;
  bool normal = false;
  double signal = 0.5, noise = 0.1;
  std::size_t grid = 8;
  std::uint64_t prompt_seed = 0;
};

int cmd_synth(const SynthArgs& a, const RunConfig& cfg)
{
  if (a.kind == "kb") {
    PlantedKbSpec spec;
    if (a.scenario == "skewed")
      spec = PlantedKbSpec::skewed(cfg.seed);
    else if (a.scenario == "separated")
      spec = PlantedKbSpec::separated(cfg.seed);
    else
      throw ConfigError("--scenario must be skewed or separated");
    const auto kb = gen_planted_kb(spec);
    write_planted_kb(a.out, kb);
    std::cout << json{ { "kind", "kb" }, { "documents", kb.documents.size() }, { "out", a.out } }.dump()
              << "\n";
    return 0;
  }
  if (a.kind == "defect") {
    DefectSpec spec;
    spec.seed = cfg.seed;
    spec.defective = !a.normal;
    spec.signal = a.signal;
    spec.noise = a.noise;
    spec.grid_h = spec.grid_w = a.grid;
    spec.rect = { a.grid / 4, a.grid / 4, std::max<std::size_t>(a.grid / 3, 1), std::max<std::size_t>(a.grid / 3, 1) };
    const auto fx = gen_defect_grid(spec, a.prompt_seed);
    write_defect_fixture(a.out, fx);
    std::cout << json{ { "kind", "defect" }, { "patches", fx.patches.count() }, { "out", a.out } }.dump()
              << "\n";
    return 0;
  }
  throw ConfigError("synth kind must be kb or defect");
}

// ---------------------------------------------------------------------------

struct BenchArgs
{
  std::string stage = "retrieve";
  std::size_t repeats = 5;
};

int cmd_bench(const BenchArgs& a, const RunConfig& cfg)
{
  std::function<std::string()> stage;
  if (a.stage == "gmm" || a.stage == "retrieve") {
    const auto kb = gen_planted_kb(PlantedKbSpec::skewed(cfg.seed));
    const auto index = kb.index();
    const auto key = kb.queries[0].key;
    if (a.stage == "gmm") {
      stage = [=, scores = score_all(key, index)] {
        const auto c = fit_score_gmm(scores, cfg.retrieval_options().gmm);
        json j = json::array();
        for (const auto& g : c.components)
          j.push_back({ g.mean, g.variance, g.weight });
        return j.dump();
      };
    } else {
      stage = [=] {
        const auto r = kde_sample_retrieve(key, index, cfg.budget, cfg.retrieval_options());
        return retrieval_json("bench", r, index).dump();
      };
    }
  } else if (a.stage == "score") {
    DefectSpec spec;
    spec.seed = cfg.seed;
    spec.grid_h = spec.grid_w = 24;
    spec.rect = { 6, 6, 8, 8 };
    const auto fx = gen_defect_grid(spec);
    stage = [=] {
      const auto m = localization_map(fx.grid(), fx.positive_prompt, fx.negative_prompt, 24 * 14, 24 * 14,
                                      cfg.image_aggregator());
      return json(m.values).dump();
    };
  } else if (a.stage == "hsp") {
    Rng rng(cfg.seed);
    Matrix eq(64, 128), el(32, 128);
    for (Eigen::Index i = 0; i < eq.size(); ++i)
      eq.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < el.size(); ++i)
      el.data()[i] = rng.normal() / std::sqrt(128.0);
    stage = [=] {
      SparseCodeProblem p{ eq, el, cfg.hsp_lambda, cfg.hsp_step, cfg.hsp_iters, cfg.hsp_tol };
      const auto st = ista_solve(p);
      return json(st.objective_trace).dump();
    };
  } else {
    throw ConfigError("--stage must be gmm, retrieve, score or hsp");
  }
  std::cout << run_bench(a.stage, a.repeats, stage).to_json().dump() << "\n";
  return 0;
}

std::string dashed(std::string s)
{
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "adkit: knowledge retrieval, sparse prompt coding and anomaly localization over embeddings" };
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "flat key = value config file (flags override it)");

  std::map<std::string, std::string> flag_values;
  for (const auto& k : adkit::config_keys()) {
    app.add_option(dashed(k.name), flag_values[k.name], std::string(k.help) + " [config key: " + k.name + "]");
  }

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "build a knowledge index bundle from a manifest and embeddings");
  c_ingest->add_option("--manifest", ingest.manifest, "JSON Lines manifest")->required();
  c_ingest->add_option("--embeddings", ingest.embeddings, "ADSK lock embeddings")->required();
  c_ingest->add_option("--out", ingest.out, "output bundle directory")->required();

  RetrieveArgs retrieve;
  auto* c_retrieve = app.add_subcommand("retrieve", "retrieve documents for one or more query keys");
  c_retrieve->add_option("--index", retrieve.index, "index bundle directory")->required();
  c_retrieve->add_option("--key", retrieve.key, "ADSK file of query keys (one JSON line per row)")->required();
  c_retrieve->add_option("--method", retrieve.method, "topk or kde")->capture_default_str();
  c_retrieve->add_option("--query-id", retrieve.query_id, "query id reported in the output");

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "anomaly localization map and image score for a patch grid");
  c_score->add_option("--patches", score.patches, "ADSK patch embeddings, row-major over the grid")->required();
  c_score->add_option("--grid", score.grid, "patch grid HxW (default: square)");
  c_score->add_option("--out-size", score.out_size, "output map HxW (default: 4x the grid)");
  c_score->add_option("--out-map", score.out_map, "write the map as 8-bit PGM");
  c_score->add_option("--pos", score.pos, "positive (defect-free) prompt vector, ADSK");
  c_score->add_option("--neg", score.neg, "negative (defect) prompt vector, ADSK");
  c_score->add_option("--label", score.label, "defect type used to instantiate prompts");
  c_score->add_option("--category", score.category, "object category for [obj]")->capture_default_str();
  c_score->add_option("--prompt-table", score.prompt_table, "ADSK prompt embeddings with a labels sidecar of prompt texts");
  c_score->add_option("--prompt-labels", score.prompt_labels, "prompt text sidecar (default: <table>.labels.json)");
  c_score->add_option("--key", score.key, "query key matched to the nearest centroid to pick the label");
  c_score->add_option("--centroids", score.centroids, "ADSK centroid store");
  c_score->add_option("--centroid-labels", score.centroid_labels, "centroid label sidecar (default: <store>.labels.json)");
  c_score->add_option("--hsp-dict", score.hsp_dicts, "prompt dictionary per sparse coding stage (last one repeats)");
  c_score->add_option("--vis", score.vis, "visual embedding to append to the prior embedding");
  c_score->add_option("--prior-out", score.prior_out, "write the assembled prior embedding (ADSK)");
  c_score->add_flag("--diagnostics", score.diagnostics, "include sparse coding traces and prompt routing");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "image- and pixel-level AUROC");
  c_eval->add_option("--scores", eval.scores, "JSON Lines of {id, score, label}");
  c_eval->add_option("--map", eval.maps, "anomaly map PGM (repeatable)");
  c_eval->add_option("--mask", eval.masks, "ground-truth mask PGM, paired with --map (repeatable)");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "write deterministic synthetic fixtures");
  c_synth->add_option("kind", synth.kind, "kb or defect")->required();
  c_synth->add_option("--out", synth.out, "output directory")->required();
  c_synth->add_option("--scenario", synth.scenario, "kb layout: skewed or separated")->capture_default_str();
  c_synth->add_flag("--normal", synth.normal, "defect: emit a defect-free grid");
  c_synth->add_option("--signal", synth.signal, "defect: displacement toward the prompt")->capture_default_str();
  c_synth->add_option("--noise", synth.noise, "defect: noise norm")->capture_default_str();
  c_synth->add_option("--grid-size", synth.grid, "defect: square grid side")->capture_default_str();
  c_synth->add_option("--prompt-seed", synth.prompt_seed, "defect: seed of the shared prompt pair")->capture_default_str();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "time a pipeline stage; reports mean and SD");
  c_bench->add_option("--stage", bench.stage, "gmm, retrieve, score or hsp")->capture_default_str();
  c_bench->add_option("--repeats", bench.repeats, "repetitions")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(adkit::ErrorKind::shape);
  }

  try {
    adkit::RunConfig cfg;
    if (!config_path.empty())
      adkit::apply_config_file(cfg, config_path);
    for (const auto& k : adkit::config_keys())
      if (app.count(dashed(k.name)) > 0)
        adkit::set_config_value(cfg, k.name, flag_values[k.name]);

    if (*c_ingest)
      return cmd_ingest(ingest);
    if (*c_retrieve)
      return cmd_retrieve(retrieve, cfg);
    if (*c_score)
      return cmd_score(score, cfg);
    if (*c_eval)
      return cmd_eval(eval);
    if (*c_synth)
      return cmd_synth(synth, cfg);
    if (*c_bench)
      return cmd_bench(bench, cfg);
  } catch (const adkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(adkit::ErrorKind::input);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(adkit::ErrorKind::input);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
