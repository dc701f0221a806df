#pragma once

// Knowledge index (lock embeddings plus document metadata), centroid store,
// and type-level prompt instantiation.

#include "adkit/embedding.hpp"
#include "adkit/error.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace adkit {

struct KnowledgeDocument
{
  std::string doc_id;
  std::string category;
  std::string defect_type; // "normal" for defect-free pages
  std::uint64_t page = 0;
  std::string summary;
  std::size_t lock_row = 0;

  friend bool operator==(const KnowledgeDocument&,
                         const KnowledgeDocument&) = default;
};

class IndexBuilder;

// Immutable after construction. Lock row i belongs to document i and has unit
// L2 norm. Instances are only produced by IndexBuilder::freeze.
class KnowledgeIndex
{
public:
  std::size_t size() const noexcept { return documents_.size(); }
  std::size_t dim() const noexcept { return locks_.dim(); }
  bool frozen() const noexcept { return true; }

  const std::vector<KnowledgeDocument>& documents() const noexcept
  {
    return documents_;
  }
  const KnowledgeDocument& document(std::size_t i) const
  {
    return documents_.at(i);
  }
  const EmbeddingMatrix& locks() const noexcept { return locks_; }

private:
  friend class IndexBuilder;
  KnowledgeIndex(std::vector<KnowledgeDocument> docs, EmbeddingMatrix locks)
    : documents_(std::move(docs))
    , locks_(std::move(locks))
  {}

  std::vector<KnowledgeDocument> documents_;
  EmbeddingMatrix locks_;
};

// Single-writer construction of a KnowledgeIndex. Each document's lock_row
// refers to the source matrix; the frozen index stores the rows gathered in
// document order and rewrites lock_row accordingly.
class IndexBuilder
{
public:
  explicit IndexBuilder(EmbeddingMatrix source)
    : source_(std::move(source))
  {}

  void add(KnowledgeDocument doc)
  {
    if (frozen_)
      throw ArgumentError("index builder already frozen");
    if (doc.doc_id.empty())
      throw ManifestError("empty doc_id");
    if (!ids_.insert(doc.doc_id).second)
      throw ManifestError("duplicate doc_id \"" + doc.doc_id + "\"");
    if (doc.lock_row >= source_.count())
      throw ManifestError("doc_id \"" + doc.doc_id + "\" references lock_row " +
                          std::to_string(doc.lock_row) + " but only " +
                          std::to_string(source_.count()) +
                          " embeddings exist");
    docs_.push_back(std::move(doc));
  }

  KnowledgeIndex freeze()
  {
    if (frozen_)
      throw ArgumentError("index builder already frozen");
    frozen_ = true;
    std::vector<std::size_t> rows;
    rows.reserve(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) {
      rows.push_back(docs_[i].lock_row);
      docs_[i].lock_row = i;
    }
    auto locks = normalize_rows(gather_rows(source_, rows));
    return { std::move(docs_), std::move(locks) };
  }

private:
  EmbeddingMatrix source_;
  std::vector<KnowledgeDocument> docs_;
  std::set<std::string> ids_;
  bool frozen_ = false;
};

// ---------------------------------------------------------------------------
// Manifest (JSON Lines)

namespace manifest {

inline KnowledgeDocument parse_line(const std::string& line,
                                    std::size_t line_no)
{
  const auto where = "manifest line " + std::to_string(line_no) + ": ";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ManifestError(where + "malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object())
    throw ManifestError(where + "expected a JSON object");

  auto str = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
      throw ManifestError(where + "missing string key \"" + key + "\"");
    return it->get<std::string>();
  };
  auto uint = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_unsigned())
      throw ManifestError(where + "missing non-negative integer key \"" +
                          key + "\"");
    return it->get<std::uint64_t>();
  };

  KnowledgeDocument doc;
  doc.doc_id = str("doc_id");
  doc.category = str("category");
  doc.defect_type = str("defect_type");
  doc.page = uint("page");
  doc.summary = str("summary");
  doc.lock_row = static_cast<std::size_t>(uint("lock_row"));
  return doc;
}

inline std::vector<KnowledgeDocument> parse(std::istream& in)
{
  std::vector<KnowledgeDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    docs.push_back(parse_line(line, line_no));
  }
  return docs;
}

inline std::string to_line(const KnowledgeDocument& d)
{
  const nlohmann::json j = { { "doc_id", d.doc_id },
                             { "category", d.category },
                             { "defect_type", d.defect_type },
                             { "page", d.page },
                             { "summary", d.summary },
                             { "lock_row", d.lock_row } };
  return j.dump();
}

} // namespace manifest

inline KnowledgeIndex build_index(const std::vector<KnowledgeDocument>& docs,
                                  EmbeddingMatrix embeddings)
{
  IndexBuilder builder(std::move(embeddings));
  for (const auto& d : docs)
    builder.add(d);
  return builder.freeze();
}

inline KnowledgeIndex build_index(const std::string& manifest_path,
                                  EmbeddingMatrix embeddings)
{
  std::ifstream in(manifest_path);
  if (!in)
    throw ManifestError("cannot open manifest " + manifest_path);
  return build_index(manifest::parse(in), std::move(embeddings));
}

// Index bundle: a directory holding manifest.jsonl and locks.adsk, with the
// locks already normalized and gathered in document order.
inline void save_index(const std::string& dir, const KnowledgeIndex& index)
{
  std::filesystem::create_directories(dir);
  std::string lines;
  for (const auto& d : index.documents())
    lines += manifest::to_line(d) + "\n";
  write_file(dir + "/manifest.jsonl", lines);
  save_embeddings(dir + "/locks.adsk", index.locks());
}

inline KnowledgeIndex load_index(const std::string& dir)
{
  if (!std::filesystem::is_directory(dir))
    throw FormatError("index bundle " + dir + " does not exist");
  return build_index(dir + "/manifest.jsonl",
                     load_embeddings(dir + "/locks.adsk"));
}

// ---------------------------------------------------------------------------
// Labeled vector stores (centroids, prompt-embedding tables)

// Rows are unit-normalized on construction; labels.size() == rows.count().
class LabeledStore
{
public:
  LabeledStore(EmbeddingMatrix rows, std::vector<std::string> labels)
    : rows_(normalize_rows(rows))
    , labels_(std::move(labels))
  {
    if (labels_.size() != rows_.count())
      throw DataError("store has " + std::to_string(rows_.count()) +
                      " rows but " + std::to_string(labels_.size()) +
                      " labels");
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return rows_.dim(); }
  const EmbeddingMatrix& rows() const noexcept { return rows_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  // First row whose label equals `label`, if any.
  std::optional<std::span<const float>> find(const std::string& label) const
  {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label)
        return rows_.row(i);
    return std::nullopt;
  }

private:
  EmbeddingMatrix rows_;
  std::vector<std::string> labels_;
};

using CentroidStore = LabeledStore;
using PromptTable = LabeledStore;

inline std::string default_labels_path(const std::string& embeddings_path)
{
  return embeddings_path + ".labels.json";
}

inline LabeledStore load_labeled_store(const std::string& embeddings_path,
                                       const std::string& labels_path)
{
  auto rows = load_embeddings(embeddings_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(labels_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("labels file " + labels_path + ": " + e.what());
  }
  if (!j.is_array())
    throw FormatError("labels file " + labels_path + " is not a JSON array");
  std::vector<std::string> labels;
  for (const auto& v : j) {
    if (!v.is_string())
      throw FormatError("labels file " + labels_path +
                        " contains a non-string entry");
    labels.push_back(v.get<std::string>());
  }
  return { std::move(rows), std::move(labels) };
}

inline void save_labeled_store(const std::string& embeddings_path,
                               const std::string& labels_path,
                               const LabeledStore& store)
{
  save_embeddings(embeddings_path, store.rows());
  write_file(labels_path, nlohmann::json(store.labels()).dump() + "\n");
}

struct CentroidMatch
{
  std::string label;
  double similarity = 0.0;
  std::size_t index = 0;
};

// Label of the centroid with maximal cosine similarity to `key`; the lowest
// index wins ties.
inline CentroidMatch nearest_centroid(std::span<const float> key,
                                      const CentroidStore& store)
{
  if (store.size() == 0)
    throw EmptyStoreError("centroid store is empty");
  if (key.size() != store.dim())
    throw DimensionError("key dim " + std::to_string(key.size()) +
                         " != centroid dim " + std::to_string(store.dim()));
  if (l2_norm(key) == 0.0)
    throw DataError("key vector is zero");

  CentroidMatch best{ store.labels()[0], cosine(key, store.rows().row(0)), 0 };
  for (std::size_t i = 1; i < store.size(); ++i) {
    const double s = cosine(key, store.rows().row(i));
    if (s > best.similarity)
      best = { store.labels()[i], s, i };
  }
  return best;
}

// ---------------------------------------------------------------------------
// Prompts

struct PromptTemplates
{
  std::string positive = "A image with [cls] defect type";
  std::string negative = "A image with flawless [obj]";
};

struct PromptPair
{
  std::string positive;
  std::string negative;

  friend bool operator==(const PromptPair&, const PromptPair&) = default;
};

namespace detail {

inline std::string replace_all(std::string s,
                               const std::string& from,
                               const std::string& to)
{
  for (std::size_t pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

} // namespace detail

// Substitutes [cls] with the defect label and [obj] with the object category
// in both templates.
inline PromptPair instantiate_prompts(const std::string& label,
                                      const std::string& category = "object",
                                      const PromptTemplates& templates = {})
{
  if (label.empty())
    throw ArgumentError("prompt label must be non-empty");
  auto fill = [&](const std::string& t) {
    return detail::replace_all(detail::replace_all(t, "[cls]", label),
                               "[obj]",
                               category);
  };
  return { fill(templates.positive), fill(templates.negative) };
}

} // namespace adkit
