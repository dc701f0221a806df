#include "adkit/knowledge.hpp"
#include "adkit/rng.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace adkit;

namespace {

std::string line(const std::string& id, std::size_t row, const std::string& extra = "")
{
  return R"({"doc_id":")" + id + R"(","category":"wood","defect_type":"scratch","page":3,"summary":"s","lock_row":)" +
         std::to_string(row) + extra + "}";
}

std::vector<KnowledgeDocument> parse(const std::string& text)
{
  std::istringstream in(text);
  return manifest::parse(in);
}

} // namespace

TEST(Manifest, ParsesValidLinesAndIgnoresUnknownKeys)
{
  const auto docs = parse(line("a", 0) + "\n\n" + line("b", 1, R"(,"extra":[1,2])") + "\n" + line("c", 2) + "\n");
  ASSERT_EQ(docs.size(), 3u);
  EXPECT_EQ(docs[1].doc_id, "b");
  EXPECT_EQ(docs[1].category, "wood");
  EXPECT_EQ(docs[1].page, 3u);
  EXPECT_EQ(docs[2].lock_row, 2u);
}

TEST(Manifest, MalformedLines)
{
  EXPECT_THROW(parse("{not json\n"), ManifestError);
  EXPECT_THROW(parse("[1,2]\n"), ManifestError);
  EXPECT_THROW(parse(R"({"doc_id":"a","category":"c","defect_type":"d","page":1,"summary":"s"})"), ManifestError);
  EXPECT_THROW(parse(R"({"doc_id":"a","category":"c","defect_type":"d","page":-1,"summary":"s","lock_row":0})"),
               ManifestError);
}

TEST(BuildIndex, ThreeDocuments)
{
  const EmbeddingMatrix e(2, 3, { 1, 0, 0, 1, 1, 1 });
  const auto index = build_index(parse(line("a", 0) + "\n" + line("b", 1) + "\n" + line("c", 2)), e);
  EXPECT_EQ(index.size(), 3u);
  EXPECT_TRUE(index.frozen());
  EXPECT_EQ(index.document(0).doc_id, "a");
  EXPECT_EQ(index.document(2).doc_id, "c");
  EXPECT_EQ(index.locks().count(), index.size());
}

TEST(BuildIndex, DuplicateIdNamesTheId)
{
  const EmbeddingMatrix e(2, 2, { 1, 0, 0, 1 });
  try {
    build_index(parse(line("dup", 0) + "\n" + line("dup", 1)), e);
    FAIL() << "expected ManifestError";
  } catch (const ManifestError& err) {
    EXPECT_NE(std::string(err.what()).find("dup"), std::string::npos);
  }
}

TEST(BuildIndex, DanglingRow)
{
  const EmbeddingMatrix e(2, 2, { 1, 0, 0, 1 });
  EXPECT_THROW(build_index(parse(line("a", 2)), e), ManifestError);
}

TEST(BuildIndex, NormalizesLocksAndRejectsZero)
{
  const EmbeddingMatrix e(2, 2, { 2, 0, 0, 0 });
  const auto index = build_index(parse(line("a", 0)), e);
  EXPECT_NEAR(l2_norm(index.locks().row(0)), 1.0, 1e-6);
  EXPECT_THROW(build_index(parse(line("z", 1)), e), DataError);
}

TEST(BuildIndex, GathersRowsInDocumentOrder)
{
  const EmbeddingMatrix e(2, 3, { 1, 0, 0, 1, 3, 4 });
  const auto index = build_index(parse(line("x", 2) + "\n" + line("y", 0)), e);
  EXPECT_EQ(index.document(0).lock_row, 0u);
  EXPECT_NEAR(index.locks().row(0)[0], 0.6f, 1e-7);
  EXPECT_NEAR(index.locks().row(1)[0], 1.0f, 1e-7);
}

TEST(IndexBuilder, FrozenBuilderRejectsMutation)
{
  IndexBuilder b(EmbeddingMatrix(1, 1, { 1 }));
  b.add({ "a", "c", "normal", 0, "", 0 });
  (void)b.freeze();
  EXPECT_THROW(b.add({ "b", "c", "normal", 0, "", 0 }), ArgumentError);
  EXPECT_THROW((void)b.freeze(), ArgumentError);
}

TEST(IndexBundle, SaveLoadIsStable)
{
  const auto dir = (std::filesystem::temp_directory_path() / "adkit_bundle_test").string();
  const EmbeddingMatrix e(2, 2, { 3, 4, 0, 2 });
  const auto index = build_index(parse(line("a", 1) + "\n" + line("b", 0)), e);
  save_index(dir, index);
  const auto first = read_file(dir + "/manifest.jsonl") + read_file(dir + "/locks.adsk");
  const auto again = load_index(dir);
  EXPECT_EQ(again.documents(), index.documents());
  EXPECT_EQ(again.locks(), index.locks());
  save_index(dir, again);
  EXPECT_EQ(read_file(dir + "/manifest.jsonl") + read_file(dir + "/locks.adsk"), first);
  std::filesystem::remove_all(dir);
}

TEST(NearestCentroid, WorkedExample)
{
  const CentroidStore store(EmbeddingMatrix(2, 2, { 1, 0, 0, 1 }), { "scratch", "hole" });
  const std::vector<float> key{ 0.9f, 0.1f };
  const auto m = nearest_centroid(key, store);
  EXPECT_EQ(m.label, "scratch");
  EXPECT_NEAR(m.similarity, 0.9 / std::sqrt(0.82), 1e-6);

  const std::vector<float> exact{ 0, 1 };
  const auto h = nearest_centroid(exact, store);
  EXPECT_EQ(h.label, "hole");
  EXPECT_NEAR(h.similarity, 1.0, 1e-12);
}

TEST(NearestCentroid, TieGoesToLowestIndex)
{
  const CentroidStore store(EmbeddingMatrix(2, 2, { 1, 0, 0, 1 }), { "a", "b" });
  const std::vector<float> key{ 1, 1 };
  EXPECT_EQ(nearest_centroid(key, store).index, 0u);
}

TEST(NearestCentroid, Errors)
{
  const CentroidStore store(EmbeddingMatrix(2, 1, { 1, 0 }), { "a" });
  const std::vector<float> wrong{ 1, 0, 0 }, zero{ 0, 0 };
  EXPECT_THROW(nearest_centroid(wrong, store), DimensionError);
  EXPECT_THROW(nearest_centroid(zero, store), DataError);
  const CentroidStore empty(EmbeddingMatrix(2, 0, {}), {});
  const std::vector<float> key{ 1, 0 };
  EXPECT_THROW(nearest_centroid(key, empty), EmptyStoreError);
  EXPECT_THROW(CentroidStore(EmbeddingMatrix(2, 1, { 1, 0 }), { "a", "b" }), DataError);
}

TEST(NearestCentroid, MatchesExhaustiveScan)
{
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 2 + rng.below(15);
    const std::size_t count = 50;
    std::vector<float> data;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<double> row;
      for (std::size_t c = 0; c < dim; ++c) {
        // Coarse values make exact ties plausible.
        const double v = trial % 2 ? rng.normal() : double(int(rng.below(3)) - 1);
        row.push_back(v);
      }
      if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; }))
        row[0] = 1.0;
      rows.push_back(row);
      data.insert(data.end(), row.begin(), row.end());
      labels.push_back("c" + std::to_string(i));
    }
    const CentroidStore store(EmbeddingMatrix(dim, count, data), labels);
    // The oracle sees the stored (normalized float) rows.
    std::vector<std::vector<double>> stored;
    for (std::size_t i = 0; i < count; ++i)
      stored.emplace_back(store.rows().row(i).begin(), store.rows().row(i).end());
    std::vector<double> key(dim);
    for (auto& v : key)
      v = rng.normal();
    const std::vector<float> keyf(key.begin(), key.end());
    const std::vector<double> keyd(keyf.begin(), keyf.end());
    EXPECT_EQ(nearest_centroid(keyf, store).index, oracle::argmax_cosine(keyd, stored));
  }
}

TEST(LabeledStore, SidecarRoundTrip)
{
  const auto base = (std::filesystem::temp_directory_path() / "adkit_store.adsk").string();
  const CentroidStore store(EmbeddingMatrix(2, 2, { 1, 0, 0, 2 }), { "scratch", "hole" });
  save_labeled_store(base, default_labels_path(base), store);
  const auto back = load_labeled_store(base, default_labels_path(base));
  EXPECT_EQ(back.labels(), store.labels());
  EXPECT_EQ(back.rows(), store.rows());
  ASSERT_TRUE(back.find("hole").has_value());
  EXPECT_FALSE(back.find("crack").has_value());
  write_file(default_labels_path(base), "{\"a\":1}");
  EXPECT_THROW(load_labeled_store(base, default_labels_path(base)), FormatError);
  std::filesystem::remove(base);
  std::filesystem::remove(default_labels_path(base));
}

TEST(Prompts, TypeLevelTemplates)
{
  const auto p = instantiate_prompts("scratch", "wood");
  EXPECT_EQ(p.positive, "A image with scratch defect type");
  EXPECT_EQ(p.negative, "A image with flawless wood");
  EXPECT_NE(instantiate_prompts("hole").positive.find("hole"), std::string::npos);
  EXPECT_EQ(instantiate_prompts("hole", "x"), instantiate_prompts("hole", "x"));
  EXPECT_THROW(instantiate_prompts(""), ArgumentError);
}

TEST(Prompts, ConfigurableTemplates)
{
  const PromptTemplates t{ "[obj] with [cls]; [cls]", "clean [obj]" };
  const auto p = instantiate_prompts("crack", "tile", t);
  EXPECT_EQ(p.positive, "tile with crack; crack");
  EXPECT_EQ(p.negative, "clean tile");
}
