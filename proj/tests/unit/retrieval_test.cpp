#include "adkit/retrieval.hpp"
#include "adkit/rng.hpp"
#include "adkit/synthetic.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace adkit;

namespace {

KnowledgeIndex random_index(Rng& rng, std::size_t n, std::size_t dim)
{
  std::vector<float> data(n * dim);
  for (auto& v : data)
    v = static_cast<float>(rng.normal());
  std::vector<KnowledgeDocument> docs;
  for (std::size_t i = 0; i < n; ++i)
    docs.push_back({ "d" + std::to_string(i), "c", "normal", 0, "", i });
  return build_index(docs, EmbeddingMatrix(dim, n, data));
}

std::vector<std::size_t> doc_ids(const std::vector<RankedDoc>& docs)
{
  std::vector<std::size_t> out;
  for (const auto& d : docs)
    out.push_back(d.doc);
  return out;
}

} // namespace

TEST(ScoreAll, IdentityAndOrthogonal)
{
  Rng rng(1);
  const auto index = random_index(rng, 6, 8);
  const auto l3 = index.locks().row(3);
  const auto s = score_all(l3, index);
  EXPECT_NEAR(s[3], 1.0, 1e-6);

  const EmbeddingMatrix e(3, 2, { 1, 0, 0, 0, 1, 0 });
  const auto idx = build_index({ { "a", "c", "n", 0, "", 0 }, { "b", "c", "n", 0, "", 1 } }, e);
  const std::vector<float> z{ 0, 0, 1 };
  for (const double v : score_all(z, idx))
    EXPECT_NEAR(v, 0.0, 1e-6);
  const std::vector<float> bad{ 1, 0 };
  EXPECT_THROW(score_all(bad, idx), DimensionError);
}

TEST(ScoreAll, MatchesDoubleLoopOracle)
{
  Rng rng(2);
  const auto index = random_index(rng, 200, 24);
  std::vector<float> key(24);
  for (auto& v : key)
    v = static_cast<float>(rng.normal(0.0, 5.0));
  std::vector<std::vector<double>> docs;
  for (std::size_t i = 0; i < index.size(); ++i)
    docs.emplace_back(index.locks().row(i).begin(), index.locks().row(i).end());
  const auto expect = oracle::cosine_scores({ key.begin(), key.end() }, docs);
  const auto got = score_all(key, index);
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], expect[i], 1e-6);
    EXPECT_LE(std::abs(got[i]), 1.0 + 1e-9);
  }
}

TEST(ScoreAll, RankingIsScaleInvariant)
{
  Rng rng(3);
  const auto index = random_index(rng, 100, 16);
  std::vector<float> key(16);
  for (auto& v : key)
    v = static_cast<float>(rng.normal());
  const auto base = rank_order(score_all(key, index));
  for (const float c : { 0.001f, 3.0f, 1000.0f }) {
    auto scaled = key;
    for (auto& v : scaled)
      v *= c;
    EXPECT_EQ(rank_order(score_all(scaled, index)), base);
  }
}

TEST(TopK, Examples)
{
  const std::vector<double> s{ 0.1, 0.9, 0.5 };
  EXPECT_EQ(doc_ids(top_k(s, 2)), (std::vector<std::size_t>{ 1, 2 }));
  EXPECT_EQ(doc_ids(top_k(s, 3)), (std::vector<std::size_t>{ 1, 2, 0 }));
  EXPECT_EQ(doc_ids(top_k(s, 10)).size(), 3u);
  EXPECT_THROW(top_k(s, 0), ArgumentError);
  const std::vector<double> ties{ 0.5, 0.7, 0.5, 0.7 };
  EXPECT_EQ(doc_ids(top_k(ties, 4)), (std::vector<std::size_t>{ 1, 3, 0, 2 }));
}

TEST(TopK, MatchesFullSortOracle)
{
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(1 + rng.below(60));
    for (auto& v : s)
      v = double(int(rng.below(9))) / 8.0; // many ties
    const std::size_t k = 1 + rng.below(12);
    EXPECT_EQ(doc_ids(top_k(s, k)), oracle::top_k_by_sort(s, k));
  }
}

TEST(Apportion, LargestRemainder)
{
  const std::vector<double> w{ 0.5, 0.3, 0.2 };
  EXPECT_EQ(apportion_largest_remainder(10, w), (std::vector<std::size_t>{ 5, 3, 2 }));
  // Quotas 2.5, 1.5, 1.0: the remaining seat goes to the lowest index among
  // equal remainders.
  EXPECT_EQ(apportion_largest_remainder(5, w), (std::vector<std::size_t>{ 3, 1, 1 }));
  const std::vector<double> eq{ 1, 1, 1 };
  EXPECT_EQ(apportion_largest_remainder(2, eq), (std::vector<std::size_t>{ 1, 1, 0 }));
  const std::vector<double> zero{ 0, 0 };
  EXPECT_THROW(apportion_largest_remainder(3, zero), ArgumentError);
}

TEST(Apportion, SumsExactlyOverRandomWeights)
{
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> w(1 + rng.below(8));
    for (auto& v : w)
      v = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    w[0] += 1e-3;
    const std::size_t total = rng.below(50);
    const auto seats = apportion_largest_remainder(total, w);
    EXPECT_EQ(std::accumulate(seats.begin(), seats.end(), std::size_t{ 0 }), total);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double q = double(total) * w[i] / sum;
      EXPECT_GE(double(seats[i]), std::floor(q) - 1e-9);
      EXPECT_LE(double(seats[i]), std::floor(q) + 1.0);
    }
  }
}

TEST(AllocateBudget, RedistributesSaturatedClusters)
{
  const std::vector<double> w{ 0.9, 0.1 };
  const std::vector<std::size_t> cap{ 2, 10 };
  EXPECT_EQ(allocate_budget(6, w, cap), (std::vector<std::size_t>{ 2, 4 }));
  EXPECT_EQ(allocate_budget(100, w, cap), (std::vector<std::size_t>{ 2, 10 }));
  const std::vector<double> w0{ 1.0, 0.0, 0.0 };
  const std::vector<std::size_t> cap0{ 1, 3, 1 };
  // Leftover seats follow spare capacity once weighted clusters are full.
  EXPECT_EQ(allocate_budget(4, w0, cap0), (std::vector<std::size_t>{ 1, 2, 1 }));
}

TEST(KdeSample, SaturatedBudgetReturnsFullRanking)
{
  Rng rng(6);
  const auto index = random_index(rng, 30, 8);
  std::vector<float> key(8);
  for (auto& v : key)
    v = static_cast<float>(rng.normal());
  const auto r = kde_sample_retrieve(key, index, 50);
  const auto scores = score_all(key, index);
  EXPECT_EQ(doc_ids(r.docs), oracle::top_k_by_sort(scores, 30));
}

TEST(KdeSample, SingleClusterReducesToTopK)
{
  Rng rng(7);
  RetrievalOptions opt;
  opt.gmm.k_max = 1;
  for (int trial = 0; trial < 20; ++trial) {
    const auto index = random_index(rng, 40, 6);
    std::vector<float> key(6);
    for (auto& v : key)
      v = static_cast<float>(rng.normal());
    const std::size_t budget = 1 + rng.below(15);
    const auto a = kde_sample_retrieve(key, index, budget, opt);
    const auto b = top_k_retrieve(key, index, budget);
    ASSERT_EQ(a.docs.size(), b.docs.size());
    for (std::size_t i = 0; i < a.docs.size(); ++i) {
      EXPECT_EQ(a.docs[i].doc, b.docs[i].doc);
      EXPECT_EQ(a.docs[i].score, b.docs[i].score);
    }
  }
}

TEST(KdeSample, ResultInvariants)
{
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto kb = gen_planted_kb(PlantedKbSpec::skewed(trial));
    const auto index = kb.index();
    const std::size_t budget = 1 + rng.below(30);
    const auto r = kde_sample_retrieve(kb.queries[0].key, index, budget);
    EXPECT_LE(r.docs.size(), budget);
    std::set<std::size_t> seen;
    for (const auto& d : r.docs)
      EXPECT_TRUE(seen.insert(d.doc).second);
    for (std::size_t i = 1; i < r.docs.size(); ++i)
      EXPECT_GE(r.docs[i - 1].score, r.docs[i].score);
    EXPECT_EQ(std::accumulate(r.allocations.begin(), r.allocations.end(), std::size_t{ 0 }),
              std::min(budget, index.size()));
  }
}

TEST(KdeSample, Deterministic)
{
  const auto kb = gen_planted_kb(PlantedKbSpec::skewed(42));
  const auto index = kb.index();
  RetrievalOptions opt;
  opt.gmm.seed = 9;
  const auto a = kde_sample_retrieve(kb.queries[0].key, index, 10, opt);
  const auto b = kde_sample_retrieve(kb.queries[0].key, index, 10, opt);
  EXPECT_EQ(a.docs, b.docs);
  EXPECT_EQ(a.allocations, b.allocations);
}

TEST(KdeSample, PlantedRelevanceBeatsTopK)
{
  const auto kb = gen_planted_kb(PlantedKbSpec::skewed(1));
  const auto index = kb.index();
  const auto& q = kb.queries[0];
  const auto kde = kde_sample_retrieve(q.key, index, 10);
  const auto top = top_k_retrieve(q.key, index, 10);
  EXPECT_GT(recall(q.relevant, doc_ids(kde.docs)), recall(q.relevant, doc_ids(top.docs)));
}

TEST(KdeSample, Errors)
{
  const std::vector<double> s{ 0.1, 0.2 };
  EXPECT_THROW(kde_sample(s, 0), ArgumentError);
  EXPECT_THROW(kde_sample(std::vector<double>{}, 3), EmptyStoreError);
  const auto one = kde_sample(std::vector<double>{ 0.4 }, 3);
  ASSERT_EQ(one.docs.size(), 1u);
}
