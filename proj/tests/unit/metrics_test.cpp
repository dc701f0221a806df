#include "adkit/metrics.hpp"
#include "adkit/rng.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace adkit;

TEST(Auroc, Examples)
{
  EXPECT_EQ(auroc(std::vector<double>{ 0.1, 0.4, 0.35, 0.8 }, std::vector<int>{ 0, 0, 1, 1 }), 0.75);
  EXPECT_EQ(auroc(std::vector<double>{ 1, 2, 3, 4 }, std::vector<int>{ 0, 0, 1, 1 }), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{ 1, 2, 3, 4 }, std::vector<int>{ 1, 1, 0, 0 }), 0.0);
  EXPECT_EQ(auroc(std::vector<double>{ 0.5, 0.5, 0.5 }, std::vector<int>{ 0, 1, 0 }), 0.5);
}

TEST(Auroc, Errors)
{
  EXPECT_THROW(auroc(std::vector<double>{ 1, 2 }, std::vector<int>{ 1 }), DimensionError);
  EXPECT_THROW(auroc(std::vector<double>{ 1, 2 }, std::vector<int>{ 1, 1 }), DegenerateError);
  EXPECT_THROW(auroc(std::vector<double>{ 1, 2 }, std::vector<int>{ 1, 2 }), DataError);
}

TEST(Auroc, BitExactAgainstPairwiseOracle)
{
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(150);
    const std::size_t levels = 1 + rng.below(6);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng.below(levels));
      l[i] = int(rng.below(2));
    }
    l[0] = 0;
    l[1] = 1;
    EXPECT_EQ(auroc(s, l), oracle::pairwise_auroc(s, l));
  }
}

TEST(Auroc, InvariantUnderIncreasingTransforms)
{
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(60);
    std::vector<int> l(60);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = double(rng.below(20)) / 10.0 - 1.0;
      l[i] = int(i % 2);
    }
    const double base = auroc(s, l);
    auto t = s;
    for (auto& v : t)
      v = std::exp(3.0 * v) + 7.0;
    EXPECT_EQ(auroc(t, l), base);
    for (auto& v : t)
      v = std::atan(v);
    EXPECT_EQ(auroc(t, l), base);
  }
}

TEST(PixelAuroc, MacroAverageSkipsSingleClassImages)
{
  const std::vector<std::vector<double>> maps{ { 0.1, 0.9, 0.2, 0.8 }, { 0.3, 0.3, 0.3, 0.3 }, { 0.9, 0.1, 0.5, 0.4 } };
  const std::vector<std::vector<int>> masks{ { 0, 1, 0, 1 }, { 0, 0, 0, 0 }, { 0, 1, 0, 1 } };
  const auto v = pixel_auroc(maps, masks);
  ASSERT_TRUE(v.has_value());
  EXPECT_DOUBLE_EQ(*v, (1.0 + 0.0) / 2.0);
  EXPECT_FALSE(pixel_auroc({ maps[1] }, { masks[1] }).has_value());
  EXPECT_THROW(pixel_auroc(maps, { masks[0] }), DimensionError);
}
