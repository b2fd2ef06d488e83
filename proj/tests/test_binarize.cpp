#include <gtest/gtest.h>

#include "figsbd/binarize.hpp"
#include "support.hpp"

namespace figsbd {
namespace {

using testing::Rng;

Matrix column_matrix(const std::vector<double>& v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

TEST(Interpretable, StrictGreaterThanZero) {
  const auto [b, spec] = binarize::threshold_interpretable(Matrix{{0.3, -0.3, 0.0}});
  EXPECT_EQ(b, (Matrix{{1.0, 0.0, 0.0}}));
  EXPECT_EQ(spec.thresholds, (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(spec.mode, BinarizerMode::kInterpretable);
}

TEST(DataDriven, SeparableMidpoint) {
  const auto spec = binarize::fit_datadriven_thresholds(column_matrix({-1.2, -0.1, 0.4, 2.0}),
                                                        column_matrix({0, 0, 1, 1}));
  ASSERT_EQ(spec.thresholds.size(), 1u);
  EXPECT_DOUBLE_EQ(spec.thresholds[0], 0.15);
  const std::vector<double> c{-1.2, -0.1, 0.4, 2.0}, t{0, 0, 1, 1};
  EXPECT_EQ(binarize::mismatches(c, t, spec.thresholds[0]), 0u);
}

TEST(DataDriven, TieTakesSmallestCandidate) {
  const std::vector<double> c{0, 1, 2, 3}, t{1, 0, 1, 0};
  const auto scan = testing::scan_thresholds(c, t);
  EXPECT_EQ(scan.candidates.size(), 5u);
  EXPECT_EQ(scan.best(), 2u);
  const auto spec = binarize::fit_datadriven_thresholds(column_matrix(c), column_matrix(t));
  EXPECT_EQ(spec.thresholds[0], -1.0);
}

TEST(DataDriven, SeparatedAtSign) {
  const auto spec = binarize::fit_datadriven_thresholds(column_matrix({-3, -2, 1, 5}),
                                                        column_matrix({0, 0, 1, 1}));
  EXPECT_EQ(spec.thresholds[0], -0.5);
}

TEST(DataDriven, Errors) {
  EXPECT_THROW(binarize::fit_datadriven_thresholds(Matrix(0, 1), Matrix(0, 1)), Error);
  EXPECT_THROW(binarize::fit_datadriven_thresholds(Matrix(2, 1), Matrix(3, 1)), Error);
  EXPECT_THROW(binarize::fit_datadriven_thresholds(column_matrix({1}), column_matrix({0.5})),
               Error);
}

TEST(DataDriven, MatchesExhaustiveSearch) {
  Rng rng(17);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = testing::uniform(rng, 1, 30);
    std::vector<double> c(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values so ties between samples are common.
      c[i] = static_cast<double>(testing::uniform(rng, 0, 12)) / 4.0 - 1.5;
      t[i] = static_cast<double>(testing::uniform(rng, 0, 1));
    }
    const auto spec = binarize::fit_datadriven_thresholds(column_matrix(c), column_matrix(t));
    const auto scan = testing::scan_thresholds(c, t);
    EXPECT_EQ(binarize::mismatches(c, t, spec.thresholds[0]), scan.best());
    EXPECT_EQ(spec.thresholds[0], scan.first_best_candidate());
    EXPECT_LE(scan.best(), binarize::mismatches(c, t, 0.0));
  }
}

TEST(Apply, Thresholds) {
  BinarizerSpec spec;
  spec.mode = BinarizerMode::kDataDriven;
  spec.thresholds = {0.15};
  const Matrix c = column_matrix({0.1, 0.2});
  EXPECT_EQ(binarize::apply(spec, c), column_matrix({0, 1}));
  EXPECT_EQ(binarize::apply(spec, c), binarize::apply(spec, c));
  EXPECT_THROW(binarize::apply(spec, Matrix(2, 2)), Error);
}

TEST(Apply, OneHotUsesSpecOrder) {
  BinarizerSpec spec;
  spec.mode = BinarizerMode::kOneHot;
  spec.categories = {CategoryBlock{{"pos", "neg", "unk"}, 0, false}};
  const Matrix out = binarize::apply(spec, binarize::CategoricalColumns{{"neg"}});
  EXPECT_EQ(out, (Matrix{{0.0, 1.0, 0.0}}));
  try {
    binarize::apply(spec, binarize::CategoricalColumns{{"maybe"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unknown category"), std::string::npos);
  }
}

TEST(OneHot, FitSortsAndPartitions) {
  const binarize::CategoricalColumns raw{{"pos", "neg", "unk"}, {"1", "0", "1"},
                                         {"b", "a", "c"}};
  const auto spec = binarize::one_hot_fit(raw);
  ASSERT_EQ(spec.categories.size(), 3u);
  EXPECT_EQ(spec.categories[0].categories, (std::vector<std::string>{"neg", "pos", "unk"}));
  EXPECT_TRUE(spec.categories[1].passthrough);
  EXPECT_EQ(spec.n_binary(), 3u + 1u + 3u);
  const Matrix b = binarize::apply(spec, raw);
  EXPECT_EQ(b, (Matrix{{0, 1, 0, 1, 0, 1, 0}, {1, 0, 0, 0, 1, 0, 0}, {0, 0, 1, 1, 0, 0, 1}}));
  for (std::size_t i = 0; i < 3; ++i) {
    for (const auto& block : spec.categories) {
      if (block.passthrough) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < block.width(); ++c) s += b(i, block.first_column + c);
      EXPECT_EQ(s, 1.0);
    }
  }
  EXPECT_EQ(binarize::one_hot_column_names(spec, {"tone", "flag", "x"}),
            (std::vector<std::string>{"tone=neg", "tone=pos", "tone=unk", "flag", "x=a", "x=b",
                                      "x=c"}));
}

TEST(OneHot, WidthIsSumOfCategoryCounts) {
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    binarize::CategoricalColumns raw;
    std::size_t expected = 0;
    const std::size_t d = testing::uniform(rng, 1, 5);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t k = testing::uniform(rng, 3, 6);
      std::vector<std::string> col;
      for (std::size_t c = 0; c < k; ++c) col.push_back("c" + std::to_string(c));
      while (col.size() < 8) {
        col.push_back("c" + std::to_string(testing::uniform(rng, 0, k - 1)));
      }
      expected += k;
      raw.push_back(col);
    }
    const auto spec = binarize::one_hot_fit(raw);
    EXPECT_EQ(spec.n_binary(), expected);
    const Matrix b = binarize::apply(spec, raw);
    for (double v : b.data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
    std::size_t covered = 0;
    for (const auto& block : spec.categories) {
      EXPECT_EQ(block.first_column, covered);
      covered += block.width();
    }
    EXPECT_EQ(covered, b.cols());
  }
}

}  // namespace
}  // namespace figsbd
