#include <gtest/gtest.h>

#include <numeric>

#include "figsbd/figs.hpp"
#include "figsbd/io.hpp"
#include "support.hpp"

namespace figsbd {
namespace {

using testing::CartOracle;
using testing::Rng;

int max_leaf_depth(const Tree& t) {
  int d = 0;
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) d = std::max(d, n.depth);
  }
  return d;
}

TEST(FigsFit, SeparableStump) {
  Matrix x(20, 1), y(20, 1);
  for (std::size_t i = 10; i < 20; ++i) x(i, 0) = y(i, 0) = 1.0;
  const auto m = figs::fit(x, y, {1, 1, 1, 1});
  ASSERT_EQ(m.trees.size(), 1u);
  const auto& nodes = m.trees[0].nodes;
  ASSERT_EQ(nodes.size(), 3u);
  EXPECT_EQ(nodes[0].feature, 0);
  EXPECT_EQ(nodes[0].threshold, 0.5);
  EXPECT_EQ(nodes[nodes[0].left].value, std::vector<double>{0.0});
  EXPECT_EQ(nodes[nodes[0].right].value, std::vector<double>{1.0});
  EXPECT_EQ(figs::train_loss(m, x, y), 0.0);
}

// Least squares of y on [1, x_i, x_j] via 3x3 normal equations.
double stump_pair_sse(const Matrix& x, const Matrix& y, std::size_t a, std::size_t b) {
  double g[3][4] = {};
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double f[3] = {1.0, x(r, a), x(r, b)};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) g[i][j] += f[i] * f[j];
      g[i][3] += f[i] * y(r, 0);
    }
  }
  for (int c = 0; c < 3; ++c) {
    for (int r = c + 1; r < 3; ++r) {
      const double m = g[r][c] / g[c][c];
      for (int k = c; k < 4; ++k) g[r][k] -= m * g[c][k];
    }
  }
  double w[3];
  for (int r = 2; r >= 0; --r) {
    w[r] = g[r][3];
    for (int k = r + 1; k < 3; ++k) w[r] -= g[r][k] * w[k];
    w[r] /= g[r][r];
  }
  double sse = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double e = y(r, 0) - (w[0] + w[1] * x(r, a) + w[2] * x(r, b));
    sse += e * e;
  }
  return sse;
}

TEST(FigsFit, AdditiveRecovery) {
  Matrix x(20, 2), y(20, 1);
  for (std::size_t i = 0; i < 20; ++i) {
    x(i, 0) = static_cast<double>(i % 2);
    x(i, 1) = static_cast<double>((i / 2) % 2);
    y(i, 0) = 2.0 * x(i, 0) + 3.0 * x(i, 1);
  }
  // An exact two-stump decomposition exists.
  EXPECT_LT(stump_pair_sse(x, y, 0, 1), 1e-20);

  const auto m = figs::fit(x, y, {2, 2, 1, 1});
  EXPECT_LT(figs::train_loss(m, x, y), 1e-10);
  EXPECT_EQ(figs::count_rules(m), 2);
  EXPECT_EQ(m.trees.size(), 2u);
}

TEST(FigsFit, ConstantTargetHasNoRules) {
  Rng rng(3);
  const Matrix x = testing::random_binary(rng, 20, 4);
  Matrix y(20, 1, 4.2);
  const auto m = figs::fit(x, y, {10, 5, 3, 1});
  EXPECT_EQ(figs::count_rules(m), 0);
  ASSERT_EQ(m.trees.size(), 1u);
  ASSERT_EQ(m.trees[0].nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(m.trees[0].nodes[0].value[0], 4.2);
}

TEST(FigsFit, Errors) {
  try {
    figs::fit(Matrix(0, 2), Matrix(0, 1), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty dataset");
  }
  Matrix x{{0.0, 0.5}};
  Matrix y{{1.0}};
  try {
    figs::fit(x, y, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "non-binary feature");
  }
  EXPECT_THROW(figs::fit(Matrix{{0.0}}, Matrix{{1.0}, {2.0}}, {}), Error);
  EXPECT_THROW(figs::fit(Matrix{{0.0}}, Matrix{{1.0}}, {0, 1, 1, 1}), Error);
}

TEST(FigsPredict, ConstantModel) {
  const auto m = testing::model_of({testing::constant_tree({1.5, -2.0})}, 3, 2);
  Rng rng(1);
  const Matrix x = testing::random_binary(rng, 5, 3);
  const Matrix p = figs::predict(m, x);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(testing::row_of(p, i), (std::vector<double>{1.5, -2.0}));
  }
}

TEST(FigsPredict, HandBuiltTwoTrees) {
  const auto m = testing::model_of(
      {testing::stump(0, {0, 0}, {2, -2}), testing::stump(1, {1, 1}, {0, 0})}, 2, 2);
  const std::vector<double> x{1, 0};
  EXPECT_EQ(figs::predict_row(m, x), (std::vector<double>{3, -1}));
  EXPECT_THROW(figs::predict(m, Matrix(1, 3)), Error);
  EXPECT_THROW(figs::predict_row(m, std::vector<double>{1.0}), Error);
}

TEST(FigsPredict, PerTreePath) {
  // root tests c3; its right child tests c7, then c3 again.
  Tree t;
  TreeNode root;
  root.feature = 3;
  root.threshold = 0.5;
  root.left = 1;
  root.right = 2;
  TreeNode mid;
  mid.feature = 7;
  mid.threshold = 0.5;
  mid.left = 3;
  mid.right = 4;
  mid.depth = 1;
  t.nodes = {root, testing::leaf({0.0}, 1), mid, testing::leaf({1.0}, 2),
             testing::leaf({2.0}, 2)};
  const auto m = testing::model_of({t, testing::constant_tree({0.25})}, 8, 1);
  std::vector<double> x(8, 0.0);
  x[3] = 1.0;
  const auto per = figs::predict_per_tree(m, x);
  ASSERT_EQ(per.size(), 2u);
  EXPECT_EQ(per[0].path, (std::vector<std::size_t>{3, 7}));
  EXPECT_EQ(per[0].pred, std::vector<double>{1.0});
  EXPECT_TRUE(per[1].path.empty());
  EXPECT_EQ(per[1].pred, std::vector<double>{0.25});
  EXPECT_EQ(figs::predict_row(m, x), std::vector<double>{1.25});
}

TEST(FigsRules, Counts) {
  EXPECT_EQ(figs::count_rules(testing::model_of({testing::constant_tree({0})}, 1, 1)), 0);
  EXPECT_EQ(figs::count_rules(testing::model_of({testing::stump(0, {0}, {1})}, 1, 1)), 1);
  // Complete depth-3 tree grown on 8 distinct patterns.
  Matrix x(8, 3), y(8, 1);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = static_cast<double>((i >> j) & 1);
    y(i, 0) = static_cast<double>(i * i);
  }
  const auto m = figs::fit(x, y, {7, 1, 3, 1});
  EXPECT_EQ(figs::count_rules(m), 7);
  EXPECT_EQ(m.trees[0].depth(), 3);
}

TEST(FigsLoss, Values) {
  Matrix x(4, 1), y(4, 1);
  y(1, 0) = y(3, 0) = 1.0;
  const auto mean_model = testing::model_of({testing::constant_tree({0.5})}, 1, 1);
  EXPECT_EQ(figs::train_loss(mean_model, x, y), 0.25);
  const auto c = testing::model_of({testing::constant_tree({2.0})}, 1, 1);
  EXPECT_EQ(figs::train_loss(c, x, Matrix(4, 1, 2.0)), 0.0);
  EXPECT_THROW(figs::train_loss(c, x, Matrix(3, 1)), Error);
}

TEST(FigsProperty, PredictIsSumOfTrees) {
  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = testing::uniform(rng, 5, 40), d = testing::uniform(rng, 1, 6),
                      k = testing::uniform(rng, 1, 3);
    const Matrix x = testing::random_binary(rng, n, d);
    const Matrix y = testing::random_normal(rng, n, k);
    const auto m = figs::fit(x, y, {static_cast<int>(testing::uniform(rng, 1, 12)),
                                    static_cast<int>(testing::uniform(rng, 1, 4)),
                                    static_cast<int>(testing::uniform(rng, 1, 3)), 1});
    const Matrix probe = testing::random_binary(rng, 10, d);
    const Matrix p = figs::predict(m, probe);
    for (std::size_t i = 0; i < probe.rows(); ++i) {
      std::vector<double> sum(k, 0.0);
      for (const auto& c : figs::predict_per_tree(m, probe.row(i))) {
        for (std::size_t j = 0; j < k; ++j) sum[j] += c.pred[j];
      }
      EXPECT_EQ(sum, testing::row_of(p, i));
    }
  }
}

TEST(FigsProperty, BudgetsAndMonotoneLoss) {
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = testing::uniform(rng, 1, 60), d = testing::uniform(rng, 1, 8),
                      k = testing::uniform(rng, 1, 4);
    const HyperParams p{static_cast<int>(testing::uniform(rng, 1, 20)),
                        static_cast<int>(testing::uniform(rng, 1, 5)),
                        static_cast<int>(testing::uniform(rng, 1, 4)),
                        static_cast<int>(testing::uniform(rng, 1, 3))};
    const Matrix x = testing::random_binary(rng, n, d);
    const Matrix y = testing::random_normal(rng, n, k);
    figs::FitTrace trace;
    const auto m = figs::fit(x, y, p, &trace);
    EXPECT_LE(figs::count_rules(m), p.max_rules);
    EXPECT_LE(static_cast<int>(m.trees.size()), p.max_trees);
    for (const auto& t : m.trees) EXPECT_LE(max_leaf_depth(t), p.max_depth);
    ASSERT_EQ(trace.loss.size(), trace.accepted.size() + 1);
    for (std::size_t s = 1; s < trace.loss.size(); ++s) {
      // Each step is an exact block minimization, so only rounding can raise it.
      EXPECT_LE(trace.loss[s], trace.loss[s - 1]) << "rep " << rep << " step " << s;
    }
    for (const auto& c : trace.accepted) EXPECT_GE(c.impurity_decrease, 0.0);
    EXPECT_EQ(trace.loss.back(), figs::train_loss(m, x, y));
  }
}

TEST(FigsProperty, MinSamplesLeafRespected) {
  Rng rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = testing::uniform(rng, 10, 50);
    const Matrix x = testing::random_binary(rng, n, 4);
    const Matrix y = testing::random_normal(rng, n, 2);
    const int msl = static_cast<int>(testing::uniform(rng, 2, 6));
    const auto m = figs::fit(x, y, {30, 3, 3, msl});
    for (const auto& t : m.trees) {
      std::vector<int> count(t.nodes.size(), 0);
      for (std::size_t i = 0; i < n; ++i) ++count[static_cast<std::size_t>(t.route(x.row(i)))];
      for (std::size_t id = 0; id < t.nodes.size(); ++id) {
        if (t.nodes[id].is_leaf() && t.nodes.size() > 1) {
          EXPECT_GE(count[id], msl);
        }
      }
    }
  }
}

TEST(FigsProperty, MatchesRecursiveCart) {
  Rng rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = testing::uniform(rng, 1, 50), d = testing::uniform(rng, 1, 6),
                      k = testing::uniform(rng, 1, 3);
    const int depth = static_cast<int>(testing::uniform(rng, 1, 4));
    const int msl = static_cast<int>(testing::uniform(rng, 1, 3));
    const bool binary = rep % 2 == 0;
    const Matrix x = binary ? testing::random_binary(rng, n, d) : testing::random_normal(rng, n, d);
    const Matrix y = testing::random_normal(rng, n, k);
    const HyperParams p{1000, 1, depth, msl};
    const auto m = binary ? figs::fit(x, y, p) : figs::fit_real(x, y, p);
    const CartOracle oracle(x, y, depth, msl, binary);
    EXPECT_EQ(figs::predict(m, x), oracle.fitted()) << "rep " << rep;
    EXPECT_EQ(figs::count_rules(m), oracle.splits()) << "rep " << rep;
  }
}

TEST(FigsProperty, Deterministic) {
  Rng rng(9);
  const Matrix x = testing::random_binary(rng, 80, 6);
  const Matrix y = testing::random_normal(rng, 80, 3);
  const auto a = figs::fit(x, y, {15, 4, 3, 1});
  const auto b = figs::fit(x, y, {15, 4, 3, 1});
  EXPECT_EQ(a, b);
  io::ModelFile fa{{a, {}, {}}, {}}, fb{{b, {}, {}}, {}};
  EXPECT_EQ(io::model_to_json(fa).dump(), io::model_to_json(fb).dump());
}

TEST(FigsProperty, PermutationCovariance) {
  Rng rng(13);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 60, d = 5;
    const Matrix x = testing::random_binary(rng, n, d);
    const Matrix y = testing::random_normal(rng, n, 2);
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix xp(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) xp(i, j) = x(i, perm[j]);
    }
    const HyperParams p{12, 3, 3, 1};
    EXPECT_EQ(figs::predict(figs::fit(x, y, p), x), figs::predict(figs::fit(xp, y, p), xp));
  }
}

TEST(FigsCheckpoints, MatchStandaloneFits) {
  Rng rng(21);
  const Matrix x = testing::random_binary(rng, 120, 8);
  const Matrix y = testing::random_normal(rng, 120, 3);
  const HyperParams base{0, 4, 3, 1};
  const std::vector<int> budgets{25, 3, 10, 1};
  const auto snaps = figs::fit_checkpoints(x, y, {25, 4, 3, 1}, budgets);
  ASSERT_EQ(snaps.size(), budgets.size());
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    HyperParams p = base;
    p.max_rules = budgets[b];
    EXPECT_EQ(snaps[b], figs::fit(x, y, p)) << budgets[b];
  }
}

}  // namespace
}  // namespace figsbd
