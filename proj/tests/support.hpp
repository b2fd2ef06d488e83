#pragma once

// Shared generators and independent reference implementations for tests.
// Nothing here calls into the code under test except for data containers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "figsbd/matrix.hpp"
#include "figsbd/types.hpp"

namespace figsbd::testing {

// std::mt19937_64 on purpose: test data should not share a generator with the
// code being tested.
using Rng = std::mt19937_64;

inline Matrix random_binary(Rng& rng, std::size_t n, std::size_t d, double p = 0.5) {
  std::bernoulli_distribution coin(p);
  Matrix m(n, d);
  for (double& v : m.data()) v = coin(rng) ? 1.0 : 0.0;
  return m;
}

inline Matrix random_normal(Rng& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g;
  Matrix m(n, d);
  for (double& v : m.data()) v = g(rng);
  return m;
}

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline TreeNode leaf(std::vector<double> value, int depth = 0) {
  TreeNode n;
  n.value = std::move(value);
  n.depth = depth;
  return n;
}

/// Tree with one split on `feature` at 0.5.
inline Tree stump(int feature, std::vector<double> left, std::vector<double> right) {
  Tree t;
  TreeNode root;
  root.feature = feature;
  root.threshold = 0.5;
  root.left = 1;
  root.right = 2;
  t.nodes = {root, leaf(std::move(left), 1), leaf(std::move(right), 1)};
  return t;
}

inline Tree constant_tree(std::vector<double> value) {
  Tree t;
  t.nodes = {leaf(std::move(value))};
  return t;
}

inline FigsModel model_of(std::vector<Tree> trees, std::size_t d, std::size_t k) {
  FigsModel m;
  m.trees = std::move(trees);
  m.n_features = d;
  m.n_outputs = k;
  m.params = {100, 100, 5, 1};
  return m;
}

inline std::vector<double> row_of(const Matrix& m, std::size_t r) {
  const auto s = m.row(r);
  return {s.begin(), s.end()};
}

/// Dataset whose true concepts are the >0 signs of `preds` and whose labels
/// are the teacher argmax (classification) or output 0 (regression).
inline Dataset make_dataset(Matrix preds, Matrix logits, Task task = Task::kClassification) {
  Dataset d;
  d.task = task;
  d.concepts_true = Matrix(preds.rows(), preds.cols());
  for (std::size_t i = 0; i < preds.data().size(); ++i) {
    d.concepts_true.data()[i] = preds.data()[i] > 0.0 ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    d.labels.push_back(task == Task::kClassification
                           ? static_cast<double>(argmax(logits.row(i)))
                           : logits(i, 0));
  }
  d.concept_preds = std::move(preds);
  d.logits = std::move(logits);
  return d;
}

// ---------------------------------------------------------------------------
// Recursive depth-limited multi-output regression tree. Impurity is the
// within-node sum of squared errors, computed two-pass per output. Splits
// are tried feature-ascending then threshold-ascending and kept only on a
// strictly larger decrease, which must also exceed 1e-12 * sum(Y^2).

class CartOracle {
 public:
  CartOracle(const Matrix& x, const Matrix& y, int max_depth, int min_leaf, bool binary)
      : x_(x), y_(y), max_depth_(max_depth), min_leaf_(static_cast<std::size_t>(min_leaf)),
        binary_(binary), fitted_(y.rows(), y.cols()) {
    double sq = 0.0;
    for (double v : y.data()) sq += v * v;
    floor_ = 1e-12 * sq;
    std::vector<std::size_t> all(x.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    grow(all, 0);
  }

  [[nodiscard]] const Matrix& fitted() const { return fitted_; }
  [[nodiscard]] int splits() const { return splits_; }

 private:
  double sse(const std::vector<std::size_t>& rows) const {
    double total = 0.0;
    for (std::size_t k = 0; k < y_.cols(); ++k) {
      double mean = 0.0;
      for (auto i : rows) mean += y_(i, k);
      mean /= static_cast<double>(rows.size());
      for (auto i : rows) total += (y_(i, k) - mean) * (y_(i, k) - mean);
    }
    return total;
  }

  std::vector<double> thresholds(const std::vector<std::size_t>& rows, std::size_t j) const {
    if (binary_) return {0.5};
    std::vector<double> values;
    for (auto i : rows) values.push_back(x_(i, j));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> out;
    for (std::size_t p = 0; p + 1 < values.size(); ++p) {
      out.push_back((values[p] + values[p + 1]) / 2.0);
    }
    return out;
  }

  void grow(const std::vector<std::size_t>& rows, int depth) {
    if (depth < max_depth_) {
      const double parent = sse(rows);
      double best_gain = floor_;
      std::vector<std::size_t> best_left, best_right;
      for (std::size_t j = 0; j < x_.cols(); ++j) {
        for (double t : thresholds(rows, j)) {
          std::vector<std::size_t> left, right;
          for (auto i : rows) (x_(i, j) <= t ? left : right).push_back(i);
          if (left.size() < min_leaf_ || right.size() < min_leaf_) continue;
          const double gain = parent - sse(left) - sse(right);
          if (gain > best_gain) {
            best_gain = gain;
            best_left = std::move(left);
            best_right = std::move(right);
          }
        }
      }
      if (!best_left.empty()) {
        ++splits_;
        grow(best_left, depth + 1);
        grow(best_right, depth + 1);
        return;
      }
    }
    for (std::size_t k = 0; k < y_.cols(); ++k) {
      double mean = 0.0;
      for (auto i : rows) mean += y_(i, k);
      mean /= static_cast<double>(rows.size());
      for (auto i : rows) fitted_(i, k) = mean;
    }
  }

  const Matrix& x_;
  const Matrix& y_;
  int max_depth_;
  std::size_t min_leaf_;
  bool binary_;
  double floor_ = 0.0;
  Matrix fitted_;
  int splits_ = 0;
};

// ---------------------------------------------------------------------------
// Exhaustive threshold search: every candidate from {min-1, midpoints, max+1}
// and its mismatch count, computed without any sweep.

struct ThresholdScan {
  std::vector<double> candidates;
  std::vector<std::size_t> mismatches;

  [[nodiscard]] std::size_t best() const {
    return *std::min_element(mismatches.begin(), mismatches.end());
  }
  [[nodiscard]] double first_best_candidate() const {
    const auto b = best();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (mismatches[c] == b) return candidates[c];
    }
    return NAN;
  }
};

inline ThresholdScan scan_thresholds(const std::vector<double>& column,
                                     const std::vector<double>& truth) {
  std::vector<double> values = column;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  ThresholdScan scan;
  scan.candidates.push_back(values.front() - 1.0);
  for (std::size_t p = 0; p + 1 < values.size(); ++p) {
    scan.candidates.push_back((values[p] + values[p + 1]) / 2.0);
  }
  scan.candidates.push_back(values.back() + 1.0);
  for (double t : scan.candidates) {
    std::size_t bad = 0;
    for (std::size_t i = 0; i < column.size(); ++i) {
      if ((column[i] > t) != (truth[i] == 1.0)) ++bad;
    }
    scan.mismatches.push_back(bad);
  }
  return scan;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("figsbd_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace figsbd::testing
