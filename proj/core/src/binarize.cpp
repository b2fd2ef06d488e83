#include "figsbd/binarize.hpp"

#include <algorithm>
#include <set>

namespace figsbd::binarize {

std::pair<Matrix, BinarizerSpec> threshold_interpretable(const Matrix& concept_preds) {
  BinarizerSpec spec;
  spec.mode = BinarizerMode::kInterpretable;
  spec.thresholds.assign(concept_preds.cols(), 0.0);
  return {apply(spec, concept_preds), std::move(spec)};
}

std::size_t mismatches(std::span<const double> column, std::span<const double> truth,
                       double threshold) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < column.size(); ++i) {
    const double predicted = column[i] > threshold ? 1.0 : 0.0;
    if (predicted != truth[i]) ++count;
  }
  return count;
}

BinarizerSpec fit_datadriven_thresholds(const Matrix& concept_preds, const Matrix& truth) {
  if (concept_preds.rows() != truth.rows() || concept_preds.cols() != truth.cols()) {
    throw Error("concept prediction and truth shapes differ");
  }
  for (double v : truth.data()) {
    if (v != 0.0 && v != 1.0) throw Error("non-binary true concept");
  }
  BinarizerSpec spec;
  spec.mode = BinarizerMode::kDataDriven;
  const std::size_t n = concept_preds.rows();
  if (n == 0) throw Error("empty column");

  std::vector<std::pair<double, double>> sorted(n);
  for (std::size_t j = 0; j < concept_preds.cols(); ++j) {
    for (std::size_t i = 0; i < n; ++i) sorted[i] = {concept_preds(i, j), truth(i, j)};
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Sweep candidates in ascending order. Below the lowest value everything
    // predicts 1, so mismatches start at the count of true zeros.
    std::size_t current = 0;
    for (const auto& p : sorted) current += p.second == 0.0 ? 1 : 0;
    double best_threshold = sorted.front().first - 1.0;
    std::size_t best = current;

    std::size_t p = 0;
    while (p < n) {
      const double value = sorted[p].first;
      // Move every sample with this value to the "predicts 0" side.
      while (p < n && sorted[p].first == value) {
        current += sorted[p].second == 1.0 ? 1 : 0;
        current -= sorted[p].second == 0.0 ? 1 : 0;
        ++p;
      }
      const double candidate =
          p < n ? (value + sorted[p].first) / 2.0 : sorted.back().first + 1.0;
      if (current < best) {
        best = current;
        best_threshold = candidate;
      }
    }
    spec.thresholds.push_back(best_threshold);
  }
  return spec;
}

Matrix apply(const BinarizerSpec& spec, const Matrix& concept_preds) {
  if (spec.mode == BinarizerMode::kOneHot) {
    throw Error("one-hot spec requires categorical input");
  }
  if (concept_preds.cols() != spec.thresholds.size()) {
    throw Error("concept count does not match binarizer");
  }
  Matrix out(concept_preds.rows(), concept_preds.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      out(i, j) = concept_preds(i, j) > spec.thresholds[j] ? 1.0 : 0.0;
    }
  }
  return out;
}

namespace {

bool is_binary_category_set(const std::set<std::string>& cats) {
  return std::all_of(cats.begin(), cats.end(),
                     [](const std::string& c) { return c == "0" || c == "1"; });
}

}  // namespace

Matrix apply(const BinarizerSpec& spec, const CategoricalColumns& raw) {
  if (spec.mode != BinarizerMode::kOneHot) throw Error("spec is not one-hot");
  if (raw.size() != spec.categories.size()) {
    throw Error("concept count does not match binarizer");
  }
  const std::size_t n = raw.empty() ? 0 : raw.front().size();
  Matrix out(n, spec.n_binary());
  for (std::size_t j = 0; j < raw.size(); ++j) {
    const auto& block = spec.categories[j];
    if (raw[j].size() != n) throw Error("ragged categorical columns");
    for (std::size_t i = 0; i < n; ++i) {
      const auto& value = raw[j][i];
      const auto it = std::find(block.categories.begin(), block.categories.end(), value);
      if (it == block.categories.end()) {
        throw Error("unknown category '" + value + "' in concept " + std::to_string(j));
      }
      if (block.passthrough) {
        out(i, block.first_column) = value == "1" ? 1.0 : 0.0;
      } else {
        const auto offset = static_cast<std::size_t>(it - block.categories.begin());
        out(i, block.first_column + offset) = 1.0;
      }
    }
  }
  return out;
}

BinarizerSpec one_hot_fit(const CategoricalColumns& raw) {
  BinarizerSpec spec;
  spec.mode = BinarizerMode::kOneHot;
  std::size_t column = 0;
  for (const auto& values : raw) {
    const std::set<std::string> cats(values.begin(), values.end());
    if (cats.empty()) throw Error("categorical column has no values");
    CategoryBlock block;
    block.categories.assign(cats.begin(), cats.end());
    block.first_column = column;
    block.passthrough = is_binary_category_set(cats);
    if (block.passthrough) block.categories = {"0", "1"};
    column += block.width();
    spec.categories.push_back(std::move(block));
  }
  return spec;
}

std::vector<std::string> one_hot_column_names(const BinarizerSpec& spec,
                                              const std::vector<std::string>& raw_names) {
  if (raw_names.size() != spec.categories.size()) throw Error("name count mismatch");
  std::vector<std::string> names;
  for (std::size_t j = 0; j < raw_names.size(); ++j) {
    const auto& block = spec.categories[j];
    if (block.passthrough) {
      names.push_back(raw_names[j]);
    } else {
      for (const auto& c : block.categories) names.push_back(raw_names[j] + "=" + c);
    }
  }
  return names;
}

}  // namespace figsbd::binarize
