#include "figsbd/types.hpp"

#include <algorithm>
#include <cmath>

namespace figsbd {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw Error("ragged matrix rows");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::string to_string(Task task) {
  return task == Task::kClassification ? "classification" : "regression";
}

Task task_from_string(const std::string& name) {
  if (name == "classification") return Task::kClassification;
  if (name == "regression") return Task::kRegression;
  throw Error("unknown task: " + name);
}

void HyperParams::validate() const {
  if (max_rules <= 0 || max_trees <= 0 || max_depth <= 0 || min_samples_leaf <= 0) {
    throw Error("hyperparameters must be strictly positive");
  }
}

std::string to_string(BinarizerMode mode) {
  switch (mode) {
    case BinarizerMode::kInterpretable: return "interpretable";
    case BinarizerMode::kDataDriven: return "data-driven";
    case BinarizerMode::kOneHot: return "one-hot";
  }
  return "?";
}

BinarizerMode binarizer_mode_from_string(const std::string& name) {
  if (name == "interpretable") return BinarizerMode::kInterpretable;
  if (name == "data-driven") return BinarizerMode::kDataDriven;
  if (name == "one-hot") return BinarizerMode::kOneHot;
  throw Error("unknown binarizer mode: " + name);
}

std::size_t BinarizerSpec::n_raw() const {
  return mode == BinarizerMode::kOneHot ? categories.size() : thresholds.size();
}

std::size_t BinarizerSpec::n_binary() const {
  if (mode != BinarizerMode::kOneHot) return thresholds.size();
  std::size_t total = 0;
  for (const auto& block : categories) total += block.width();
  return total;
}

int Tree::route(std::span<const double> x) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return node;
}

int Tree::count_internal() const {
  return static_cast<int>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
}

int Tree::depth() const {
  int deepest = 0;
  for (const auto& n : nodes) {
    if (n.is_leaf()) deepest = std::max(deepest, n.depth);
  }
  return deepest;
}

void Dataset::validate() const {
  const std::size_t n = labels.size();
  if (concept_preds.rows() != n) throw Error("concept_preds row count differs from labels");
  if (concepts_true.rows() != n) throw Error("concepts_true row count differs from labels");
  if (logits.rows() != n) throw Error("logits row count differs from labels");
  if (concepts_true.cols() != concept_preds.cols()) {
    throw Error("concepts_true and concept_preds column counts differ");
  }
  if (logits.cols() == 0) throw Error("dataset has no target outputs");
  if (!concept_names.empty() && concept_names.size() != concept_preds.cols()) {
    throw Error("concept_names length differs from concept count");
  }
  if (!target_names.empty() && target_names.size() != logits.cols()) {
    throw Error("target_names length differs from output count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : concepts_true.row(i)) {
      if (v != 0.0 && v != 1.0) {
        throw Error("non-binary true concept at row " + std::to_string(i));
      }
    }
  }
  if (task == Task::kRegression) {
    if (logits.cols() != 1) throw Error("regression requires exactly one output");
  } else {
    const auto k = static_cast<double>(logits.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const double y = labels[i];
      if (!(y >= 0.0 && y < k) || std::floor(y) != y) {
        throw Error("label out of range at row " + std::to_string(i));
      }
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.task = task;
  out.concept_preds = concept_preds.select_rows(rows);
  out.concepts_true = concepts_true.select_rows(rows);
  out.logits = logits.select_rows(rows);
  out.labels.reserve(rows.size());
  for (auto r : rows) out.labels.push_back(labels[r]);
  out.concept_names = concept_names;
  out.target_names = target_names;
  return out;
}

std::string to_string(GroupSource source) {
  switch (source) {
    case GroupSource::kFigsTree: return "figs";
    case GroupSource::kLinearChunk: return "linear";
    case GroupSource::kRandomChunk: return "random";
  }
  return "?";
}

std::vector<std::size_t> AttiRanking::sizes() const {
  std::vector<std::size_t> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(g.concepts.size());
  return out;
}

std::string to_string(InterventionSpace space) {
  return space == InterventionSpace::kStudent ? "student" : "teacher";
}

InterventionSpace space_from_string(const std::string& name) {
  if (name == "student") return InterventionSpace::kStudent;
  if (name == "teacher") return InterventionSpace::kTeacher;
  throw Error("unknown intervention space: " + name);
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

}  // namespace figsbd
