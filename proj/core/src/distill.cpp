#include "figsbd/distill.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "figsbd/binarize.hpp"
#include "figsbd/figs.hpp"
#include "figsbd/prng.hpp"

namespace figsbd::distill {

void CvGrid::validate() const {
  if (rules.empty() || trees.empty() || depths.empty()) throw Error("grid lists must be nonempty");
  if (folds < 2) throw Error("folds must be at least 2");
  auto positive = [](const std::vector<int>& v) {
    return std::all_of(v.begin(), v.end(), [](int x) { return x > 0; });
  };
  if (!positive(rules) || !positive(trees) || !positive(depths) || min_samples_leaf <= 0) {
    throw Error("hyperparameters must be strictly positive");
  }
}

CvGrid CvGrid::text_default() {
  CvGrid g;
  g.rules = {100, 200, 250};
  g.trees = {20, 30, 50};
  g.depths = {3, 4};
  return g;
}

BinarizerSpec fit_binarizer(const Dataset& data, BinarizerMode mode) {
  switch (mode) {
    case BinarizerMode::kInterpretable: {
      BinarizerSpec spec;
      spec.thresholds.assign(data.n_concepts(), 0.0);
      return spec;
    }
    case BinarizerMode::kDataDriven:
      return binarize::fit_datadriven_thresholds(data.concept_preds, data.concepts_true);
    case BinarizerMode::kOneHot:
      break;
  }
  throw Error("one-hot concepts are encoded when the dataset is loaded; "
              "distill them with the interpretable binarizer");
}

Matrix student_inputs(const FigsModel& model, const Matrix& concept_preds) {
  if (!model.binarizer) {
    figs::require_binary(concept_preds);
    return concept_preds;
  }
  return binarize::apply(*model.binarizer, concept_preds);
}

FigsModel distill(const Dataset& data, BinarizerMode mode, const HyperParams& params) {
  data.validate();
  BinarizerSpec spec = fit_binarizer(data, mode);
  const Matrix x = binarize::apply(spec, data.concept_preds);
  FigsModel model = figs::fit(x, data.logits, params);
  model.binarizer = std::move(spec);
  model.task = data.task;
  model.feature_names = data.concept_names;
  model.target_names = data.target_names;
  return model;
}

std::vector<std::vector<std::size_t>> fold_indices(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error("folds must be at least 2");
  const auto f = static_cast<std::size_t>(folds);
  if (n < f) throw Error("fewer samples than folds");
  SplitMix64 rng(seed);
  const std::vector<std::size_t> perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> out(f);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < f; ++b) {
    const std::size_t len = n / f + (b < n % f ? 1 : 0);
    out[b].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                  perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

CvResult cross_validate(const Dataset& data, const CvGrid& grid, std::uint64_t seed,
                        BinarizerMode mode) {
  grid.validate();
  data.validate();
  const auto folds = fold_indices(data.size(), grid.folds, seed);

  auto distinct = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  const std::vector<int> rules = distinct(grid.rules);
  const std::vector<int> tree_counts = distinct(grid.trees);
  const std::vector<int> depths = distinct(grid.depths);

  using Key = std::tuple<int, int, int>;  // rules, trees, depth
  std::map<Key, CvRow> rows;

  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::vector<std::size_t> val_idx = folds[f];
    std::sort(val_idx.begin(), val_idx.end());

    const Dataset train = data.subset(train_idx);
    const Dataset val = data.subset(val_idx);
    const BinarizerSpec spec = fit_binarizer(train, mode);
    const Matrix x_train = binarize::apply(spec, train.concept_preds);
    const Matrix x_val = binarize::apply(spec, val.concept_preds);

    // Budgets differing only in rule count share one greedy trajectory.
    for (int trees : tree_counts) {
      for (int depth : depths) {
        HyperParams base{rules.back(), trees, depth, grid.min_samples_leaf};
        const auto models = figs::fit_checkpoints(x_train, train.logits, base, rules);
        for (std::size_t r = 0; r < rules.size(); ++r) {
          const double mse = mean_squared_error(figs::predict(models[r], x_val), val.logits);
          auto& row = rows[{rules[r], trees, depth}];
          row.params = {rules[r], trees, depth, grid.min_samples_leaf};
          row.fold_mse.push_back(mse);
        }
      }
    }
  }

  CvResult result;
  const CvRow* best = nullptr;
  for (auto& [key, row] : rows) {
    double sum = 0.0;
    for (double m : row.fold_mse) sum += m;
    row.mean_mse = sum / static_cast<double>(row.fold_mse.size());
    result.table.push_back(row);
  }
  // Map order is (rules, trees, depth) ascending, so strict < keeps the
  // simplest configuration among equal scores.
  for (const auto& row : result.table) {
    if (!best || row.mean_mse < best->mean_mse) best = &row;
  }
  result.best = best->params;
  result.model = distill(data, mode, result.best);
  return result;
}

double mean_squared_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("shape mismatch");
  if (a.data().empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double r = a.data()[i] - b.data()[i];
    acc += r * r;
  }
  return acc / static_cast<double>(a.data().size());
}

double accuracy(const Matrix& scores, std::span<const double> labels) {
  if (scores.rows() != labels.size()) throw Error("shape mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (static_cast<double>(argmax(scores.row(i))) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double r_squared(std::span<const double> predicted, std::span<const double> labels) {
  if (predicted.size() != labels.size()) throw Error("shape mismatch");
  if (labels.empty()) return 0.0;
  double mean = 0.0;
  for (double y : labels) mean += y;
  mean /= static_cast<double>(labels.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ss_res += (labels[i] - predicted[i]) * (labels[i] - predicted[i]);
    ss_tot += (labels[i] - mean) * (labels[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

double task_metric(Task task, const Matrix& predictions, std::span<const double> labels) {
  if (task == Task::kClassification) return accuracy(predictions, labels);
  return r_squared(predictions.column(0), labels);
}

FidelityReport fidelity(const FigsModel& model, const Dataset& data) {
  const Matrix pred = figs::predict(model, student_inputs(model, data.concept_preds));
  FidelityReport report;
  report.mse = mean_squared_error(pred, data.logits);
  report.task_metric = task_metric(data.task, pred, data.labels);
  if (data.task == Task::kClassification) {
    std::size_t agree = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (argmax(pred.row(i)) == argmax(data.logits.row(i))) ++agree;
    }
    report.agreement =
        data.size() == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(data.size());
  }
  return report;
}

}  // namespace figsbd::distill
