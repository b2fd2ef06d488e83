#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "figsbd/types.hpp"

namespace figsbd::distill {

/// Hyperparameter grid searched by cross_validate. Defaults are the grid used
/// for the 200-class bird teachers.
struct CvGrid {
  std::vector<int> rules{125, 200};
  std::vector<int> trees{30, 40};
  std::vector<int> depths{3, 4};
  int folds = 3;
  int min_samples_leaf = 1;

  void validate() const;
  [[nodiscard]] std::size_t size() const { return rules.size() * trees.size() * depths.size(); }

  /// The wider grid used for the text teachers.
  static CvGrid text_default();
};

/// The configuration selected on the bird teachers.
inline constexpr HyperParams kBirdDefaults{200, 30, 3, 1};

struct CvRow {
  HyperParams params;
  double mean_mse = 0.0;
  std::vector<double> fold_mse;
};

struct CvResult {
  HyperParams best;
  FigsModel model;
  std::vector<CvRow> table;  // sorted by (rules, trees, depth)
};

struct FidelityReport {
  std::optional<double> agreement;  // classification only
  double mse = 0.0;                 // student vs teacher logits
  double task_metric = 0.0;         // accuracy (classification) or R^2 (regression)
};

/// Binarizes the teacher's concept predictions and fits FIGS on the teacher
/// logits. The fitted binarizer, task and names are stored on the model.
FigsModel distill(const Dataset& data, BinarizerMode mode, const HyperParams& params);

/// Fits the binarizer for `mode` on `data` (training rows only).
BinarizerSpec fit_binarizer(const Dataset& data, BinarizerMode mode);

/// Grid search with seeded folds; the final model is refit on all of `data`
/// with the selected configuration.
CvResult cross_validate(const Dataset& data, const CvGrid& grid, std::uint64_t seed,
                        BinarizerMode mode = BinarizerMode::kInterpretable);

/// Seeded permutation of [0, n) cut into `folds` contiguous blocks; the first
/// n % folds blocks take one extra sample.
std::vector<std::vector<std::size_t>> fold_indices(std::size_t n, int folds, std::uint64_t seed);

/// The model's binary view of the dataset's concept predictions.
Matrix student_inputs(const FigsModel& model, const Matrix& concept_preds);

FidelityReport fidelity(const FigsModel& model, const Dataset& data);

double mean_squared_error(const Matrix& a, const Matrix& b);
double accuracy(const Matrix& scores, std::span<const double> labels);
double r_squared(std::span<const double> predicted, std::span<const double> labels);

/// Accuracy for classification, R^2 of output 0 for regression.
double task_metric(Task task, const Matrix& predictions, std::span<const double> labels);

}  // namespace figsbd::distill
