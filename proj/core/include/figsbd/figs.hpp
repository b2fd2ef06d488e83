#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "figsbd/matrix.hpp"
#include "figsbd/types.hpp"

namespace figsbd::figs {

/// A proposed split, either of an existing leaf or as the stump of a new tree.
struct SplitCandidate {
  static constexpr int kNewTree = -1;

  int tree_index = kNewTree;
  int leaf = 0;
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity_decrease = 0.0;  // summed over all outputs, unnormalized
};

/// Per-fit diagnostics. loss[0] is the loss of the initial mean model; each
/// accepted split appends the loss after the split and the leaf refresh.
struct FitTrace {
  std::vector<double> loss;
  std::vector<SplitCandidate> accepted;
};

/// Greedy multi-output sum-of-trees fit on binary features. Throws Error on an
/// empty dataset or any feature value outside {0,1}.
FigsModel fit(const Matrix& x, const Matrix& y, const HyperParams& params,
              FitTrace* trace = nullptr);

/// Same fitter without the binary-feature check. Candidate thresholds are the
/// midpoints between consecutive distinct feature values within a leaf.
FigsModel fit_real(const Matrix& x, const Matrix& y, const HyperParams& params,
                   FitTrace* trace = nullptr);

/// Runs one fit with params.max_rules = max(rule_counts) and returns the model
/// as it stood after each requested rule count was reached (or the final model
/// when the greedy loop stopped earlier). Each returned model is identical to a
/// standalone fit with that rule budget. Output order follows `rule_counts`.
std::vector<FigsModel> fit_checkpoints(const Matrix& x, const Matrix& y,
                                       const HyperParams& params,
                                       std::span<const int> rule_counts);

Matrix predict(const FigsModel& model, const Matrix& x);
std::vector<double> predict_row(const FigsModel& model, std::span<const double> x);

struct TreeContribution {
  std::vector<double> pred;
  std::vector<std::size_t> path;  // distinct features tested on the route, ascending
};

std::vector<TreeContribution> predict_per_tree(const FigsModel& model,
                                               std::span<const double> x);

int count_rules(const FigsModel& model);

/// Mean squared error over samples and outputs.
double train_loss(const FigsModel& model, const Matrix& x, const Matrix& y);

/// Throws Error unless every entry is exactly 0 or 1.
void require_binary(const Matrix& x);

}  // namespace figsbd::figs
