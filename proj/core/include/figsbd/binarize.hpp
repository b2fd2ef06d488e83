#pragma once

#include <string>
#include <utility>
#include <vector>

#include "figsbd/matrix.hpp"
#include "figsbd/types.hpp"

namespace figsbd::binarize {

/// Raw categorical concepts, column-major: columns[j][i] is sample i's value
/// for raw concept j.
using CategoricalColumns = std::vector<std::vector<std::string>>;

/// B[i,j] = 1 iff C[i,j] > 0. The returned spec carries all-zero thresholds.
std::pair<Matrix, BinarizerSpec> threshold_interpretable(const Matrix& concept_preds);

/// Per column, the threshold minimizing Hamming mismatches between
/// 1{C > t} and the true concepts. Candidates are min-1, the midpoints of
/// consecutive distinct values, and max+1; ties go to the smallest candidate.
BinarizerSpec fit_datadriven_thresholds(const Matrix& concept_preds, const Matrix& truth);

/// Mismatch count of 1{column > threshold} against truth.
std::size_t mismatches(std::span<const double> column, std::span<const double> truth,
                       double threshold);

/// Applies a threshold-mode spec.
Matrix apply(const BinarizerSpec& spec, const Matrix& concept_preds);

/// Applies a one-hot spec. Throws Error("unknown category ...") for values not
/// seen at fit time.
Matrix apply(const BinarizerSpec& spec, const CategoricalColumns& raw);

/// Sorts each column's categories into a block of indicator columns. Columns
/// whose values are already within {"0","1"} pass through as one column.
BinarizerSpec one_hot_fit(const CategoricalColumns& raw);

/// Names of the binary columns a one-hot spec produces, e.g. "taste=pos".
std::vector<std::string> one_hot_column_names(const BinarizerSpec& spec,
                                              const std::vector<std::string>& raw_names);

}  // namespace figsbd::binarize
