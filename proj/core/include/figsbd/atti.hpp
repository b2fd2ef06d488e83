#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "figsbd/types.hpp"

namespace figsbd::atti {

/// Training-set 5th and 95th percentiles per raw concept; an intervention on
/// the teacher maps a true 0 to q05 and a true 1 to q95.
struct QuantileMap {
  std::vector<double> q05;
  std::vector<double> q95;

  bool operator==(const QuantileMap&) const = default;
};

/// Linear concept-to-target head: prediction = weights * x + bias.
struct LinearCtt {
  Matrix weights;  // K x d
  std::vector<double> bias;

  [[nodiscard]] std::vector<double> predict(std::span<const double> x) const;
  [[nodiscard]] Matrix predict(const Matrix& x) const;

  bool operator==(const LinearCtt&) const = default;
};

/// Ridge least-squares fit of targets on concept predictions. The intercept
/// is not penalized.
LinearCtt fit_linear_ctt(const Matrix& concept_preds, const Matrix& targets,
                         double ridge = 1e-6);

/// Variance with divisor K.
double population_variance(std::span<const double> values);

/// Volatility of one output vector: variance of |v| for K > 1, |v| for K = 1.
double volatility(std::span<const double> values);

/// One group per split tree: the features on x's route, scored by the
/// volatility of that tree's leaf vector. Highest score first; ties keep tree
/// order. Unsplit trees contribute no group.
AttiRanking figs_atti_rank(const FigsModel& model, std::span<const double> x);

/// Concepts scored by the volatility of W[:, j] * x[j], sorted descending
/// (ties by index) and cut into consecutive groups of the given sizes. Each
/// group's score is the score of its first concept.
AttiRanking linear_atti_rank(const LinearCtt& ctt, std::span<const double> x_raw,
                             std::span<const std::size_t> sizes);

/// Seeded permutation of [0, d) cut into groups of the given sizes.
AttiRanking random_atti_rank(std::size_t d, std::span<const std::size_t> sizes,
                             std::uint64_t seed);

/// Copy of x with x[j] = truth[j] for every j in group.
std::vector<double> intervene_student(std::span<const double> x, std::span<const double> truth,
                                      std::span<const std::size_t> group);

QuantileMap fit_quantile_map(const Matrix& train_concept_preds);

/// Percentile by linear interpolation at rank p * (n - 1) of a sorted column.
double sorted_quantile(std::span<const double> sorted, double p);

/// Copy of x_raw with x[j] = q95[j] if truth[j] == 1 else q05[j], for j in group.
std::vector<double> intervene_teacher_quantile(std::span<const double> x_raw,
                                               std::span<const double> truth,
                                               std::span<const std::size_t> group,
                                               const QuantileMap& qmap);

/// Longest prefix of `sizes` whose total does not exceed d.
std::vector<std::size_t> fit_sizes(std::span<const std::size_t> sizes, std::size_t d);

}  // namespace figsbd::atti
