#include "figsbd/atti.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "figsbd/figs.hpp"
#include "figsbd/prng.hpp"

namespace figsbd::atti {

std::vector<double> LinearCtt::predict(std::span<const double> x) const {
  if (x.size() != weights.cols()) throw Error("concept count mismatch");
  std::vector<double> out(bias);
  for (std::size_t k = 0; k < weights.rows(); ++k) {
    for (std::size_t j = 0; j < x.size(); ++j) out[k] += weights(k, j) * x[j];
  }
  return out;
}

Matrix LinearCtt::predict(const Matrix& x) const {
  Matrix out(x.rows(), weights.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = predict(x.row(i));
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

LinearCtt fit_linear_ctt(const Matrix& concept_preds, const Matrix& targets, double ridge) {
  if (concept_preds.rows() != targets.rows()) throw Error("row count mismatch");
  if (concept_preds.rows() == 0) throw Error("empty dataset");
  const auto n = static_cast<Eigen::Index>(concept_preds.rows());
  const auto d = static_cast<Eigen::Index>(concept_preds.cols());
  const auto k = static_cast<Eigen::Index>(targets.cols());

  Eigen::MatrixXd a(n, d + 1);
  Eigen::MatrixXd y(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      a(i, j) = concept_preds(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
    a(i, d) = 1.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      y(i, c) = targets(static_cast<std::size_t>(i), static_cast<std::size_t>(c));
    }
  }
  Eigen::MatrixXd gram = a.transpose() * a;
  for (Eigen::Index j = 0; j < d; ++j) gram(j, j) += ridge * static_cast<double>(n);
  const Eigen::MatrixXd coef = gram.ldlt().solve(a.transpose() * y);  // (d+1) x K

  LinearCtt ctt;
  ctt.weights = Matrix(static_cast<std::size_t>(k), static_cast<std::size_t>(d));
  ctt.bias.resize(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    for (Eigen::Index j = 0; j < d; ++j) {
      ctt.weights(static_cast<std::size_t>(c), static_cast<std::size_t>(j)) = coef(j, c);
    }
    ctt.bias[static_cast<std::size_t>(c)] = coef(d, c);
  }
  return ctt;
}

double population_variance(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(values.size());
}

double volatility(std::span<const double> values) {
  if (values.size() == 1) return std::abs(values[0]);
  std::vector<double> magnitudes(values.size());
  std::transform(values.begin(), values.end(), magnitudes.begin(),
                 [](double v) { return std::abs(v); });
  return population_variance(magnitudes);
}

AttiRanking figs_atti_rank(const FigsModel& model, std::span<const double> x) {
  const auto contributions = figs::predict_per_tree(model, x);
  AttiRanking ranking;
  for (std::size_t t = 0; t < contributions.size(); ++t) {
    if (contributions[t].path.empty()) continue;
    ConceptGroup g;
    g.concepts = contributions[t].path;
    g.score = volatility(contributions[t].pred);
    g.source = GroupSource::kFigsTree;
    g.tree_index = static_cast<int>(t);
    ranking.groups.push_back(std::move(g));
  }
  std::stable_sort(ranking.groups.begin(), ranking.groups.end(),
                   [](const ConceptGroup& a, const ConceptGroup& b) { return a.score > b.score; });
  return ranking;
}

namespace {

void check_sizes(std::span<const std::size_t> sizes, std::size_t d) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total > d) throw Error("group sizes exceed concept count");
  if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) != sizes.end()) {
    throw Error("group sizes must be positive");
  }
}

AttiRanking chunk(std::span<const std::size_t> order, std::span<const double> scores,
                  std::span<const std::size_t> sizes, GroupSource source) {
  AttiRanking ranking;
  std::size_t pos = 0;
  for (std::size_t size : sizes) {
    ConceptGroup g;
    g.source = source;
    g.concepts.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                      order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    g.score = scores.empty() ? 0.0 : scores[order[pos]];
    std::sort(g.concepts.begin(), g.concepts.end());
    ranking.groups.push_back(std::move(g));
    pos += size;
  }
  return ranking;
}

}  // namespace

AttiRanking linear_atti_rank(const LinearCtt& ctt, std::span<const double> x_raw,
                             std::span<const std::size_t> sizes) {
  const std::size_t d = ctt.weights.cols();
  if (x_raw.size() != d) throw Error("concept count mismatch");
  check_sizes(sizes, d);

  std::vector<double> scores(d);
  std::vector<double> contribution(ctt.weights.rows());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < contribution.size(); ++k) {
      contribution[k] = ctt.weights(k, j) * x_raw[j];
    }
    scores[j] = volatility(contribution);
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return chunk(order, scores, sizes, GroupSource::kLinearChunk);
}

AttiRanking random_atti_rank(std::size_t d, std::span<const std::size_t> sizes,
                             std::uint64_t seed) {
  check_sizes(sizes, d);
  SplitMix64 rng(seed);
  const auto order = rng.permutation(d);
  return chunk(order, {}, sizes, GroupSource::kRandomChunk);
}

std::vector<double> intervene_student(std::span<const double> x, std::span<const double> truth,
                                      std::span<const std::size_t> group) {
  if (x.size() != truth.size()) throw Error("vector length mismatch");
  std::vector<double> out(x.begin(), x.end());
  for (auto j : group) {
    if (j >= out.size()) throw Error("concept index out of range");
    out[j] = truth[j];
  }
  return out;
}

double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error("quantile of empty column");
  const double rank = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

QuantileMap fit_quantile_map(const Matrix& train_concept_preds) {
  if (train_concept_preds.rows() == 0) throw Error("empty dataset");
  QuantileMap qmap;
  for (std::size_t j = 0; j < train_concept_preds.cols(); ++j) {
    auto column = train_concept_preds.column(j);
    std::sort(column.begin(), column.end());
    qmap.q05.push_back(sorted_quantile(column, 0.05));
    qmap.q95.push_back(sorted_quantile(column, 0.95));
  }
  return qmap;
}

std::vector<double> intervene_teacher_quantile(std::span<const double> x_raw,
                                               std::span<const double> truth,
                                               std::span<const std::size_t> group,
                                               const QuantileMap& qmap) {
  if (x_raw.size() != truth.size() || x_raw.size() != qmap.q05.size()) {
    throw Error("vector length mismatch");
  }
  std::vector<double> out(x_raw.begin(), x_raw.end());
  for (auto j : group) {
    if (j >= out.size()) throw Error("concept index out of range");
    out[j] = truth[j] == 1.0 ? qmap.q95[j] : qmap.q05[j];
  }
  return out;
}

std::vector<std::size_t> fit_sizes(std::span<const std::size_t> sizes, std::size_t d) {
  std::vector<std::size_t> out;
  std::size_t total = 0;
  for (auto s : sizes) {
    if (total + s > d) break;
    total += s;
    out.push_back(s);
  }
  return out;
}

}  // namespace figsbd::atti
