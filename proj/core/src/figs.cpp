#include "figsbd/figs.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>

namespace figsbd::figs {
namespace {

// A split must beat this fraction of sum(y^2) to count as an improvement;
// anything smaller is indistinguishable from rounding in the gain sums.
constexpr double kRelativeGainFloor = 1e-12;

// Renumbers nodes in pre-order (node, left subtree, right subtree).
int copy_preorder(const Tree& src, int id, Tree& dst) {
  const int out = static_cast<int>(dst.nodes.size());
  dst.nodes.push_back(src.nodes[static_cast<std::size_t>(id)]);
  if (!dst.nodes.back().is_leaf()) {
    const int left = copy_preorder(src, src.nodes[static_cast<std::size_t>(id)].left, dst);
    const int right = copy_preorder(src, src.nodes[static_cast<std::size_t>(id)].right, dst);
    dst.nodes[static_cast<std::size_t>(out)].left = left;
    dst.nodes[static_cast<std::size_t>(out)].right = right;
  }
  return out;
}

struct LeafSplit {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

class Fitter {
 public:
  Fitter(const Matrix& x, const Matrix& y, const HyperParams& params, bool binary)
      : x_(x), y_(y), params_(params), binary_(binary),
        n_(x.rows()), d_(x.cols()), k_(y.cols()),
        total_(n_, k_), residual_(n_, k_), centered_(k_) {
    double sum_sq = 0.0;
    for (double v : y.data()) sum_sq += v * v;
    min_gain_ = kRelativeGainFloor * sum_sq;

    if (binary_) {
      active_.resize(n_);
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < d_; ++j) {
          if (x(i, j) > 0.5) active_[i].push_back(static_cast<std::uint32_t>(j));
        }
      }
      sums_.assign(d_ * k_, 0.0);
      counts_.assign(d_, 0);
    }

    // Tree 0 starts as a single leaf holding the column means of y.
    std::vector<std::size_t> all(n_);
    std::iota(all.begin(), all.end(), std::size_t{0});
    Tree root;
    root.nodes.push_back(TreeNode{});
    root.nodes[0].value = mean_rows(y_, all);
    trees_.push_back(std::move(root));
    members_.push_back({std::move(all)});
    tree_pred_.emplace_back(n_, k_);
    for (std::size_t i = 0; i < n_; ++i) {
      std::copy(trees_[0].nodes[0].value.begin(), trees_[0].nodes[0].value.end(),
                tree_pred_[0].row(i).begin());
    }
    recompute_total();
  }

  template <class OnSplit>
  void run(int max_rules, OnSplit&& on_split) {
    int rules = 0;
    while (rules < max_rules) {
      SplitCandidate best;
      best.impurity_decrease = min_gain_;
      bool found = false;

      for (std::size_t t = 0; t < trees_.size(); ++t) {
        fill_residual(t);
        const auto& nodes = trees_[t].nodes;
        for (std::size_t leaf = 0; leaf < nodes.size(); ++leaf) {
          if (!nodes[leaf].is_leaf()) continue;
          const LeafSplit s = best_split(members_[t][leaf], nodes[leaf].depth);
          if (s.found && s.gain > best.impurity_decrease) {
            best = {static_cast<int>(t), static_cast<int>(leaf), s.feature, s.threshold, s.gain};
            found = true;
          }
        }
      }

      if (trees_.size() < static_cast<std::size_t>(params_.max_trees)) {
        fill_residual_all();
        std::vector<std::size_t> all(n_);
        std::iota(all.begin(), all.end(), std::size_t{0});
        const LeafSplit s = best_split(all, 0);
        if (s.found && s.gain > best.impurity_decrease) {
          best = {SplitCandidate::kNewTree, 0, s.feature, s.threshold, s.gain};
          found = true;
        }
      }

      if (!found) break;
      apply(best);
      refresh();
      ++rules;
      on_split(best, rules);
    }
  }

  [[nodiscard]] FigsModel model() const {
    FigsModel m;
    m.trees.reserve(trees_.size());
    for (const auto& tree : trees_) {
      Tree canonical;
      canonical.nodes.reserve(tree.nodes.size());
      copy_preorder(tree, 0, canonical);
      m.trees.push_back(std::move(canonical));
    }
    m.n_outputs = k_;
    m.n_features = d_;
    m.params = params_;
    return m;
  }

  [[nodiscard]] double loss() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = 0; k < k_; ++k) {
        const double r = y_(i, k) - total_(i, k);
        acc += r * r;
      }
    }
    return acc / static_cast<double>(n_ * k_);
  }

 private:
  [[nodiscard]] std::vector<double> mean_rows(const Matrix& m,
                                              std::span<const std::size_t> rows) const {
    std::vector<double> out(m.cols(), 0.0);
    for (auto i : rows) {
      for (std::size_t k = 0; k < m.cols(); ++k) out[k] += m(i, k);
    }
    for (auto& v : out) v /= static_cast<double>(rows.size());
    return out;
  }

  void recompute_total() {
    std::fill(total_.data().begin(), total_.data().end(), 0.0);
    for (const auto& pred : tree_pred_) {
      for (std::size_t i = 0; i < total_.data().size(); ++i) total_.data()[i] += pred.data()[i];
    }
  }

  // residual_ = y - (sum of every tree except t)
  void fill_residual(std::size_t t) {
    const auto y = y_.data();
    const auto tot = total_.data();
    const auto own = tree_pred_[t].data();
    auto r = residual_.data();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - (tot[i] - own[i]);
  }

  void fill_residual_all() {
    const auto y = y_.data();
    const auto tot = total_.data();
    auto r = residual_.data();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - tot[i];
  }

  // Best split of one leaf against residual_. Gains are computed from sums of
  // leaf-centered residuals: decrease = sum_k c_k^2 * n / (n_left * n_right).
  LeafSplit best_split(std::span<const std::size_t> rows, int depth) {
    LeafSplit best;
    const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    if (depth >= params_.max_depth || rows.size() < 2 * min_leaf) return best;

    const std::vector<double> mean = mean_rows(residual_, rows);
    const double n = static_cast<double>(rows.size());

    if (binary_) {
      std::fill(sums_.begin(), sums_.end(), 0.0);
      std::fill(counts_.begin(), counts_.end(), 0);
      for (auto i : rows) {
        for (std::size_t k = 0; k < k_; ++k) centered_[k] = residual_(i, k) - mean[k];
        for (auto j : active_[i]) {
          ++counts_[j];
          double* s = &sums_[static_cast<std::size_t>(j) * k_];
          for (std::size_t k = 0; k < k_; ++k) s[k] += centered_[k];
        }
      }
      for (std::size_t j = 0; j < d_; ++j) {
        const std::size_t ones = counts_[j];
        const std::size_t zeros = rows.size() - ones;
        if (ones < min_leaf || zeros < min_leaf) continue;
        double sq = 0.0;
        for (std::size_t k = 0; k < k_; ++k) sq += sums_[j * k_ + k] * sums_[j * k_ + k];
        const double gain =
            sq * (n / (static_cast<double>(ones) * static_cast<double>(zeros)));
        if (!best.found || gain > best.gain) best = {true, j, 0.5, gain};
      }
      return best;
    }

    std::vector<std::size_t> order(rows.begin(), rows.end());
    std::vector<double> prefix(k_);
    for (std::size_t j = 0; j < d_; ++j) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x_(a, j) < x_(b, j); });
      std::fill(prefix.begin(), prefix.end(), 0.0);
      for (std::size_t p = 0; p + 1 < order.size(); ++p) {
        const std::size_t i = order[p];
        for (std::size_t k = 0; k < k_; ++k) prefix[k] += residual_(i, k) - mean[k];
        const double here = x_(i, j);
        const double next = x_(order[p + 1], j);
        if (!(next > here)) continue;
        const std::size_t left = p + 1;
        const std::size_t right = order.size() - left;
        if (left < min_leaf || right < min_leaf) continue;
        double sq = 0.0;
        for (double c : prefix) sq += c * c;
        const double gain = sq * (n / (static_cast<double>(left) * static_cast<double>(right)));
        if (!best.found || gain > best.gain) best = {true, j, (here + next) / 2.0, gain};
      }
      // Restore index order so stable_sort ties stay in sample order.
      std::copy(rows.begin(), rows.end(), order.begin());
    }
    return best;
  }

  void apply(const SplitCandidate& c) {
    std::size_t t;
    if (c.tree_index == SplitCandidate::kNewTree) {
      Tree tree;
      tree.nodes.push_back(TreeNode{});
      trees_.push_back(std::move(tree));
      std::vector<std::size_t> all(n_);
      std::iota(all.begin(), all.end(), std::size_t{0});
      members_.push_back({std::move(all)});
      tree_pred_.emplace_back(n_, k_);
      t = trees_.size() - 1;
    } else {
      t = static_cast<std::size_t>(c.tree_index);
    }
    fill_residual(t);

    auto& nodes = trees_[t].nodes;
    const auto leaf = static_cast<std::size_t>(c.leaf);
    std::vector<std::size_t> rows = std::move(members_[t][leaf]);
    std::vector<std::size_t> left_rows, right_rows;
    for (auto i : rows) {
      (x_(i, c.feature) <= c.threshold ? left_rows : right_rows).push_back(i);
    }

    const int child_depth = nodes[leaf].depth + 1;
    const int left_id = static_cast<int>(nodes.size());
    nodes[leaf].feature = static_cast<int>(c.feature);
    nodes[leaf].threshold = c.threshold;
    nodes[leaf].left = left_id;
    nodes[leaf].right = left_id + 1;
    nodes[leaf].value.clear();

    TreeNode left_node, right_node;
    left_node.depth = right_node.depth = child_depth;
    left_node.value = mean_rows(residual_, left_rows);
    right_node.value = mean_rows(residual_, right_rows);
    nodes.push_back(std::move(left_node));
    nodes.push_back(std::move(right_node));

    members_[t][leaf].clear();
    members_[t].push_back(std::move(left_rows));
    members_[t].push_back(std::move(right_rows));

    for (auto id : {left_id, left_id + 1}) {
      const auto& value = nodes[static_cast<std::size_t>(id)].value;
      for (auto i : members_[t][static_cast<std::size_t>(id)]) {
        std::copy(value.begin(), value.end(), tree_pred_[t].row(i).begin());
      }
    }
    recompute_total();
  }

  // One pass in tree order: each leaf takes the mean residual of its samples
  // given every other tree.
  void refresh() {
    for (std::size_t t = 0; t < trees_.size(); ++t) {
      fill_residual(t);
      auto& nodes = trees_[t].nodes;
      for (std::size_t id = 0; id < nodes.size(); ++id) {
        if (!nodes[id].is_leaf()) continue;
        const auto& rows = members_[t][id];
        nodes[id].value = mean_rows(residual_, rows);
        for (auto i : rows) {
          auto own = tree_pred_[t].row(i);
          auto tot = total_.row(i);
          for (std::size_t k = 0; k < k_; ++k) {
            tot[k] = (tot[k] - own[k]) + nodes[id].value[k];
            own[k] = nodes[id].value[k];
          }
        }
      }
    }
    recompute_total();
  }

  const Matrix& x_;
  const Matrix& y_;
  HyperParams params_;
  bool binary_;
  std::size_t n_, d_, k_;
  double min_gain_ = 0.0;

  std::vector<Tree> trees_;
  std::vector<std::vector<std::vector<std::size_t>>> members_;  // [tree][node] -> rows
  std::vector<Matrix> tree_pred_;
  Matrix total_;
  Matrix residual_;

  std::vector<std::vector<std::uint32_t>> active_;  // binary mode: features equal to 1
  std::vector<double> sums_;
  std::vector<std::size_t> counts_;
  std::vector<double> centered_;
};

void check_fit_inputs(const Matrix& x, const Matrix& y, const HyperParams& params) {
  params.validate();
  if (x.rows() == 0 || y.rows() == 0) throw Error("empty dataset");
  if (x.rows() != y.rows()) throw Error("feature and target row counts differ");
  if (y.cols() == 0) throw Error("targets have no outputs");
}

FigsModel run_fit(const Matrix& x, const Matrix& y, const HyperParams& params, bool binary,
                  FitTrace* trace) {
  Fitter fitter(x, y, params, binary);
  if (trace) {
    trace->loss.assign(1, fitter.loss());
    trace->accepted.clear();
  }
  fitter.run(params.max_rules, [&](const SplitCandidate& c, int) {
    if (trace) {
      trace->loss.push_back(fitter.loss());
      trace->accepted.push_back(c);
    }
  });
  return fitter.model();
}

bool is_binary(const Matrix& x) {
  return std::all_of(x.data().begin(), x.data().end(),
                     [](double v) { return v == 0.0 || v == 1.0; });
}

}  // namespace

void require_binary(const Matrix& x) {
  if (!is_binary(x)) throw Error("non-binary feature");
}

FigsModel fit(const Matrix& x, const Matrix& y, const HyperParams& params, FitTrace* trace) {
  check_fit_inputs(x, y, params);
  require_binary(x);
  return run_fit(x, y, params, true, trace);
}

FigsModel fit_real(const Matrix& x, const Matrix& y, const HyperParams& params,
                   FitTrace* trace) {
  check_fit_inputs(x, y, params);
  return run_fit(x, y, params, false, trace);
}

std::vector<FigsModel> fit_checkpoints(const Matrix& x, const Matrix& y,
                                       const HyperParams& params,
                                       std::span<const int> rule_counts) {
  if (rule_counts.empty()) return {};
  HyperParams longest = params;
  longest.max_rules = *std::max_element(rule_counts.begin(), rule_counts.end());
  check_fit_inputs(x, y, longest);
  for (int r : rule_counts) {
    if (r <= 0) throw Error("hyperparameters must be strictly positive");
  }
  require_binary(x);

  std::vector<std::optional<FigsModel>> snapshots(rule_counts.size());
  Fitter fitter(x, y, longest, true);
  fitter.run(longest.max_rules, [&](const SplitCandidate&, int rules) {
    for (std::size_t c = 0; c < rule_counts.size(); ++c) {
      if (rule_counts[c] == rules) snapshots[c] = fitter.model();
    }
  });

  std::vector<FigsModel> out;
  out.reserve(rule_counts.size());
  for (std::size_t c = 0; c < rule_counts.size(); ++c) {
    FigsModel m = snapshots[c] ? std::move(*snapshots[c]) : fitter.model();
    m.params.max_rules = rule_counts[c];
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<double> predict_row(const FigsModel& model, std::span<const double> x) {
  if (x.size() != model.n_features) throw Error("feature count mismatch");
  std::vector<double> out(model.n_outputs, 0.0);
  for (const auto& tree : model.trees) {
    const auto& value = tree.evaluate(x);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += value[k];
  }
  return out;
}

Matrix predict(const FigsModel& model, const Matrix& x) {
  if (x.cols() != model.n_features) throw Error("feature count mismatch");
  Matrix out(x.rows(), model.n_outputs);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = out.row(i);
    for (const auto& tree : model.trees) {
      const auto& value = tree.evaluate(x.row(i));
      for (std::size_t k = 0; k < row.size(); ++k) row[k] += value[k];
    }
  }
  return out;
}

std::vector<TreeContribution> predict_per_tree(const FigsModel& model,
                                               std::span<const double> x) {
  if (x.size() != model.n_features) throw Error("feature count mismatch");
  std::vector<TreeContribution> out;
  out.reserve(model.trees.size());
  for (const auto& tree : model.trees) {
    TreeContribution c;
    int node = 0;
    while (!tree.nodes[static_cast<std::size_t>(node)].is_leaf()) {
      const auto& n = tree.nodes[static_cast<std::size_t>(node)];
      c.path.push_back(static_cast<std::size_t>(n.feature));
      node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    std::sort(c.path.begin(), c.path.end());
    c.path.erase(std::unique(c.path.begin(), c.path.end()), c.path.end());
    c.pred = tree.nodes[static_cast<std::size_t>(node)].value;
    out.push_back(std::move(c));
  }
  return out;
}

int count_rules(const FigsModel& model) {
  int total = 0;
  for (const auto& tree : model.trees) total += tree.count_internal();
  return total;
}

double train_loss(const FigsModel& model, const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || y.cols() != model.n_outputs) throw Error("shape mismatch");
  if (y.rows() == 0) throw Error("empty dataset");
  const Matrix pred = predict(model, x);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data().size(); ++i) {
    const double r = y.data()[i] - pred.data()[i];
    acc += r * r;
  }
  return acc / static_cast<double>(y.rows() * y.cols());
}

}  // namespace figsbd::figs
