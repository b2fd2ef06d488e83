#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "figsbd/matrix.hpp"

namespace figsbd {

enum class Task { kClassification, kRegression };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

/// Budgets for one FIGS fit. A rule is one internal split node.
struct HyperParams {
  int max_rules = 200;
  int max_trees = 30;
  int max_depth = 3;
  int min_samples_leaf = 1;

  /// Throws Error unless every field is strictly positive.
  void validate() const;

  bool operator==(const HyperParams&) const = default;
};

// ---------------------------------------------------------------------------
// Binarization

enum class BinarizerMode { kInterpretable, kDataDriven, kOneHot };

std::string to_string(BinarizerMode mode);
BinarizerMode binarizer_mode_from_string(const std::string& name);

/// One raw categorical column mapped onto a contiguous block of binary
/// columns. A pass-through block has a single column and categories {0,1}.
struct CategoryBlock {
  std::vector<std::string> categories;  // sorted lexicographically
  std::size_t first_column = 0;
  bool passthrough = false;

  [[nodiscard]] std::size_t width() const { return passthrough ? 1 : categories.size(); }
  bool operator==(const CategoryBlock&) const = default;
};

struct BinarizerSpec {
  BinarizerMode mode = BinarizerMode::kInterpretable;
  std::vector<double> thresholds;         // threshold modes, one per raw concept
  std::vector<CategoryBlock> categories;  // one-hot mode, one per raw concept

  [[nodiscard]] std::size_t n_raw() const;
  [[nodiscard]] std::size_t n_binary() const;
  bool operator==(const BinarizerSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Trees

/// Flat-array tree node. Leaves have feature == kLeaf and carry a length-K
/// value; internal nodes route `x[feature] <= threshold` left, else right.
struct TreeNode {
  static constexpr int kLeaf = -1;

  int feature = kLeaf;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int depth = 0;
  std::vector<double> value;

  [[nodiscard]] bool is_leaf() const { return feature == kLeaf; }
  bool operator==(const TreeNode&) const = default;
};

/// A single tree. nodes[0] is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  /// Index of the leaf the row routes to.
  [[nodiscard]] int route(std::span<const double> x) const;
  [[nodiscard]] const std::vector<double>& evaluate(std::span<const double> x) const {
    return nodes[static_cast<std::size_t>(route(x))].value;
  }
  [[nodiscard]] int count_internal() const;
  /// Longest root-to-leaf path, counted in edges.
  [[nodiscard]] int depth() const;

  bool operator==(const Tree&) const = default;
};

struct FigsModel {
  std::vector<Tree> trees;
  std::size_t n_outputs = 0;
  std::size_t n_features = 0;
  std::optional<BinarizerSpec> binarizer;
  HyperParams params;
  Task task = Task::kClassification;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;

  bool operator==(const FigsModel&) const = default;
};

// ---------------------------------------------------------------------------
// Data

/// Aligned teacher exports for n samples.
struct Dataset {
  Task task = Task::kClassification;
  Matrix concept_preds;  // n x d_raw, real-valued teacher concept scores
  Matrix concepts_true;  // n x d, entries in {0,1}
  Matrix logits;         // n x K teacher outputs
  std::vector<double> labels;
  std::vector<std::string> concept_names;
  std::vector<std::string> target_names;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] std::size_t n_concepts() const { return concept_preds.cols(); }
  [[nodiscard]] std::size_t n_outputs() const { return logits.cols(); }

  /// Checks every shape and value invariant; throws Error naming the first
  /// violation.
  void validate() const;

  [[nodiscard]] Dataset subset(std::span<const std::size_t> rows) const;

  bool operator==(const Dataset&) const = default;
};

// ---------------------------------------------------------------------------
// Rankings and sessions

enum class GroupSource { kFigsTree, kLinearChunk, kRandomChunk };

std::string to_string(GroupSource source);

struct ConceptGroup {
  std::vector<std::size_t> concepts;  // sorted, distinct
  double score = 0.0;
  GroupSource source = GroupSource::kFigsTree;
  int tree_index = -1;  // only for kFigsTree

  bool operator==(const ConceptGroup&) const = default;
};

struct AttiRanking {
  std::vector<ConceptGroup> groups;

  [[nodiscard]] std::vector<std::size_t> sizes() const;
  bool operator==(const AttiRanking&) const = default;
};

enum class InterventionSpace { kStudent, kTeacher };

std::string to_string(InterventionSpace space);
InterventionSpace space_from_string(const std::string& name);

struct InterventionStep {
  std::map<std::size_t, double> edits;
  std::vector<double> prediction;
};

struct InterventionSession {
  std::size_t sample_index = 0;
  InterventionSpace space = InterventionSpace::kStudent;
  std::map<std::size_t, double> edits;
  std::vector<InterventionStep> history;
};

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace figsbd
