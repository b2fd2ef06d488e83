#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "figsbd/atti.hpp"
#include "figsbd/types.hpp"

namespace figsbd::eval {

/// Synthetic concept-bottleneck teacher.
///
/// True concepts are fair coin flips. A hidden map (sparse linear terms plus
/// AND-interactions of two or three concepts) turns true concepts into the
/// ground-truth target. Predicted concept scores are (2t-1)|g| with the sign
/// flipped with probability concept_noise, and the teacher logits are the
/// hidden map applied to the sign-binarized predicted concepts plus gaussian
/// noise.
struct SynthConfig {
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  std::size_t n_concepts = 30;
  std::size_t n_classes = 10;  // ignored for regression
  Task task = Task::kClassification;
  double concept_noise = 0.1;
  double logit_noise_sd = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  Dataset train;
  Dataset test;
};

SynthData synth_generate(const SynthConfig& cfg);

enum class Ranker { kFigs, kLinear, kRandom };

std::string to_string(Ranker ranker);
Ranker ranker_from_string(const std::string& name);

/// Everything the harness and the server need next to the student model.
struct Artifacts {
  FigsModel model;
  std::optional<atti::LinearCtt> linear;
  std::optional<atti::QuantileMap> quantiles;
};

/// Fits the linear head and quantile map on the training split.
Artifacts build_artifacts(FigsModel model, const Dataset& train);

/// One sample's inputs in both spaces.
struct SampleView {
  std::vector<double> raw;     // teacher concept predictions
  std::vector<double> binary;  // student view
  std::vector<double> truth;
};

SampleView sample_view(const Artifacts& artifacts, const Dataset& data, std::size_t i);

/// Ranking for one sample. Linear and random rankings reuse the sample's FIGS
/// group sizes, truncated to the concept count.
AttiRanking rank_sample(const Artifacts& artifacts, Ranker ranker, const SampleView& view,
                        std::uint64_t seed);

/// Prediction of the evaluated model: FIGS on the binary view (student) or the
/// linear head on raw concept scores (teacher).
std::vector<double> predict_in_space(const Artifacts& artifacts, InterventionSpace space,
                                     std::span<const double> input);

/// The space's input vector for a sample (binary or raw).
std::vector<double> space_input(InterventionSpace space, const SampleView& view);

/// Replaces the group's concepts with truth (student) or truth quantiles
/// (teacher).
std::vector<double> intervene_in_space(const Artifacts& artifacts, InterventionSpace space,
                                       std::span<const double> input,
                                       std::span<const double> truth,
                                       std::span<const std::size_t> group);

void require_artifacts(const Artifacts& artifacts, InterventionSpace space, Ranker ranker);

struct CurvePoint {
  int k = 0;
  double metric = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

struct EvalOptions {
  InterventionSpace space = InterventionSpace::kStudent;
  Ranker ranker = Ranker::kFigs;
  int k_max = 5;
  std::uint64_t seed = 0;
  int random_repeats = 5;
};

/// Task metric after intervening on each sample's top-k groups, k = 0..k_max.
std::vector<CurvePoint> topk_curve(const Artifacts& artifacts, const Dataset& data,
                                   const EvalOptions& options);

struct FlipRecord {
  static constexpr int kNever = -1;

  std::size_t sample = 0;
  Ranker method = Ranker::kFigs;
  int iterations = kNever;  // first k whose prediction matches the label

  [[nodiscard]] bool flipped() const { return iterations != kNever; }
};

struct FlipSummary {
  std::vector<FlipRecord> records;
  std::size_t uncorrectable = 0;
  std::map<int, std::size_t> histogram;  // iterations -> count, flipped samples only
  double mean_iterations = 0.0;          // over flipped samples; 0 if none
};

/// Indices the evaluated model gets wrong at baseline (classification only).
std::vector<std::size_t> misclassified(const Artifacts& artifacts, const Dataset& data,
                                       InterventionSpace space);

/// First k at which intervening on groups 1..k makes argmax equal `label`, or
/// FlipRecord::kNever if the ranking runs out.
int iterations_to_flip(const Artifacts& artifacts, InterventionSpace space,
                       const SampleView& view, std::size_t label, const AttiRanking& ranking);

/// Intervenes down each sample's ranking until argmax matches the label.
FlipSummary flip_experiment(const Artifacts& artifacts, const Dataset& data,
                            const EvalOptions& options, std::span<const std::size_t> subset);

}  // namespace figsbd::eval
