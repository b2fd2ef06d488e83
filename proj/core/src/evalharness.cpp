#include "figsbd/evalharness.hpp"

#include <algorithm>
#include <cmath>

#include "figsbd/distill.hpp"
#include "figsbd/figs.hpp"
#include "figsbd/prng.hpp"

namespace figsbd::eval {

void SynthConfig::validate() const {
  if (n_train == 0 || n_test == 0 || n_concepts == 0) throw Error("counts must be positive");
  if (task == Task::kClassification && n_classes < 2) throw Error("need at least two classes");
  if (!(concept_noise >= 0.0 && concept_noise <= 1.0)) {
    throw Error("concept_noise must be a probability");
  }
  if (!(logit_noise_sd >= 0.0)) throw Error("logit_noise_sd must be nonnegative");
}

namespace {

struct Interaction {
  std::vector<std::size_t> concepts;
  double weight = 0.0;
};

// Sparse linear terms plus AND-interactions, one set per output.
struct HiddenMap {
  Matrix weights;  // K x d
  std::vector<double> bias;
  std::vector<std::vector<Interaction>> interactions;  // per output

  [[nodiscard]] std::vector<double> apply(std::span<const double> c) const {
    std::vector<double> out(bias);
    for (std::size_t k = 0; k < out.size(); ++k) {
      for (std::size_t j = 0; j < c.size(); ++j) out[k] += weights(k, j) * c[j];
      for (const auto& term : interactions[k]) {
        bool on = true;
        for (auto j : term.concepts) on = on && c[j] == 1.0;
        if (on) out[k] += term.weight;
      }
    }
    return out;
  }
};

constexpr double kLinearDensity = 0.2;
constexpr double kLinearScale = 2.0;
constexpr double kInteractionScale = 3.0;
constexpr int kInteractionsPerOutput = 3;

// Draw order: per output k, bias; then per concept j a Bernoulli(density)
// and, when on, a normal weight; then the interaction terms (order 2 or 3
// from one uniform, concepts from a permutation prefix, a normal weight).
HiddenMap draw_hidden_map(SplitMix64& rng, std::size_t k, std::size_t d) {
  HiddenMap map;
  map.weights = Matrix(k, d);
  map.bias.resize(k);
  map.interactions.resize(k);
  for (std::size_t o = 0; o < k; ++o) {
    map.bias[o] = 0.5 * rng.normal();
    for (std::size_t j = 0; j < d; ++j) {
      if (rng.bernoulli(kLinearDensity)) map.weights(o, j) = kLinearScale * rng.normal();
    }
    for (int t = 0; t < kInteractionsPerOutput; ++t) {
      const std::size_t order = std::min<std::size_t>(d, rng.uniform() < 0.5 ? 2 : 3);
      const auto perm = rng.permutation(d);
      Interaction term;
      term.concepts.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(order));
      std::sort(term.concepts.begin(), term.concepts.end());
      term.weight = kInteractionScale * rng.normal();
      map.interactions[o].push_back(std::move(term));
    }
  }
  return map;
}

Dataset draw_split(SplitMix64& rng, const HiddenMap& map, const SynthConfig& cfg,
                   std::size_t n) {
  const std::size_t d = cfg.n_concepts;
  const std::size_t k = map.bias.size();
  Dataset data;
  data.task = cfg.task;
  data.concept_preds = Matrix(n, d);
  data.concepts_true = Matrix(n, d);
  data.logits = Matrix(n, k);
  data.labels.resize(n);
  for (std::size_t j = 0; j < d; ++j) data.concept_names.push_back("c" + std::to_string(j));
  for (std::size_t o = 0; o < k; ++o) {
    data.target_names.push_back(cfg.task == Task::kRegression ? "y" : "class" + std::to_string(o));
  }

  std::vector<double> seen(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double t = rng.bernoulli(0.5) ? 1.0 : 0.0;
      const double magnitude = std::abs(rng.normal());
      const bool flip = rng.bernoulli(cfg.concept_noise);
      double score = (2.0 * t - 1.0) * magnitude;
      if (flip) score = -score;
      data.concepts_true(i, j) = t;
      data.concept_preds(i, j) = score;
      seen[j] = score > 0.0 ? 1.0 : 0.0;
    }
    const auto target = map.apply(data.concepts_true.row(i));
    data.labels[i] =
        cfg.task == Task::kRegression ? target[0] : static_cast<double>(argmax(target));
    const auto teacher = map.apply(seen);
    for (std::size_t o = 0; o < k; ++o) {
      data.logits(i, o) = teacher[o] + cfg.logit_noise_sd * rng.normal();
    }
  }
  return data;
}

}  // namespace

SynthData synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  SplitMix64 rng(cfg.seed);
  const std::size_t k = cfg.task == Task::kRegression ? 1 : cfg.n_classes;
  const HiddenMap map = draw_hidden_map(rng, k, cfg.n_concepts);
  SynthData out;
  out.train = draw_split(rng, map, cfg, cfg.n_train);
  out.test = draw_split(rng, map, cfg, cfg.n_test);
  return out;
}

std::string to_string(Ranker ranker) {
  switch (ranker) {
    case Ranker::kFigs: return "figs";
    case Ranker::kLinear: return "linear";
    case Ranker::kRandom: return "random";
  }
  return "?";
}

Ranker ranker_from_string(const std::string& name) {
  if (name == "figs") return Ranker::kFigs;
  if (name == "linear") return Ranker::kLinear;
  if (name == "random") return Ranker::kRandom;
  throw Error("unknown ranker: " + name);
}

Artifacts build_artifacts(FigsModel model, const Dataset& train) {
  Artifacts a;
  a.model = std::move(model);
  a.linear = atti::fit_linear_ctt(train.concept_preds, train.logits);
  a.quantiles = atti::fit_quantile_map(train.concept_preds);
  return a;
}

SampleView sample_view(const Artifacts& artifacts, const Dataset& data, std::size_t i) {
  if (i >= data.size()) throw Error("sample index out of range");
  SampleView v;
  const auto raw = data.concept_preds.row(i);
  v.raw.assign(raw.begin(), raw.end());
  const auto truth = data.concepts_true.row(i);
  v.truth.assign(truth.begin(), truth.end());
  const Matrix one = distill::student_inputs(artifacts.model, data.concept_preds.select_rows(
                                                                  std::vector<std::size_t>{i}));
  v.binary.assign(one.row(0).begin(), one.row(0).end());
  return v;
}

void require_artifacts(const Artifacts& artifacts, InterventionSpace space, Ranker ranker) {
  if ((space == InterventionSpace::kTeacher || ranker == Ranker::kLinear) && !artifacts.linear) {
    throw Error("missing artifact: linear concept-to-target head");
  }
  if (space == InterventionSpace::kTeacher && !artifacts.quantiles) {
    throw Error("missing artifact: quantile map");
  }
}

AttiRanking rank_sample(const Artifacts& artifacts, Ranker ranker, const SampleView& view,
                        std::uint64_t seed) {
  AttiRanking figs_ranking = atti::figs_atti_rank(artifacts.model, view.binary);
  if (ranker == Ranker::kFigs) return figs_ranking;
  const auto sizes = atti::fit_sizes(figs_ranking.sizes(), view.raw.size());
  if (ranker == Ranker::kLinear) {
    if (!artifacts.linear) throw Error("missing artifact: linear concept-to-target head");
    return atti::linear_atti_rank(*artifacts.linear, view.raw, sizes);
  }
  return atti::random_atti_rank(view.raw.size(), sizes, seed);
}

std::vector<double> predict_in_space(const Artifacts& artifacts, InterventionSpace space,
                                     std::span<const double> input) {
  if (space == InterventionSpace::kStudent) return figs::predict_row(artifacts.model, input);
  return artifacts.linear->predict(input);
}

std::vector<double> space_input(InterventionSpace space, const SampleView& view) {
  return space == InterventionSpace::kStudent ? view.binary : view.raw;
}

std::vector<double> intervene_in_space(const Artifacts& artifacts, InterventionSpace space,
                                       std::span<const double> input,
                                       std::span<const double> truth,
                                       std::span<const std::size_t> group) {
  if (space == InterventionSpace::kStudent) return atti::intervene_student(input, truth, group);
  return atti::intervene_teacher_quantile(input, truth, group, *artifacts.quantiles);
}

std::vector<CurvePoint> topk_curve(const Artifacts& artifacts, const Dataset& data,
                                   const EvalOptions& options) {
  require_artifacts(artifacts, options.space, options.ranker);
  if (options.k_max < 0) throw Error("k_max must be nonnegative");
  const std::size_t n = data.size();
  const std::size_t outputs = data.n_outputs();
  const auto levels = static_cast<std::size_t>(options.k_max) + 1;
  const int repeats = options.ranker == Ranker::kRandom ? std::max(1, options.random_repeats) : 1;

  std::vector<double> metric(levels, 0.0);
  for (int rep = 0; rep < repeats; ++rep) {
    std::vector<Matrix> preds(levels, Matrix(n, outputs));
    for (std::size_t i = 0; i < n; ++i) {
      const SampleView view = sample_view(artifacts, data, i);
      const AttiRanking ranking = rank_sample(artifacts, options.ranker, view,
                                              derive_seed(options.seed, rep, i));
      std::vector<double> input = space_input(options.space, view);
      for (std::size_t k = 0; k < levels; ++k) {
        if (k > 0 && k - 1 < ranking.groups.size()) {
          input = intervene_in_space(artifacts, options.space, input, view.truth,
                                     ranking.groups[k - 1].concepts);
        }
        const auto p = predict_in_space(artifacts, options.space, input);
        std::copy(p.begin(), p.end(), preds[k].row(i).begin());
      }
    }
    for (std::size_t k = 0; k < levels; ++k) {
      metric[k] += distill::task_metric(data.task, preds[k], data.labels);
    }
  }

  std::vector<CurvePoint> curve;
  for (std::size_t k = 0; k < levels; ++k) {
    curve.push_back({static_cast<int>(k), metric[k] / static_cast<double>(repeats)});
  }
  return curve;
}

std::vector<std::size_t> misclassified(const Artifacts& artifacts, const Dataset& data,
                                       InterventionSpace space) {
  if (data.task != Task::kClassification) throw Error("flip experiments need classification");
  require_artifacts(artifacts, space, Ranker::kFigs);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const SampleView view = sample_view(artifacts, data, i);
    const auto p = predict_in_space(artifacts, space, space_input(space, view));
    if (static_cast<double>(argmax(p)) != data.labels[i]) out.push_back(i);
  }
  return out;
}

int iterations_to_flip(const Artifacts& artifacts, InterventionSpace space,
                       const SampleView& view, std::size_t label, const AttiRanking& ranking) {
  std::vector<double> input = space_input(space, view);
  for (std::size_t g = 0; g < ranking.groups.size(); ++g) {
    input = intervene_in_space(artifacts, space, input, view.truth, ranking.groups[g].concepts);
    if (argmax(predict_in_space(artifacts, space, input)) == label) {
      return static_cast<int>(g) + 1;
    }
  }
  return FlipRecord::kNever;
}

FlipSummary flip_experiment(const Artifacts& artifacts, const Dataset& data,
                            const EvalOptions& options, std::span<const std::size_t> subset) {
  if (data.task != Task::kClassification) throw Error("flip experiments need classification");
  if (subset.empty()) throw Error("flip subset is empty");
  require_artifacts(artifacts, options.space, options.ranker);

  FlipSummary summary;
  std::size_t flipped_total = 0;
  for (auto i : subset) {
    const SampleView view = sample_view(artifacts, data, i);
    const std::vector<double> input = space_input(options.space, view);
    const auto label = static_cast<std::size_t>(data.labels[i]);
    if (argmax(predict_in_space(artifacts, options.space, input)) == label) {
      throw Error("sample " + std::to_string(i) + " is already correct");
    }
    const AttiRanking ranking =
        rank_sample(artifacts, options.ranker, view, derive_seed(options.seed, 0, i));

    FlipRecord record{i, options.ranker,
                      iterations_to_flip(artifacts, options.space, view, label, ranking)};
    if (record.flipped()) {
      ++summary.histogram[record.iterations];
      flipped_total += static_cast<std::size_t>(record.iterations);
    } else {
      ++summary.uncorrectable;
    }
    summary.records.push_back(record);
  }
  const std::size_t flipped = summary.records.size() - summary.uncorrectable;
  summary.mean_iterations =
      flipped == 0 ? 0.0 : static_cast<double>(flipped_total) / static_cast<double>(flipped);
  return summary;
}

}  // namespace figsbd::eval
