// figsbd: distill, inspect and intervene on concept-bottleneck teachers.
//
// Every subcommand prints one JSON object on stdout when it succeeds. On
// failure it prints {"error": "..."} on stderr and exits nonzero.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "figsbd/binarize.hpp"
#include "figsbd/distill.hpp"
#include "figsbd/evalharness.hpp"
#include "figsbd/figs.hpp"
#include "figsbd/io.hpp"
#include "figsbd/serve.hpp"

namespace {

using namespace figsbd;
using json = nlohmann::json;

struct DataFlags {
  std::string path;
  std::string task = "classification";
  std::vector<std::string> categorical;

  void add(CLI::App* cmd) {
    cmd->add_option("--data", path, "Dataset CSV")->required();
    cmd->add_option("--task", task, "classification or regression")
        ->check(CLI::IsMember({"classification", "regression"}));
    cmd->add_option("--categorical", categorical, "Raw concepts holding category strings")
        ->delimiter(',');
  }

  [[nodiscard]] Dataset load() const {
    io::DatasetSchema schema;
    schema.task = task_from_string(task);
    schema.categorical = {categorical.begin(), categorical.end()};
    return io::load_dataset(path, schema);
  }
};

void print(const json& j) { std::cout << j.dump() << '\n'; }

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw Error("bad grid value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// "rules=125,200;trees=30,40;depth=3,4". Omitted keys keep the defaults;
// "text" selects the wider text-teacher grid.
distill::CvGrid parse_grid(const std::string& text) {
  if (text.empty()) return {};
  if (text == "text") return distill::CvGrid::text_default();
  distill::CvGrid grid;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw Error("bad grid entry '" + part + "'");
    const std::string key = part.substr(0, eq);
    const auto values = parse_int_list(part.substr(eq + 1));
    if (key == "rules") {
      grid.rules = values;
    } else if (key == "trees") {
      grid.trees = values;
    } else if (key == "depth" || key == "depths") {
      grid.depths = values;
    } else {
      throw Error("unknown grid key '" + key + "'");
    }
  }
  return grid;
}

json prediction_json(Task task, const std::vector<double>& p) {
  json j{{"prediction", p}};
  if (task == Task::kClassification) {
    j["predicted_class"] = argmax(p);
  } else {
    j["predicted_score"] = p[0];
  }
  return j;
}

int run(int argc, char** argv) {
  CLI::App app{"FIGS binary distillation and adaptive test-time interventions"};
  app.require_subcommand(1);

  // synth -----------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic teacher dataset");
  eval::SynthConfig cfg;
  std::string synth_task = "classification", train_out, test_out;
  synth->add_option("--out-train", train_out, "Training split CSV")->required();
  synth->add_option("--out-test", test_out, "Test split CSV")->required();
  synth->add_option("--n-train", cfg.n_train);
  synth->add_option("--n-test", cfg.n_test);
  synth->add_option("--concepts", cfg.n_concepts);
  synth->add_option("--classes", cfg.n_classes);
  synth->add_option("--task", synth_task)->check(CLI::IsMember({"classification", "regression"}));
  synth->add_option("--concept-noise", cfg.concept_noise);
  synth->add_option("--logit-noise", cfg.logit_noise_sd);
  synth->add_option("--seed", cfg.seed);

  // binarize --------------------------------------------------------------
  auto* bin = app.add_subcommand("binarize", "Fit a concept binarizer");
  DataFlags bin_data;
  bin_data.add(bin);
  std::string bin_mode = "data-driven", bin_out;
  bin->add_option("--mode", bin_mode)->check(CLI::IsMember({"interpretable", "data-driven"}));
  bin->add_option("--out", bin_out, "Binarizer JSON")->required();

  // fit -------------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "Distill a FIGS student with fixed budgets");
  DataFlags fit_data;
  fit_data.add(fit);
  HyperParams params = distill::kBirdDefaults;
  std::string fit_mode = "interpretable", fit_out;
  fit->add_option("--rules", params.max_rules);
  fit->add_option("--trees", params.max_trees);
  fit->add_option("--depth", params.max_depth);
  fit->add_option("--min-leaf", params.min_samples_leaf);
  fit->add_option("--binarize", fit_mode)->check(CLI::IsMember({"interpretable", "data-driven"}));
  fit->add_option("--out", fit_out, "Model JSON")->required();

  // cv --------------------------------------------------------------------
  auto* cv = app.add_subcommand("cv", "Cross-validate budgets, then refit on all data");
  DataFlags cv_data;
  cv_data.add(cv);
  std::string grid_text, cv_mode = "interpretable", cv_out, cv_report;
  int folds = 3;
  std::uint64_t cv_seed = 0;
  cv->add_option("--grid", grid_text, "rules=a,b;trees=c,d;depth=e,f or 'text'");
  cv->add_option("--folds", folds);
  cv->add_option("--seed", cv_seed);
  cv->add_option("--binarize", cv_mode)->check(CLI::IsMember({"interpretable", "data-driven"}));
  cv->add_option("--out", cv_out, "Model JSON")->required();
  cv->add_option("--report", cv_report, "CV table (JSON Lines)");

  // fidelity --------------------------------------------------------------
  auto* fid = app.add_subcommand("fidelity", "Student vs teacher agreement");
  DataFlags fid_data;
  fid_data.add(fid);
  std::string fid_model, fid_out;
  fid->add_option("--model", fid_model)->required();
  fid->add_option("--out", fid_out, "Per-sample predictions (JSON Lines)");

  // atti rank -------------------------------------------------------------
  auto* atti_cmd = app.add_subcommand("atti", "Intervention rankings");
  atti_cmd->require_subcommand(1);
  auto* rank = atti_cmd->add_subcommand("rank", "Rank concept groups for one sample");
  DataFlags rank_data;
  rank_data.add(rank);
  std::string rank_model, rank_ranker = "figs", rank_out;
  std::size_t rank_sample = 0;
  std::uint64_t rank_seed = 0;
  rank->add_option("--model", rank_model)->required();
  rank->add_option("--sample", rank_sample)->required();
  rank->add_option("--ranker", rank_ranker)->check(CLI::IsMember({"figs", "linear", "random"}));
  rank->add_option("--seed", rank_seed);
  rank->add_option("--out", rank_out, "Ranking report (JSON Lines)");

  // eval ------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Intervention experiments");
  eval_cmd->require_subcommand(1);
  struct EvalFlags {
    DataFlags data;
    std::string model, space = "student", ranker = "figs", out;
    eval::EvalOptions options;
  };
  auto add_eval = [](CLI::App* cmd, EvalFlags& f) {
    f.data.add(cmd);
    cmd->add_option("--model", f.model)->required();
    cmd->add_option("--space", f.space)->check(CLI::IsMember({"student", "teacher"}));
    cmd->add_option("--ranker", f.ranker)->check(CLI::IsMember({"figs", "linear", "random"}));
    cmd->add_option("--seed", f.options.seed);
    cmd->add_option("--out", f.out, "Report (JSON Lines)");
  };
  auto* topk = eval_cmd->add_subcommand("topk", "Metric after top-k interventions");
  EvalFlags topk_flags;
  add_eval(topk, topk_flags);
  topk->add_option("--k-max", topk_flags.options.k_max);
  topk->add_option("--repeats", topk_flags.options.random_repeats, "Random-ranker repeats");
  auto* flip = eval_cmd->add_subcommand("flip", "Interventions needed to fix each error");
  EvalFlags flip_flags;
  add_eval(flip, flip_flags);

  // serve -----------------------------------------------------------------
  auto* srv = app.add_subcommand("serve", "HTTP API for the intervention console");
  DataFlags srv_data;
  srv_data.add(srv);
  std::string srv_model, host = "127.0.0.1";
  int port = 8080;
  int ttl = 1800;
  serve::ServeOptions srv_opts;
  srv->add_option("--model", srv_model)->required();
  srv->add_option("--host", host);
  srv->add_option("--port", port);
  srv->add_option("--session-ttl", ttl, "Idle session expiry in seconds");
  srv->add_option("--page-size", srv_opts.page_size);
  srv->add_flag("--reveal-truth", srv_opts.reveal_truth, "Expose true concepts and labels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", e.what()}}.dump() << '\n';
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  if (synth->parsed()) {
    cfg.task = task_from_string(synth_task);
    const auto data = eval::synth_generate(cfg);
    io::save_dataset(train_out, data.train);
    io::save_dataset(test_out, data.test);
    print({{"train", train_out}, {"test", test_out}, {"n_train", data.train.size()},
           {"n_test", data.test.size()}, {"concepts", cfg.n_concepts},
           {"outputs", data.train.n_outputs()}, {"seed", cfg.seed}});
  } else if (bin->parsed()) {
    const Dataset data = bin_data.load();
    const auto spec = distill::fit_binarizer(data, binarizer_mode_from_string(bin_mode));
    std::vector<std::size_t> mismatches;
    for (std::size_t j = 0; j < data.n_concepts(); ++j) {
      mismatches.push_back(binarize::mismatches(data.concept_preds.column(j),
                                                data.concepts_true.column(j),
                                                spec.thresholds[j]));
    }
    io::write_atomic(bin_out, json{{"binarizer", io::binarizer_to_json(spec)},
                                   {"concept_names", data.concept_names},
                                   {"mismatches", mismatches}}
                                  .dump(1) +
                                  "\n");
    std::size_t total = 0;
    for (auto m : mismatches) total += m;
    print({{"out", bin_out}, {"mode", bin_mode}, {"concepts", data.n_concepts()},
           {"mismatches", total}});
  } else if (fit->parsed()) {
    const Dataset data = fit_data.load();
    auto model = distill::distill(data, binarizer_mode_from_string(fit_mode), params);
    io::ModelFile file{eval::build_artifacts(std::move(model), data), {}};
    io::save_model(fit_out, file);
    const auto rep = distill::fidelity(file.artifacts.model, data);
    print({{"model", fit_out}, {"hyperparams", io::to_json(params)},
           {"rules", figs::count_rules(file.artifacts.model)},
           {"trees", file.artifacts.model.trees.size()}, {"train", io::to_json(rep)}});
  } else if (cv->parsed()) {
    const Dataset data = cv_data.load();
    distill::CvGrid grid = parse_grid(grid_text);
    grid.folds = folds;
    auto result =
        distill::cross_validate(data, grid, cv_seed, binarizer_mode_from_string(cv_mode));
    io::ModelFile file{eval::build_artifacts(result.model, data),
                       {cv_seed, grid, result.table}};
    io::save_model(cv_out, file);
    if (!cv_report.empty()) {
      std::vector<json> rows;
      for (const auto& r : result.table) rows.push_back(io::to_json(r));
      io::save_report(cv_report, "cv",
                      {{"seed", cv_seed}, {"grid", io::to_json(grid)},
                       {"best", io::to_json(result.best)}},
                      rows);
    }
    print({{"model", cv_out}, {"best", io::to_json(result.best)},
           {"rules", figs::count_rules(result.model)}, {"configs", result.table.size()}});
  } else if (fid->parsed()) {
    const Dataset data = fid_data.load();
    const auto file = io::load_model(fid_model);
    const auto& model = file.artifacts.model;
    const auto rep = distill::fidelity(model, data);
    if (!fid_out.empty()) {
      const Matrix pred = figs::predict(model, distill::student_inputs(model, data.concept_preds));
      std::vector<json> rows;
      for (std::size_t i = 0; i < data.size(); ++i) {
        json row = prediction_json(data.task, {pred.row(i).begin(), pred.row(i).end()});
        row["index"] = i;
        if (data.task == Task::kClassification) row["teacher_class"] = argmax(data.logits.row(i));
        rows.push_back(std::move(row));
      }
      io::save_report(fid_out, "fidelity", io::to_json(rep), rows);
    }
    print(io::to_json(rep));
  } else if (rank->parsed()) {
    const Dataset data = rank_data.load();
    const auto file = io::load_model(rank_model);
    const auto ranker = eval::ranker_from_string(rank_ranker);
    const auto view = eval::sample_view(file.artifacts, data, rank_sample);
    const auto ranking = eval::rank_sample(file.artifacts, ranker, view, rank_seed);
    const json j = io::to_json(ranking);
    if (!rank_out.empty()) {
      std::vector<json> groups(j.at("groups").begin(), j.at("groups").end());
      io::save_report(rank_out, "atti",
                      {{"sample", rank_sample}, {"ranker", rank_ranker}, {"seed", rank_seed}},
                      groups);
    }
    print(j);
  } else if (topk->parsed() || flip->parsed()) {
    EvalFlags& f = topk->parsed() ? topk_flags : flip_flags;
    const Dataset data = f.data.load();
    const auto file = io::load_model(f.model);
    f.options.space = space_from_string(f.space);
    f.options.ranker = eval::ranker_from_string(f.ranker);
    const json meta{{"space", f.space}, {"ranker", f.ranker}, {"seed", f.options.seed}};
    if (topk->parsed()) {
      const auto curve = eval::topk_curve(file.artifacts, data, f.options);
      std::vector<json> rows;
      for (const auto& p : curve) rows.push_back(io::to_json(p));
      if (!f.out.empty()) io::save_report(f.out, "topk", meta, rows);
      json out = meta;
      out["curve"] = rows;
      print(out);
    } else {
      const auto subset = eval::misclassified(file.artifacts, data, f.options.space);
      json out = meta;
      out["misclassified"] = subset.size();
      if (subset.empty()) {
        out["uncorrectable"] = 0;
        out["mean_iterations"] = nullptr;
        if (!f.out.empty()) io::save_report(f.out, "flip", out, {});
        print(out);
        return 0;
      }
      const auto summary = eval::flip_experiment(file.artifacts, data, f.options, subset);
      json hist = json::object();
      for (const auto& [k, c] : summary.histogram) hist[std::to_string(k)] = c;
      out["uncorrectable"] = summary.uncorrectable;
      out["mean_iterations"] = summary.mean_iterations;
      out["histogram"] = hist;
      std::vector<json> rows;
      for (const auto& r : summary.records) rows.push_back(io::to_json(r));
      if (!f.out.empty()) io::save_report(f.out, "flip", out, rows);
      print(out);
    }
  } else if (srv->parsed()) {
    const Dataset data = srv_data.load();
    auto file = io::load_model(srv_model);
    srv_opts.session_ttl = std::chrono::seconds(ttl);
    serve::ServeApp handler(std::move(file.artifacts), data, srv_opts);
    serve::HttpServer server(handler);
    const int bound = server.bind(host, port);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    print({{"listening", host + ":" + std::to_string(bound)}, {"api_version", serve::kApiVersion}});
    std::cout.flush();
    if (!server.listen()) throw Error("server stopped unexpectedly");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << '\n';
    return 1;
  }
}
