#include "figsbd/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <unistd.h>

#include "figsbd/binarize.hpp"

namespace figsbd::io {

// ---------------------------------------------------------------------------
// Files

void write_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot replace " + path + ": " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

// ---------------------------------------------------------------------------
// Datasets

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && *first == ' ') ++first;
  if (first < last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw Error("bad number '" + text + "' at row " + std::to_string(row) + " column " + column);
  }
  return v;
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

}  // namespace

Dataset read_dataset(std::istream& in, const DatasetSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw Error("missing header row");
  const auto header = split_csv_line(line);

  std::vector<std::string> raw_names;           // cpred order
  std::map<std::string, std::size_t> cpred_col, ctrue_col;
  std::vector<std::size_t> logit_cols;
  std::vector<std::string> target_names;
  std::optional<std::size_t> label_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (starts_with(h, "cpred_")) {
      raw_names.push_back(h.substr(6));
      cpred_col[h.substr(6)] = c;
    } else if (starts_with(h, "ctrue_")) {
      ctrue_col[h.substr(6)] = c;
    } else if (starts_with(h, "logit_")) {
      logit_cols.push_back(c);
      target_names.push_back(h.substr(6));
    } else if (h == "label") {
      label_col = c;
    }
  }
  if (!label_col) throw Error("missing column: label");
  if (logit_cols.empty()) throw Error("missing column: logit_<k>");
  if (raw_names.empty()) throw Error("missing column: cpred_<name>");
  for (const auto& name : raw_names) {
    if (!ctrue_col.count(name)) throw Error("missing column: ctrue_" + name);
  }
  for (const auto& [name, col] : ctrue_col) {
    if (!cpred_col.count(name)) throw Error("missing column: cpred_" + name);
  }
  for (const auto& name : schema.categorical) {
    if (!cpred_col.count(name)) throw Error("missing column: cpred_" + name);
  }

  std::vector<std::vector<std::string>> cells;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto row = split_csv_line(line);
    if (row.size() != header.size()) {
      throw Error("row " + std::to_string(cells.size()) + " has " + std::to_string(row.size()) +
                  " fields, expected " + std::to_string(header.size()));
    }
    cells.push_back(std::move(row));
  }
  const std::size_t n = cells.size();

  // Categorical concepts: one-hot over the union of predicted and true values.
  std::map<std::string, BinarizerSpec> encoders;
  for (const auto& name : schema.categorical) {
    binarize::CategoricalColumns both(1);
    for (std::size_t i = 0; i < n; ++i) {
      both[0].push_back(cells[i][cpred_col[name]]);
      both[0].push_back(cells[i][ctrue_col[name]]);
    }
    encoders[name] = binarize::one_hot_fit(both);
  }

  std::size_t d = 0;
  for (const auto& name : raw_names) {
    d += encoders.count(name) ? encoders[name].n_binary() : 1;
  }

  Dataset data;
  data.task = schema.task;
  data.concept_preds = Matrix(n, d);
  data.concepts_true = Matrix(n, d);
  data.logits = Matrix(n, logit_cols.size());
  data.labels.resize(n);
  data.target_names = target_names;

  std::size_t offset = 0;
  for (const auto& name : raw_names) {
    const std::size_t pc = cpred_col[name];
    const std::size_t tc = ctrue_col[name];
    if (auto it = encoders.find(name); it != encoders.end()) {
      const BinarizerSpec& spec = it->second;
      binarize::CategoricalColumns pred(1), truth(1);
      for (std::size_t i = 0; i < n; ++i) {
        pred[0].push_back(cells[i][pc]);
        truth[0].push_back(cells[i][tc]);
      }
      const Matrix p = binarize::apply(spec, pred);
      const Matrix t = binarize::apply(spec, truth);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < p.cols(); ++c) {
          data.concept_preds(i, offset + c) = p(i, c);
          data.concepts_true(i, offset + c) = t(i, c);
        }
      }
      for (const auto& col : binarize::one_hot_column_names(spec, {name})) {
        data.concept_names.push_back(col);
      }
      offset += p.cols();
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        data.concept_preds(i, offset) = parse_number(cells[i][pc], i, "cpred_" + name);
        const double t = parse_number(cells[i][tc], i, "ctrue_" + name);
        if (t != 0.0 && t != 1.0) {
          throw Error("non-binary ctrue value at row " + std::to_string(i) + " column ctrue_" +
                      name);
        }
        data.concepts_true(i, offset) = t;
      }
      data.concept_names.push_back(name);
      ++offset;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < logit_cols.size(); ++k) {
      data.logits(i, k) = parse_number(cells[i][logit_cols[k]], i, header[logit_cols[k]]);
    }
    data.labels[i] = parse_number(cells[i][*label_col], i, "label");
  }
  data.validate();
  return data;
}

Dataset load_dataset(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path);
  return read_dataset(in, schema);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  data.validate();
  const std::size_t d = data.n_concepts();
  auto concept_name = [&](std::size_t j) {
    return data.concept_names.empty() ? "c" + std::to_string(j) : data.concept_names[j];
  };
  auto target_name = [&](std::size_t k) {
    return data.target_names.empty() ? std::to_string(k) : data.target_names[k];
  };
  for (std::size_t j = 0; j < d; ++j) out << "cpred_" << concept_name(j) << ',';
  for (std::size_t j = 0; j < d; ++j) out << "ctrue_" << concept_name(j) << ',';
  for (std::size_t k = 0; k < data.n_outputs(); ++k) out << "logit_" << target_name(k) << ',';
  out << "label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.concept_preds.row(i)) out << format_double(v) << ',';
    for (double v : data.concepts_true.row(i)) out << format_double(v) << ',';
    for (double v : data.logits.row(i)) out << format_double(v) << ',';
    out << format_double(data.labels[i]) << '\n';
  }
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ostringstream ss;
  write_dataset(ss, data);
  write_atomic(path, ss.str());
}

// ---------------------------------------------------------------------------
// Model files

json to_json(const HyperParams& p) {
  return {{"max_rules", p.max_rules},
          {"max_trees", p.max_trees},
          {"max_depth", p.max_depth},
          {"min_samples_leaf", p.min_samples_leaf}};
}

namespace {

HyperParams params_from_json(const json& j) {
  HyperParams p;
  p.max_rules = j.at("max_rules").get<int>();
  p.max_trees = j.at("max_trees").get<int>();
  p.max_depth = j.at("max_depth").get<int>();
  p.min_samples_leaf = j.value("min_samples_leaf", 1);
  p.validate();
  return p;
}

json node_to_json(const Tree& tree, int id) {
  const auto& n = tree.nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) return {{"value", n.value}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", node_to_json(tree, n.left)},
          {"right", node_to_json(tree, n.right)}};
}

int node_from_json(const json& j, int depth, Tree& tree) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes.back().depth = depth;
  if (j.contains("value")) {
    tree.nodes[static_cast<std::size_t>(id)].value = j.at("value").get<std::vector<double>>();
    return id;
  }
  const int feature = j.at("feature").get<int>();
  if (feature < 0) throw Error("negative feature index in tree");
  const double threshold = j.at("threshold").get<double>();
  const int left = node_from_json(j.at("left"), depth + 1, tree);
  const int right = node_from_json(j.at("right"), depth + 1, tree);
  auto& n = tree.nodes[static_cast<std::size_t>(id)];
  n.feature = feature;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
  return id;
}

}  // namespace

json binarizer_to_json(const BinarizerSpec& spec) {
  json j{{"mode", to_string(spec.mode)}};
  if (spec.mode == BinarizerMode::kOneHot) {
    json blocks = json::array();
    for (const auto& b : spec.categories) {
      blocks.push_back({{"categories", b.categories},
                        {"first_column", b.first_column},
                        {"passthrough", b.passthrough}});
    }
    j["categories"] = std::move(blocks);
  } else {
    j["thresholds"] = spec.thresholds;
  }
  return j;
}

BinarizerSpec binarizer_from_json(const json& j) {
  BinarizerSpec spec;
  spec.mode = binarizer_mode_from_string(j.at("mode").get<std::string>());
  if (spec.mode == BinarizerMode::kOneHot) {
    for (const auto& b : j.at("categories")) {
      CategoryBlock block;
      block.categories = b.at("categories").get<std::vector<std::string>>();
      block.first_column = b.at("first_column").get<std::size_t>();
      block.passthrough = b.at("passthrough").get<bool>();
      spec.categories.push_back(std::move(block));
    }
  } else {
    spec.thresholds = j.at("thresholds").get<std::vector<double>>();
  }
  return spec;
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  return Matrix::from_rows(j.get<std::vector<std::vector<double>>>());
}

distill::CvGrid grid_from_json(const json& j) {
  distill::CvGrid g;
  g.rules = j.at("rules").get<std::vector<int>>();
  g.trees = j.at("trees").get<std::vector<int>>();
  g.depths = j.at("depths").get<std::vector<int>>();
  g.folds = j.at("folds").get<int>();
  g.min_samples_leaf = j.value("min_samples_leaf", 1);
  return g;
}

void check_model(const FigsModel& m) {
  for (const auto& tree : m.trees) {
    if (tree.nodes.empty()) throw Error("empty tree in model file");
    for (const auto& n : tree.nodes) {
      if (n.is_leaf() && n.value.size() != m.n_outputs) {
        throw Error("leaf value length differs from n_outputs");
      }
      if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= m.n_features) {
        throw Error("split feature out of range");
      }
    }
  }
  if (m.binarizer && m.binarizer->n_binary() != m.n_features) {
    throw Error("binarizer width differs from n_features");
  }
}

}  // namespace

json tree_to_json(const Tree& tree) { return node_to_json(tree, 0); }

Tree tree_from_json(const json& j) {
  Tree tree;
  node_from_json(j, 0, tree);
  return tree;
}

json to_json(const distill::CvGrid& grid) {
  return {{"rules", grid.rules},
          {"trees", grid.trees},
          {"depths", grid.depths},
          {"folds", grid.folds},
          {"min_samples_leaf", grid.min_samples_leaf}};
}

json to_json(const distill::CvRow& row) {
  return {{"rules", row.params.max_rules},
          {"trees", row.params.max_trees},
          {"depth", row.params.max_depth},
          {"mean_mse", row.mean_mse},
          {"fold_mse", row.fold_mse}};
}

json model_to_json(const ModelFile& file) {
  const FigsModel& m = file.artifacts.model;
  json j;
  j["format_version"] = kModelFormatVersion;
  j["task"] = to_string(m.task);
  j["n_features"] = m.n_features;
  j["n_outputs"] = m.n_outputs;
  j["feature_names"] = m.feature_names;
  j["target_names"] = m.target_names;
  j["binarizer"] = m.binarizer ? binarizer_to_json(*m.binarizer) : json(nullptr);
  j["hyperparams"] = to_json(m.params);
  json trees = json::array();
  for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
  j["trees"] = std::move(trees);

  if (file.artifacts.linear) {
    j["linear_ctt"] = {{"weights", matrix_to_json(file.artifacts.linear->weights)},
                       {"bias", file.artifacts.linear->bias}};
  } else {
    j["linear_ctt"] = nullptr;
  }
  if (file.artifacts.quantiles) {
    j["quantile_map"] = {{"q05", file.artifacts.quantiles->q05},
                         {"q95", file.artifacts.quantiles->q95}};
  } else {
    j["quantile_map"] = nullptr;
  }

  json prov;
  prov["seed"] = file.provenance.seed ? json(*file.provenance.seed) : json(nullptr);
  prov["grid"] = file.provenance.grid ? to_json(*file.provenance.grid) : json(nullptr);
  json table = json::array();
  for (const auto& row : file.provenance.cv_table) table.push_back(to_json(row));
  prov["cv_table"] = std::move(table);
  j["provenance"] = std::move(prov);
  return j;
}

ModelFile model_from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error("unsupported model format_version " + std::to_string(version) + " (expected " +
                  std::to_string(kModelFormatVersion) + ")");
    }
    ModelFile file;
    FigsModel& m = file.artifacts.model;
    m.task = task_from_string(j.at("task").get<std::string>());
    m.n_features = j.at("n_features").get<std::size_t>();
    m.n_outputs = j.at("n_outputs").get<std::size_t>();
    m.feature_names = j.value("feature_names", std::vector<std::string>{});
    m.target_names = j.value("target_names", std::vector<std::string>{});
    if (!j.at("binarizer").is_null()) m.binarizer = binarizer_from_json(j.at("binarizer"));
    m.params = params_from_json(j.at("hyperparams"));
    for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
    check_model(m);

    if (j.contains("linear_ctt") && !j.at("linear_ctt").is_null()) {
      atti::LinearCtt ctt;
      ctt.weights = matrix_from_json(j.at("linear_ctt").at("weights"));
      ctt.bias = j.at("linear_ctt").at("bias").get<std::vector<double>>();
      if (ctt.bias.size() != ctt.weights.rows()) throw Error("linear_ctt shape mismatch");
      file.artifacts.linear = std::move(ctt);
    }
    if (j.contains("quantile_map") && !j.at("quantile_map").is_null()) {
      atti::QuantileMap q;
      q.q05 = j.at("quantile_map").at("q05").get<std::vector<double>>();
      q.q95 = j.at("quantile_map").at("q95").get<std::vector<double>>();
      if (q.q05.size() != q.q95.size()) throw Error("quantile_map shape mismatch");
      file.artifacts.quantiles = std::move(q);
    }
    if (j.contains("provenance")) {
      const json& prov = j.at("provenance");
      if (prov.contains("seed") && !prov.at("seed").is_null()) {
        file.provenance.seed = prov.at("seed").get<std::uint64_t>();
      }
      if (prov.contains("grid") && !prov.at("grid").is_null()) {
        file.provenance.grid = grid_from_json(prov.at("grid"));
      }
      for (const auto& row : prov.value("cv_table", json::array())) {
        distill::CvRow r;
        r.params = {row.at("rules").get<int>(), row.at("trees").get<int>(),
                    row.at("depth").get<int>(), 1};
        r.mean_mse = row.at("mean_mse").get<double>();
        r.fold_mse = row.at("fold_mse").get<std::vector<double>>();
        file.provenance.cv_table.push_back(std::move(r));
      }
    }
    return file;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::string& path, const ModelFile& file) {
  write_atomic(path, model_to_json(file).dump(1) + "\n");
}

ModelFile load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error("cannot parse model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

// ---------------------------------------------------------------------------
// Reports

std::string format_report(const std::string& kind, const json& meta,
                          const std::vector<json>& records) {
  json header = meta.is_object() ? meta : json::object();
  header["report"] = kind;
  header["format_version"] = kReportFormatVersion;
  header["records"] = records.size();
  std::string out = header.dump() + "\n";
  for (const auto& r : records) out += r.dump() + "\n";
  return out;
}

void save_report(const std::string& path, const std::string& kind, const json& meta,
                 const std::vector<json>& records) {
  write_atomic(path, format_report(kind, meta, records));
}

Report load_report(const std::string& path) {
  std::istringstream in(read_file(path));
  Report report;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty report: " + path);
  try {
    report.header = json::parse(line);
    if (report.header.value("format_version", 0) != kReportFormatVersion) {
      throw Error("unsupported report format_version");
    }
    while (std::getline(in, line)) {
      if (!line.empty()) report.records.push_back(json::parse(line));
    }
  } catch (const json::parse_error& e) {
    throw Error("cannot parse report " + path + ": " + e.what());
  }
  return report;
}

json to_json(const AttiRanking& ranking) {
  json groups = json::array();
  for (const auto& g : ranking.groups) {
    json item{{"concepts", g.concepts}, {"score", g.score}, {"source", to_string(g.source)}};
    if (g.source == GroupSource::kFigsTree) item["tree"] = g.tree_index;
    groups.push_back(std::move(item));
  }
  return {{"groups", std::move(groups)}};
}

json to_json(const distill::FidelityReport& report) {
  return {{"agreement", report.agreement ? json(*report.agreement) : json(nullptr)},
          {"mse", report.mse},
          {"task_metric", report.task_metric}};
}

json to_json(const eval::CurvePoint& point) {
  return {{"k", point.k}, {"metric", point.metric}};
}

json to_json(const eval::FlipRecord& record) {
  return {{"sample", record.sample},
          {"method", eval::to_string(record.method)},
          {"iterations", record.flipped() ? json(record.iterations) : json(nullptr)}};
}

}  // namespace figsbd::io
