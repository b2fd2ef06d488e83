#include "figsbd/serve.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "figsbd/atti.hpp"
#include "figsbd/io.hpp"

namespace figsbd::serve {

Response error_response(int status, const std::string& message) {
  return {status, {{"api_version", kApiVersion}, {"error", message}}};
}

ServeApp::ServeApp(ServeOptions options) : options_(std::move(options)) {}

ServeApp::ServeApp(eval::Artifacts artifacts, Dataset data, ServeOptions options)
    : options_(std::move(options)) {
  data.validate();
  const std::size_t expected = artifacts.model.binarizer ? artifacts.model.binarizer->n_raw()
                                                         : artifacts.model.n_features;
  if (data.n_concepts() != expected) {
    throw Error("dataset concept count does not match the model");
  }
  if (data.n_outputs() != artifacts.model.n_outputs) {
    throw Error("dataset output count does not match the model");
  }
  loaded_ = Loaded{std::move(artifacts), std::move(data)};
}

namespace {

std::optional<std::size_t> parse_index(const std::string& text) {
  std::size_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
    return std::nullopt;
  }
  return v;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string part;
  for (char c : path) {
    if (c == '/') {
      if (!part.empty()) parts.push_back(std::move(part));
      part.clear();
    } else {
      part.push_back(c);
    }
  }
  if (!part.empty()) parts.push_back(std::move(part));
  return parts;
}

json history_json(const InterventionSession& s) {
  json out = json::array();
  for (const auto& step : s.history) {
    json edits = json::object();
    for (const auto& [j, v] : step.edits) edits[std::to_string(j)] = v;
    out.push_back({{"edits", std::move(edits)}, {"prediction", step.prediction}});
  }
  return out;
}

}  // namespace

Response ServeApp::handle(const Request& request) {
  if (request.method == "OPTIONS") return {204, nullptr};
  const auto parts = split_path(request.path);
  auto query = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = request.query.find(key);
    if (it == request.query.end()) return std::nullopt;
    return it->second;
  };

  if (parts.size() == 1 && parts[0] == "samples" && request.method == "GET") {
    std::size_t page = 0;
    std::optional<std::size_t> page_size;
    if (auto p = query("page")) {
      auto v = parse_index(*p);
      if (!v) return error_response(400, "invalid page");
      page = *v;
    }
    if (auto p = query("page_size")) {
      auto v = parse_index(*p);
      if (!v || *v == 0) return error_response(400, "invalid page_size");
      page_size = *v;
    }
    return samples(page, page_size);
  }

  if (parts.size() >= 2 && parts[0] == "sample") {
    const auto index = parse_index(parts[1]);
    if (!index) return error_response(404, "no such sample: " + parts[1]);
    if (parts.size() == 2 && request.method == "GET") return sample(*index);
    if (parts.size() == 3 && parts[2] == "atti" && request.method == "GET") {
      std::uint64_t seed = 0;
      if (auto s = query("seed")) {
        auto v = parse_index(*s);
        if (!v) return error_response(400, "invalid seed");
        seed = *v;
      }
      return atti(*index, query("ranker").value_or("figs"), seed);
    }
    if (parts.size() == 3 && parts[2] == "intervene" && request.method == "POST") {
      json body;
      try {
        body = request.body.empty() ? json::object() : json::parse(request.body);
      } catch (const json::parse_error&) {
        return error_response(400, "request body is not valid JSON");
      }
      return intervene(*index, body);
    }
  }
  return error_response(404, "no route for " + request.method + " " + request.path);
}

bool ServeApp::is_correct(const std::vector<double>& prediction, std::size_t index) const {
  const double label = loaded_->data.labels[index];
  if (loaded_->data.task == Task::kClassification) {
    return static_cast<double>(argmax(prediction)) == label;
  }
  return std::round(prediction[0]) == std::round(label);
}

json ServeApp::prediction_fields(const std::vector<double>& prediction,
                                 std::size_t index) const {
  json out{{"prediction", prediction}};
  if (loaded_->data.task == Task::kClassification) {
    out["predicted_class"] = argmax(prediction);
  } else {
    out["predicted_score"] = prediction[0];
  }
  out["correct"] = is_correct(prediction, index);
  return out;
}

Response ServeApp::samples(std::size_t page, std::optional<std::size_t> page_size) const {
  if (!loaded_) return error_response(503, "no model loaded");
  const std::size_t size = page_size.value_or(options_.page_size);
  const std::size_t n = loaded_->data.size();
  json items = json::array();
  const std::size_t first = page <= n ? page * size : n;
  for (std::size_t i = first; i < n && i < first + size; ++i) {
    const auto view = eval::sample_view(loaded_->artifacts, loaded_->data, i);
    const auto pred =
        eval::predict_in_space(loaded_->artifacts, InterventionSpace::kStudent, view.binary);
    json item = prediction_fields(pred, i);
    item["index"] = i;
    items.push_back(std::move(item));
  }
  return {200,
          {{"api_version", kApiVersion},
           {"page", page},
           {"page_size", size},
           {"total", n},
           {"samples", std::move(items)}}};
}

Response ServeApp::sample(std::size_t index) const {
  if (!loaded_) return error_response(503, "no model loaded");
  if (index >= loaded_->data.size()) return error_response(404, "sample index out of range");
  const auto view = eval::sample_view(loaded_->artifacts, loaded_->data, index);
  const auto pred =
      eval::predict_in_space(loaded_->artifacts, InterventionSpace::kStudent, view.binary);
  json body = prediction_fields(pred, index);
  body["api_version"] = kApiVersion;
  body["index"] = index;
  body["task"] = to_string(loaded_->data.task);
  body["concept_names"] = loaded_->data.concept_names;
  body["target_names"] = loaded_->data.target_names;
  body["concept_preds"] = view.raw;
  body["binarized"] = view.binary;
  if (loaded_->artifacts.linear) {
    body["teacher_prediction"] =
        eval::predict_in_space(loaded_->artifacts, InterventionSpace::kTeacher, view.raw);
  }
  if (options_.reveal_truth) {
    body["concepts_true"] = view.truth;
    body["label"] = loaded_->data.labels[index];
  }
  return {200, std::move(body)};
}

Response ServeApp::atti(std::size_t index, const std::string& ranker_name,
                        std::uint64_t seed) const {
  if (!loaded_) return error_response(503, "no model loaded");
  if (index >= loaded_->data.size()) return error_response(404, "sample index out of range");
  eval::Ranker ranker;
  try {
    ranker = eval::ranker_from_string(ranker_name);
  } catch (const Error&) {
    return error_response(400, "unknown ranker: " + ranker_name);
  }
  if (ranker == eval::Ranker::kLinear && !loaded_->artifacts.linear) {
    return error_response(400, "linear ranker unavailable: model file has no linear head");
  }
  const auto view = eval::sample_view(loaded_->artifacts, loaded_->data, index);
  const AttiRanking ranking = eval::rank_sample(loaded_->artifacts, ranker, view, seed);
  return {200,
          {{"api_version", kApiVersion},
           {"sample", index},
           {"ranker", ranker_name},
           {"seed", seed},
           {"ranking", io::to_json(ranking)}}};
}

void ServeApp::expire_idle() {
  const auto now = options_.clock();
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second->last_used > options_.session_ttl) {
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

std::size_t ServeApp::session_count() const {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

Response ServeApp::intervene(std::size_t index, const json& body) {
  if (!loaded_) return error_response(503, "no model loaded");
  if (index >= loaded_->data.size()) return error_response(404, "sample index out of range");
  if (!body.is_object()) return error_response(400, "request body must be an object");

  InterventionSpace space = InterventionSpace::kStudent;
  if (body.contains("space")) {
    try {
      space = space_from_string(body.at("space").get<std::string>());
    } catch (const std::exception&) {
      return error_response(400, "invalid space");
    }
  }
  if (space == InterventionSpace::kTeacher &&
      (!loaded_->artifacts.linear || !loaded_->artifacts.quantiles)) {
    return error_response(400, "teacher space unavailable: model file lacks linear head");
  }

  // Validate every edit before touching session state.
  const auto& names = loaded_->data.concept_names;
  const std::size_t d = loaded_->data.n_concepts();
  std::map<std::size_t, double> batch;
  const json edits = body.value("edits", json::object());
  if (!edits.is_object()) return error_response(400, "edits must be an object");
  for (const auto& [key, value] : edits.items()) {
    std::optional<std::size_t> j = parse_index(key);
    if (!j) {
      const auto it = std::find(names.begin(), names.end(), key);
      if (it != names.end()) j = static_cast<std::size_t>(it - names.begin());
    }
    if (!j || *j >= d) return error_response(400, "invalid concept: " + key);
    double v;
    if (value.is_boolean()) {
      v = value.get<bool>() ? 1.0 : 0.0;
    } else if (value.is_number()) {
      v = value.get<double>();
    } else {
      return error_response(400, "invalid value for concept " + key);
    }
    if (v != 0.0 && v != 1.0) return error_response(400, "concept values must be 0 or 1");
    batch[*j] = v;
  }

  std::shared_ptr<SessionEntry> entry;
  std::string session_id;
  {
    std::lock_guard lock(sessions_mutex_);
    expire_idle();
    if (body.contains("session") && body.at("session").is_string()) {
      session_id = body.at("session").get<std::string>();
    } else {
      session_id = "s" + std::to_string(next_session_++);
    }
    auto& slot = sessions_[session_id];
    if (!slot) {
      slot = std::make_shared<SessionEntry>();
      slot->state.sample_index = index;
      slot->state.space = space;
    }
    entry = slot;
    entry->last_used = options_.clock();
  }

  std::lock_guard session_lock(entry->mutex);
  InterventionSession& s = entry->state;
  if (s.sample_index != index) return error_response(400, "session belongs to another sample");
  if (s.space != space) return error_response(400, "session uses another space");

  for (const auto& [j, v] : batch) s.edits[j] = v;

  // Replay every edit from the unedited sample.
  const auto& art = loaded_->artifacts;
  const auto view = eval::sample_view(art, loaded_->data, index);
  std::vector<double> input = eval::space_input(space, view);
  std::vector<double> student = view.binary;
  for (const auto& [j, v] : s.edits) {
    student[j] = v;
    if (space == InterventionSpace::kStudent) {
      input[j] = v;
    } else {
      input[j] = v == 1.0 ? art.quantiles->q95[j] : art.quantiles->q05[j];
    }
  }
  const auto prediction = eval::predict_in_space(art, space, input);
  s.history.push_back({batch, prediction});

  AttiRanking next = atti::figs_atti_rank(art.model, student);
  std::erase_if(next.groups, [&](const ConceptGroup& g) {
    return std::all_of(g.concepts.begin(), g.concepts.end(),
                       [&](std::size_t j) { return s.edits.count(j) > 0; });
  });

  json out = prediction_fields(prediction, index);
  out["api_version"] = kApiVersion;
  out["session"] = session_id;
  out["sample"] = index;
  out["space"] = to_string(space);
  json applied = json::object();
  for (const auto& [j, v] : s.edits) applied[std::to_string(j)] = v;
  out["edits"] = std::move(applied);
  out["next_groups"] = io::to_json(next)["groups"];
  out["history"] = history_json(s);
  return {200, std::move(out)};
}

}  // namespace figsbd::serve
