#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "figsbd/distill.hpp"
#include "figsbd/evalharness.hpp"
#include "figsbd/types.hpp"

namespace figsbd::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Datasets
//
// Comma-separated text with a header row. Columns are matched by prefix:
//   cpred_<name>   predicted concept score (real, or a category string)
//   ctrue_<name>   true concept (0/1, or a category string)
//   logit_<name>   teacher output, one column per target in header order
//   label          class index or regression target
// Every cpred_<name> needs a matching ctrue_<name>.

struct DatasetSchema {
  Task task = Task::kClassification;
  /// Raw concept names whose cpred/ctrue columns hold category strings. They
  /// are one-hot encoded on load into columns named "<name>=<category>".
  std::set<std::string> categorical;
};

Dataset read_dataset(std::istream& in, const DatasetSchema& schema);
Dataset load_dataset(const std::string& path, const DatasetSchema& schema);
void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::string& path, const Dataset& data);

// ---------------------------------------------------------------------------
// Model files

inline constexpr int kModelFormatVersion = 1;

struct Provenance {
  std::optional<std::uint64_t> seed;
  std::optional<distill::CvGrid> grid;
  std::vector<distill::CvRow> cv_table;
};

struct ModelFile {
  eval::Artifacts artifacts;
  Provenance provenance;
};

json model_to_json(const ModelFile& file);
ModelFile model_from_json(const json& j);
void save_model(const std::string& path, const ModelFile& file);
ModelFile load_model(const std::string& path);

json tree_to_json(const Tree& tree);
json binarizer_to_json(const BinarizerSpec& spec);
BinarizerSpec binarizer_from_json(const json& j);
Tree tree_from_json(const json& j);

// ---------------------------------------------------------------------------
// Reports: JSON Lines. The first line is a header object with "report" (kind)
// and "format_version"; every following line is one record.

inline constexpr int kReportFormatVersion = 1;

struct Report {
  json header;
  std::vector<json> records;
};

std::string format_report(const std::string& kind, const json& meta,
                          const std::vector<json>& records);
void save_report(const std::string& path, const std::string& kind, const json& meta,
                 const std::vector<json>& records);
Report load_report(const std::string& path);

json to_json(const AttiRanking& ranking);
json to_json(const distill::CvRow& row);
json to_json(const distill::FidelityReport& report);
json to_json(const eval::CurvePoint& point);
json to_json(const eval::FlipRecord& record);
json to_json(const HyperParams& params);
json to_json(const distill::CvGrid& grid);

/// Writes to a temporary sibling, then renames over `path`.
void write_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace figsbd::io
