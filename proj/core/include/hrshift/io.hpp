#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hrshift/hemo_design.hpp"

namespace hrshift {

/// Parsed CSV: optional header row plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path, bool has_header);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
std::string to_csv_string(const CsvTable& table);

/// Numeric matrix from a header-less CSV; ragged rows, empty files and
/// non-numeric cells are errors.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);
double parse_double(const std::string& cell);

/// Locale-independent shortest round-trip representation.
std::string format_double(double v);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

struct SubjectRecord {
  std::string id;
  Eigen::VectorXd y;
  double tr = 2.0;
  std::vector<OnsetSeries> onsets;
  Eigen::MatrixXd confounds;
};

/// Time series CSV with header `scan,value` and contiguous scans 1..T.
Eigen::VectorXd read_time_series(const std::filesystem::path& path);
/// Onset CSV with header `condition,scan` (1-based scans); conditions keep first-seen order.
std::vector<OnsetSeries> read_onsets(const std::filesystem::path& path, std::size_t scans);
/// Metadata JSON with at least {"tr": seconds}.
double read_tr(const std::filesystem::path& path);
/// Change-point JSON: {"condition": [scan, ...], ...}.
ChangePointSet read_change_points(const std::filesystem::path& path);
nlohmann::json change_points_to_json(const ChangePointSet& cps);
ChangePointSet change_points_from_json(const nlohmann::json& j);

/// Reads `<dir>/<id>/{bold.csv,onsets.csv,meta.json[,confounds.csv]}`.
SubjectRecord read_subject(const std::filesystem::path& dir);
void write_subject(const std::filesystem::path& dir, const SubjectRecord& subject);

}  // namespace hrshift
