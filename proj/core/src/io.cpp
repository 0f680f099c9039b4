#include "hrshift/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hrshift/error.hpp"

namespace hrshift {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw DataError("CSV is missing column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto cells = split_line(line);
    if (first && has_header) {
      t.header = std::move(cells);
    } else {
      t.rows.push_back(std::move(cells));
    }
    first = false;
  }
  if (t.rows.empty()) throw DataError(path.string() + " has no data rows");
  return t;
}

std::string to_csv_string(const CsvTable& table) {
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  if (!table.header.empty()) emit(table.header);
  for (const auto& r : table.rows) emit(r);
  return out.str();
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_csv_string(table);
}

double parse_double(const std::string& cell) {
  double v = 0.0;
  const char* b = cell.data();
  const char* e = b + cell.size();
  if (!cell.empty() && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (cell.empty() || ec != std::errc() || ptr != e) throw DataError("non-numeric cell '" + cell + "'");
  return v;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  auto t = read_csv(path, false);
  if (t.rows.empty()) throw DataError(path.string() + ": no rows");
  const std::size_t cols = t.rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i].size() != cols) throw DataError(path.string() + ": ragged row " + std::to_string(i + 1));
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(t.rows[i][j]);
  }
  return m;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Eigen::VectorXd read_time_series(const std::filesystem::path& path) {
  auto t = read_csv(path, true);
  const auto si = t.column("scan");
  const auto vi = t.column("value");
  Eigen::VectorXd y(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    if (r.size() != t.header.size()) throw DataError(path.string() + ": ragged row");
    if (parse_double(r[si]) != static_cast<double>(i + 1))
      throw DataError(path.string() + ": scan indices must be contiguous from 1");
    y[static_cast<Eigen::Index>(i)] = parse_double(r[vi]);
  }
  if (!y.allFinite()) throw DataError(path.string() + ": non-finite signal value");
  return y;
}

std::vector<OnsetSeries> read_onsets(const std::filesystem::path& path, std::size_t scans) {
  auto t = read_csv(path, true);
  const auto ci = t.column("condition");
  const auto si = t.column("scan");
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> by_cond;
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw DataError(path.string() + ": ragged row");
    const double s = parse_double(r[si]);
    if (s != std::floor(s) || s < 1 || s > static_cast<double>(scans))
      throw DataError(path.string() + ": onset scan outside [1, T]");
    if (!by_cond.count(r[ci])) order.push_back(r[ci]);
    by_cond[r[ci]].push_back(static_cast<std::size_t>(s));
  }
  std::vector<OnsetSeries> out;
  for (const auto& c : order) out.push_back(OnsetSeries::from_onsets(c, scans, by_cond[c]));
  return out;
}

double read_tr(const std::filesystem::path& path) {
  auto j = read_json(path);
  if (!j.contains("tr") || !j["tr"].is_number()) throw DataError(path.string() + ": missing numeric 'tr'");
  const double tr = j["tr"].get<double>();
  if (!(tr > 0)) throw DataError(path.string() + ": 'tr' must be positive");
  return tr;
}

nlohmann::json change_points_to_json(const ChangePointSet& cps) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [c, p] : cps.points) j[c] = p;
  return j;
}

ChangePointSet change_points_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("change points must be a JSON object");
  ChangePointSet cps;
  for (const auto& [c, p] : j.items()) {
    if (!p.is_array()) throw DataError("change points for '" + c + "' must be an array");
    for (const auto& v : p) {
      if (!v.is_number_integer() || v.get<long long>() < 1) throw DataError("change points must be positive scans");
      cps.points[c].push_back(v.get<std::size_t>());
      if (cps.points[c].size() > 1 && cps.points[c].back() <= cps.points[c][cps.points[c].size() - 2])
        throw DataError("change points for '" + c + "' must be strictly increasing");
    }
  }
  return cps;
}

ChangePointSet read_change_points(const std::filesystem::path& path) {
  return change_points_from_json(read_json(path));
}

SubjectRecord read_subject(const std::filesystem::path& dir) {
  SubjectRecord s;
  s.id = dir.filename().string();
  s.y = read_time_series(dir / "bold.csv");
  s.tr = read_tr(dir / "meta.json");
  s.onsets = read_onsets(dir / "onsets.csv", static_cast<std::size_t>(s.y.size()));
  if (std::filesystem::exists(dir / "confounds.csv")) {
    s.confounds = read_matrix_csv(dir / "confounds.csv");
    if (s.confounds.rows() != s.y.size()) throw DataError(dir.string() + ": confounds row count differs from T");
  }
  return s;
}

void write_subject(const std::filesystem::path& dir, const SubjectRecord& s) {
  std::filesystem::create_directories(dir);
  CsvTable bold{{"scan", "value"}, {}};
  for (Eigen::Index t = 0; t < s.y.size(); ++t) bold.rows.push_back({std::to_string(t + 1), format_double(s.y[t])});
  write_csv(dir / "bold.csv", bold);
  CsvTable on{{"condition", "scan"}, {}};
  for (const auto& u : s.onsets)
    for (auto o : u.onsets()) on.rows.push_back({u.condition(), std::to_string(o)});
  write_csv(dir / "onsets.csv", on);
  write_json(dir / "meta.json", nlohmann::json{{"tr", s.tr}});
  if (s.confounds.size() > 0) {
    CsvTable c;
    for (Eigen::Index i = 0; i < s.confounds.rows(); ++i) {
      std::vector<std::string> row;
      for (Eigen::Index j = 0; j < s.confounds.cols(); ++j) row.push_back(format_double(s.confounds(i, j)));
      c.rows.push_back(std::move(row));
    }
    write_csv(dir / "confounds.csv", c);
  }
}

}  // namespace hrshift
