#include "common.hpp"

#include <algorithm>
#include <iostream>

#include "hrshift/error.hpp"
#include "hrshift/io.hpp"

namespace cli {

using namespace hrshift;

void BasisOptions::add(CLI::App& app) {
  app.add_option("--basis", kind, "canonical, flobs-like or a CSV file with one basis function per column")
      ->capture_default_str();
  app.add_option("--dt", dt, "basis sampling resolution in seconds")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--duration", duration, "basis duration in seconds")->capture_default_str()->check(CLI::PositiveNumber);
}

BasisSet BasisOptions::make() const {
  if (kind == "canonical") return canonical_basis(dt, duration);
  if (kind == "flobs-like") return flobs_like_basis(dt, duration);
  return load_basis(kind, dt);
}

void NoiseOptions::add(CLI::App& app) {
  app.add_option("--noise", kind, "white or ar1")->capture_default_str()->check(CLI::IsMember({"white", "ar1"}));
  app.add_option("--rho", rho, "AR(1) coefficient for a known noise model")->check(CLI::Range(-0.999, 0.999));
  app.add_option("--sigma2", sigma2, "known noise variance; omit to estimate the noise model")
      ->check(CLI::PositiveNumber);
}

std::optional<NoiseSpec> NoiseOptions::known() const {
  if (!sigma2) return std::nullopt;
  return kind == "ar1" ? NoiseSpec::ar1(rho, *sigma2, true) : NoiseSpec::white(*sigma2, true);
}

nlohmann::json noise_to_json(const NoiseSpec& n) {
  return {{"order", n.order}, {"phi", n.phi}, {"sigma2", n.sigma2}, {"known", n.known}};
}

NoiseSpec noise_from_json(const nlohmann::json& j) {
  try {
    NoiseSpec n;
    n.order = j.at("order").get<int>();
    n.phi = j.value("phi", std::array<double, 2>{0.0, 0.0});
    n.sigma2 = j.at("sigma2").get<double>();
    n.known = j.value("known", true);
    if (n.order < 0 || n.order > 2 || !(n.sigma2 > 0)) throw DataError("noise JSON has an invalid order or variance");
    return n;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed noise JSON: ") + e.what());
  }
}

nlohmann::json candidates_to_json(const CandidateSet& c) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& cps : c.configurations) out.push_back(change_points_to_json(cps));
  return out;
}

CandidateSet candidates_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw DataError("candidates JSON must be a non-empty array of change point sets");
  CandidateSet c;
  for (const auto& e : j) c.configurations.push_back(change_points_from_json(e));
  return c;
}

void emit_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  write_json(p, j);
}

std::vector<std::filesystem::path> subject_dirs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_directory() && std::filesystem::exists(e.path() / "bold.csv")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cli
