#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hrshift/ar_noise.hpp"
#include "hrshift/config.hpp"
#include "hrshift/cp_select.hpp"
#include "hrshift/hemo_design.hpp"

namespace cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kDataError = 3;
inline constexpr int kPosiFailure = 4;

/// Basis selection shared by the subject-level commands.
struct BasisOptions {
  std::string kind = "flobs-like";  // canonical | flobs-like | path to a CSV matrix
  double dt = 0.2;
  double duration = 32.0;

  void add(CLI::App& app);
  hrshift::BasisSet make() const;
};

/// Noise given on the command line: fixed AR(1)/white with a known variance
/// when --sigma2 is set, estimated otherwise.
struct NoiseOptions {
  std::string kind = "ar1";
  double rho = 0.0;
  std::optional<double> sigma2;

  void add(CLI::App& app);
  /// Known spec when sigma2 was given; nullopt asks for estimation.
  std::optional<hrshift::NoiseSpec> known() const;
};

nlohmann::json noise_to_json(const hrshift::NoiseSpec& n);
hrshift::NoiseSpec noise_from_json(const nlohmann::json& j);

nlohmann::json candidates_to_json(const hrshift::CandidateSet& c);
hrshift::CandidateSet candidates_from_json(const nlohmann::json& j);

/// Writes to `path`, or to stdout when path is empty or "-".
void emit_json(const std::string& path, const nlohmann::json& j);

/// Subject directories under `dir` in lexicographic order.
std::vector<std::filesystem::path> subject_dirs(const std::filesystem::path& dir);

void register_subject_commands(CLI::App& app);
void register_group_commands(CLI::App& app);
void register_pipeline_commands(CLI::App& app);

}  // namespace cli
