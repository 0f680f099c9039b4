#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrshift/hemo_design.hpp"

namespace hrshift {

inline constexpr const char* kConfigFormat = "hrshift-config/1";

enum class Scenario { known_cp, unknown_cp };

struct BasisConfig {
  std::string kind = "flobs-like";  // canonical | flobs-like | file
  std::string path;
  double dt = 0.2;
  double duration = 32.0;
};

struct PosiConfig {
  std::size_t D = 500;
  std::size_t DE = 100;
  double step_factor = 2.0;
  double grid_divisions = 5.0;
  double width_factor = 20.0;
  std::size_t max_rounds = 10;
  bool variance_known = true;
};

struct StudyConfig {
  Scenario scenario = Scenario::known_cp;
  std::uint64_t seed = 1;
  std::size_t subjects = 30;  // n per repetition
  std::size_t pool = 500;     // N generated subjects (unknown-cp)
  std::size_t scans = 500;
  double tr = 2.0;
  std::size_t conditions = 2;
  std::size_t stimuli = 60;  // per condition
  std::vector<int> iti{3, 4, 5};
  std::size_t change_points = 1;        // per condition
  std::size_t min_segment_onsets = 15;  // known-cp generation
  std::size_t margin = 10;              // unknown-cp candidate exclusion
  std::size_t spacing = 5;
  std::size_t candidates = 4;
  BasisConfig basis;
  std::vector<double> beta_before{3.2, -6.4, 3.2};
  std::vector<std::vector<double>> effects;  // known-cp: per-condition means; unknown-cp: {eta}
  double effect_variance = 1.0;
  std::vector<double> snr{1.0, 2.0};
  std::string noise = "white";  // white | ar1
  double rho = 0.0;
  double baseline_mean = 0.0;
  double baseline_variance = 0.0;
  std::string analysis_noise = "ar1";  // white | ar1 (estimated) | known
  std::size_t repetitions = 200;
  double alpha = 0.05;
  std::string procedure = "sfdr";   // sfdr | inheritance
  std::string weights = "equal";    // equal | leaf_count
  std::vector<std::string> statistics{"kh", "wald"};
  std::vector<bool> misspecification{false, true};
  int misspecification_bound = 5;
  std::size_t mc_iterations = 1000;
  PosiConfig posi;

  BasisSet make_basis() const;
};

/// Full-scale defaults for each scenario; JSON fields override them.
StudyConfig default_config(Scenario s);
StudyConfig parse_config(const nlohmann::json& j);
StudyConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const StudyConfig& c);
/// Throws ConfigError on invalid values.
void validate(const StudyConfig& c);

}  // namespace hrshift
