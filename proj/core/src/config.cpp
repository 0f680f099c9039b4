#include "hrshift/config.hpp"

#include <cmath>
#include <set>

#include "hrshift/error.hpp"
#include "hrshift/io.hpp"

namespace hrshift {

StudyConfig default_config(Scenario s) {
  StudyConfig c;
  c.scenario = s;
  if (s == Scenario::known_cp) {
    c.effects = {{-1.0, -0.5}, {0.0, 0.5}, {1.0, 1.5}, {2.0, 2.5}};
    return c;
  }
  c.scans = 250;
  c.conditions = 1;
  c.basis = {"canonical", "", 0.1, 32.0};
  c.beta_before = {1.0};
  c.effects = {{0.0}, {0.5}, {1.0}};
  c.effect_variance = 0.1;
  c.snr = {2.0};
  c.noise = "ar1";
  c.rho = 0.2;
  c.baseline_mean = 10.0;
  c.baseline_variance = 1.0;
  c.analysis_noise = "known";
  c.misspecification = {false};
  return c;
}

BasisSet StudyConfig::make_basis() const {
  if (basis.kind == "canonical") return canonical_basis(basis.dt, basis.duration);
  if (basis.kind == "flobs-like") return flobs_like_basis(basis.dt, basis.duration);
  if (basis.kind == "file") return load_basis(basis.path, basis.dt);
  throw ConfigError("unknown basis kind '" + basis.kind + "'");
}

namespace {

template <class T>
void take(const nlohmann::json& j, const char* key, T& out, std::set<std::string>& seen) {
  if (!j.contains(key)) return;
  seen.insert(key);
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& seen, const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (!seen.count(k)) throw ConfigError("unknown config field '" + where + k + "'");
}

}  // namespace

StudyConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("format") || j["format"] != kConfigFormat)
    throw ConfigError(std::string("config 'format' must be \"") + kConfigFormat + "\"");
  if (!j.contains("scenario") || !j["scenario"].is_string()) throw ConfigError("config needs a 'scenario'");
  const std::string scen = j["scenario"];
  if (scen != "known-cp" && scen != "unknown-cp") throw ConfigError("scenario must be known-cp or unknown-cp");
  StudyConfig c = default_config(scen == "known-cp" ? Scenario::known_cp : Scenario::unknown_cp);
  std::set<std::string> seen{"format", "scenario"};
  if (!j.contains("seed")) throw ConfigError("config needs an explicit 'seed'");
  take(j, "seed", c.seed, seen);
  take(j, "subjects", c.subjects, seen);
  take(j, "pool", c.pool, seen);
  take(j, "scans", c.scans, seen);
  take(j, "tr", c.tr, seen);
  take(j, "conditions", c.conditions, seen);
  take(j, "stimuli_per_condition", c.stimuli, seen);
  take(j, "iti", c.iti, seen);
  take(j, "change_points", c.change_points, seen);
  take(j, "min_segment_onsets", c.min_segment_onsets, seen);
  take(j, "margin", c.margin, seen);
  take(j, "spacing", c.spacing, seen);
  take(j, "candidates", c.candidates, seen);
  take(j, "beta_before", c.beta_before, seen);
  take(j, "effects", c.effects, seen);
  take(j, "effect_variance", c.effect_variance, seen);
  take(j, "snr", c.snr, seen);
  take(j, "noise", c.noise, seen);
  take(j, "rho", c.rho, seen);
  take(j, "baseline_mean", c.baseline_mean, seen);
  take(j, "baseline_variance", c.baseline_variance, seen);
  take(j, "analysis_noise", c.analysis_noise, seen);
  take(j, "repetitions", c.repetitions, seen);
  take(j, "alpha", c.alpha, seen);
  take(j, "procedure", c.procedure, seen);
  take(j, "weights", c.weights, seen);
  take(j, "statistics", c.statistics, seen);
  take(j, "misspecification", c.misspecification, seen);
  take(j, "misspecification_bound", c.misspecification_bound, seen);
  take(j, "mc_iterations", c.mc_iterations, seen);
  bool full_scale = false;
  take(j, "full_scale", full_scale, seen);
  if (full_scale) c.repetitions = 1000;
  if (j.contains("basis")) {
    seen.insert("basis");
    const auto& b = j["basis"];
    if (!b.is_object()) throw ConfigError("config field 'basis' must be an object");
    std::set<std::string> bs;
    take(b, "kind", c.basis.kind, bs);
    take(b, "path", c.basis.path, bs);
    take(b, "dt", c.basis.dt, bs);
    take(b, "duration", c.basis.duration, bs);
    reject_unknown(b, bs, "basis.");
  }
  if (j.contains("posi")) {
    seen.insert("posi");
    const auto& p = j["posi"];
    if (!p.is_object()) throw ConfigError("config field 'posi' must be an object");
    std::set<std::string> ps;
    take(p, "D", c.posi.D, ps);
    take(p, "DE", c.posi.DE, ps);
    take(p, "step_factor", c.posi.step_factor, ps);
    take(p, "grid_divisions", c.posi.grid_divisions, ps);
    take(p, "width_factor", c.posi.width_factor, ps);
    take(p, "max_rounds", c.posi.max_rounds, ps);
    take(p, "variance_known", c.posi.variance_known, ps);
    reject_unknown(p, ps, "posi.");
  }
  reject_unknown(j, seen, "");
  validate(c);
  return c;
}

StudyConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = read_json(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(j);
}

void validate(const StudyConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(c.subjects >= 2, "subjects must be at least 2");
  need(c.scans > 0 && c.conditions > 0 && c.stimuli > 0, "counts must be positive");
  need(c.tr > 0, "tr must be positive");
  need(!c.iti.empty(), "iti set must not be empty");
  for (int v : c.iti) need(v >= 1, "iti values must be at least 1");
  need(c.change_points >= 1, "change_points must be at least 1");
  need(c.repetitions > 0, "repetitions must be positive");
  need(c.alpha > 0 && c.alpha < 1, "alpha must lie in (0, 1)");
  need(c.procedure == "sfdr" || c.procedure == "inheritance", "procedure must be sfdr or inheritance");
  need(c.weights == "equal" || c.weights == "leaf_count", "weights must be equal or leaf_count");
  need(!c.statistics.empty(), "statistics must not be empty");
  for (const auto& s : c.statistics) need(s == "kh" || s == "wald", "statistics must be kh or wald");
  need(c.noise == "white" || c.noise == "ar1", "noise must be white or ar1");
  need(std::fabs(c.rho) < 1, "rho must satisfy |rho| < 1");
  need(c.analysis_noise == "white" || c.analysis_noise == "ar1" || c.analysis_noise == "known",
       "analysis_noise must be white, ar1 or known");
  need(!c.snr.empty(), "snr list must not be empty");
  for (double s : c.snr) need(s > 0, "snr values must be positive");
  need(!c.effects.empty(), "effects must not be empty");
  need(c.effect_variance >= 0 && c.baseline_variance >= 0, "variances must be non-negative");
  need(c.mc_iterations >= 100, "mc_iterations must be at least 100");
  need(c.misspecification_bound >= 0, "misspecification_bound must be non-negative");
  need(!c.misspecification.empty(), "misspecification list must not be empty");
  need(c.basis.dt > 0 && c.basis.duration > 0, "basis dt and duration must be positive");
  need(c.posi.D > 0 && c.posi.DE > 0, "posi D and DE must be positive");
  need(c.posi.step_factor > 0 && c.posi.grid_divisions > 0 && c.posi.width_factor > 0, "posi factors must be positive");
  if (c.scenario == Scenario::known_cp) {
    for (const auto& e : c.effects) need(e.size() == c.conditions, "each effects row needs one value per condition");
    need(c.stimuli >= (c.change_points + 1) * c.min_segment_onsets, "too few stimuli for the segment constraint");
  } else {
    need(c.conditions == 1 && c.change_points == 1, "unknown-cp scenario supports one condition with one change");
    need(c.basis.kind == "canonical" || c.basis.kind == "file", "unknown-cp scenario needs a single-function basis");
    for (const auto& e : c.effects) need(e.size() == 1, "unknown-cp effects rows hold a single eta");
    need(c.pool >= c.subjects, "pool must hold at least as many subjects as are resampled");
    need(c.candidates >= 1, "candidates must be positive");
    need(c.snr.size() == 1, "unknown-cp scenario uses a single snr");
  }
}

nlohmann::json to_json(const StudyConfig& c) {
  return nlohmann::json{
      {"format", kConfigFormat},
      {"scenario", c.scenario == Scenario::known_cp ? "known-cp" : "unknown-cp"},
      {"seed", c.seed},
      {"subjects", c.subjects},
      {"pool", c.pool},
      {"scans", c.scans},
      {"tr", c.tr},
      {"conditions", c.conditions},
      {"stimuli_per_condition", c.stimuli},
      {"iti", c.iti},
      {"change_points", c.change_points},
      {"min_segment_onsets", c.min_segment_onsets},
      {"margin", c.margin},
      {"spacing", c.spacing},
      {"candidates", c.candidates},
      {"basis", {{"kind", c.basis.kind}, {"path", c.basis.path}, {"dt", c.basis.dt}, {"duration", c.basis.duration}}},
      {"beta_before", c.beta_before},
      {"effects", c.effects},
      {"effect_variance", c.effect_variance},
      {"snr", c.snr},
      {"noise", c.noise},
      {"rho", c.rho},
      {"baseline_mean", c.baseline_mean},
      {"baseline_variance", c.baseline_variance},
      {"analysis_noise", c.analysis_noise},
      {"repetitions", c.repetitions},
      {"alpha", c.alpha},
      {"procedure", c.procedure},
      {"weights", c.weights},
      {"statistics", c.statistics},
      {"misspecification", c.misspecification},
      {"misspecification_bound", c.misspecification_bound},
      {"mc_iterations", c.mc_iterations},
      {"posi",
       {{"D", c.posi.D},
        {"DE", c.posi.DE},
        {"step_factor", c.posi.step_factor},
        {"grid_divisions", c.posi.grid_divisions},
        {"width_factor", c.posi.width_factor},
        {"max_rounds", c.posi.max_rounds},
        {"variance_known", c.posi.variance_known}}}};
}

}  // namespace hrshift
