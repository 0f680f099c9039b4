#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hrshift/config.hpp"
#include "hrshift/cp_select.hpp"
#include "hrshift/group_test.hpp"
#include "hrshift/hypothesis_tree.hpp"
#include "hrshift/io.hpp"
#include "hrshift/posi.hpp"
#include "hrshift/subject_fit.hpp"

namespace hrshift {

enum class MtProcedure { selective_fdr, inheritance };

struct Procedure1Subject {
  std::string id;
  Eigen::VectorXd y;
  std::vector<OnsetSeries> onsets;
  ChangePointSet change_points;
  Eigen::MatrixXd confounds;
};

struct Procedure1Roi {
  std::string label = "roi";
  std::vector<Procedure1Subject> subjects;
};

struct Procedure1Options {
  BasisSet basis;
  double tr = 2.0;
  bool intercept = true;
  NoiseChoice noise = EstimateNoise{1};
  std::size_t mc_iterations = 1000;
  double alpha = 0.05;
  MtProcedure procedure = MtProcedure::selective_fdr;
  InheritanceWeights weights = InheritanceWeights::equal;
  std::vector<StatisticKind> statistics{StatisticKind::knapp_hartung, StatisticKind::wald};
};

/// Group test of one shape parameter across one change.
struct ShapeChangeTest {
  std::string roi;
  std::string condition;
  int change = 1;
  ShapeParam param = ShapeParam::pm;
  std::size_t subjects_used = 0;
  std::map<StatisticKind, GroupTestResult> results;
};

struct Procedure1Result {
  std::vector<ShapeChangeTest> tests;
  std::map<StatisticKind, HypothesisTree> trees;  // leaves in the order of `tests`
  std::map<StatisticKind, std::vector<std::size_t>> leaf_nodes;
};

/// Split, fit, shape parameters with MC variances, REML group tests and
/// multiple-testing adjustment. `truth` optionally labels leaves with
/// (condition, param) -> true null for simulation bookkeeping.
Procedure1Result run_procedure1(const std::vector<Procedure1Roi>& rois, const Procedure1Options& options,
                                std::uint64_t seed,
                                const std::map<std::pair<std::string, ShapeParam>, bool>& truth = {});

/// V / max(R, 1) over leaves carrying truth labels.
double false_discovery_proportion(const HypothesisTree& tree);

enum class Approach { naive, posi_05, posi_e, posi_ols };
inline constexpr std::array<Approach, 4> kApproaches{Approach::naive, Approach::posi_05, Approach::posi_e,
                                                     Approach::posi_ols};
std::string approach_name(Approach a);

struct Procedure2Subject {
  std::string id;
  Eigen::VectorXd y;
  std::vector<OnsetSeries> onsets;
  CandidateSet candidates;
  Eigen::MatrixXd confounds;
  std::optional<NoiseSpec> noise;  // known noise; otherwise a reference AR(1) is estimated
};

struct Procedure2Options {
  BasisSet basis;
  double tr = 2.0;
  bool intercept = true;
  bool variance_known = true;
  FocusSpec focus;
  PosiRunOptions posi;
};

struct SubjectPosiOutcome {
  std::string id;
  std::size_t selected = 0;
  ChangePointSet chosen;
  double theta_ols = 0.0;
  double naive_variance = 0.0;
  double posi_variance = 0.0;
  double median = 0.0;
  double mean = 0.0;
  bool failed = false;
  std::string failure_reason;
  PosiResult detail;

  /// (estimate, within-subject variance) of an approach.
  std::pair<double, double> estimate(Approach a) const;
};

SubjectPosiOutcome analyze_posi_subject(const Procedure2Subject& subject, const Procedure2Options& options,
                                        std::uint64_t seed);

struct Procedure2Result {
  std::vector<SubjectPosiOutcome> subjects;
  std::size_t failures = 0;
  std::map<Approach, std::map<StatisticKind, GroupTestResult>> tests;
};

/// Group tests of eta = 0 for every approach over the successful subjects.
std::map<Approach, std::map<StatisticKind, GroupTestResult>> group_tests_procedure2(
    const std::vector<const SubjectPosiOutcome*>& subjects, const std::vector<StatisticKind>& statistics);

/// Selection and posi per subject, then group tests; throws PosiFailure
/// when no subject succeeds.
Procedure2Result run_procedure2(const std::vector<Procedure2Subject>& subjects, const Procedure2Options& options,
                                std::uint64_t seed,
                                const std::vector<StatisticKind>& statistics = {StatisticKind::knapp_hartung,
                                                                               StatisticKind::wald});

/// Pre-specified change point simulation study over every (SNR, effects,
/// misspecification) setting.
struct KnownStudyResult {
  CsvTable fdp;    // Table-1 layout
  CsvTable rates;  // per-hypothesis rejection rates
  nlohmann::json summary;
};
KnownStudyResult run_known_cp_study(const StudyConfig& config);

/// Unknown change point study: pooled subjects, posi per subject, resampled
/// group tests.
struct UnknownStudyResult {
  CsvTable rates;     // eta, approach, statistic, rejection rate
  CsvTable subjects;  // per pooled subject outcome
  nlohmann::json summary;
  std::size_t total_failures = 0;
  std::size_t total_subjects = 0;
};
UnknownStudyResult run_unknown_cp_study(const StudyConfig& config);

/// Writes fdp.csv, rates.csv and summary.json; returns the paths written.
std::vector<std::filesystem::path> write_study(const std::filesystem::path& dir, const KnownStudyResult& r);
/// Writes rates.csv, subjects.csv and summary.json; returns the paths written.
std::vector<std::filesystem::path> write_study(const std::filesystem::path& dir, const UnknownStudyResult& r);

}  // namespace hrshift
