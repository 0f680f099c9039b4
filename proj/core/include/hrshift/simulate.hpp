#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hrshift/ar_noise.hpp"
#include "hrshift/config.hpp"
#include "hrshift/cp_select.hpp"
#include "hrshift/hemo_design.hpp"
#include "hrshift/rng.hpp"

namespace hrshift {

struct SimulatedSubject {
  std::string id;
  Eigen::VectorXd y;
  std::vector<OnsetSeries> onsets;
  ChangePointSet truth;
  ChangePointSet reported;  // what the analysis is told (known-cp)
  CandidateSet candidates;  // unknown-cp
  std::size_t true_candidate = 0;
  std::vector<double> effects;  // subject-level effect per condition
  double baseline = 0.0;
  double clean_mean = 0.0;
  NoiseSpec noise;  // generating noise; sigma2 = clean_mean / snr
};

/// K * stimuli onsets with consecutive gaps drawn from `iti`, assigned to
/// conditions c1..cK in random order.
std::vector<OnsetSeries> random_onsets(std::size_t scans, std::size_t conditions, std::size_t stimuli,
                                       const std::vector<int>& iti, Rng& rng);

/// One subject of the pre-specified change point study. Data depend only on
/// (seed, setting, replicate, subject); the reported change points are
/// perturbed by up to `misspecification_bound` onsets when `misspecified`.
SimulatedSubject simulate_known_cp(const StudyConfig& config, const BasisSet& basis, double snr,
                                   const std::vector<double>& effect_means, bool misspecified, std::uint64_t seed,
                                   std::size_t subject);

/// Shared onset design of the unknown change point study.
std::vector<OnsetSeries> unknown_cp_design(const StudyConfig& config, std::uint64_t seed);

SimulatedSubject simulate_unknown_cp(const StudyConfig& config, const BasisSet& basis,
                                     const std::vector<OnsetSeries>& onsets, double eta, std::uint64_t seed,
                                     std::size_t subject);

}  // namespace hrshift
