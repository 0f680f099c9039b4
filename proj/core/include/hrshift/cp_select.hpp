#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hrshift/ar_noise.hpp"
#include "hrshift/hemo_design.hpp"

namespace hrshift {

/// Everything except the signal that determines a candidate model's fit.
struct AnalysisContext {
  std::vector<OnsetSeries> onsets;
  BasisSet basis;
  Eigen::MatrixXd confounds;
  DesignOptions design;
  NoiseSpec noise;  // noise.known selects known-variance vs profiled likelihood
};

struct CandidateConstraints {
  std::size_t margin = 10;   // onsets excluded at each end of a condition
  std::size_t spacing = 5;   // minimum onset-ordinal gap between change points
  std::size_t max_configurations = 10000;
};

struct CandidateSet {
  std::vector<ChangePointSet> configurations;
  std::size_t size() const { return configurations.size(); }
};

/// All configurations with `counts[k]` change points per condition placed on
/// onsets, honouring margin and spacing, in lexicographic order.
CandidateSet enumerate_candidates(const std::vector<OnsetSeries>& onsets,
                                  const std::map<std::string, std::size_t>& counts,
                                  const CandidateConstraints& constraints = {});
/// Checks a user-supplied list: non-empty, distinct, every change point on an onset.
CandidateSet candidate_list(std::vector<ChangePointSet> configurations, const std::vector<OnsetSeries>& onsets);

/// Cumulative designs of every candidate, whitened once, for repeated
/// likelihood evaluation.
class CandidateModels {
 public:
  CandidateModels(const CandidateSet& candidates, const AnalysisContext& context);

  std::size_t size() const { return designs_.size(); }
  Eigen::Index scans() const { return whitener_.size(); }
  const DesignMatrix& design(std::size_t i) const { return designs_.at(i); }
  const Eigen::MatrixXd& whitened(std::size_t i) const { return whitened_.at(i); }
  const Whitener& whitener() const { return whitener_; }
  const NoiseSpec& noise() const { return noise_; }
  const ChangePointSet& candidate(std::size_t i) const { return candidates_.configurations.at(i); }

  /// Log-likelihood of candidate i for whitened data z with ||z||^2 = zz.
  double loglik_whitened(std::size_t i, const Eigen::Ref<const Eigen::VectorXd>& z, double zz) const;
  std::vector<double> logliks(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  std::vector<double> logliks_whitened(const Eigen::Ref<const Eigen::VectorXd>& z) const;

 private:
  CandidateSet candidates_;
  NoiseSpec noise_;
  Whitener whitener_;
  std::vector<DesignMatrix> designs_;
  std::vector<Eigen::MatrixXd> whitened_;
  std::vector<Eigen::MatrixXd> q_;  // orthonormal basis of each whitened design
};

double model_loglik(const Eigen::Ref<const Eigen::VectorXd>& y, const ChangePointSet& candidate,
                    const AnalysisContext& context);

struct SelectionResult {
  std::size_t selected = 0;
  std::vector<double> logliks;
};

/// Maximum-likelihood candidate; an exact tie for the maximum is an error.
SelectionResult select_model(const Eigen::Ref<const Eigen::VectorXd>& y, const CandidateModels& models);
SelectionResult select_model(const Eigen::Ref<const Eigen::VectorXd>& y, const CandidateSet& candidates,
                             const AnalysisContext& context);

/// AR noise estimated once from the stationary (no change point) fit, with
/// variance left unknown. Shared by every candidate so selection and
/// post-selection inference see the same noise model.
NoiseSpec reference_noise(const Eigen::Ref<const Eigen::VectorXd>& y, const AnalysisContext& context, int order = 1);

}  // namespace hrshift
