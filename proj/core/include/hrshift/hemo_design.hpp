#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hrshift {

/// Binary stimulus indicator for one condition over T scans.
class OnsetSeries {
 public:
  OnsetSeries() = default;
  /// Validates that every entry is 0 or 1.
  OnsetSeries(std::string condition, std::vector<std::uint8_t> indicator);
  /// Builds a series of length `scans` from 1-based onset scan indices.
  static OnsetSeries from_onsets(std::string condition, std::size_t scans,
                                 const std::vector<std::size_t>& onsets);

  const std::string& condition() const { return condition_; }
  std::size_t length() const { return indicator_.size(); }
  const std::vector<std::uint8_t>& indicator() const { return indicator_; }
  /// 1-based scan indices of the onsets, ascending.
  std::vector<std::size_t> onsets() const;
  std::size_t count() const;
  /// Keeps only onsets with scan index in [first, last] (1-based, inclusive).
  OnsetSeries restricted(std::size_t first, std::size_t last) const;

 private:
  std::string condition_;
  std::vector<std::uint8_t> indicator_;
};

enum class BasisKind { canonical, flobs_like, loaded };

/// G basis functions sampled at resolution dt over T' samples (columns).
struct BasisSet {
  Eigen::MatrixXd functions;
  double dt = 0.1;
  BasisKind kind = BasisKind::loaded;

  Eigen::Index samples() const { return functions.rows(); }
  Eigen::Index count() const { return functions.cols(); }
  double duration() const { return static_cast<double>(samples()) * dt; }
  /// Throws unless finite, G >= 1 and the support covers at least 20 s.
  void validate() const;
};

/// Per-condition ordered change points, stored as 1-based scan indices.
struct ChangePointSet {
  std::map<std::string, std::vector<std::size_t>> points;

  std::size_t count(const std::string& condition) const;
  bool operator==(const ChangePointSet&) const = default;
};

enum class ModelKind { stationary, segmented, cumulative };

struct ColumnTag {
  enum class Role { response, intercept, confound };
  Role role = Role::response;
  std::string condition;
  int segment = 0;  // segment (segmented) or change index (cumulative)
  int basis = 0;
  int confound = -1;
};

struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<ColumnTag> columns;
  ModelKind kind = ModelKind::stationary;

  /// Column indices of (condition, segment) ordered by basis function.
  std::vector<Eigen::Index> block(const std::string& condition, int segment) const;
  Eigen::Index column(const std::string& condition, int segment, int basis = 0) const;
};

struct DesignOptions {
  double tr = 2.0;
  bool intercept = true;
  bool check_rank = true;
};

/// Double-gamma HRF (peaks at 6 s and 16 s, ratio 1/6) scaled to unit peak.
Eigen::VectorXd canonical_hrf(double dt, double duration);
BasisSet canonical_basis(double dt, double duration);
/// Three-function informed basis spanning a family of double-gamma shapes.
/// Oriented so that weights (3.2, -6.4, 3.2) give the canonical HRF.
BasisSet flobs_like_basis(double dt, double duration);
/// Reads a numeric T' x G CSV (no header) sampled at `dt`.
BasisSet load_basis(const std::filesystem::path& path, double dt);

/// Splits onsets at change points: element c keeps scans
/// [psi_c, psi_{c+1} - 1] with psi_0 = 1 and psi_{C+1} = T + 1.
std::vector<OnsetSeries> split_onsets(const OnsetSeries& onsets, const std::vector<std::size_t>& cps);

/// Samples sum_s u[s] * b((t - s) * tr) at every scan, interpolating the
/// basis function linearly and treating it as zero past its support.
Eigen::VectorXd convolve_onsets(const OnsetSeries& onsets, const Eigen::Ref<const Eigen::VectorXd>& basis_fn,
                                double dt, double tr);

DesignMatrix build_design(const std::vector<OnsetSeries>& onsets, const BasisSet& basis,
                          const ChangePointSet& cps, const Eigen::MatrixXd& confounds, ModelKind kind,
                          const DesignOptions& options = {});

}  // namespace hrshift
