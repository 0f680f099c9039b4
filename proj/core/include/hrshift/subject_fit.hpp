#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hrshift/ar_noise.hpp"
#include "hrshift/hemo_design.hpp"
#include "hrshift/rng.hpp"

namespace hrshift {

/// Noise model estimated from OLS residuals, then used for a GLS refit.
struct EstimateNoise {
  int order = 1;
};
using NoiseChoice = std::variant<NoiseSpec, EstimateNoise>;

struct SubjectGLMFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;  // sigma2 * (X' V^-1 X)^-1
  Eigen::VectorXd residuals;  // y - X beta
  double sigma2 = 0.0;
  NoiseSpec noise;
  double loglik = 0.0;
  Eigen::Index dof = 0;
  std::vector<ColumnTag> columns;
  ModelKind kind = ModelKind::stationary;

  std::vector<Eigen::Index> block(const std::string& condition, int segment) const;
};

/// GLS fit. With a known NoiseSpec the variance is fixed; otherwise it is
/// estimated as RSS / (T - p) on the whitened scale (log-likelihood profiles it).
SubjectGLMFit fit_gls(const Eigen::Ref<const Eigen::VectorXd>& y, const DesignMatrix& design, const NoiseChoice& noise);

/// Gaussian log-likelihood of the GLS fit. Known variance uses sigma2;
/// otherwise sigma2 is profiled (RSS / T).
double gls_loglik(double rss_whitened, Eigen::Index T, double log_det_v, const NoiseSpec& noise);

Eigen::VectorXd estimate_hr(const SubjectGLMFit& fit, const BasisSet& basis, const std::string& condition, int segment);

enum class ShapeParam { pm, na, ttp, tpn, fwhm, fwhn, auc };
inline constexpr std::array<ShapeParam, 7> kShapeParams{ShapeParam::pm,   ShapeParam::na,   ShapeParam::ttp,
                                                        ShapeParam::tpn,  ShapeParam::fwhm, ShapeParam::fwhn,
                                                        ShapeParam::auc};
std::string_view shape_name(ShapeParam p);
ShapeParam shape_from_name(std::string_view name);

struct ShapeParams {
  std::array<double, 7> value{};
  std::array<bool, 7> valid{};
  std::array<double, 7> variance{};
  std::array<std::size_t, 7> excluded{};  // MC draws without a valid value

  double operator[](ShapeParam p) const { return value[static_cast<std::size_t>(p)]; }
  bool is_valid(ShapeParam p) const { return valid[static_cast<std::size_t>(p)]; }
  double var(ShapeParam p) const { return variance[static_cast<std::size_t>(p)]; }
};

/// Extracts the seven shape parameters from a curve sampled at dt.
ShapeParams shape_params(const Eigen::Ref<const Eigen::VectorXd>& hr, double dt);

/// Monte-Carlo variance of each shape parameter under beta* ~ N(beta, cov)
/// of the block. Returns point values of the fitted curve plus variances.
ShapeParams mc_shape_variance(const SubjectGLMFit& fit, const BasisSet& basis, const std::string& condition,
                              int segment, std::size_t iters, Rng& rng);

/// Factor L with L L' = S after symmetrising and clipping tiny negative
/// eigenvalues; larger negative eigenvalues are an error.
Eigen::MatrixXd psd_factor(const Eigen::Ref<const Eigen::MatrixXd>& S);

}  // namespace hrshift
