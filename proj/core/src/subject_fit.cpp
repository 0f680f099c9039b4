#include "hrshift/subject_fit.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hrshift/error.hpp"
#include "hrshift/stats.hpp"

namespace hrshift {

std::vector<Eigen::Index> SubjectGLMFit::block(const std::string& condition, int segment) const {
  DesignMatrix view;
  view.columns = columns;
  return view.block(condition, segment);
}

double gls_loglik(double rss, Eigen::Index T, double log_det_v, const NoiseSpec& noise) {
  const double n = static_cast<double>(T);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  if (noise.known) return -0.5 * (n * log2pi + n * std::log(noise.sigma2) + log_det_v + rss / noise.sigma2);
  return -0.5 * (n * log2pi + n * std::log(rss / n) + log_det_v + n);
}

namespace {

SubjectGLMFit fit_with(const Eigen::Ref<const Eigen::VectorXd>& y, const DesignMatrix& design, NoiseSpec noise) {
  const Eigen::Index T = design.X.rows(), p = design.X.cols();
  if (y.size() != T) throw ArgumentError("signal length differs from design rows");
  if (T <= p) throw DataError("need more scans than regressors");
  if (noise.known && !(noise.sigma2 > 0)) throw ArgumentError("known noise variance must be positive");
  const Whitener W(noise, T);
  const Eigen::MatrixXd Xw = W.apply_matrix(design.X);
  const Eigen::VectorXd yw = W.apply(y);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw DataError("design matrix is rank deficient");

  SubjectGLMFit fit;
  fit.beta = qr.solve(yw);
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd unscaled_perm = Rinv * Rinv.transpose();
  const auto& P = qr.colsPermutation();
  const Eigen::MatrixXd unscaled = P * unscaled_perm * P.transpose();
  const double rss = (yw - Xw * fit.beta).squaredNorm();
  fit.dof = T - p;
  fit.sigma2 = noise.known ? noise.sigma2 : rss / static_cast<double>(fit.dof);
  noise.sigma2 = fit.sigma2;
  fit.cov = fit.sigma2 * unscaled;
  fit.residuals = y - design.X * fit.beta;
  fit.noise = noise;
  fit.loglik = gls_loglik(rss, T, W.log_det(), noise);
  fit.columns = design.columns;
  fit.kind = design.kind;
  return fit;
}

}  // namespace

SubjectGLMFit fit_gls(const Eigen::Ref<const Eigen::VectorXd>& y, const DesignMatrix& design,
                      const NoiseChoice& noise) {
  if (const auto* spec = std::get_if<NoiseSpec>(&noise)) return fit_with(y, design, *spec);
  const auto& est = std::get<EstimateNoise>(noise);
  const SubjectGLMFit ols = fit_with(y, design, NoiseSpec::white());
  NoiseSpec ar = estimate_ar(ols.residuals, est.order);
  ar.known = false;
  return fit_with(y, design, ar);
}

Eigen::VectorXd estimate_hr(const SubjectGLMFit& fit, const BasisSet& basis, const std::string& condition,
                            int segment) {
  const auto cols = fit.block(condition, segment);
  if (static_cast<Eigen::Index>(cols.size()) != basis.count())
    throw ArgumentError("block size differs from the number of basis functions");
  Eigen::VectorXd b(basis.count());
  for (std::size_t g = 0; g < cols.size(); ++g) b[static_cast<Eigen::Index>(g)] = fit.beta[cols[g]];
  return basis.functions * b;
}

std::string_view shape_name(ShapeParam p) {
  static constexpr std::array<std::string_view, 7> names{"pm", "na", "ttp", "tpn", "fwhm", "fwhn", "auc"};
  return names[static_cast<std::size_t>(p)];
}

ShapeParam shape_from_name(std::string_view name) {
  for (auto p : kShapeParams)
    if (shape_name(p) == name) return p;
  throw ArgumentError("unknown shape parameter '" + std::string(name) + "'");
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Position where the curve crosses `level` between samples i and j (adjacent).
double crossing(const Eigen::Ref<const Eigen::VectorXd>& h, Eigen::Index i, Eigen::Index j, double level, double dt) {
  const double f = (level - h[i]) / (h[j] - h[i]);
  return (static_cast<double>(i) + f * static_cast<double>(j - i)) * dt;
}

void set(ShapeParams& s, ShapeParam p, double v, bool ok) {
  s.value[static_cast<std::size_t>(p)] = ok ? v : kNaN;
  s.valid[static_cast<std::size_t>(p)] = ok;
}

}  // namespace

ShapeParams shape_params(const Eigen::Ref<const Eigen::VectorXd>& h, double dt) {
  if (h.size() < 3) throw ArgumentError("shape parameters need at least three samples");
  if (!(dt > 0)) throw ArgumentError("dt must be positive");
  if (!h.allFinite()) throw DataError("response curve has non-finite values");
  ShapeParams s;
  const Eigen::Index n = h.size();
  Eigen::Index ip = 0;
  const double pm = h.maxCoeff(&ip);
  if (pm == h.minCoeff()) {
    for (auto p : kShapeParams) set(s, p, kNaN, false);
    return s;
  }
  set(s, ShapeParam::pm, pm, true);
  set(s, ShapeParam::ttp, static_cast<double>(ip) * dt, true);
  double auc = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) auc += 0.5 * (h[i] + h[i + 1]) * dt;
  set(s, ShapeParam::auc, auc, true);

  // Width at half maximum around the peak.
  bool fwhm_ok = pm > 0;
  double left = 0, right = 0;
  if (fwhm_ok) {
    const double half = pm / 2;
    Eigen::Index i = ip;
    while (i > 0 && h[i - 1] >= half) --i;
    if (i == 0) fwhm_ok = false;
    else left = crossing(h, i - 1, i, half, dt);
    Eigen::Index j = ip;
    while (j + 1 < n && h[j + 1] >= half) ++j;
    if (j + 1 == n) fwhm_ok = false;
    else right = crossing(h, j, j + 1, half, dt);
  }
  set(s, ShapeParam::fwhm, right - left, fwhm_ok);

  // Post-peak nadir.
  Eigen::Index in = ip;
  const double na = h.tail(n - ip).minCoeff(&in);
  in += ip;
  const bool nadir_ok = na < 0 && in > ip;
  set(s, ShapeParam::na, na, nadir_ok);
  set(s, ShapeParam::tpn, static_cast<double>(in - ip) * dt, nadir_ok);
  bool fwhn_ok = nadir_ok;
  if (nadir_ok) {
    const double half = na / 2;
    Eigen::Index i = in;
    while (i > 0 && h[i - 1] <= half) --i;
    if (i == 0) fwhn_ok = false;
    else left = crossing(h, i - 1, i, half, dt);
    Eigen::Index j = in;
    while (j + 1 < n && h[j + 1] <= half) ++j;
    if (j + 1 == n) fwhn_ok = false;
    else right = crossing(h, j, j + 1, half, dt);
  }
  set(s, ShapeParam::fwhn, right - left, fwhn_ok);
  return s;
}

Eigen::MatrixXd psd_factor(const Eigen::Ref<const Eigen::MatrixXd>& S) {
  if (S.rows() != S.cols()) throw ArgumentError("covariance must be square");
  const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double tol = 1e-10 * std::max(std::fabs(sym.trace()), std::numeric_limits<double>::min());
  if (lambda.size() > 0 && lambda.minCoeff() < -tol) throw DataError("covariance block is not positive semidefinite");
  lambda = lambda.cwiseMax(0.0);
  return eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
}

ShapeParams mc_shape_variance(const SubjectGLMFit& fit, const BasisSet& basis, const std::string& condition,
                              int segment, std::size_t iters, Rng& rng) {
  if (iters < 100) throw ArgumentError("Monte-Carlo variance needs at least 100 iterations");
  const auto cols = fit.block(condition, segment);
  const auto G = static_cast<Eigen::Index>(cols.size());
  if (G != basis.count()) throw ArgumentError("block size differs from the number of basis functions");
  Eigen::VectorXd b(G);
  Eigen::MatrixXd S(G, G);
  for (Eigen::Index i = 0; i < G; ++i) {
    b[i] = fit.beta[cols[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < G; ++j) S(i, j) = fit.cov(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
  }
  const Eigen::MatrixXd L = psd_factor(S);
  ShapeParams out = shape_params(basis.functions * b, basis.dt);

  std::normal_distribution<double> normal;
  std::array<std::vector<double>, 7> draws;
  for (auto& d : draws) d.reserve(iters);
  Eigen::VectorXd g(G), hr(basis.samples());
  for (std::size_t it = 0; it < iters; ++it) {
    for (Eigen::Index k = 0; k < G; ++k) g[k] = normal(rng);
    hr.noalias() = basis.functions * (b + L * g);
    const ShapeParams s = shape_params(hr, basis.dt);
    for (std::size_t k = 0; k < 7; ++k)
      if (s.valid[k]) draws[k].push_back(s.value[k]);
  }
  for (std::size_t k = 0; k < 7; ++k) {
    out.excluded[k] = iters - draws[k].size();
    out.variance[k] = draws[k].size() >= 2 ? sample_variance(draws[k]) : kNaN;
  }
  return out;
}

}  // namespace hrshift
