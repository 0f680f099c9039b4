#include "hrshift/ar_noise.hpp"

#include <algorithm>
#include <cmath>

#include "hrshift/error.hpp"

namespace hrshift {
namespace {

constexpr double kMaxRho = 0.99;

void check_rho(double rho) {
  if (!(std::fabs(rho) < 1.0)) throw ArgumentError("AR(1) coefficient must satisfy |rho| < 1");
}

void check_stationary(const NoiseSpec& s) {
  if (s.order < 0 || s.order > 2) throw ArgumentError("AR order must be 0, 1 or 2");
  if (s.order == 1) check_rho(s.phi[0]);
  if (s.order == 2) {
    const double a = s.phi[0], b = s.phi[1];
    if (!(std::fabs(b) < 1.0 && a + b < 1.0 && b - a < 1.0))
      throw ArgumentError("AR(2) coefficients outside the stationary triangle");
  }
}

std::vector<double> autocorrelations(const NoiseSpec& s, Eigen::Index T) {
  std::vector<double> r(static_cast<std::size_t>(std::max<Eigen::Index>(T, 2)), 0.0);
  r[0] = 1.0;
  if (s.order == 1) {
    for (std::size_t k = 1; k < r.size(); ++k) r[k] = r[k - 1] * s.phi[0];
  } else if (s.order == 2) {
    r[1] = s.phi[0] / (1.0 - s.phi[1]);
    for (std::size_t k = 2; k < r.size(); ++k) r[k] = s.phi[0] * r[k - 1] + s.phi[1] * r[k - 2];
  }
  return r;
}

}  // namespace

Eigen::MatrixXd ar1_covariance(double rho, Eigen::Index T) {
  check_rho(rho);
  if (T < 1) throw ArgumentError("series length must be positive");
  return correlation_matrix(NoiseSpec::ar1(rho), T);
}

Eigen::MatrixXd ar1_precision(double rho, Eigen::Index T) {
  check_rho(rho);
  if (T < 2) throw ArgumentError("AR(1) precision needs T >= 2");
  const double c = 1.0 / (1.0 - rho * rho);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(T, T);
  for (Eigen::Index i = 0; i < T; ++i) {
    P(i, i) = (i == 0 || i == T - 1) ? c : c * (1.0 + rho * rho);
    if (i + 1 < T) P(i, i + 1) = P(i + 1, i) = -c * rho;
  }
  return P;
}

double ar1_log_det(double rho, Eigen::Index T) {
  check_rho(rho);
  return static_cast<double>(T - 1) * std::log1p(-rho * rho);
}

Eigen::MatrixXd correlation_matrix(const NoiseSpec& spec, Eigen::Index T) {
  check_stationary(spec);
  const auto r = autocorrelations(spec, T);
  Eigen::MatrixXd V(T, T);
  for (Eigen::Index i = 0; i < T; ++i)
    for (Eigen::Index j = 0; j < T; ++j) V(i, j) = r[static_cast<std::size_t>(std::abs(i - j))];
  return V;
}

Whitener::Whitener(const NoiseSpec& spec, Eigen::Index T) : order_(spec.order), T_(T) {
  check_stationary(spec);
  if (T < 1) throw ArgumentError("series length must be positive");
  if (order_ == 1) {
    rho_ = spec.phi[0];
    scale_ = 1.0 / std::sqrt(1.0 - rho_ * rho_);
    log_det_ = ar1_log_det(rho_, T);
  } else if (order_ == 2) {
    Eigen::LLT<Eigen::MatrixXd> llt(correlation_matrix(spec, T));
    if (llt.info() != Eigen::Success) throw DataError("AR(2) correlation matrix is not positive definite");
    chol_ = llt.matrixL();
    log_det_ = 2.0 * chol_.diagonal().array().log().sum();
  }
}

void Whitener::check_rows(Eigen::Index rows) const {
  if (rows != T_) throw ArgumentError("whitening dimension mismatch");
}

Eigen::MatrixXd Whitener::apply_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  check_rows(x.rows());
  if (order_ == 0) return x;
  if (order_ == 2) return chol_.triangularView<Eigen::Lower>().solve(x);
  Eigen::MatrixXd out(x.rows(), x.cols());
  out.row(0) = x.row(0);
  if (T_ > 1)
    out.bottomRows(T_ - 1) = scale_ * (x.bottomRows(T_ - 1) - rho_ * x.topRows(T_ - 1));
  return out;
}

Eigen::VectorXd Whitener::apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_rows(x.size());
  if (order_ == 0) return x;
  if (order_ == 2) return chol_.triangularView<Eigen::Lower>().solve(x);
  Eigen::VectorXd out(T_);
  out[0] = x[0];
  for (Eigen::Index t = 1; t < T_; ++t) out[t] = scale_ * (x[t] - rho_ * x[t - 1]);
  return out;
}

Eigen::VectorXd Whitener::unapply(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  check_rows(z.size());
  if (order_ == 0) return z;
  if (order_ == 2) return chol_ * z;
  Eigen::VectorXd y(T_);
  y[0] = z[0];
  const double inv = 1.0 / scale_;
  for (Eigen::Index t = 1; t < T_; ++t) y[t] = rho_ * y[t - 1] + inv * z[t];
  return y;
}

Eigen::MatrixXd whiten(const Eigen::Ref<const Eigen::MatrixXd>& x, const NoiseSpec& spec) {
  return Whitener(spec, x.rows()).apply_matrix(x);
}

NoiseSpec estimate_ar(const Eigen::Ref<const Eigen::VectorXd>& residuals, int order) {
  if (order < 1 || order > 2) throw ArgumentError("AR order must be 1 or 2");
  const Eigen::Index n = residuals.size();
  if (n < 10) throw ArgumentError("AR estimation needs at least 10 residuals");
  const Eigen::VectorXd e = residuals.array() - residuals.mean();
  const double scale = residuals.cwiseAbs().maxCoeff();
  const double r0 = e.squaredNorm() / static_cast<double>(n);
  if (!(r0 > 1e-24 * std::max(1.0, scale * scale)))
    throw DataError("residuals are constant; autocorrelation is undefined");
  auto acf = [&](Eigen::Index k) { return e.head(n - k).dot(e.tail(n - k)) / static_cast<double>(n) / r0; };
  NoiseSpec s;
  s.order = order;
  s.sigma2 = r0;
  if (order == 1) {
    s.phi[0] = std::clamp(acf(1), -kMaxRho, kMaxRho);
    return s;
  }
  const double r1 = acf(1), r2 = acf(2);
  const double det = 1.0 - r1 * r1;
  double a = r1 * (1.0 - r2) / det;
  double b = (r2 - r1 * r1) / det;
  // Shrink toward zero until strictly inside the stationary triangle.
  for (int i = 0; i < 200 && !(std::fabs(b) < kMaxRho && a + b < kMaxRho && b - a < kMaxRho); ++i) {
    a *= 0.98;
    b *= 0.98;
  }
  s.phi = {a, b};
  return s;
}

}  // namespace hrshift
