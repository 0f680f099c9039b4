#include "hrshift/hemo_design.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hrshift/error.hpp"
#include "hrshift/io.hpp"

namespace hrshift {

OnsetSeries::OnsetSeries(std::string condition, std::vector<std::uint8_t> indicator)
    : condition_(std::move(condition)), indicator_(std::move(indicator)) {
  for (auto v : indicator_)
    if (v > 1) throw ArgumentError("onset indicator entries must be 0 or 1");
}

OnsetSeries OnsetSeries::from_onsets(std::string condition, std::size_t scans,
                                     const std::vector<std::size_t>& onsets) {
  std::vector<std::uint8_t> u(scans, 0);
  for (auto s : onsets) {
    if (s < 1 || s > scans) throw ArgumentError("onset scan index outside [1, T]");
    u[s - 1] = 1;
  }
  return OnsetSeries(std::move(condition), std::move(u));
}

std::vector<std::size_t> OnsetSeries::onsets() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < indicator_.size(); ++i)
    if (indicator_[i]) out.push_back(i + 1);
  return out;
}

std::size_t OnsetSeries::count() const {
  return static_cast<std::size_t>(std::count(indicator_.begin(), indicator_.end(), 1));
}

OnsetSeries OnsetSeries::restricted(std::size_t first, std::size_t last) const {
  std::vector<std::uint8_t> u(indicator_.size(), 0);
  for (std::size_t s = std::max<std::size_t>(first, 1); s <= std::min(last, u.size()); ++s)
    u[s - 1] = indicator_[s - 1];
  return OnsetSeries(condition_, std::move(u));
}

void BasisSet::validate() const {
  if (!(dt > 0)) throw ArgumentError("basis resolution dt must be positive");
  if (count() < 1 || samples() < 2) throw DataError("basis needs at least one function of two samples");
  if (!functions.allFinite()) throw DataError("basis contains non-finite values");
  if (duration() < 20.0 - 1e-9) throw DataError("basis support must cover at least 20 s");
}

std::size_t ChangePointSet::count(const std::string& condition) const {
  auto it = points.find(condition);
  return it == points.end() ? 0 : it->second.size();
}

std::vector<Eigen::Index> DesignMatrix::block(const std::string& condition, int segment) const {
  std::vector<std::pair<int, Eigen::Index>> found;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto& c = columns[j];
    if (c.role == ColumnTag::Role::response && c.condition == condition && c.segment == segment)
      found.emplace_back(c.basis, static_cast<Eigen::Index>(j));
  }
  if (found.empty()) throw ArgumentError("design has no block for condition '" + condition + "' segment " +
                                         std::to_string(segment));
  std::sort(found.begin(), found.end());
  std::vector<Eigen::Index> out;
  for (auto& f : found) out.push_back(f.second);
  return out;
}

Eigen::Index DesignMatrix::column(const std::string& condition, int segment, int basis) const {
  auto b = block(condition, segment);
  if (basis < 0 || basis >= static_cast<int>(b.size())) throw ArgumentError("basis index out of range");
  return b[static_cast<std::size_t>(basis)];
}

namespace {

double gamma_pdf(double t, double shape) {
  if (t <= 0) return 0.0;
  return std::exp((shape - 1) * std::log(t) - t - std::lgamma(shape));
}

Eigen::Index sample_count(double dt, double duration) {
  if (!(dt > 0) || !(duration > 0)) throw ArgumentError("dt and duration must be positive");
  auto n = static_cast<Eigen::Index>(std::llround(duration / dt));
  if (n < 2) throw ArgumentError("duration must span at least two samples");
  return n;
}

Eigen::VectorXd double_gamma(double dt, Eigen::Index n, double peak, double under, double ratio) {
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    h[i] = gamma_pdf(t, peak) - ratio * gamma_pdf(t, under);
  }
  return h / h.maxCoeff();
}

void check_change_points(const std::vector<std::size_t>& cps, std::size_t T) {
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (cps[i] < 1 || cps[i] > T) throw ArgumentError("change point outside [1, T]");
    if (i > 0 && cps[i] <= cps[i - 1]) throw ArgumentError("change points must be strictly increasing");
  }
}

}  // namespace

Eigen::VectorXd canonical_hrf(double dt, double duration) {
  return double_gamma(dt, sample_count(dt, duration), 6.0, 16.0, 1.0 / 6.0);
}

BasisSet canonical_basis(double dt, double duration) {
  return BasisSet{canonical_hrf(dt, duration), dt, BasisKind::canonical};
}

BasisSet flobs_like_basis(double dt, double duration) {
  const Eigen::Index n = sample_count(dt, duration);
  std::vector<Eigen::VectorXd> family;
  for (double peak = 4.5; peak <= 7.5 + 1e-9; peak += 0.5)
    for (double under = 12.0; under <= 20.0 + 1e-9; under += 2.0)
      for (double ratio : {1.0 / 3.0, 1.0 / 6.0, 1.0 / 9.0}) family.push_back(double_gamma(dt, n, peak, under, ratio));
  Eigen::MatrixXd F(n, static_cast<Eigen::Index>(family.size()));
  for (std::size_t j = 0; j < family.size(); ++j) F.col(static_cast<Eigen::Index>(j)) = family[j];

  Eigen::BDCSVD<Eigen::MatrixXd> svd(F, Eigen::ComputeThinU);
  Eigen::MatrixXd Q = svd.matrixU().leftCols(3);
  const Eigen::VectorXd h = canonical_hrf(dt, duration);
  const Eigen::Vector3d beta(3.2, -6.4, 3.2);
  Eigen::Vector3d a = Q.transpose() * h;
  // Orient each component so beta'a > 0, which keeps the mixing matrix invertible.
  for (int g = 0; g < 3; ++g) {
    if (a[g] * beta[g] < 0) {
      Q.col(g) *= -1.0;
      a[g] = -a[g];
    }
  }
  // M maps beta onto a, so Q * M * beta = Q * a (projection of the canonical HRF).
  const Eigen::Matrix3d M = Eigen::Matrix3d::Identity() + (a - beta) * beta.transpose() / beta.squaredNorm();
  return BasisSet{Q * M, dt, BasisKind::flobs_like};
}

BasisSet load_basis(const std::filesystem::path& path, double dt) {
  if (!(dt > 0)) throw ArgumentError("basis resolution dt must be positive");
  BasisSet b{read_matrix_csv(path), dt, BasisKind::loaded};
  if (!b.functions.allFinite()) throw DataError("basis file " + path.string() + " contains non-finite cells");
  b.validate();
  return b;
}

std::vector<OnsetSeries> split_onsets(const OnsetSeries& onsets, const std::vector<std::size_t>& cps) {
  const std::size_t T = onsets.length();
  check_change_points(cps, T);
  std::vector<OnsetSeries> out;
  std::size_t start = 1;
  for (std::size_t c = 0; c <= cps.size(); ++c) {
    const std::size_t stop = c < cps.size() ? cps[c] - 1 : T;
    out.push_back(onsets.restricted(start, stop));
    if (c < cps.size()) start = cps[c];
  }
  return out;
}

Eigen::VectorXd convolve_onsets(const OnsetSeries& onsets, const Eigen::Ref<const Eigen::VectorXd>& b, double dt,
                                double tr) {
  if (!(dt > 0) || !(tr > 0)) throw ArgumentError("dt and TR must be positive");
  const auto T = static_cast<Eigen::Index>(onsets.length());
  const double last = static_cast<double>(b.size() - 1);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(T);
  // Kernel sampled at lags 0, tr, 2tr, ... once, then shifted per onset.
  std::vector<double> kernel;
  for (Eigen::Index lag = 0; lag < T; ++lag) {
    double x = static_cast<double>(lag) * tr / dt;
    if (std::fabs(x - std::round(x)) < 1e-9) x = std::round(x);
    if (x > last) break;
    const auto i = static_cast<Eigen::Index>(std::floor(x));
    const double f = x - static_cast<double>(i);
    kernel.push_back(f == 0.0 ? b[i] : (1 - f) * b[i] + f * b[i + 1]);
  }
  const auto& u = onsets.indicator();
  for (Eigen::Index s = 0; s < T; ++s) {
    if (!u[static_cast<std::size_t>(s)]) continue;
    const Eigen::Index len = std::min<Eigen::Index>(static_cast<Eigen::Index>(kernel.size()), T - s);
    for (Eigen::Index k = 0; k < len; ++k) out[s + k] += kernel[static_cast<std::size_t>(k)];
  }
  return out;
}

DesignMatrix build_design(const std::vector<OnsetSeries>& onsets, const BasisSet& basis, const ChangePointSet& cps,
                          const Eigen::MatrixXd& confounds, ModelKind kind, const DesignOptions& options) {
  if (onsets.empty()) throw ArgumentError("design needs at least one condition");
  basis.validate();
  const std::size_t T = onsets.front().length();
  std::set<std::string> names;
  for (const auto& u : onsets) {
    if (u.length() != T) throw ArgumentError("onset series differ in length");
    if (!names.insert(u.condition()).second) throw ArgumentError("duplicate condition '" + u.condition() + "'");
  }
  for (const auto& [cond, pts] : cps.points) {
    if (!names.count(cond)) throw ArgumentError("change points given for unknown condition '" + cond + "'");
    if (kind == ModelKind::stationary && !pts.empty())
      throw ArgumentError("stationary design cannot have change points");
  }
  if (kind == ModelKind::cumulative && basis.count() != 1)
    throw ArgumentError("cumulative design requires a single basis function");
  if (confounds.size() > 0 && confounds.rows() != static_cast<Eigen::Index>(T))
    throw ArgumentError("confound matrix has wrong number of rows");

  std::vector<Eigen::VectorXd> cols;
  DesignMatrix d;
  d.kind = kind;
  for (const auto& u : onsets) {
    auto it = cps.points.find(u.condition());
    const std::vector<std::size_t> psi = it == cps.points.end() ? std::vector<std::size_t>{} : it->second;
    check_change_points(psi, T);
    std::vector<OnsetSeries> series;
    if (kind == ModelKind::cumulative) {
      series.push_back(u);
      for (auto p : psi) series.push_back(u.restricted(p, T));
    } else {
      series = split_onsets(u, psi);
    }
    for (std::size_t c = 0; c < series.size(); ++c) {
      for (Eigen::Index g = 0; g < basis.count(); ++g) {
        cols.push_back(convolve_onsets(series[c], basis.functions.col(g), basis.dt, options.tr));
        d.columns.push_back({ColumnTag::Role::response, u.condition(), static_cast<int>(c), static_cast<int>(g), -1});
      }
    }
  }
  if (options.intercept) {
    cols.push_back(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(T)));
    d.columns.push_back({ColumnTag::Role::intercept, "", 0, 0, -1});
  }
  for (Eigen::Index j = 0; j < confounds.cols(); ++j) {
    cols.push_back(confounds.col(j));
    d.columns.push_back({ColumnTag::Role::confound, "", 0, 0, static_cast<int>(j)});
  }
  d.X.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) d.X.col(static_cast<Eigen::Index>(j)) = cols[j];

  if (options.check_rank) {
    if (d.X.cols() >= d.X.rows()) throw DataError("design has at least as many columns as scans");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
    qr.setThreshold(1e-10);
    if (qr.rank() < d.X.cols())
      throw DataError("design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                      std::to_string(d.X.cols()) + " columns)");
  }
  return d;
}

}  // namespace hrshift
