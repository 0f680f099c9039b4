#include "hrshift/posi.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>

#include "hrshift/error.hpp"
#include "hrshift/parallel.hpp"
#include "hrshift/stats.hpp"
#include "hrshift/subject_fit.hpp"

namespace hrshift {

Eigen::MatrixXd lead_shift(Eigen::Index T) {
  if (T < 2) throw ArgumentError("shift operators need T >= 2");
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(T - 1, T);
  for (Eigen::Index i = 0; i + 1 < T; ++i) G(i, i + 1) = 1.0;
  return G;
}

Eigen::MatrixXd lag_shift(Eigen::Index T) {
  if (T < 2) throw ArgumentError("shift operators need T >= 2");
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(T - 1, T);
  for (Eigen::Index i = 0; i + 1 < T; ++i) G(i, i) = 1.0;
  return G;
}

Eigen::MatrixXd boundary_selector(Eigen::Index T) {
  if (T < 2) throw ArgumentError("boundary selector needs T >= 2");
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(2, T);
  G(0, 0) = 1.0;
  G(1, T - 1) = 1.0;
  return G;
}

NaturalParams natural_params(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                             const Eigen::Ref<const Eigen::VectorXd>& zeta, double sigma2, double rho) {
  const Eigen::Index T = X.rows(), p = X.cols();
  if (y.size() != T || zeta.size() != p) throw ArgumentError("natural parameters: dimension mismatch");
  if (!(sigma2 > 0)) throw ArgumentError("natural parameters: sigma2 must be positive");
  if (!(std::fabs(rho) < 1.0)) throw ArgumentError("natural parameters: rho^2 must be below 1");
  const Eigen::MatrixXd G = lead_shift(T), Gt = lag_shift(T), Gb = boundary_selector(T);
  const double r = rho / (rho * rho - 1.0);
  const double r2 = rho * rho / (rho * rho - 1.0);

  NaturalParams n;
  n.p = p;
  n.lambda.resize(3 * p + 3);
  n.lambda << zeta / sigma2, r * zeta / sigma2, -r2 * zeta / sigma2, -0.5 / sigma2, -r / sigma2, 0.5 * r2 / sigma2;

  const Eigen::VectorXd Gy = G * y, Gty = Gt * y, Gby = Gb * y;
  n.w.resize(3 * p + 3);
  n.w << X.transpose() * y, (Gt * X).transpose() * Gy + (G * X).transpose() * Gty,
      2.0 * X.transpose() * y - (Gb * X).transpose() * Gby, y.squaredNorm(), Gty.dot(Gy),
      2.0 * y.squaredNorm() - Gby.squaredNorm();

  const Eigen::VectorXd mu = X * zeta;
  const Eigen::VectorXd wmu = Whitener(NoiseSpec::ar1(rho), T).apply(mu);
  n.kappa = 0.5 / sigma2 * wmu.squaredNorm() +
            0.5 * (static_cast<double>(T) * std::log(sigma2) + ar1_log_det(rho, T)) +
            0.5 * static_cast<double>(T) * std::log(2.0 * std::numbers::pi);
  return n;
}

double ar1_gaussian_log_density(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                                const Eigen::Ref<const Eigen::VectorXd>& zeta, double sigma2, double rho) {
  const Eigen::Index T = y.size();
  const Eigen::MatrixXd S = sigma2 * ar1_covariance(rho, T);
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw DataError("covariance is not positive definite");
  const Eigen::VectorXd r = llt.matrixL().solve(y - X * zeta);
  const double logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * (r.squaredNorm() + logdet + static_cast<double>(T) * std::log(2.0 * std::numbers::pi));
}

namespace {

bool same_column(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a.array() == b.array()).all(); }

}  // namespace

PosiProblem make_posi_problem(const Eigen::Ref<const Eigen::VectorXd>& y, const CandidateModels& models,
                              std::size_t selected, const FocusSpec& focus, bool variance_known) {
  if (selected >= models.size()) throw ArgumentError("selected model index out of range");
  if (focus.change < 1) throw ArgumentError("focus must be a change coefficient (index >= 1)");
  if (variance_known && !models.noise().known) throw ArgumentError("known-variance inference needs a known sigma2");
  if (!variance_known && models.noise().known) throw ArgumentError("unknown-variance inference needs a profiled noise model");
  const Eigen::Index T = models.scans();
  if (y.size() != T) throw ArgumentError("signal length differs from design rows");

  PosiProblem pr{models};
  pr.selected = selected;
  pr.focus = focus;
  pr.variance_known = variance_known;
  const DesignMatrix& design = models.design(selected);
  pr.focus_column = design.column(focus.condition, focus.change);

  const SubjectGLMFit fit = fit_gls(y, design, models.noise());
  pr.sigma2 = variance_known ? models.noise().sigma2 : fit.sigma2;
  pr.theta_ols = fit.beta[pr.focus_column];
  pr.se_naive = std::sqrt(fit.cov(pr.focus_column, pr.focus_column));

  // Conditioning columns: every other column of every candidate, deduplicated.
  const Eigen::VectorXd xf_raw = design.X.col(pr.focus_column);
  std::vector<Eigen::VectorXd> raw, white;
  auto consider = [&](std::size_t model, Eigen::Index j) {
    const Eigen::VectorXd c = models.design(model).X.col(j);
    if (same_column(c, xf_raw)) return;
    for (const auto& r : raw)
      if (same_column(r, c)) return;
    raw.push_back(c);
    white.push_back(models.whitened(model).col(j));
  };
  for (Eigen::Index j = 0; j < design.X.cols(); ++j)
    if (j != pr.focus_column) consider(selected, j);
  for (std::size_t m = 0; m < models.size(); ++m)
    if (m != selected)
      for (Eigen::Index j = 0; j < models.design(m).X.cols(); ++j) consider(m, j);

  pr.A.resize(T, static_cast<Eigen::Index>(white.size()));
  for (std::size_t j = 0; j < white.size(); ++j) pr.A.col(static_cast<Eigen::Index>(j)) = white[j];
  Eigen::Index rank = 0;
  if (pr.A.cols() > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(pr.A);
    qr.setThreshold(1e-10);
    rank = qr.rank();
    pr.QA = Eigen::MatrixXd(qr.householderQ()).leftCols(rank);
  } else {
    pr.QA.resize(T, 0);
  }
  pr.dim = T - rank;
  if (pr.dim < 3) throw DataError("too few residual degrees of freedom for conditional sampling");

  pr.y_obs = y;
  pr.z_obs = models.whitener().apply(y);
  pr.zz_obs = pr.z_obs.squaredNorm();
  pr.a_obs = pr.A.transpose() * pr.z_obs;
  pr.z_fixed = pr.QA * (pr.QA.transpose() * pr.z_obs);
  pr.xf = models.whitened(selected).col(pr.focus_column);
  const Eigen::VectorXd xt = pr.xf - pr.QA * (pr.QA.transpose() * pr.xf);
  pr.xperp_norm = xt.norm();
  if (pr.xperp_norm <= 1e-8 * pr.xf.norm())
    throw DataError("focus statistic is determined by the conditioning statistics");
  pr.u = xt / pr.xperp_norm;
  pr.radius = std::sqrt(std::max(0.0, (pr.z_obs - pr.z_fixed).squaredNorm()));
  if (!(pr.radius > 0)) throw DataError("observed data lie in the conditioning span");
  pr.c0 = pr.xf.dot(pr.z_fixed);
  pr.w_obs = pr.xf.dot(pr.z_obs);
  pr.t_obs = pr.u.dot(pr.z_obs - pr.z_fixed) / pr.radius;
  pr.se_conditional = std::sqrt(pr.sigma2) / pr.xperp_norm;

  Eigen::HouseholderQR<Eigen::MatrixXd> qx(design.X);
  pr.residual_obs = y - design.X * qx.solve(Eigen::VectorXd(y));
  pr.focus_raw = xf_raw.dot(y);
  return pr;
}

double sample_vmf_cosine(double kappa, Eigen::Index dim, Rng& rng) {
  if (dim < 2) throw ArgumentError("von Mises-Fisher sampling needs dimension >= 2");
  const double sign = kappa < 0 ? -1.0 : 1.0;
  const double k = std::fabs(kappa);
  const double m1 = static_cast<double>(dim - 1);
  // Wood (1994) rejection sampler with a symmetric beta proposal.
  const double b = m1 / (2.0 * k + std::sqrt(4.0 * k * k + m1 * m1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = k * x0 + m1 * std::log1p(-x0 * x0);
  std::gamma_distribution<double> gamma(m1 / 2.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (;;) {
    const double g1 = gamma(rng), g2 = gamma(rng);
    const double z = g1 / (g1 + g2);
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double un = unif(rng);
    if (k * w + m1 * std::log1p(-x0 * w) - c >= std::log(un)) return sign * std::clamp(w, -1.0, 1.0);
  }
}

namespace {

SamplerResult run_sampler(const PosiProblem& pr, double theta, std::size_t target, std::size_t max_attempts, Rng& rng,
                          const PosiOptions& opt) {
  const Eigen::Index T = pr.z_obs.size();
  const double kappa = pr.kappa(theta);
  const Whitener& W = pr.models.whitener();
  Eigen::VectorXd col_scale(pr.A.cols());
  for (Eigen::Index j = 0; j < pr.A.cols(); ++j) col_scale[j] = pr.A.col(j).norm() * std::sqrt(pr.zz_obs);
  const double s2 = pr.radius * pr.radius;

  std::normal_distribution<double> normal;
  SamplerResult r;
  Eigen::VectorXd g(T), z(T), y(T), z2(T);
  while (r.attempts < max_attempts && r.accepted < target) {
    ++r.attempts;
    const double t = sample_vmf_cosine(kappa, pr.dim, rng);
    for (Eigen::Index i = 0; i < T; ++i) g[i] = normal(rng);
    if (pr.QA.cols() > 0) g.noalias() -= pr.QA * (pr.QA.transpose() * g);
    g -= pr.u.dot(g) * pr.u;
    const double gn = g.norm();
    if (!(gn > 0)) continue;
    z = pr.z_fixed + pr.radius * (t * pr.u + std::sqrt(std::max(0.0, 1.0 - t * t)) / gn * g);
    y = W.unapply(z);
    z2 = W.apply(y);

    const double zz = z2.squaredNorm();
    double err = std::fabs(zz - pr.zz_obs) / pr.zz_obs;
    if (pr.A.cols() > 0) {
      const Eigen::VectorXd a = pr.A.transpose() * z2;
      err = std::max(err, ((a - pr.a_obs).cwiseAbs().array() / col_scale.array()).maxCoeff());
    }
    if (!pr.variance_known) {
      const double resid = zz - (pr.QA.cols() > 0 ? (pr.QA.transpose() * z2).squaredNorm() : 0.0);
      err = std::max(err, std::fabs(resid - s2) / pr.zz_obs);
    }
    if (err > opt.audit_tolerance) {
      ++r.audit_failures;
      continue;
    }
    r.max_audit_error = std::max(r.max_audit_error, err);

    const double best = pr.models.loglik_whitened(pr.selected, z2, zz);
    bool wins = true;
    for (std::size_t m = 0; m < pr.models.size() && wins; ++m)
      if (m != pr.selected && pr.models.loglik_whitened(m, z2, zz) >= best) wins = false;
    if (!wins) continue;
    ++r.accepted;
    r.focus_stats.push_back(pr.xf.dot(z2));
  }
  r.acceptance_rate = r.attempts ? static_cast<double>(r.accepted) / static_cast<double>(r.attempts) : 0.0;
  r.infeasible = r.accepted == 0 || r.acceptance_rate < opt.min_acceptance;
  return r;
}

std::uint64_t theta_key(double theta) { return std::bit_cast<std::uint64_t>(theta == 0.0 ? 0.0 : theta); }

}  // namespace

SamplerResult conditional_sampler(const PosiProblem& problem, double theta, std::size_t D, Rng& rng,
                                  const PosiOptions& options) {
  if (D == 0) throw ArgumentError("sampler needs D > 0");
  return run_sampler(problem, theta, D, options.max_attempt_factor * D, rng, options);
}

SamplerResult sample_attempts(const PosiProblem& problem, double theta, std::size_t attempts, Rng& rng,
                              const PosiOptions& options) {
  if (attempts == 0) throw ArgumentError("sampler needs at least one attempt");
  return run_sampler(problem, theta, attempts, attempts, rng, options);
}

std::vector<const CdPoint*> ConfidenceDistributionEstimate::feasible() const {
  std::vector<const CdPoint*> out;
  for (const auto& p : points)
    if (p.feasible) out.push_back(&p);
  return out;
}

namespace {

struct MassSummary {
  double mean = 0, variance = 0, median = 0;
};

// Discrete distribution with P(theta <= theta_e) = C_e; the remainder 1 - C_E sits on theta_E.
MassSummary summarize(const std::vector<const CdPoint*>& f) {
  MassSummary s;
  std::vector<double> mass(f.size());
  double prev = 0.0;
  for (std::size_t e = 0; e < f.size(); ++e) {
    mass[e] = f[e]->cd_clean - prev;
    prev = f[e]->cd_clean;
  }
  mass.back() += 1.0 - prev;
  for (std::size_t e = 0; e < f.size(); ++e) s.mean += mass[e] * f[e]->theta;
  for (std::size_t e = 0; e < f.size(); ++e) s.variance += mass[e] * (f[e]->theta - s.mean) * (f[e]->theta - s.mean);
  s.median = f.back()->theta;
  if (f.front()->cd_clean >= 0.5) {
    s.median = f.front()->theta;
  } else {
    for (std::size_t e = 1; e < f.size(); ++e) {
      if (f[e]->cd_clean >= 0.5) {
        const double lo = f[e - 1]->cd_clean, hi = f[e]->cd_clean;
        const double frac = (0.5 - lo) / (hi - lo);
        s.median = f[e - 1]->theta + frac * (f[e]->theta - f[e - 1]->theta);
        break;
      }
    }
  }
  return s;
}

}  // namespace

ConfidenceDistributionEstimate approx_cd(const PosiProblem& problem, const std::vector<double>& grid, std::size_t D,
                                         std::uint64_t seed, const PosiOptions& options) {
  if (grid.empty()) throw ArgumentError("CD grid is empty");
  if (D == 0) throw ArgumentError("CD estimation needs D > 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ArgumentError("CD grid must be strictly increasing");

  ConfidenceDistributionEstimate cd;
  cd.D = D;
  cd.ols = problem.theta_ols;
  cd.points.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    Rng rng = make_rng(seed, {stream_id("posi-grid"), theta_key(grid[i])});
    const SamplerResult s = conditional_sampler(problem, grid[i], D, rng, options);
    CdPoint& p = cd.points[i];
    p.theta = grid[i];
    p.accepted = s.accepted;
    p.attempts = s.attempts;
    p.acceptance = s.acceptance_rate;
    p.max_audit_error = s.max_audit_error;
    p.feasible = !s.infeasible;
    if (s.accepted > 0) {
      const auto above = std::count_if(s.focus_stats.begin(), s.focus_stats.end(),
                                       [&](double w) { return w > problem.w_obs; });
      p.cd = static_cast<double>(above) / static_cast<double>(s.accepted);
    }
  });

  std::vector<double> raw, weight;
  for (const auto& p : cd.points) {
    if (!p.feasible) continue;
    raw.push_back(p.cd);
    weight.push_back(static_cast<double>(p.accepted));
  }
  if (raw.empty()) {
    cd.failed = true;
    cd.failure_reason = "all grid points infeasible";
    return cd;
  }
  const auto clean = isotonic_increasing(raw, weight);
  std::size_t k = 0;
  for (auto& p : cd.points) {
    if (!p.feasible) continue;
    p.cd_clean = clean[k];
    cd.max_violation = std::max(cd.max_violation, std::fabs(raw[k] - clean[k]));
    ++k;
  }
  const auto f = cd.feasible();
  if (f.size() == 1) {
    cd.mean = cd.median = f.front()->theta;
    cd.variance = 0.0;
    return cd;
  }
  try {
    cd.variance = posi_variance(cd);
  } catch (const Error& e) {
    cd.failed = true;
    cd.failure_reason = e.what();
  }
  const MassSummary m = summarize(f);
  cd.mean = m.mean;
  cd.median = m.median;
  return cd;
}

double posi_variance(const ConfidenceDistributionEstimate& cd) {
  if (cd.failed) throw ArgumentError("confidence distribution estimate has failed");
  const auto f = cd.feasible();
  if (f.size() < 2) throw ArgumentError("posi variance needs at least two feasible grid points");
  if (cd.max_violation > 0.05) throw DataError("estimated CD is non-monotone beyond tolerance");
  if (f.front()->cd_clean == f.back()->cd_clean) throw DataError("estimated CD is constant over the grid");
  return summarize(f).variance;
}

BoundsResult bounds_search(const PosiProblem& problem, double start, double a, std::size_t DE,
                           const BoundsOptions& opt, std::uint64_t seed, const PosiOptions& options) {
  if (DE == 0) throw ArgumentError("bounds search needs D_E > 0");
  if (!(a > 0)) throw ArgumentError("bounds search step must be positive");
  BoundsResult out;
  std::map<long, bool> feasible;
  auto theta = [&](long k) { return start + static_cast<double>(k) * a; };
  auto check = [&](long k) {
    auto it = feasible.find(k);
    if (it != feasible.end()) return it->second;
    Rng rng = make_rng(seed, {stream_id("posi-bounds"), theta_key(theta(k))});
    const bool ok = sample_attempts(problem, theta(k), DE, rng, options).accepted > 0;
    out.evaluated.emplace_back(theta(k), ok);
    return feasible[k] = ok;
  };

  long lo = -1, hi = 1;
  long kept_lo = 0, kept_hi = 0;
  std::vector<long> prev;
  for (;;) {
    std::vector<long> kept;
    for (long k = lo; k <= hi; ++k)
      if (check(k)) kept.push_back(k);
    if (kept.empty()) {
      out.failed = true;
      return out;
    }
    kept_lo = kept.front();
    kept_hi = kept.back();
    out.lower = theta(kept_lo);
    out.upper = theta(kept_hi);
    if (kept == prev) break;
    const long next_lo = kept_lo == lo ? lo - 1 : kept_lo;
    const long next_hi = kept_hi == hi ? hi + 1 : kept_hi;
    if (next_lo == kept_lo && next_hi == kept_hi) break;
    if (out.rounds >= opt.max_rounds || out.upper - out.lower >= opt.min_width) break;
    ++out.rounds;
    prev = std::move(kept);
    lo = next_lo;
    hi = next_hi;
  }
  return out;
}

PosiResult run_posi(const PosiProblem& problem, const PosiRunOptions& o, std::uint64_t seed) {
  PosiResult r;
  const double se = problem.se_conditional;
  const double a = o.a > 0 ? o.a : o.step_factor * se;
  const BoundsOptions bo{o.max_rounds, o.width_factor * se};
  r.bounds = bounds_search(problem, problem.theta_ols, a, o.DE, bo, derive_seed(seed, {stream_id("bounds")}), o.sampler);
  if (r.bounds.failed) {
    std::vector<double> coarse;
    for (int k = -5; k <= 5; ++k) coarse.push_back(problem.theta_ols + k * a);
    const auto pre = approx_cd(problem, coarse, 50, derive_seed(seed, {stream_id("coarse")}), o.sampler);
    if (!pre.feasible().empty()) {
      r.fallback_used = true;
      const double restart = pre.feasible().size() > 1 ? pre.median : pre.feasible().front()->theta;
      r.bounds = bounds_search(problem, restart, a, o.DE, bo, derive_seed(seed, {stream_id("bounds-retry")}), o.sampler);
    }
  }
  if (r.bounds.failed) {
    r.failed = true;
    r.failure_reason = "no feasible coefficient found around the estimate";
    return r;
  }
  const double step = a / o.grid_divisions;
  const auto n = static_cast<long>(std::llround((r.bounds.upper - r.bounds.lower) / step));
  std::vector<double> grid;
  for (long i = 0; i <= n; ++i) grid.push_back(r.bounds.lower + static_cast<double>(i) * step);
  r.cd = approx_cd(problem, grid, o.D, derive_seed(seed, {stream_id("cd")}), o.sampler);
  if (r.cd.failed) {
    r.failed = true;
    r.failure_reason = r.cd.failure_reason;
    return r;
  }
  r.variance = r.cd.variance;
  return r;
}

nlohmann::json to_json(const ConfidenceDistributionEstimate& cd) {
  nlohmann::json j;
  for (const auto& p : cd.points) {
    j["grid"].push_back(p.theta);
    j["cd"].push_back(p.feasible ? nlohmann::json(p.cd) : nlohmann::json());
    j["cd_clean"].push_back(p.feasible ? nlohmann::json(p.cd_clean) : nlohmann::json());
    j["accepted"].push_back(p.accepted);
    j["attempts"].push_back(p.attempts);
    j["acceptance_rate"].push_back(p.acceptance);
    j["feasible"].push_back(p.feasible);
  }
  j["D"] = cd.D;
  j["max_violation"] = cd.max_violation;
  j["variance"] = cd.variance;
  j["estimates"] = {{"median", cd.median}, {"mean", cd.mean}, {"ols", cd.ols}};
  j["failed"] = cd.failed;
  j["failure_reason"] = cd.failure_reason;
  return j;
}

nlohmann::json to_json(const PosiResult& r) {
  nlohmann::json j;
  j["cd"] = to_json(r.cd);
  j["bounds"] = {{"lower", r.bounds.lower}, {"upper", r.bounds.upper}, {"rounds", r.bounds.rounds},
                 {"failed", r.bounds.failed}};
  j["fallback_used"] = r.fallback_used;
  j["failed"] = r.failed;
  j["failure_reason"] = r.failure_reason;
  j["variance"] = r.variance;
  return j;
}

}  // namespace hrshift
