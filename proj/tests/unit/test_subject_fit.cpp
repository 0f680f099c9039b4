#include <doctest.h>

#include "helpers.hpp"
#include "hrshift/error.hpp"
#include "hrshift/hemo_design.hpp"
#include "hrshift/simulate.hpp"
#include "hrshift/subject_fit.hpp"

using namespace hrshift;

namespace {

struct Toy {
  BasisSet basis = flobs_like_basis(0.2, 32);
  std::vector<OnsetSeries> onsets;
  DesignMatrix design;
};

Toy toy_design(std::size_t T = 200) {
  Toy t;
  Rng rng(77);
  t.onsets = random_onsets(T, 1, 40, {3, 4, 5}, rng);
  t.design = build_design(t.onsets, t.basis, {}, {}, ModelKind::stationary, {2.0, true, true});
  return t;
}

}  // namespace

TEST_SUITE("subject_fit") {
  TEST_CASE("noiseless data recover the generating coefficients") {
    const auto t = toy_design();
    const Eigen::Vector4d beta(3.2, -6.4, 3.2, 10.0);
    const Eigen::VectorXd y = t.design.X * beta;
    for (const NoiseChoice& n : {NoiseChoice{NoiseSpec::white()}, NoiseChoice{NoiseSpec::ar1(0.3)}}) {
      const auto fit = fit_gls(y, t.design, n);
      CHECK((fit.beta - beta).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }

  TEST_CASE("rho = 0 is ordinary least squares") {
    const auto t = toy_design();
    std::mt19937_64 rng(4);
    const Eigen::VectorXd y = testing::gaussian(t.design.X.rows(), rng);
    const auto a = fit_gls(y, t.design, NoiseSpec::ar1(0.0));
    const Eigen::VectorXd ols = t.design.X.colPivHouseholderQr().solve(y);
    CHECK((a.beta - ols).cwiseAbs().maxCoeff() <= 1e-10);
    const auto w = fit_gls(y, t.design, NoiseSpec::white());
    CHECK(a.loglik == doctest::Approx(w.loglik));
    CHECK(a.dof == t.design.X.rows() - 4);
  }

  TEST_CASE("coefficients are unbiased under pure noise") {
    const auto t = toy_design();
    const Eigen::Index T = t.design.X.rows();
    std::mt19937_64 rng(99);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(4), sumsq = Eigen::VectorXd::Zero(4);
    const int R = 1000;
    for (int r = 0; r < R; ++r) {
      const auto fit = fit_gls(testing::gaussian(T, rng), t.design, NoiseSpec::white(1.0, true));
      sum += fit.beta;
      sumsq += fit.beta.cwiseProduct(fit.beta);
    }
    const Eigen::VectorXd m = sum / R;
    const Eigen::VectorXd se = ((sumsq / R - m.cwiseProduct(m)) / R).cwiseSqrt();
    for (int j = 0; j < 4; ++j) CHECK(std::fabs(m[j]) <= 4 * se[j]);
  }

  TEST_CASE("estimated AR noise and known variance") {
    const auto t = toy_design(400);
    Rng rng(8);
    std::normal_distribution<double> z;
    Eigen::VectorXd e(t.design.X.rows());
    for (auto& v : e) v = z(rng);
    const Eigen::VectorXd y = t.design.X * Eigen::Vector4d(3.2, -6.4, 3.2, 0) + Whitener(NoiseSpec::ar1(0.4), e.size()).unapply(e);
    const auto fit = fit_gls(y, t.design, EstimateNoise{1});
    CHECK(fit.noise.order == 1);
    CHECK(fit.noise.rho() == doctest::Approx(0.4).epsilon(0.5));
    const auto known = fit_gls(y, t.design, NoiseSpec::ar1(0.4, 2.5, true));
    CHECK(known.sigma2 == 2.5);
    CHECK_THROWS_AS(fit_gls(y.head(10), t.design, NoiseSpec::white()), ArgumentError);
  }

  TEST_CASE("estimated response curve") {
    const auto t = toy_design();
    std::mt19937_64 rng(5);
    auto fit = fit_gls(testing::gaussian(t.design.X.rows(), rng), t.design, NoiseSpec::white());
    fit.beta.head(3) = Eigen::Vector3d(1, 0, 0);
    CHECK((estimate_hr(fit, t.basis, "c1", 0) - t.basis.functions.col(0)).norm() == 0.0);
    fit.beta.head(3) = Eigen::Vector3d(0.3, -0.2, 0.7);
    const Eigen::VectorXd h1 = estimate_hr(fit, t.basis, "c1", 0);
    fit.beta.head(3) *= 2;
    CHECK((estimate_hr(fit, t.basis, "c1", 0) - 2 * h1).norm() <= 1e-12);
    CHECK_THROWS(estimate_hr(fit, t.basis, "nope", 0));
  }

  TEST_CASE("shape parameters of a triangle") {
    Eigen::VectorXd h(101);
    for (int i = 0; i <= 100; ++i) h[i] = 1.0 - std::fabs(i * 0.1 - 5.0) / 5.0;
    const auto s = shape_params(h, 0.1);
    CHECK(s[ShapeParam::pm] == doctest::Approx(1.0));
    CHECK(s[ShapeParam::ttp] == doctest::Approx(5.0));
    CHECK(s[ShapeParam::fwhm] == doctest::Approx(5.0));
    CHECK(s[ShapeParam::auc] == doctest::Approx(5.0));
    CHECK_FALSE(s.is_valid(ShapeParam::na));
    CHECK_FALSE(s.is_valid(ShapeParam::fwhn));
  }

  TEST_CASE("shape parameters scale with the curve") {
    const auto h = canonical_hrf(0.1, 32);
    const auto a = shape_params(h, 0.1), b = shape_params(2 * h, 0.1);
    CHECK(b[ShapeParam::pm] == doctest::Approx(2 * a[ShapeParam::pm]));
    CHECK(b[ShapeParam::auc] == doctest::Approx(2 * a[ShapeParam::auc]));
    CHECK(b[ShapeParam::na] == doctest::Approx(2 * a[ShapeParam::na]));
    CHECK(b[ShapeParam::ttp] == a[ShapeParam::ttp]);
    CHECK(b[ShapeParam::fwhm] == doctest::Approx(a[ShapeParam::fwhm]));
    CHECK(b[ShapeParam::tpn] == a[ShapeParam::tpn]);
  }

  TEST_CASE("shape parameters of the canonical HRF") {
    // Oracle values from a dense evaluation of the double-gamma.
    const auto a = shape_params(canonical_hrf(0.1, 32), 0.1);
    CHECK(a[ShapeParam::pm] == doctest::Approx(1.0));
    CHECK(a[ShapeParam::ttp] == doctest::Approx(5.0));
    CHECK(a[ShapeParam::na] == doctest::Approx(-0.0889).epsilon(1e-3));
    CHECK(a[ShapeParam::tpn] == doctest::Approx(10.7));
    CHECK(a[ShapeParam::fwhm] == doctest::Approx(5.259754).epsilon(1e-6));
    CHECK(a[ShapeParam::fwhn] == doctest::Approx(7.356883).epsilon(1e-6));
    CHECK(a[ShapeParam::auc] == doctest::Approx(4.750593).epsilon(1e-6));
    const auto f = shape_params(canonical_hrf(0.01, 32), 0.01);
    CHECK(f[ShapeParam::ttp] == doctest::Approx(5.0));
    CHECK(f[ShapeParam::na] == doctest::Approx(-0.088911).epsilon(1e-5));
    CHECK(f[ShapeParam::tpn] == doctest::Approx(10.75));
    CHECK(f[ShapeParam::fwhm] == doctest::Approx(5.259611).epsilon(1e-6));
    CHECK(f[ShapeParam::fwhn] == doctest::Approx(7.35634).epsilon(1e-6));
    CHECK(f[ShapeParam::auc] == doctest::Approx(4.750561).epsilon(1e-6));
  }

  TEST_CASE("flat curves have no valid shape parameter") {
    const auto s = shape_params(Eigen::VectorXd::Zero(50), 0.1);
    for (auto p : kShapeParams) CHECK_FALSE(s.is_valid(p));
  }

  TEST_CASE("shape parameter names round trip") {
    for (auto p : kShapeParams) CHECK(shape_from_name(shape_name(p)) == p);
    CHECK_THROWS(shape_from_name("peak"));
  }

  TEST_CASE("Monte-Carlo variance") {
    const auto t = toy_design();
    std::mt19937_64 g(21);
    const Eigen::VectorXd y = t.design.X * Eigen::Vector4d(3.2, -6.4, 3.2, 1.0) + testing::gaussian(t.design.X.rows(), g);
    auto fit = fit_gls(y, t.design, NoiseSpec::white());
    Rng rng(3);
    const auto s = mc_shape_variance(fit, t.basis, "c1", 0, 10000, rng);
    // AUC is linear in the block: auc = w' beta.
    const auto& B = t.basis.functions;
    const Eigen::VectorXd w =
        t.basis.dt * (B.colwise().sum() - 0.5 * (B.row(0) + B.row(B.rows() - 1))).transpose();
    const double analytic = w.dot(fit.cov.topLeftCorner(3, 3) * w);
    CHECK(s.var(ShapeParam::auc) == doctest::Approx(analytic).epsilon(0.05));
    CHECK(s[ShapeParam::auc] == doctest::Approx(w.dot(fit.beta.head(3))));

    fit.cov.setZero();
    Rng rng2(3);
    const auto z = mc_shape_variance(fit, t.basis, "c1", 0, 200, rng2);
    for (auto p : kShapeParams)
      if (z.is_valid(p)) CHECK(z.var(p) == 0.0);
    CHECK_THROWS_AS(mc_shape_variance(fit, t.basis, "c1", 0, 50, rng2), ArgumentError);
  }

  TEST_CASE("psd factor") {
    Eigen::Matrix2d S;
    S << 2, 1, 1, 2;
    const auto L = psd_factor(S);
    CHECK(testing::max_abs(L * L.transpose() - S) <= 1e-12);
    S << 1, 2, 2, 1;
    CHECK_THROWS_AS(psd_factor(S), DataError);
  }
}
