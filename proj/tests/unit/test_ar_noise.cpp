#include <doctest.h>

#include "helpers.hpp"
#include "hrshift/ar_noise.hpp"
#include "hrshift/error.hpp"

using namespace hrshift;

TEST_SUITE("ar_noise") {
  TEST_CASE("AR(1) correlation matrix") {
    CHECK(testing::max_abs(ar1_covariance(0.0, 5) - Eigen::MatrixXd::Identity(5, 5)) == 0.0);
    CHECK(ar1_covariance(0.5, 3)(0, 2) == doctest::Approx(0.25));
    const auto V = ar1_covariance(0.2, 6);
    for (int s = 0; s < 6; ++s)
      for (int t = 0; t < 6; ++t) CHECK(V(s, t) == doctest::Approx(std::pow(0.2, std::abs(s - t))));
  }

  TEST_CASE("AR(1) precision is the tridiagonal inverse") {
    CHECK(testing::max_abs(ar1_precision(0.0, 4) - Eigen::MatrixXd::Identity(4, 4)) == 0.0);
    const auto P = ar1_precision(0.3, 6);
    CHECK(testing::max_abs(P - ar1_covariance(0.3, 6).inverse()) <= 1e-10);
    for (int s = 0; s < 6; ++s)
      for (int t = 0; t < 6; ++t)
        if (std::abs(s - t) > 1) CHECK(P(s, t) == 0.0);
    CHECK_THROWS(ar1_precision(0.3, 1));
    CHECK_THROWS(ar1_covariance(1.0, 4));
  }

  TEST_CASE("log determinant identity") {
    for (double rho : {-0.9, 0.0, 0.5}) {
      const Eigen::MatrixXd V = ar1_covariance(rho, 12);
      CHECK(ar1_log_det(rho, 12) == doctest::Approx(std::log(V.determinant())).epsilon(1e-10));
    }
  }

  TEST_CASE("whitening") {
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(20, -1, 3);
    CHECK((Whitener(NoiseSpec::white(), 20).apply(x) - x).norm() == 0.0);
    CHECK((Whitener(NoiseSpec::ar1(0.0), 20).apply(x) - x).norm() == 0.0);

    for (const NoiseSpec& spec : {NoiseSpec::ar1(0.4), NoiseSpec{2, {0.5, -0.3}, 1.0, false}}) {
      const Whitener W(spec, 20);
      const Eigen::MatrixXd Wm = W.apply_matrix(Eigen::MatrixXd::Identity(20, 20));
      const Eigen::MatrixXd V = correlation_matrix(spec, 20);
      CHECK(testing::max_abs(Wm * V * Wm.transpose() - Eigen::MatrixXd::Identity(20, 20)) <= 1e-10);
      CHECK((W.unapply(W.apply(x)) - x).norm() <= 1e-12);
      CHECK(W.log_det() == doctest::Approx(std::log(V.determinant())).epsilon(1e-10));
    }
    CHECK_THROWS(Whitener(NoiseSpec::ar1(0.4), 20).apply(Eigen::VectorXd::Zero(19)));
  }

  TEST_CASE("whitened OLS equals GLS") {
    std::mt19937_64 rng(11);
    Eigen::MatrixXd X(30, 3);
    for (int j = 0; j < 3; ++j) X.col(j) = testing::gaussian(30, rng);
    const Eigen::VectorXd y = testing::gaussian(30, rng);
    const double rho = 0.6;
    const Eigen::MatrixXd P = ar1_precision(rho, 30);
    const Eigen::VectorXd gls = (X.transpose() * P * X).ldlt().solve(X.transpose() * P * y);
    const Whitener W(NoiseSpec::ar1(rho), 30);
    const Eigen::MatrixXd Xw = W.apply_matrix(X);
    const Eigen::VectorXd ols = Xw.colPivHouseholderQr().solve(W.apply(y));
    CHECK((gls - ols).cwiseAbs().maxCoeff() <= 1e-10);
  }

  TEST_CASE("Yule-Walker estimation") {
    std::mt19937_64 rng(2024);
    const Eigen::VectorXd white = testing::gaussian(5000, rng);
    CHECK(std::fabs(estimate_ar(white, 1).rho()) <= 0.05);
    const Eigen::VectorXd ar = Whitener(NoiseSpec::ar1(0.2), 5000).unapply(white);
    const double rho = estimate_ar(ar, 1).rho();
    CHECK(rho >= 0.15);
    CHECK(rho <= 0.25);
    const auto a2 = estimate_ar(Whitener(NoiseSpec{2, {0.5, -0.3}, 1.0, false}, 5000).unapply(white), 2);
    CHECK(a2.phi[0] == doctest::Approx(0.5).epsilon(0.1));
    CHECK(a2.phi[1] == doctest::Approx(-0.3).epsilon(0.15));
    CHECK_THROWS_AS(estimate_ar(Eigen::VectorXd::Ones(3), 1), ArgumentError);
    CHECK_THROWS_AS(estimate_ar(Eigen::VectorXd::Ones(50), 1), DataError);
  }
}
