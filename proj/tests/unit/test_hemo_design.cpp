#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "hrshift/error.hpp"
#include "hrshift/hemo_design.hpp"
#include "hrshift/subject_fit.hpp"

using namespace hrshift;

namespace {

BasisSet random_basis(Eigen::Index samples, Eigen::Index G, double dt, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BasisSet b;
  b.functions.resize(samples, G);
  for (Eigen::Index g = 0; g < G; ++g) b.functions.col(g) = testing::gaussian(samples, rng);
  b.dt = dt;
  return b;
}

}  // namespace

TEST_SUITE("hemo_design") {
  TEST_CASE("canonical HRF shape") {
    const auto h = canonical_hrf(0.1, 32.0);
    REQUIRE(h.size() == 320);
    CHECK(h[0] == 0.0);
    Eigen::Index arg = 0;
    CHECK(h.maxCoeff(&arg) == doctest::Approx(1.0));
    CHECK(static_cast<double>(arg) * 0.1 == doctest::Approx(5.0).epsilon(0.1));
    // Fine-grid oracle: peak at 5.00 s.
    const auto fine = canonical_hrf(0.01, 32.0);
    fine.maxCoeff(&arg);
    CHECK(static_cast<double>(arg) * 0.01 == doctest::Approx(5.0));
  }

  TEST_CASE("basis files") {
    const auto dir = testing::temp_dir("basis");
    {
      std::ofstream f(dir / "three.csv");
      for (int i = 0; i < 200; ++i) f << i * 0.01 << ',' << -i * 0.02 << ',' << 1.0 << '\n';
      std::ofstream g(dir / "one.csv");
      for (int i = 0; i < 200; ++i) g << std::sin(i * 0.05) << '\n';
      std::ofstream n(dir / "nan.csv");
      for (int i = 0; i < 200; ++i) n << (i == 17 ? "NaN" : "0.5") << ",1\n";
    }
    const auto b = load_basis(dir / "three.csv", 0.1);
    CHECK(b.count() == 3);
    CHECK(b.samples() == 200);
    CHECK(load_basis(dir / "one.csv", 0.1).count() == 1);
    CHECK_THROWS_AS(load_basis(dir / "nan.csv", 0.1), DataError);
    CHECK_THROWS(load_basis(dir / "three.csv", 0.05));  // only 10 s of support
  }

  TEST_CASE("split_onsets boundary rule") {
    const auto u = OnsetSeries::from_onsets("a", 20, {5, 10, 15});
    const auto seg = split_onsets(u, {10});
    REQUIRE(seg.size() == 2);
    CHECK(seg[0].onsets() == std::vector<std::size_t>{5});
    CHECK(seg[1].onsets() == std::vector<std::size_t>{10, 15});
    const auto whole = split_onsets(u, {});
    REQUIRE(whole.size() == 1);
    CHECK(whole[0].indicator() == u.indicator());
    const auto empty = split_onsets(OnsetSeries::from_onsets("a", 20, {}), {10});
    CHECK(empty.size() == 2);
    CHECK(empty[0].count() == 0);
    CHECK(empty[1].count() == 0);
    CHECK_THROWS(split_onsets(u, {25}));
  }

  TEST_CASE("onset series validation") {
    CHECK_THROWS(OnsetSeries("a", {0, 2, 1}));
    CHECK_THROWS(OnsetSeries::from_onsets("a", 10, {11}));
    const auto u = OnsetSeries::from_onsets("a", 20, {2, 8, 19});
    CHECK(u.restricted(8, 20).onsets() == std::vector<std::size_t>{8, 19});
  }

  TEST_CASE("unit impulse reproduces the shifted basis") {
    const auto basis = random_basis(16, 2, 2.0, 3);
    const std::size_t T = 40, s = 30;
    const auto u = OnsetSeries::from_onsets("a", T, {s});
    const auto d = build_design({u}, basis, {}, {}, ModelKind::stationary, {2.0, false, false});
    REQUIRE(d.X.cols() == 2);
    for (Eigen::Index g = 0; g < 2; ++g)
      for (std::size_t t = 1; t <= T; ++t) {
        const double expected = t >= s ? basis.functions(static_cast<Eigen::Index>(t - s), g) : 0.0;
        CHECK(d.X(static_cast<Eigen::Index>(t - 1), g) == doctest::Approx(expected));
      }
  }

  TEST_CASE("design columns are labelled and ordered") {
    const auto basis = canonical_basis(0.1, 32);
    const auto a = OnsetSeries::from_onsets("a", 60, {3, 20, 40});
    const auto b = OnsetSeries::from_onsets("b", 60, {10, 30, 50});
    ChangePointSet cps;
    cps.points["a"] = {20};
    Eigen::MatrixXd conf = Eigen::VectorXd::LinSpaced(60, -1, 1);
    const auto d = build_design({a, b}, basis, cps, conf, ModelKind::segmented, {2.0, true, true});
    REQUIRE(d.columns.size() == 5);
    CHECK(d.columns[0].condition == "a");
    CHECK(d.columns[1].segment == 1);
    CHECK(d.columns[2].condition == "b");
    CHECK(d.columns[3].role == ColumnTag::Role::intercept);
    CHECK(d.columns[4].role == ColumnTag::Role::confound);
    CHECK(d.column("a", 1) == 1);
  }

  TEST_CASE("segmented blocks partition the stationary design") {
    const auto basis = flobs_like_basis(0.2, 32);
    const auto u = OnsetSeries::from_onsets("a", 80, {4, 12, 19, 27, 33, 41, 50, 58, 66, 73});
    ChangePointSet cps;
    cps.points["a"] = {33};
    const auto st = build_design({u}, basis, {}, {}, ModelKind::stationary, {2.0, false, true});
    const auto sg = build_design({u}, basis, cps, {}, ModelKind::segmented, {2.0, false, true});
    REQUIRE(sg.X.cols() == 6);
    CHECK(testing::max_abs(sg.X.leftCols(3) + sg.X.rightCols(3) - st.X) < 1e-12);
  }

  TEST_CASE("cumulative reparametrisation matches segmented means") {
    const auto basis = canonical_basis(0.1, 32);
    const auto u = OnsetSeries::from_onsets("a", 50, {3, 9, 15, 22, 28, 35, 41, 47});
    ChangePointSet cps;
    cps.points["a"] = {22};
    const auto cu = build_design({u}, basis, cps, {}, ModelKind::cumulative, {2.0, false, true});
    const auto sg = build_design({u}, basis, cps, {}, ModelKind::segmented, {2.0, false, true});
    const double b0 = 1.3, b1 = -0.4;
    const Eigen::Vector2d bc(b0, b1), bs(b0, b0 + b1);
    CHECK(testing::max_abs(cu.X * bc - sg.X * bs) < 1e-12);
    CHECK_THROWS(build_design({u}, flobs_like_basis(0.2, 32), cps, {}, ModelKind::cumulative, {}));
  }

  TEST_CASE("rank deficient designs are rejected") {
    const auto basis = canonical_basis(0.1, 32);
    const auto u = OnsetSeries::from_onsets("a", 40, {});
    CHECK_THROWS_AS(build_design({u}, basis, {}, {}, ModelKind::stationary, {2.0, true, true}), DataError);
  }

  TEST_CASE("FLOBS-like basis reproduces a canonical-like response") {
    const auto b = flobs_like_basis(0.2, 32);
    CHECK(b.count() == 3);
    const Eigen::VectorXd hr = b.functions * Eigen::Vector3d(3.2, -6.4, 3.2);
    const auto sp = shape_params(hr, b.dt);
    CHECK(sp[ShapeParam::pm] >= 0.5);
    CHECK(sp[ShapeParam::pm] <= 1.5);
    CHECK(sp[ShapeParam::ttp] == doctest::Approx(5.0).epsilon(0.2));
    CHECK(sp[ShapeParam::na] < 0.0);
  }
}
