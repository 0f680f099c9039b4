#include <doctest.h>

#include <cmath>
#include <vector>

#include "hrshift/parallel.hpp"
#include "hrshift/rng.hpp"
#include "hrshift/stats.hpp"

using namespace hrshift;

TEST_SUITE("stats") {
  TEST_CASE("derived seeds are pure and path sensitive") {
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
    CHECK(stream_id("noise") != stream_id("design"));
    Rng a = make_rng(9, {stream_id("x")}), b = make_rng(9, {stream_id("x")});
    CHECK(a() == b());
  }

  TEST_CASE("sample variance") {
    const std::vector<double> x{1, 2, 3, 6};
    CHECK(mean(x) == doctest::Approx(3.0));
    CHECK(sample_variance(x) == doctest::Approx(14.0 / 3.0));
    const std::vector<double> same(5, 0.1);
    CHECK(sample_variance(same) == 0.0);
  }

  TEST_CASE("t and normal tails") {
    CHECK(t_two_sided_p(0.0, 5) == doctest::Approx(1.0));
    CHECK(t_two_sided_p(2.570581835636314, 5) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  }

  TEST_CASE("KS test accepts uniform data and rejects shifted data") {
    Rng rng(5);
    std::uniform_real_distribution<double> u;
    std::vector<double> x(1000);
    for (auto& v : x) v = u(rng);
    auto cdf = [](double t) { return std::clamp(t, 0.0, 1.0); };
    CHECK(ks_test(x, cdf).p_value > 0.01);
    for (auto& v : x) v = std::sqrt(v);
    CHECK(ks_test(x, cdf).p_value < 1e-6);
    // Critical value at 5% for large n is about 1.358 / sqrt(n).
    CHECK(ks_p_value(1.358 / std::sqrt(1000.0), 1000) == doctest::Approx(0.05).epsilon(0.05));
  }

  TEST_CASE("Benjamini-Hochberg step-up") {
    const std::vector<double> p{0.01, 0.03, 0.02, 0.20};
    const auto r = benjamini_hochberg(p, 0.05);
    CHECK(r.rejections == 3);
    CHECK(r.rejected == std::vector<bool>{true, true, true, false});
    CHECK(r.threshold == doctest::Approx(0.0375));
    CHECK(benjamini_hochberg(std::vector<double>{0.5, 0.9}, 0.05).rejections == 0);
  }

  TEST_CASE("isotonic regression pools violators") {
    const std::vector<double> y{0.1, 0.3, 0.2, 0.6};
    const auto f = isotonic_increasing(y);
    CHECK(f[1] == doctest::Approx(0.25));
    CHECK(f[2] == doctest::Approx(0.25));
    const std::vector<double> w{1, 3, 1, 1};
    CHECK(isotonic_increasing(y, w)[1] == doctest::Approx(0.275));
  }

  TEST_CASE("parallel_for covers every index and propagates errors") {
    std::vector<int> hit(100, 0);
    parallel_for(hit.size(), [&](std::size_t i) { hit[i] += 1; }, 4);
    for (int h : hit) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) { if (i == 3) throw std::runtime_error("x"); }, 4),
                    std::runtime_error);
  }
}
