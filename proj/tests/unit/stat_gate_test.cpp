#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "odx/errors.hpp"
#include "odx/prior.hpp"
#include "odx/stat_gate.hpp"

using namespace odx;

namespace {

// Reference values computed once with scipy.stats.shapiro (AS R94).
const std::vector<double> kSmall{-1.2, 0.3, 0.45, 2.1, -0.7, 0.05, 1.3, -0.2, 0.9, -1.9, 0.6, 0.11};
constexpr double kSmallW = 0.9871300437258503, kSmallP = 0.9986264167355988;

const std::vector<double> kUniform30{
    -0.7428595944616008, -0.0014442751197700776, 0.20299671524671492, -0.9426219832561109, -0.7041478308450881,
    0.856422045920739, -0.8591588476916063, -0.740452101201404, 0.8966569065835501, 0.24376718559276567,
    -0.26201375254041803, 0.022780043606525302, 0.3256859050335985, -0.4493823684777414, -0.7240638542660893,
    0.5760791890079837, 0.34072116820496756, 0.02476462696632087, 0.6334728719393161, 0.09815053774005267,
    0.9618272785946109, -0.5909810773399102, 0.10746072573045562, -0.03275060615322456, -0.2934502898791038,
    0.18319060789808694, -0.5293975366648389, 0.6044053675569669, 0.7346671036848293, -0.7424806575442979};
constexpr double kUniform30W = 0.9439105520729689, kUniform30P = 0.11594253449102893;

std::vector<double> draw(const PriorSpec& p, std::size_t n, std::mt19937_64& rng) { return p.sample(n, rng).data(); }

double ks_scan_oracle(std::vector<double> z, const PriorSpec& prior) {
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = prior.cdf(z[i]);
    d = std::max(d, std::abs((i + 1) / n - f));
    d = std::max(d, std::abs(f - i / n));
  }
  return d;
}

}  // namespace

TEST_SUITE("moments") {
  TEST_CASE("sample moments") {
    CHECK(sample_moment(std::vector<double>{-1, 1}, 2) == 1.0);
    CHECK(sample_moment(std::vector<double>{1, 2, 3}, 1) == 2.0);
    CHECK_THROWS_AS(sample_moment(std::vector<double>{}, 1), ParameterError);
    CHECK_THROWS_AS(sample_moment(std::vector<double>{1.0}, 0), ParameterError);
    std::mt19937_64 rng(1);
    const auto z = draw(PriorSpec::normal(), 57, rng);
    double s = 0;
    for (double v : z) s += v * v * v * v * v;
    CHECK(std::abs(sample_moment(z, 5) - s / 57) <= 1e-12);
  }

  TEST_CASE("closed-form theoretical moments") {
    CHECK(theoretical_moment(PriorSpec::normal(), 4) == 3.0);
    CHECK(theoretical_moment(PriorSpec::uniform(), 2) == doctest::Approx(1.0 / 3).epsilon(1e-15));
    for (int i = 1; i <= 15; i += 2) {
      CHECK(theoretical_moment(PriorSpec::normal(), i) == 0.0);
      CHECK(theoretical_moment(PriorSpec::uniform(), i) == 0.0);
    }
    CHECK_THROWS_AS(theoretical_moment(PriorSpec::normal(), 17), UnsupportedMomentError);
    CHECK_THROWS_AS(theoretical_moment(PriorSpec::normal(), 0), UnsupportedMomentError);
  }

  TEST_CASE("theoretical moments agree with quadrature of the density") {
    using boost::math::quadrature::gauss_kronrod;
    const double inv_sqrt_2pi = 0.3989422804014327;
    for (int i = 1; i <= 8; ++i) {
      const double normal = gauss_kronrod<double, 61>::integrate(
          [&](double x) { return std::pow(x, i) * inv_sqrt_2pi * std::exp(-x * x / 2); }, -40.0, 40.0, 15, 1e-14);
      const double uniform =
          gauss_kronrod<double, 61>::integrate([&](double x) { return std::pow(x, i) / 2; }, -1.0, 1.0, 5, 1e-14);
      CHECK(std::abs(normal - theoretical_moment(PriorSpec::normal(), i)) <= 1e-9);
      CHECK(std::abs(uniform - theoretical_moment(PriorSpec::uniform(), i)) <= 1e-9);
    }
  }
}

TEST_SUITE("anderson-darling") {
  TEST_CASE("n = 2 by direct substitution") {
    // F(-0.5) = 0.25, F(0.5) = 0.75 under the uniform prior
    const auto r = anderson_darling(std::vector<double>{0.5, -0.5}, PriorSpec::uniform());
    const double expect = -2.0 - 0.5 * (1 * (std::log(0.25) + std::log(1 - 0.75)) + 3 * (std::log(0.75) + std::log(1 - 0.25)));
    CHECK(std::abs(r.statistic - expect) <= 1e-12);
    CHECK(r.n == 2);
    CHECK_THROWS_AS(anderson_darling(std::vector<double>{0.1}, PriorSpec::normal()), SampleSizeError);
  }

  TEST_CASE("asymptotic CDF at published case-0 critical values") {
    CHECK(std::abs(gof_detail::ad_asymptotic_cdf(1.933) - 0.90) <= 1e-3);
    CHECK(std::abs(gof_detail::ad_asymptotic_cdf(2.492) - 0.95) <= 1e-3);
    CHECK(std::abs(gof_detail::ad_asymptotic_cdf(3.857) - 0.99) <= 1e-3);
  }

  TEST_CASE("shifted normal sample is rejected decisively") {
    std::mt19937_64 rng(2);
    auto z = draw(PriorSpec::normal(), 100, rng);
    for (double& v : z) v += 3;
    CHECK(anderson_darling(z, PriorSpec::normal()).p_value < 0.001);
  }

  TEST_CASE("null calibration at alpha = 0.05 (2,000 trials)") {
    std::mt19937_64 rng(3);
    for (auto prior : {PriorSpec::normal(), PriorSpec::uniform()}) {
      int reject = 0;
      for (int t = 0; t < 2000; ++t) reject += !validate(draw(prior, 100, rng), prior, GofTest::anderson_darling, 0.05);
      CHECK(std::abs(reject / 2000.0 - 0.05) <= 0.015);
    }
  }

  TEST_CASE("tail outliers weigh more under AD than KS") {
    std::mt19937_64 rng(4);
    int ad_smaller = 0;
    for (int t = 0; t < 50; ++t) {
      auto z = draw(PriorSpec::normal(), 100, rng);
      z[0] = 6.0;
      z[1] = -6.0;
      ad_smaller += anderson_darling(z, PriorSpec::normal()).p_value < kolmogorov_smirnov(z, PriorSpec::normal()).p_value;
    }
    CHECK(ad_smaller > 25);
  }
}

TEST_SUITE("kolmogorov-smirnov") {
  TEST_CASE("single observation") {
    const auto r = kolmogorov_smirnov(std::vector<double>{0.0}, PriorSpec::uniform());
    CHECK(r.statistic == 0.5);
    CHECK_THROWS_AS(kolmogorov_smirnov(std::vector<double>{}, PriorSpec::uniform()), SampleSizeError);
  }

  TEST_CASE("statistic equals a two-sided scan") {
    std::mt19937_64 rng(5);
    for (auto prior : {PriorSpec::normal(), PriorSpec::uniform()}) {
      for (int t = 0; t < 10; ++t) {
        const auto z = draw(prior, 40 + t, rng);
        CHECK(std::abs(kolmogorov_smirnov(z, prior).statistic - ks_scan_oracle(z, prior)) <= 1e-12);
      }
    }
  }

  TEST_CASE("Kolmogorov survival function matches reference values") {
    // scipy.special.kolmogorov
    const std::vector<std::pair<double, double>> ref{{0.5, 0.9639452436648751}, {0.9, 0.3927307079406543},
                                                     {1.0, 0.26999967167735456}, {1.3581, 0.0499996304316674},
                                                     {1.6276, 0.010001537333060776}, {2.0, 0.0006709252557796953}};
    for (auto [l, q] : ref) CHECK(std::abs(gof_detail::kolmogorov_q(l) - q) <= 1e-10);
  }

  TEST_CASE("null calibration at alpha = 0.05 (2,000 trials)") {
    std::mt19937_64 rng(6);
    for (auto prior : {PriorSpec::normal(), PriorSpec::uniform()}) {
      int reject = 0;
      for (int t = 0; t < 2000; ++t) reject += !validate(draw(prior, 100, rng), prior, GofTest::kolmogorov_smirnov, 0.05);
      CHECK(std::abs(reject / 2000.0 - 0.05) <= 0.015);
    }
  }
}

TEST_SUITE("shapiro-wilk") {
  TEST_CASE("reference values") {
    const auto a = shapiro_wilk(kSmall);
    CHECK(std::abs(a.statistic - kSmallW) <= 1e-6);
    CHECK(std::abs(a.p_value - kSmallP) <= 1e-5);
    const auto b = shapiro_wilk(kUniform30);
    CHECK(std::abs(b.statistic - kUniform30W) <= 1e-6);
    CHECK(std::abs(b.p_value - kUniform30P) <= 1e-5);
  }

  TEST_CASE("sample size bounds") {
    CHECK_THROWS_AS(shapiro_wilk(std::vector<double>{1, 2}), SampleSizeError);
    CHECK_THROWS_AS(shapiro_wilk(std::vector<double>(5001, 0.5)), SampleSizeError);
  }

  TEST_CASE("uniform samples of 512 are rejected as non-normal") {
    std::mt19937_64 rng(7);
    int low = 0;
    for (int t = 0; t < 100; ++t) low += shapiro_wilk(draw(PriorSpec::uniform(), 512, rng)).p_value < 0.01;
    CHECK(low >= 95);
  }

  TEST_CASE("null calibration at alpha = 0.05 (2,000 trials)") {
    std::mt19937_64 rng(8);
    int reject = 0;
    for (int t = 0; t < 2000; ++t) {
      reject += !validate(draw(PriorSpec::normal(), 100, rng), PriorSpec::normal(), GofTest::shapiro_wilk, 0.05);
    }
    CHECK(std::abs(reject / 2000.0 - 0.05) <= 0.015);
  }
}

TEST_SUITE("gate") {
  TEST_CASE("boundary accepts") {
    CHECK(accept_p_value(0.05, 0.05));
    CHECK_FALSE(accept_p_value(0.05 - 1e-9, 0.05));
  }

  TEST_CASE("configuration errors") {
    const std::vector<double> z{0.1, -0.2, 0.3, 0.4};
    CHECK_THROWS_AS(validate(z, PriorSpec::uniform(), GofTest::shapiro_wilk, 0.05), ConfigurationError);
    CHECK_THROWS_AS(validate(z, PriorSpec::normal(), GofTest::anderson_darling, 0.0), ConfigurationError);
    CHECK_THROWS_AS(validate(z, PriorSpec::normal(), GofTest::anderson_darling, 1.0), ConfigurationError);
  }

  TEST_CASE("report carries the decision") {
    std::mt19937_64 rng(9);
    const auto z = draw(PriorSpec::normal(), 100, rng);
    const auto r = validate_report(z, PriorSpec::normal(), GofTest::kolmogorov_smirnov, 0.1);
    REQUIRE(r.decision);
    CHECK(r.decision->alpha == 0.1);
    CHECK(r.decision->accepted == (r.p_value >= 0.1));
  }

  TEST_CASE("statistics are permutation invariant and p-values lie in [0, 1]") {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 20; ++t) {
      const auto prior = t % 2 ? PriorSpec::uniform() : PriorSpec::normal();
      auto z = draw(prior, 30 + t, rng);
      if (t % 5 == 0) z[0] = 9.0;
      for (GofTest test : {GofTest::anderson_darling, GofTest::kolmogorov_smirnov, GofTest::shapiro_wilk}) {
        if (test == GofTest::shapiro_wilk && prior.kind() != PriorKind::standard_normal) continue;
        const auto a = run_test(z, prior, test);
        auto p = z;
        std::shuffle(p.begin(), p.end(), rng);
        const auto b = run_test(p, prior, test);
        CHECK(a.statistic == doctest::Approx(b.statistic).epsilon(1e-12));
        CHECK(std::isfinite(a.statistic));
        CHECK(a.p_value >= 0.0);
        CHECK(a.p_value <= 1.0);
      }
    }
  }

  TEST_CASE("test names") {
    CHECK(parse_gof_test("ad") == GofTest::anderson_darling);
    CHECK(parse_gof_test("kolmogorov_smirnov") == GofTest::kolmogorov_smirnov);
    CHECK(parse_gof_test("sw") == GofTest::shapiro_wilk);
    CHECK_THROWS_AS(parse_gof_test("chi2"), ConfigurationError);
  }
}
