#include "odx/stat_gate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "odx/errors.hpp"

namespace odx {

namespace {

constexpr double kCdfClamp = 1e-10;

std::vector<double> sorted_copy(std::span<const double> z) {
  std::vector<double> s(z.begin(), z.end());
  std::sort(s.begin(), s.end());
  return s;
}

// Probability-integral transform of the sorted sample through the null CDF.
std::vector<double> pit(std::span<const double> sorted, const PriorSpec& prior) {
  std::vector<double> u(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) u[i] = prior.cdf(sorted[i]);
  return u;
}

double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double poly(std::span<const double> c, double x) {
  double r = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
  return r;
}

// Royston's normalising approximation for the null distribution of W.
double royston_p_value(std::size_t n, double w) {
  const double an = static_cast<double>(n);
  if (n == 3) {
    constexpr double pi6 = 6.0 / std::numbers::pi;
    constexpr double stqr = std::numbers::pi / 3.0;
    return std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr));
  }
  const double w1 = 1.0 - w;
  if (w1 <= 0.0) return 1.0;
  double y = std::log(w1);
  double mu, sigma;
  if (n <= 11) {
    static constexpr double g[] = {-2.273, .459};
    static constexpr double c3[] = {.544, -.39978, .025054, -6.714e-4};
    static constexpr double c4[] = {1.3822, -.77857, .062767, -.0020322};
    const double gamma = poly(g, an);
    if (y >= gamma) return 1e-99;
    y = -std::log(gamma - y);
    mu = poly(c3, an);
    sigma = std::exp(poly(c4, an));
  } else {
    static constexpr double c5[] = {-1.5861, -.31082, -.083751, .0038915};
    static constexpr double c6[] = {-.4803, -.082676, .0030302};
    const double xx = std::log(an);
    mu = poly(c5, xx);
    sigma = std::exp(poly(c6, xx));
  }
  return normal_upper_tail((y - mu) / sigma);
}

void require_finite(std::span<const double> z, const char* test) {
  for (double v : z) {
    if (!std::isfinite(v)) throw ParameterError(std::string(test) + ": sample contains a non-finite value");
  }
}

}  // namespace

std::string gof_test_name(GofTest test) {
  switch (test) {
    case GofTest::anderson_darling:
      return "anderson_darling";
    case GofTest::kolmogorov_smirnov:
      return "kolmogorov_smirnov";
    case GofTest::shapiro_wilk:
      return "shapiro_wilk";
  }
  return "unknown";
}

GofTest parse_gof_test(std::string_view name) {
  if (name == "ad" || name == "anderson_darling") return GofTest::anderson_darling;
  if (name == "ks" || name == "kolmogorov_smirnov") return GofTest::kolmogorov_smirnov;
  if (name == "sw" || name == "shapiro_wilk") return GofTest::shapiro_wilk;
  throw ConfigurationError("unknown test '" + std::string(name) + "' (expected ad, ks or sw)");
}

double sample_moment(std::span<const double> z, int order) {
  if (z.empty()) throw ParameterError("sample moment of an empty vector");
  if (order < 1) throw ParameterError("moment order must be >= 1");
  double s = 0.0;
  for (double v : z) {
    double p = v;
    for (int k = 1; k < order; ++k) p *= v;
    s += p;
  }
  return s / static_cast<double>(z.size());
}

double theoretical_moment(const PriorSpec& prior, int order) { return prior.raw_moment(order); }

namespace gof_detail {

double ad_asymptotic_cdf(double z) {
  if (!(z > 0.0)) return 0.0;
  if (z < 2.0) {
    return std::exp(-1.2337141 / z) / std::sqrt(z) *
           (2.00012 + (.247105 - (.0649821 - (.0347962 - (.011672 - .00168691 * z) * z) * z) * z) * z);
  }
  return std::exp(-std::exp(1.0776 - (2.30695 - (.43424 - (.082433 - (.008056 - .0003146 * z) * z) * z) * z) * z));
}

namespace {

// Marsaglia & Marsaglia correction for finite n, as a function of the
// asymptotic CDF value x.
double ad_errfix(double n, double x) {
  if (x > 0.8) {
    return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / n;
  }
  const double c = .01265 + .1757 / n;
  if (x < c) {
    double t = x / c;
    t = std::sqrt(t) * (1. - t) * (49 * t - 102);
    return t * (.0037 / (n * n) + .00078 / n + .00006) / n;
  }
  double t = (x - c) / (.8 - c);
  t = -.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
  return t * (.04213 / n + .01365 / (n * n));
}

}  // namespace

double ad_cdf(std::size_t n, double a2) {
  const double x = ad_asymptotic_cdf(a2);
  return std::clamp(x + ad_errfix(static_cast<double>(n), x), 0.0, 1.0);
}

double kolmogorov_q(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  double q;
  if (lambda < 1.18) {
    // Jacobi-theta form of the same function; the alternating series
    // converges too slowly here.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double s = 0.0;
    for (int j = 1; j < 100; ++j) {
      const double k = 2.0 * j - 1.0;
      const double term = std::exp(-k * k * pi2 / (8.0 * lambda * lambda));
      s += term;
      if (term < 1e-12) break;
    }
    q = 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s;
  } else {
    double s = 0.0;
    for (int j = 1; j < 100; ++j) {
      const double term = std::exp(-2.0 * j * j * lambda * lambda);
      s += (j % 2 == 1) ? term : -term;
      if (term < 1e-12) break;
    }
    q = 2.0 * s;
  }
  return std::clamp(q, 0.0, 1.0);
}

}  // namespace gof_detail

TestReport anderson_darling(std::span<const double> z, const PriorSpec& prior) {
  const std::size_t n = z.size();
  if (n < 2) throw SampleSizeError("Anderson-Darling needs at least 2 observations, got " + std::to_string(n));
  require_finite(z, "Anderson-Darling");
  const auto sorted = sorted_copy(z);
  auto u = pit(sorted, prior);
  for (double& v : u) v = std::clamp(v, kCdfClamp, 1.0 - kCdfClamp);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(u[i]) + std::log1p(-u[n - 1 - i]));
  }
  const double a2 = -static_cast<double>(n) - s / static_cast<double>(n);
  TestReport r;
  r.test = GofTest::anderson_darling;
  r.statistic = a2;
  r.p_value = std::clamp(1.0 - gof_detail::ad_cdf(n, a2), 0.0, 1.0);
  r.n = n;
  return r;
}

TestReport kolmogorov_smirnov(std::span<const double> z, const PriorSpec& prior) {
  const std::size_t n = z.size();
  if (n < 1) throw SampleSizeError("Kolmogorov-Smirnov needs at least 1 observation");
  require_finite(z, "Kolmogorov-Smirnov");
  const auto u = pit(sorted_copy(z), prior);
  const double nn = static_cast<double>(n);
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double hi = static_cast<double>(i + 1) / nn - u[i];
    const double lo = u[i] - static_cast<double>(i) / nn;
    d = std::max({d, hi, lo});
  }
  const double sq = std::sqrt(nn);
  TestReport r;
  r.test = GofTest::kolmogorov_smirnov;
  r.statistic = d;
  r.p_value = gof_detail::kolmogorov_q((sq + 0.12 + 0.11 / sq) * d);
  r.n = n;
  return r;
}

TestReport shapiro_wilk(std::span<const double> z) {
  const std::size_t n = z.size();
  if (n < 3 || n > 5000) {
    throw SampleSizeError("Shapiro-Wilk needs 3 <= n <= 5000, got " + std::to_string(n));
  }
  require_finite(z, "Shapiro-Wilk");
  const auto x = sorted_copy(z);
  const double range = x.back() - x.front();
  if (!(range > 1e-19)) throw ParameterError("Shapiro-Wilk: sample has zero range");

  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::numbers::sqrt2 / 2.0;
  } else {
    static constexpr double c1[] = {0.0, .221157, -.147981, -2.07119, 4.434685, -2.706056};
    static constexpr double c2[] = {0.0, .042981, -.293762, -1.752461, 5.682633, -3.582633};
    const boost::math::normal_distribution<double> std_normal;
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = boost::math::quantile(std_normal, (static_cast<double>(i + 1) - .375) / (an + .25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, rsn) - m[0] / ssumm2;
    std::size_t first_scaled;
    double fac;
    if (n > 5) {
      first_scaled = 2;
      const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
    } else {
      first_scaled = 1;
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
  }

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= an;
  double ssq = 0.0;
  for (double v : x) ssq += (v - mean) * (v - mean);
  double num = 0.0;
  for (std::size_t i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  const double w = std::min(1.0, num * num / ssq);

  const double pw = royston_p_value(n, w);
  TestReport r;
  r.test = GofTest::shapiro_wilk;
  r.statistic = w;
  r.p_value = std::clamp(pw, 0.0, 1.0);
  r.n = n;
  return r;
}

TestReport run_test(std::span<const double> z, const PriorSpec& prior, GofTest test) {
  switch (test) {
    case GofTest::anderson_darling:
      return anderson_darling(z, prior);
    case GofTest::kolmogorov_smirnov:
      return kolmogorov_smirnov(z, prior);
    case GofTest::shapiro_wilk:
      if (prior.kind() != PriorKind::standard_normal) {
        throw ConfigurationError("Shapiro-Wilk tests normality only; it cannot gate a uniform prior");
      }
      return shapiro_wilk(z);
  }
  throw ConfigurationError("unknown test");
}

bool accept_p_value(double p_value, double alpha) { return p_value >= alpha; }

TestReport validate_report(std::span<const double> z, const PriorSpec& prior, GofTest test, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigurationError("alpha must lie in (0, 1)");
  if (test == GofTest::shapiro_wilk && prior.kind() != PriorKind::standard_normal) {
    throw ConfigurationError("Shapiro-Wilk tests normality only; it cannot gate a uniform prior");
  }
  TestReport r = run_test(z, prior, test);
  r.decision = Decision{alpha, accept_p_value(r.p_value, alpha)};
  return r;
}

bool validate(std::span<const double> z, const PriorSpec& prior, GofTest test, double alpha) {
  return validate_report(z, prior, test, alpha).decision->accepted;
}

}  // namespace odx
