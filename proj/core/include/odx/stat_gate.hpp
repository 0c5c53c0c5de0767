#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "odx/prior.hpp"
#include "odx/tensor.hpp"

namespace odx {

enum class GofTest { anderson_darling, kolmogorov_smirnov, shapiro_wilk };

std::string gof_test_name(GofTest test);
// Accepts "ad" / "ks" / "sw" and the long names.
GofTest parse_gof_test(std::string_view name);

struct Decision {
  double alpha = 0.05;
  bool accepted = false;
};

struct TestReport {
  GofTest test = GofTest::anderson_darling;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::optional<Decision> decision;
};

// (1/n) sum_j z_j^order. ParameterError for an empty z or order < 1.
double sample_moment(std::span<const double> z, int order);
double theoretical_moment(const PriorSpec& prior, int order);

// Case-0 Anderson-Darling test against the fully specified prior. The
// p-value uses the Marsaglia & Marsaglia evaluation of the A^2 distribution
// (asymptotic CDF plus their finite-n correction). Needs n >= 2.
TestReport anderson_darling(std::span<const double> z, const PriorSpec& prior);

// One-sample Kolmogorov-Smirnov with the asymptotic Kolmogorov
// distribution evaluated at the Stephens-corrected statistic.
TestReport kolmogorov_smirnov(std::span<const double> z, const PriorSpec& prior);

// Shapiro-Wilk W with the Royston (AS R94) p-value; 3 <= n <= 5000. Tests
// normality only.
TestReport shapiro_wilk(std::span<const double> z);

TestReport run_test(std::span<const double> z, const PriorSpec& prior, GofTest test);

// Defender gate: accept iff p_value >= alpha. ConfigurationError for
// alpha outside (0, 1) or Shapiro-Wilk under a non-normal prior.
bool validate(std::span<const double> z, const PriorSpec& prior, GofTest test, double alpha);
// Same rule, returning the full report with the decision filled in.
TestReport validate_report(std::span<const double> z, const PriorSpec& prior, GofTest test, double alpha);
// The bare decision rule, exposed for boundary tests.
bool accept_p_value(double p_value, double alpha);

namespace gof_detail {

// Asymptotic CDF of the case-0 A^2 statistic.
double ad_asymptotic_cdf(double a2);
// CDF of A^2 for sample size n (asymptotic value plus correction).
double ad_cdf(std::size_t n, double a2);
// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2).
double kolmogorov_q(double lambda);

}  // namespace gof_detail

}  // namespace odx
