#include "odx/prior.hpp"

#include <algorithm>
#include <cmath>

#include "odx/errors.hpp"

namespace odx {

PriorSpec PriorSpec::parse(std::string_view name) {
  if (name == "normal" || name == "standard_normal") return normal();
  if (name == "uniform" || name == "uniform_sym") return uniform();
  throw ConfigurationError("unknown prior '" + std::string(name) + "' (expected normal or uniform)");
}

std::string PriorSpec::name() const { return kind_ == PriorKind::standard_normal ? "normal" : "uniform"; }

double PriorSpec::cdf(double x) const {
  if (kind_ == PriorKind::standard_normal) return 0.5 * std::erfc(-x / std::sqrt(2.0));
  return std::clamp((x + 1.0) / 2.0, 0.0, 1.0);
}

double PriorSpec::raw_moment(int order) const {
  if (order < 1 || order > kMaxMomentOrder) {
    throw UnsupportedMomentError("moment order " + std::to_string(order) + " outside supported range 1.." +
                                 std::to_string(kMaxMomentOrder));
  }
  if (order % 2 == 1) return 0.0;
  if (kind_ == PriorKind::uniform_sym) return 1.0 / (order + 1);
  double m = 1.0;
  for (int j = order - 1; j > 1; j -= 2) m *= j;
  return m;
}

Tensor PriorSpec::sample(std::size_t n, std::mt19937_64& rng) const {
  std::vector<double> z(n);
  if (kind_ == PriorKind::standard_normal) {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : z) v = dist(rng);
  } else {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : z) v = dist(rng);
  }
  return Tensor::vector(std::move(z));
}

}  // namespace odx
