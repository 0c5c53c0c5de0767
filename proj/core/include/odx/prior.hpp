#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <string_view>

#include "odx/tensor.hpp"

namespace odx {

enum class PriorKind { standard_normal, uniform_sym };

// Latent prior p_Z: either N(0, 1) or U[-1, 1]. Both are symmetric, so odd
// raw moments vanish.
class PriorSpec {
 public:
  static constexpr int kMaxMomentOrder = 16;

  constexpr PriorSpec() = default;
  constexpr explicit PriorSpec(PriorKind kind) : kind_(kind) {}

  static PriorSpec normal() { return PriorSpec(PriorKind::standard_normal); }
  static PriorSpec uniform() { return PriorSpec(PriorKind::uniform_sym); }

  // Accepts "normal" / "standard_normal" and "uniform" / "uniform_sym".
  static PriorSpec parse(std::string_view name);

  PriorKind kind() const noexcept { return kind_; }
  // Short name used by the CLI and file formats: "normal" or "uniform".
  std::string name() const;

  // Null CDF F. The uniform CDF is clamped to [0, 1] outside the support.
  double cdf(double x) const;

  // Closed-form raw moment E[Z^i] for 1 <= i <= kMaxMomentOrder: (i-1)!! for
  // the normal and 1/(i+1) for the uniform when i is even, 0 when odd.
  // Throws UnsupportedMomentError outside that range.
  double raw_moment(int order) const;

  Tensor sample(std::size_t n, std::mt19937_64& rng) const;

  friend bool operator==(PriorSpec, PriorSpec) = default;

 private:
  PriorKind kind_ = PriorKind::standard_normal;
};

}  // namespace odx
