#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "odx/network.hpp"
#include "odx/prior.hpp"
#include "odx/tensor.hpp"

namespace odx {

enum class Distance { mse, xe };
enum class Clipping { none, hard, stochastic };

std::string distance_name(Distance d);
Distance parse_distance(std::string_view name);
std::string clipping_name(Clipping c);
Clipping parse_clipping(std::string_view name);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AttackConfig {
  Distance distance = Distance::mse;
  int k = 4;
  std::vector<double> omega = {1.0, 1.0, 1.0, 1.0};
  double eta = 0.01;
  std::size_t max_iters = 2000;
  Clipping clipping = Clipping::none;
  std::uint64_t seed = 0;
  AdamParams adam;
  std::size_t record_stride = 1;

  // Defaults for a prior: k = 4 and no clipping for the normal prior,
  // k = 6 with hard clipping for the uniform prior; all weights 1.
  static AttackConfig defaults_for(const PriorSpec& prior);

  // Same config with the moment penalty switched off (k = 0).
  AttackConfig relaxed() const;

  // Throws ConfigurationError when an invariant is violated.
  void validate() const;
};

struct LossTerms {
  double loss = 0.0;
  double distance = 0.0;
  double penalty = 0.0;
};

struct AttackResult {
  Tensor z_hat;
  Tensor x_hat;
  double best_loss = 0.0;
  double distance_value = 0.0;
  double penalty_value = 0.0;
  std::vector<std::pair<std::size_t, double>> trajectory;
  std::optional<std::size_t> y;
  std::size_t iterations_run = 0;
  std::size_t best_iteration = 0;
};

double distance_mse(const Tensor& a, const Tensor& b);
// -sum softmax(target) * log softmax(generated), softmax taken over all
// elements jointly and the log clamped below at 1e-12.
double distance_xe(const Tensor& target, const Tensor& generated);
// Distance value; writes d(distance)/d(generated) into `grad` when non-null.
double distance_value(Distance kind, const Tensor& target, const Tensor& generated, Tensor* grad = nullptr);

// sum_i omega_i (mu_Z(i) - mean(z^i))^2 over raw moments i = 1..k.
double moment_penalty(std::span<const double> z, const PriorSpec& prior, int k, std::span<const double> omega);
std::vector<double> moment_penalty_gradient(std::span<const double> z, const PriorSpec& prior, int k,
                                            std::span<const double> omega);

LossTerms latent_loss(const Tensor& target, const Tensor& z, const GeneratorModel& model, const AttackConfig& cfg,
                      std::optional<std::size_t> y = std::nullopt);

Tensor clip_hard(const Tensor& z);
// Coordinates outside [-1, 1] are redrawn uniformly from [-1, 1].
Tensor clip_stochastic(const Tensor& z, std::mt19937_64& rng);

// Adam descent on the latent loss starting from a prior draw, returning the
// lowest-loss recorded iterate. Target, model and class are left untouched.
AttackResult search(const GeneratorModel& model, const Tensor& target, const AttackConfig& cfg,
                    std::optional<std::size_t> y = std::nullopt);

// The seeded starting point search() uses. Under either clipping mode the
// draw is clamped to [-1, 1].
Tensor initial_latent(const GeneratorModel& model, const AttackConfig& cfg);

// (1 - t) z_a + t z_b at `steps` evenly spaced t in [0, 1].
std::vector<Tensor> interpolate(const Tensor& z_a, const Tensor& z_b, std::size_t steps);

}  // namespace odx
