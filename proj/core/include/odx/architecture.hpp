#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "odx/network.hpp"

namespace odx {

// Weight-free description of one layer. `units` is the output width of a
// dense layer or the output channel count of a (transposed) convolution.
struct LayerPlan {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t factor = 1;
  Shape target_shape;
};

struct Architecture {
  std::string name;
  std::vector<LayerPlan> layers;
};

// Built-in desk-scale generator stacks, all emitting (3, 8, 8) images:
//   mlp     dense(128) relu dense(192) reshape tanh
//   dcgan   dense reshape(32,2,2) bn relu convT(16) bn relu convT(3) tanh
//   upconv  dense reshape(16,4,4) relu upsample(2) conv(3) tanh
Architecture architecture_preset(std::string_view name);
std::vector<std::string> architecture_preset_names();

// Parses {"name": ..., "layers": [{"kind": "dense", "units": 64}, ...]}.
Architecture parse_architecture(std::string_view json_text);

// Glorot-uniform weights, zero biases; batchnorm layers get randomised
// running statistics. Weights are rounded to f32.
Network init_network(const Shape& input_shape, const std::vector<LayerPlan>& plan, std::mt19937_64& rng);

// A concat_onehot layer is prepended when `classes` is set.
GeneratorModel init_generator(const Architecture& arch, std::size_t latent_dim, PriorSpec prior,
                              std::optional<std::size_t> classes, std::uint64_t seed);

// Max over latent coordinates of |analytic - central difference| /
// max(1e-12, |central difference|) for the scalar c . G(z), where c is a
// fixed pseudo-random projection drawn from `projection_seed`.
double finite_diff_check(const GeneratorModel& model, const Tensor& z, std::optional<std::size_t> y, double step,
                         std::uint64_t projection_seed = 0x5eed);

}  // namespace odx
