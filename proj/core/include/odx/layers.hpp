#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "odx/tensor.hpp"

namespace odx {

enum class LayerKind {
  dense,
  conv,
  conv_transpose,
  batchnorm_inference,
  relu,
  tanh,
  sigmoid,
  reshape,
  upsample_nearest,
  concat_onehot,
};

std::string_view layer_kind_name(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

// One entry of the fixed layer vocabulary. Only the fields relevant to
// `kind` are populated:
//
//   dense                weight (out, in), bias (out); input is flattened
//   conv                 weight (c_out, c_in, kh, kw), bias (c_out), stride, padding
//   conv_transpose       weight (c_in, c_out, kh, kw), bias (c_out), stride, padding;
//                        the adjoint of `conv` with the same weight tensor
//   batchnorm_inference  weight = gamma (C), bias = beta (C), running_mean,
//                        running_var, epsilon; channel axis is dim 0
//   reshape              target_shape
//   upsample_nearest     factor
//   concat_onehot        classes; appends one_hot(y) to a 1-D input
struct Layer {
  LayerKind kind = LayerKind::relu;
  Tensor weight;
  Tensor bias;
  Tensor running_mean;
  Tensor running_var;
  double epsilon = 1e-5;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t factor = 1;
  std::size_t classes = 0;
  Shape target_shape;

  static Layer dense(Tensor weight, Tensor bias);
  static Layer conv(Tensor weight, Tensor bias, std::size_t stride, std::size_t padding);
  static Layer conv_transpose(Tensor weight, Tensor bias, std::size_t stride, std::size_t padding);
  static Layer batchnorm(Tensor gamma, Tensor beta, Tensor running_mean, Tensor running_var, double epsilon = 1e-5);
  static Layer activation(LayerKind kind);
  static Layer reshape(Shape target);
  static Layer upsample(std::size_t factor);
  static Layer concat_onehot(std::size_t classes);

  // True for layers with trainable weight/bias tensors.
  bool has_params() const noexcept;

  friend bool operator==(const Layer&, const Layer&) = default;
};

// Gradient of a scalar loss with respect to one layer's weight and bias.
// Both tensors are empty for parameter-free layers.
struct LayerGrad {
  Tensor weight;
  Tensor bias;
};

using WeightGrads = std::vector<LayerGrad>;

namespace layer_ops {

// Output shape for `in`, throwing DimensionError when incompatible.
Shape output_shape(const Layer& layer, const Shape& in);

Tensor forward(const Layer& layer, const Tensor& in, std::optional<std::size_t> cls);

// Vector-Jacobian product through one layer. `out` is the cached forward
// output. Weight gradients are accumulated into `grad` when non-null.
Tensor backward(const Layer& layer, const Tensor& in, const Tensor& out, const Tensor& d_out, LayerGrad* grad);

}  // namespace layer_ops

}  // namespace odx
