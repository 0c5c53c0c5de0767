#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odx/layers.hpp"
#include "odx/prior.hpp"
#include "odx/tensor.hpp"

namespace odx {

// Validated, immutable layer stack with forward evaluation and reverse-mode
// gradients. Shapes are inferred at construction so every call site can
// trust adjacent layers to agree.
class Network {
 public:
  // Cached activations of one forward pass: activations[0] is the input,
  // activations[i + 1] the output of layer i.
  struct Trace {
    std::vector<Tensor> activations;
    std::optional<std::size_t> cls;

    const Tensor& output() const { return activations.back(); }
  };

  Network() = default;
  Network(Shape input_shape, std::vector<Layer> layers);

  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept { return shapes_.back(); }
  // shapes()[i] is the input shape of layer i; the last entry is the output.
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  Tensor forward(const Tensor& x, std::optional<std::size_t> cls = std::nullopt) const;
  Trace trace(const Tensor& x, std::optional<std::size_t> cls = std::nullopt) const;

  // d(loss)/d(input) given d(loss)/d(output). When `grads` is non-null the
  // weight gradients are added into it (so batches accumulate as a sum).
  Tensor backward(const Trace& trace, const Tensor& d_out, WeightGrads* grads = nullptr) const;

  WeightGrads zero_grads() const;

  // Trainable tensors in layer order (weight then bias of each
  // parameterised layer). Used by optimisers; shapes must not be changed.
  std::vector<Tensor*> parameters();
  static std::vector<const Tensor*> gradient_views(const WeightGrads& grads, const Network& net);

  // Rounds every stored tensor to the nearest 32-bit float so that the model
  // survives a GTC round trip bit-for-bit.
  void round_to_f32();

  std::size_t parameter_count() const;

 private:
  void check_input(const Tensor& x) const;

  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;
};

enum class OutputMap {
  // final tanh followed by (x + 1) / 2, giving images in [0, 1]
  unit_interval,
  // raw network output; for analysis fixtures only
  identity,
};

// G: Z -> X. Conditional generators take a class index that is appended to
// z as a one-hot block by a leading concat_onehot layer.
class GeneratorModel {
 public:
  GeneratorModel(Network network, PriorSpec prior, std::optional<std::size_t> class_count = std::nullopt,
                 OutputMap output_map = OutputMap::unit_interval, std::string dataset = {});

  const Network& network() const noexcept { return network_; }
  Network& mutable_network() noexcept { return network_; }
  std::size_t latent_dim() const noexcept { return network_.input_shape()[0]; }
  const PriorSpec& prior() const noexcept { return prior_; }
  std::optional<std::size_t> class_count() const noexcept { return class_count_; }
  bool conditional() const noexcept { return class_count_.has_value(); }
  OutputMap output_map() const noexcept { return output_map_; }
  const Shape& output_shape() const noexcept { return network_.output_shape(); }
  // Name of the training dataset, if known. Used as the row label in reports.
  const std::string& dataset() const noexcept { return dataset_; }
  void set_dataset(std::string name) { dataset_ = std::move(name); }

  Tensor forward(const Tensor& z, std::optional<std::size_t> y = std::nullopt) const;

  // One forward pass whose trace can be reused for the backward pass.
  struct Pass {
    Network::Trace trace;
    Tensor output;
  };
  Pass run(const Tensor& z, std::optional<std::size_t> y = std::nullopt) const;
  // Vector-Jacobian product d_out^T dG/dz over the latent coordinates only.
  Tensor backward(const Pass& pass, const Tensor& d_out, WeightGrads* grads = nullptr) const;

  Tensor backward_input(const Tensor& z, std::optional<std::size_t> y, const Tensor& d_out) const;

  // Summed weight gradients over a batch. `ys` is empty for unconditional
  // models, otherwise one class per sample.
  WeightGrads backward_weights(std::span<const Tensor> zs, std::span<const Tensor> d_outs,
                               std::span<const std::size_t> ys = {}) const;

 private:
  void check_condition(std::optional<std::size_t> y) const;

  Network network_;
  PriorSpec prior_;
  std::optional<std::size_t> class_count_;
  OutputMap output_map_;
  std::string dataset_;
};

// D: X -> [0, 1] with an optional auxiliary class head. Heads emit logits;
// forward() applies sigmoid / softmax.
class DiscriminatorModel {
 public:
  struct Output {
    double source_logit = 0.0;
    double source = 0.0;
    std::vector<double> class_logits;
    std::vector<double> class_probs;
  };

  struct Grads {
    WeightGrads trunk;
    WeightGrads source;
    WeightGrads cls;
  };

  DiscriminatorModel(Network trunk, Network source_head, std::optional<Network> class_head = std::nullopt);

  const Network& trunk() const noexcept { return trunk_; }
  const Network& source_head() const noexcept { return source_; }
  const std::optional<Network>& class_head() const noexcept { return class_; }
  Network& mutable_trunk() noexcept { return trunk_; }
  Network& mutable_source_head() noexcept { return source_; }
  Network* mutable_class_head() noexcept { return class_ ? &*class_ : nullptr; }
  const Shape& input_shape() const noexcept { return trunk_.input_shape(); }
  std::optional<std::size_t> class_count() const;

  Output forward(const Tensor& x) const;

  // Backpropagates d(loss)/d(source_logit) and d(loss)/d(class_logits) to the
  // input image; weight gradients are accumulated into `grads` if given.
  Tensor backward(const Tensor& x, double d_source_logit, std::span<const double> d_class_logits,
                  Grads* grads = nullptr) const;

  Grads zero_grads() const;

  // Summed weight gradients over a batch; `d_class_logits` may be empty when
  // there is no class head.
  Grads backward_weights(std::span<const Tensor> xs, std::span<const double> d_source_logits,
                         std::span<const std::vector<double>> d_class_logits = {}) const;

  std::vector<Tensor*> parameters();
  static std::vector<const Tensor*> gradient_views(const Grads& grads, const DiscriminatorModel& model);
  void round_to_f32();

 private:
  Network trunk_;
  Network source_;
  std::optional<Network> class_;
};

}  // namespace odx
