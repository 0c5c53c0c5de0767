#include "odx/network.hpp"

#include <algorithm>
#include <cmath>

#include "odx/errors.hpp"

namespace odx {

namespace {

void round_tensor(Tensor& t) {
  for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace

Network::Network(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (input_shape_.empty() || shape_size(input_shape_) == 0) throw DimensionError("network input shape is empty");
  if (layers_.empty()) throw DimensionError("network has no layers");
  shapes_.reserve(layers_.size() + 1);
  shapes_.push_back(input_shape_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind == LayerKind::concat_onehot && i != 0) {
      throw DimensionError("concat_onehot is only allowed as the first layer");
    }
    try {
      shapes_.push_back(layer_ops::output_shape(layers_[i], shapes_.back()));
    } catch (const DimensionError& e) {
      throw DimensionError("layer " + std::to_string(i) + ": " + e.what());
    }
  }
}

void Network::check_input(const Tensor& x) const {
  if (x.shape() != input_shape_ && !(x.size() == shape_size(input_shape_) && input_shape_.size() == 1)) {
    throw DimensionError("network input: expected shape " + shape_to_string(input_shape_) + ", got " +
                         shape_to_string(x.shape()));
  }
}

Tensor Network::forward(const Tensor& x, std::optional<std::size_t> cls) const {
  check_input(x);
  Tensor cur = x.reshaped(input_shape_);
  for (const auto& layer : layers_) cur = layer_ops::forward(layer, cur, cls);
  return cur;
}

Network::Trace Network::trace(const Tensor& x, std::optional<std::size_t> cls) const {
  check_input(x);
  Trace t;
  t.cls = cls;
  t.activations.reserve(layers_.size() + 1);
  t.activations.push_back(x.reshaped(input_shape_));
  for (const auto& layer : layers_) t.activations.push_back(layer_ops::forward(layer, t.activations.back(), cls));
  return t;
}

Tensor Network::backward(const Trace& trace, const Tensor& d_out, WeightGrads* grads) const {
  if (trace.activations.size() != layers_.size() + 1) throw DimensionError("trace does not belong to this network");
  if (d_out.size() != shape_size(output_shape())) {
    throw DimensionError("output gradient: expected shape " + shape_to_string(output_shape()) + ", got " +
                         shape_to_string(d_out.shape()));
  }
  if (grads && grads->size() != layers_.size()) *grads = zero_grads();
  Tensor d = d_out.reshaped(output_shape());
  for (std::size_t i = layers_.size(); i-- > 0;) {
    d = layer_ops::backward(layers_[i], trace.activations[i], trace.activations[i + 1], d,
                            grads ? &(*grads)[i] : nullptr);
  }
  return d;
}

WeightGrads Network::zero_grads() const {
  WeightGrads g(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!layers_[i].has_params()) continue;
    g[i].weight = Tensor(layers_[i].weight.shape());
    g[i].bias = Tensor(layers_[i].bias.shape());
  }
  return g;
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    if (!l.has_params()) continue;
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor*> Network::gradient_views(const WeightGrads& grads, const Network& net) {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i < net.layers_.size(); ++i) {
    if (!net.layers_[i].has_params()) continue;
    out.push_back(&grads[i].weight);
    out.push_back(&grads[i].bias);
  }
  return out;
}

void Network::round_to_f32() {
  for (auto& l : layers_) {
    round_tensor(l.weight);
    round_tensor(l.bias);
    round_tensor(l.running_mean);
    round_tensor(l.running_var);
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    if (l.has_params()) n += l.weight.size() + l.bias.size();
  }
  return n;
}

// ---------------------------------------------------------------------------

GeneratorModel::GeneratorModel(Network network, PriorSpec prior, std::optional<std::size_t> class_count,
                               OutputMap output_map, std::string dataset)
    : network_(std::move(network)),
      prior_(prior),
      class_count_(class_count),
      output_map_(output_map),
      dataset_(std::move(dataset)) {
  if (network_.input_shape().size() != 1) {
    throw DimensionError("generator input must be a latent vector, got " + shape_to_string(network_.input_shape()));
  }
  const auto& first = network_.layers().front();
  if (class_count_) {
    if (*class_count_ == 0) throw ConditioningError("conditional generator needs at least one class");
    if (first.kind != LayerKind::concat_onehot || first.classes != *class_count_) {
      throw ConditioningError("conditional generator must start with concat_onehot over " +
                              std::to_string(*class_count_) + " classes");
    }
  } else if (first.kind == LayerKind::concat_onehot) {
    throw ConditioningError("unconditional generator cannot contain concat_onehot");
  }
  if (output_map_ == OutputMap::unit_interval && network_.layers().back().kind != LayerKind::tanh) {
    throw DimensionError("generator with unit-interval output must end in tanh");
  }
}

void GeneratorModel::check_condition(std::optional<std::size_t> y) const {
  if (class_count_) {
    if (!y) throw ConditioningError("conditional generator requires a class index");
    if (*y >= *class_count_) {
      throw ConditioningError("class " + std::to_string(*y) + " out of range [0, " + std::to_string(*class_count_) +
                              ")");
    }
  } else if (y) {
    throw ConditioningError("unconditional generator does not take a class index");
  }
}

GeneratorModel::Pass GeneratorModel::run(const Tensor& z, std::optional<std::size_t> y) const {
  check_condition(y);
  if (z.size() != latent_dim()) {
    throw DimensionError("latent vector: expected length " + std::to_string(latent_dim()) + ", got " +
                         std::to_string(z.size()));
  }
  Pass p;
  p.trace = network_.trace(z, y);
  p.output = p.trace.output();
  if (output_map_ == OutputMap::unit_interval) {
    for (double& v : p.output.values()) v = (v + 1.0) * 0.5;
  }
  return p;
}

Tensor GeneratorModel::forward(const Tensor& z, std::optional<std::size_t> y) const { return run(z, y).output; }

Tensor GeneratorModel::backward(const Pass& pass, const Tensor& d_out, WeightGrads* grads) const {
  if (d_out.size() != pass.output.size()) {
    throw DimensionError("output gradient: expected shape " + shape_to_string(output_shape()) + ", got " +
                         shape_to_string(d_out.shape()));
  }
  Tensor d = d_out.reshaped(output_shape());
  if (output_map_ == OutputMap::unit_interval) {
    for (double& v : d.values()) v *= 0.5;
  }
  return network_.backward(pass.trace, d, grads);
}

Tensor GeneratorModel::backward_input(const Tensor& z, std::optional<std::size_t> y, const Tensor& d_out) const {
  return backward(run(z, y), d_out);
}

WeightGrads GeneratorModel::backward_weights(std::span<const Tensor> zs, std::span<const Tensor> d_outs,
                                             std::span<const std::size_t> ys) const {
  if (zs.size() != d_outs.size()) throw DimensionError("batch: latent and gradient counts differ");
  if (!ys.empty() && ys.size() != zs.size()) throw DimensionError("batch: class count differs from batch size");
  WeightGrads acc = network_.zero_grads();
  for (std::size_t i = 0; i < zs.size(); ++i) {
    std::optional<std::size_t> y;
    if (!ys.empty()) y = ys[i];
    backward(run(zs[i], y), d_outs[i], &acc);
  }
  return acc;
}

// ---------------------------------------------------------------------------

DiscriminatorModel::DiscriminatorModel(Network trunk, Network source_head, std::optional<Network> class_head)
    : trunk_(std::move(trunk)), source_(std::move(source_head)), class_(std::move(class_head)) {
  if (source_.input_shape() != trunk_.output_shape() && shape_size(source_.input_shape()) != shape_size(trunk_.output_shape())) {
    throw DimensionError("source head input does not match trunk output");
  }
  if (shape_size(source_.output_shape()) != 1) throw DimensionError("source head must emit a single logit");
  if (class_) {
    if (shape_size(class_->input_shape()) != shape_size(trunk_.output_shape())) {
      throw DimensionError("class head input does not match trunk output");
    }
    if (class_->output_shape().size() != 1 || class_->output_shape()[0] < 2) {
      throw DimensionError("class head must emit one logit per class (at least 2)");
    }
  }
}

std::optional<std::size_t> DiscriminatorModel::class_count() const {
  if (!class_) return std::nullopt;
  return class_->output_shape()[0];
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += (p[i] = std::exp(logits[i] - mx));
  for (double& v : p) v /= s;
  return p;
}

}  // namespace

DiscriminatorModel::Output DiscriminatorModel::forward(const Tensor& x) const {
  const Tensor feat = trunk_.forward(x);
  Output out;
  out.source_logit = source_.forward(feat.reshaped(source_.input_shape()))[0];
  out.source = sigmoid(out.source_logit);
  if (class_) {
    out.class_logits = class_->forward(feat.reshaped(class_->input_shape())).data();
    out.class_probs = softmax(out.class_logits);
  }
  return out;
}

Tensor DiscriminatorModel::backward(const Tensor& x, double d_source_logit, std::span<const double> d_class_logits,
                                    Grads* grads) const {
  const auto t = trunk_.trace(x);
  const Tensor& feat = t.output();
  Tensor d_feat(trunk_.output_shape());
  {
    const auto st = source_.trace(feat.reshaped(source_.input_shape()));
    const Tensor d = source_.backward(st, Tensor({1}, d_source_logit), grads ? &grads->source : nullptr);
    for (std::size_t i = 0; i < d.size(); ++i) d_feat[i] += d[i];
  }
  if (class_ && !d_class_logits.empty()) {
    if (d_class_logits.size() != *class_count()) throw DimensionError("class logit gradient has wrong length");
    const auto ct = class_->trace(feat.reshaped(class_->input_shape()));
    const Tensor d = class_->backward(
        ct, Tensor({d_class_logits.size()}, std::vector<double>(d_class_logits.begin(), d_class_logits.end())),
        grads ? &grads->cls : nullptr);
    for (std::size_t i = 0; i < d.size(); ++i) d_feat[i] += d[i];
  }
  return trunk_.backward(t, d_feat, grads ? &grads->trunk : nullptr);
}

DiscriminatorModel::Grads DiscriminatorModel::zero_grads() const {
  Grads g{trunk_.zero_grads(), source_.zero_grads(), {}};
  if (class_) g.cls = class_->zero_grads();
  return g;
}

DiscriminatorModel::Grads DiscriminatorModel::backward_weights(std::span<const Tensor> xs,
                                                               std::span<const double> d_source_logits,
                                                               std::span<const std::vector<double>> d_class_logits) const {
  if (xs.size() != d_source_logits.size()) throw DimensionError("batch: input and gradient counts differ");
  if (!d_class_logits.empty() && d_class_logits.size() != xs.size()) {
    throw DimensionError("batch: class gradient count differs from batch size");
  }
  Grads acc = zero_grads();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::span<const double> dc;
    if (!d_class_logits.empty()) dc = d_class_logits[i];
    backward(xs[i], d_source_logits[i], dc, &acc);
  }
  return acc;
}

std::vector<Tensor*> DiscriminatorModel::parameters() {
  auto p = trunk_.parameters();
  for (auto* t : source_.parameters()) p.push_back(t);
  if (class_) {
    for (auto* t : class_->parameters()) p.push_back(t);
  }
  return p;
}

std::vector<const Tensor*> DiscriminatorModel::gradient_views(const Grads& grads, const DiscriminatorModel& model) {
  auto v = Network::gradient_views(grads.trunk, model.trunk_);
  for (auto* t : Network::gradient_views(grads.source, model.source_)) v.push_back(t);
  if (model.class_) {
    for (auto* t : Network::gradient_views(grads.cls, *model.class_)) v.push_back(t);
  }
  return v;
}

void DiscriminatorModel::round_to_f32() {
  trunk_.round_to_f32();
  source_.round_to_f32();
  if (class_) class_->round_to_f32();
}

}  // namespace odx
