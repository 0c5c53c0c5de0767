#include "odx/architecture.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "odx/errors.hpp"

namespace odx {

namespace {

LayerPlan plan(LayerKind kind) {
  LayerPlan p;
  p.kind = kind;
  return p;
}

LayerPlan dense(std::size_t units) {
  LayerPlan p = plan(LayerKind::dense);
  p.units = units;
  return p;
}

LayerPlan conv_like(LayerKind kind, std::size_t units, std::size_t kernel, std::size_t stride, std::size_t padding) {
  LayerPlan p = plan(kind);
  p.units = units;
  p.kernel = kernel;
  p.stride = stride;
  p.padding = padding;
  return p;
}

LayerPlan reshape(Shape s) {
  LayerPlan p = plan(LayerKind::reshape);
  p.target_shape = std::move(s);
  return p;
}

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor uniform_tensor(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t({n});
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

Architecture architecture_preset(std::string_view name) {
  if (name == "mlp") {
    return {"mlp", {dense(128), plan(LayerKind::relu), dense(192), reshape({3, 8, 8}), plan(LayerKind::tanh)}};
  }
  if (name == "dcgan") {
    return {"dcgan",
            {dense(128), reshape({32, 2, 2}), plan(LayerKind::batchnorm_inference), plan(LayerKind::relu),
             conv_like(LayerKind::conv_transpose, 16, 4, 2, 1), plan(LayerKind::batchnorm_inference),
             plan(LayerKind::relu), conv_like(LayerKind::conv_transpose, 3, 4, 2, 1), plan(LayerKind::tanh)}};
  }
  if (name == "upconv") {
    LayerPlan up = plan(LayerKind::upsample_nearest);
    up.factor = 2;
    return {"upconv",
            {dense(256), reshape({16, 4, 4}), plan(LayerKind::relu), up, conv_like(LayerKind::conv, 3, 3, 1, 1),
             plan(LayerKind::tanh)}};
  }
  throw ConfigurationError("unknown architecture preset '" + std::string(name) + "'");
}

std::vector<std::string> architecture_preset_names() { return {"mlp", "dcgan", "upconv"}; }

Architecture parse_architecture(std::string_view json_text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("architecture file is not valid JSON: ") + e.what(), e.byte);
  }
  try {
    Architecture a;
    a.name = j.value("name", std::string("custom"));
    for (const auto& lj : j.at("layers")) {
      LayerPlan p = plan(parse_layer_kind(lj.at("kind").get<std::string>()));
      p.units = lj.value("units", std::size_t{0});
      p.kernel = lj.value("kernel", std::size_t{0});
      p.stride = lj.value("stride", std::size_t{1});
      p.padding = lj.value("padding", std::size_t{0});
      p.factor = lj.value("factor", std::size_t{1});
      if (lj.contains("target_shape")) p.target_shape = lj.at("target_shape").get<Shape>();
      if (p.kind == LayerKind::concat_onehot) {
        throw ConfigurationError("concat_onehot is added automatically for conditional models");
      }
      a.layers.push_back(std::move(p));
    }
    return a;
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("malformed architecture file: ") + e.what());
  }
}

Network init_network(const Shape& input_shape, const std::vector<LayerPlan>& plans, std::mt19937_64& rng) {
  std::vector<Layer> layers;
  Shape cur = input_shape;
  for (const auto& p : plans) {
    Layer l;
    switch (p.kind) {
      case LayerKind::dense: {
        if (p.units == 0) throw ConfigurationError("dense layer needs units > 0");
        const std::size_t in = shape_size(cur);
        l = Layer::dense(glorot({p.units, in}, in, p.units, rng), Tensor({p.units}));
        break;
      }
      case LayerKind::conv:
      case LayerKind::conv_transpose: {
        if (cur.size() != 3) throw DimensionError("convolution needs a (C, H, W) input, got " + shape_to_string(cur));
        if (p.units == 0 || p.kernel == 0) throw ConfigurationError("convolution needs units and kernel > 0");
        const std::size_t k2 = p.kernel * p.kernel;
        const std::size_t c_in = cur[0];
        Shape ws = p.kind == LayerKind::conv ? Shape{p.units, c_in, p.kernel, p.kernel}
                                             : Shape{c_in, p.units, p.kernel, p.kernel};
        Tensor w = glorot(ws, c_in * k2, p.units * k2, rng);
        l = p.kind == LayerKind::conv ? Layer::conv(std::move(w), Tensor({p.units}), p.stride, p.padding)
                                      : Layer::conv_transpose(std::move(w), Tensor({p.units}), p.stride, p.padding);
        break;
      }
      case LayerKind::batchnorm_inference: {
        const std::size_t c = cur.at(0);
        l = Layer::batchnorm(uniform_tensor(c, 0.8, 1.2, rng), uniform_tensor(c, -0.1, 0.1, rng),
                             uniform_tensor(c, -0.1, 0.1, rng), uniform_tensor(c, 0.5, 1.5, rng));
        break;
      }
      case LayerKind::relu:
      case LayerKind::tanh:
      case LayerKind::sigmoid:
        l = Layer::activation(p.kind);
        break;
      case LayerKind::reshape:
        l = Layer::reshape(p.target_shape);
        break;
      case LayerKind::upsample_nearest:
        l = Layer::upsample(p.factor);
        break;
      case LayerKind::concat_onehot:
        l = Layer::concat_onehot(p.units);
        break;
    }
    cur = layer_ops::output_shape(l, cur);
    layers.push_back(std::move(l));
  }
  Network net(input_shape, std::move(layers));
  net.round_to_f32();
  return net;
}

GeneratorModel init_generator(const Architecture& arch, std::size_t latent_dim, PriorSpec prior,
                              std::optional<std::size_t> classes, std::uint64_t seed) {
  if (latent_dim == 0) throw ParameterError("latent dimension must be positive");
  std::vector<LayerPlan> plans;
  if (classes) {
    LayerPlan c = plan(LayerKind::concat_onehot);
    c.units = *classes;
    plans.push_back(c);
  }
  plans.insert(plans.end(), arch.layers.begin(), arch.layers.end());
  std::mt19937_64 rng(seed);
  return GeneratorModel(init_network({latent_dim}, plans, rng), prior, classes, OutputMap::unit_interval, "");
}

double finite_diff_check(const GeneratorModel& model, const Tensor& z, std::optional<std::size_t> y, double step,
                         std::uint64_t projection_seed) {
  if (!(step > 0.0)) throw ParameterError("finite-difference step must be positive");
  std::mt19937_64 rng(projection_seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor proj(model.output_shape());
  for (double& v : proj.values()) v = dist(rng);

  auto objective = [&](const Tensor& zz) {
    const Tensor out = model.forward(zz, y);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += proj[i] * out[i];
    return s;
  };

  const Tensor analytic = model.backward_input(z, y, proj);
  double worst = 0.0;
  Tensor probe = z;
  for (std::size_t j = 0; j < z.size(); ++j) {
    probe[j] = z[j] + step;
    const double up = objective(probe);
    probe[j] = z[j] - step;
    const double down = objective(probe);
    probe[j] = z[j];
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic[j] - numeric) / std::max(1e-12, std::abs(numeric)));
  }
  return worst;
}

}  // namespace odx
