#include "odx/layers.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "odx/errors.hpp"

namespace odx {

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 10> kKindNames{{
    {LayerKind::dense, "dense"},
    {LayerKind::conv, "conv"},
    {LayerKind::conv_transpose, "conv_transpose"},
    {LayerKind::batchnorm_inference, "batchnorm_inference"},
    {LayerKind::relu, "relu"},
    {LayerKind::tanh, "tanh"},
    {LayerKind::sigmoid, "sigmoid"},
    {LayerKind::reshape, "reshape"},
    {LayerKind::upsample_nearest, "upsample_nearest"},
    {LayerKind::concat_onehot, "concat_onehot"},
}};

[[noreturn]] void dim_error(const Layer& layer, const std::string& msg) {
  throw DimensionError(std::string(layer_kind_name(layer.kind)) + ": " + msg);
}

struct ConvGeometry {
  std::size_t c_in, h_in, w_in;
  std::size_t c_out, h_out, w_out;
  std::size_t kh, kw;
};

// Geometry of the underlying convolution. For conv_transpose the roles of
// the two sides are swapped: its input is the convolution's output.
ConvGeometry conv_geometry(const Layer& layer, const Shape& in) {
  if (in.size() != 3) dim_error(layer, "expects (channels, height, width) input, got " + shape_to_string(in));
  if (layer.weight.rank() != 4) dim_error(layer, "weight must be 4-D, got " + shape_to_string(layer.weight.shape()));
  if (layer.stride == 0) dim_error(layer, "stride must be positive");
  const auto& ws = layer.weight.shape();
  ConvGeometry g{};
  g.kh = ws[2];
  g.kw = ws[3];
  const std::size_t p2 = 2 * layer.padding;
  if (layer.kind == LayerKind::conv) {
    g.c_out = ws[0];
    g.c_in = ws[1];
    if (in[0] != g.c_in) dim_error(layer, "input channels " + std::to_string(in[0]) + " != " + std::to_string(g.c_in));
    g.h_in = in[1];
    g.w_in = in[2];
    if (g.h_in + p2 < g.kh || g.w_in + p2 < g.kw) dim_error(layer, "kernel larger than padded input");
    g.h_out = (g.h_in + p2 - g.kh) / layer.stride + 1;
    g.w_out = (g.w_in + p2 - g.kw) / layer.stride + 1;
  } else {
    // conv_transpose: input is (c_out_conv = ws[0], h, w)
    g.c_out = ws[0];
    g.c_in = ws[1];
    if (in[0] != g.c_out) dim_error(layer, "input channels " + std::to_string(in[0]) + " != " + std::to_string(g.c_out));
    g.h_out = in[1];
    g.w_out = in[2];
    const std::size_t h_full = (g.h_out - 1) * layer.stride + g.kh;
    const std::size_t w_full = (g.w_out - 1) * layer.stride + g.kw;
    if (h_full <= p2 || w_full <= p2) dim_error(layer, "padding consumes the whole output");
    g.h_in = h_full - p2;
    g.w_in = w_full - p2;
  }
  if (layer.bias.size() != (layer.kind == LayerKind::conv ? g.c_out : g.c_in)) {
    dim_error(layer, "bias length " + std::to_string(layer.bias.size()) + " does not match output channels");
  }
  return g;
}

// Visits every (output position, input position, weight index) triple of a
// zero-padded convolution. Shared by conv and its adjoint so the two are
// exact transposes of one another.
template <typename F>
void for_each_tap(const ConvGeometry& g, std::size_t stride, std::size_t padding, F&& f) {
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  for (std::size_t co = 0; co < g.c_out; ++co) {
    for (std::size_t oy = 0; oy < g.h_out; ++oy) {
      for (std::size_t ox = 0; ox < g.w_out; ++ox) {
        const std::size_t o = (co * g.h_out + oy) * g.w_out + ox;
        for (std::size_t ci = 0; ci < g.c_in; ++ci) {
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h_in)) continue;
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w_in)) continue;
              const std::size_t i = (ci * g.h_in + static_cast<std::size_t>(iy)) * g.w_in + static_cast<std::size_t>(ix);
              const std::size_t w = ((co * g.c_in + ci) * g.kh + ky) * g.kw + kx;
              f(o, i, w);
            }
          }
        }
      }
    }
  }
}

std::size_t channel_count(const Shape& in) { return in.empty() ? 0 : in[0]; }

void ensure_grad_shapes(const Layer& layer, LayerGrad& g) {
  if (g.weight.shape() != layer.weight.shape()) g.weight = Tensor(layer.weight.shape());
  if (g.bias.shape() != layer.bias.shape()) g.bias = Tensor(layer.bias.shape());
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ConfigurationError("unknown layer kind '" + std::string(name) + "'");
}

Layer Layer::dense(Tensor weight, Tensor bias) {
  Layer l;
  l.kind = LayerKind::dense;
  l.weight = std::move(weight);
  l.bias = std::move(bias);
  return l;
}

Layer Layer::conv(Tensor weight, Tensor bias, std::size_t stride, std::size_t padding) {
  Layer l;
  l.kind = LayerKind::conv;
  l.weight = std::move(weight);
  l.bias = std::move(bias);
  l.stride = stride;
  l.padding = padding;
  return l;
}

Layer Layer::conv_transpose(Tensor weight, Tensor bias, std::size_t stride, std::size_t padding) {
  Layer l = conv(std::move(weight), std::move(bias), stride, padding);
  l.kind = LayerKind::conv_transpose;
  return l;
}

Layer Layer::batchnorm(Tensor gamma, Tensor beta, Tensor running_mean, Tensor running_var, double epsilon) {
  Layer l;
  l.kind = LayerKind::batchnorm_inference;
  l.weight = std::move(gamma);
  l.bias = std::move(beta);
  l.running_mean = std::move(running_mean);
  l.running_var = std::move(running_var);
  l.epsilon = epsilon;
  return l;
}

Layer Layer::activation(LayerKind kind) {
  if (kind != LayerKind::relu && kind != LayerKind::tanh && kind != LayerKind::sigmoid) {
    throw ConfigurationError("not an activation: " + std::string(layer_kind_name(kind)));
  }
  Layer l;
  l.kind = kind;
  return l;
}

Layer Layer::reshape(Shape target) {
  Layer l;
  l.kind = LayerKind::reshape;
  l.target_shape = std::move(target);
  return l;
}

Layer Layer::upsample(std::size_t factor) {
  Layer l;
  l.kind = LayerKind::upsample_nearest;
  l.factor = factor;
  return l;
}

Layer Layer::concat_onehot(std::size_t classes) {
  Layer l;
  l.kind = LayerKind::concat_onehot;
  l.classes = classes;
  return l;
}

bool Layer::has_params() const noexcept {
  switch (kind) {
    case LayerKind::dense:
    case LayerKind::conv:
    case LayerKind::conv_transpose:
    case LayerKind::batchnorm_inference:
      return true;
    default:
      return false;
  }
}

namespace layer_ops {

Shape output_shape(const Layer& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::dense: {
      if (layer.weight.rank() != 2) dim_error(layer, "weight must be 2-D");
      const auto out = layer.weight.shape()[0];
      if (layer.weight.shape()[1] != shape_size(in)) {
        dim_error(layer, "expects " + std::to_string(layer.weight.shape()[1]) + " inputs, got " +
                             shape_to_string(in));
      }
      if (layer.bias.shape() != Shape{out}) dim_error(layer, "bias must have shape (" + std::to_string(out) + ")");
      return {out};
    }
    case LayerKind::conv:
    case LayerKind::conv_transpose: {
      const auto g = conv_geometry(layer, in);
      return layer.kind == LayerKind::conv ? Shape{g.c_out, g.h_out, g.w_out} : Shape{g.c_in, g.h_in, g.w_in};
    }
    case LayerKind::batchnorm_inference: {
      const auto c = channel_count(in);
      const Shape cs{c};
      if (layer.weight.shape() != cs || layer.bias.shape() != cs || layer.running_mean.shape() != cs ||
          layer.running_var.shape() != cs) {
        dim_error(layer, "parameters must all have shape (" + std::to_string(c) + ")");
      }
      for (double v : layer.running_var.values()) {
        if (!(v > 0.0)) dim_error(layer, "running variance entries must be strictly positive");
      }
      if (!(layer.epsilon >= 0.0)) dim_error(layer, "epsilon must be non-negative");
      return in;
    }
    case LayerKind::relu:
    case LayerKind::tanh:
    case LayerKind::sigmoid:
      return in;
    case LayerKind::reshape:
      if (shape_size(layer.target_shape) != shape_size(in) || layer.target_shape.empty()) {
        dim_error(layer, "cannot reshape " + shape_to_string(in) + " to " + shape_to_string(layer.target_shape));
      }
      return layer.target_shape;
    case LayerKind::upsample_nearest:
      if (in.size() != 3) dim_error(layer, "expects (channels, height, width) input");
      if (layer.factor == 0) dim_error(layer, "factor must be positive");
      return {in[0], in[1] * layer.factor, in[2] * layer.factor};
    case LayerKind::concat_onehot:
      if (in.size() != 1) dim_error(layer, "expects a 1-D input, got " + shape_to_string(in));
      if (layer.classes == 0) dim_error(layer, "class count must be positive");
      return {in[0] + layer.classes};
  }
  dim_error(layer, "unhandled layer kind");
}

Tensor forward(const Layer& layer, const Tensor& in, std::optional<std::size_t> cls) {
  Tensor out(output_shape(layer, in.shape()));
  auto o = out.values();
  const auto x = in.values();
  switch (layer.kind) {
    case LayerKind::dense: {
      const std::size_t n_out = o.size();
      const std::size_t n_in = x.size();
      const auto w = layer.weight.values();
      for (std::size_t r = 0; r < n_out; ++r) {
        double acc = layer.bias[r];
        const double* row = w.data() + r * n_in;
        for (std::size_t c = 0; c < n_in; ++c) acc += row[c] * x[c];
        o[r] = acc;
      }
      break;
    }
    case LayerKind::conv: {
      const auto g = conv_geometry(layer, in.shape());
      const auto w = layer.weight.values();
      for (std::size_t co = 0; co < g.c_out; ++co) {
        for (std::size_t j = 0; j < g.h_out * g.w_out; ++j) o[co * g.h_out * g.w_out + j] = layer.bias[co];
      }
      for_each_tap(g, layer.stride, layer.padding,
                   [&](std::size_t oi, std::size_t ii, std::size_t wi) { o[oi] += w[wi] * x[ii]; });
      break;
    }
    case LayerKind::conv_transpose: {
      const auto g = conv_geometry(layer, in.shape());
      const auto w = layer.weight.values();
      for (std::size_t ci = 0; ci < g.c_in; ++ci) {
        for (std::size_t j = 0; j < g.h_in * g.w_in; ++j) o[ci * g.h_in * g.w_in + j] = layer.bias[ci];
      }
      for_each_tap(g, layer.stride, layer.padding,
                   [&](std::size_t oi, std::size_t ii, std::size_t wi) { o[ii] += w[wi] * x[oi]; });
      break;
    }
    case LayerKind::batchnorm_inference: {
      const std::size_t c = in.shape()[0];
      const std::size_t per = x.size() / c;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double scale = layer.weight[ch] / std::sqrt(layer.running_var[ch] + layer.epsilon);
        const double shift = layer.bias[ch] - layer.running_mean[ch] * scale;
        for (std::size_t j = 0; j < per; ++j) o[ch * per + j] = x[ch * per + j] * scale + shift;
      }
      break;
    }
    case LayerKind::relu:
      for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case LayerKind::tanh:
      for (std::size_t i = 0; i < x.size(); ++i) o[i] = std::tanh(x[i]);
      break;
    case LayerKind::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) o[i] = 1.0 / (1.0 + std::exp(-x[i]));
      break;
    case LayerKind::reshape:
      std::copy(x.begin(), x.end(), o.begin());
      break;
    case LayerKind::upsample_nearest: {
      const auto& s = in.shape();
      const std::size_t f = layer.factor;
      const std::size_t ho = s[1] * f, wo = s[2] * f;
      for (std::size_t ch = 0; ch < s[0]; ++ch) {
        for (std::size_t y = 0; y < ho; ++y) {
          for (std::size_t xx = 0; xx < wo; ++xx) {
            o[(ch * ho + y) * wo + xx] = x[(ch * s[1] + y / f) * s[2] + xx / f];
          }
        }
      }
      break;
    }
    case LayerKind::concat_onehot: {
      if (!cls) throw ConditioningError("concat_onehot: a class index is required");
      if (*cls >= layer.classes) {
        throw ConditioningError("class " + std::to_string(*cls) + " out of range for " +
                                std::to_string(layer.classes) + " classes");
      }
      std::copy(x.begin(), x.end(), o.begin());
      o[x.size() + *cls] = 1.0;
      break;
    }
  }
  return out;
}

Tensor backward(const Layer& layer, const Tensor& in, const Tensor& out, const Tensor& d_out, LayerGrad* grad) {
  require_same_shape(out, d_out, "layer backward");
  Tensor d_in(in.shape());
  auto di = d_in.values();
  const auto x = in.values();
  const auto y = out.values();
  const auto dy = d_out.values();
  if (grad && layer.has_params()) ensure_grad_shapes(layer, *grad);
  switch (layer.kind) {
    case LayerKind::dense: {
      const std::size_t n_out = dy.size();
      const std::size_t n_in = x.size();
      const auto w = layer.weight.values();
      for (std::size_t r = 0; r < n_out; ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        const double* row = w.data() + r * n_in;
        for (std::size_t c = 0; c < n_in; ++c) di[c] += row[c] * g;
      }
      if (grad) {
        auto gw = grad->weight.values();
        for (std::size_t r = 0; r < n_out; ++r) {
          const double g = dy[r];
          grad->bias[r] += g;
          if (g == 0.0) continue;
          double* row = gw.data() + r * n_in;
          for (std::size_t c = 0; c < n_in; ++c) row[c] += g * x[c];
        }
      }
      break;
    }
    case LayerKind::conv: {
      const auto g = conv_geometry(layer, in.shape());
      const auto w = layer.weight.values();
      if (grad) {
        auto gw = grad->weight.values();
        for_each_tap(g, layer.stride, layer.padding, [&](std::size_t oi, std::size_t ii, std::size_t wi) {
          di[ii] += w[wi] * dy[oi];
          gw[wi] += dy[oi] * x[ii];
        });
        const std::size_t per = g.h_out * g.w_out;
        for (std::size_t co = 0; co < g.c_out; ++co) {
          for (std::size_t j = 0; j < per; ++j) grad->bias[co] += dy[co * per + j];
        }
      } else {
        for_each_tap(g, layer.stride, layer.padding,
                     [&](std::size_t oi, std::size_t ii, std::size_t wi) { di[ii] += w[wi] * dy[oi]; });
      }
      break;
    }
    case LayerKind::conv_transpose: {
      const auto g = conv_geometry(layer, in.shape());
      const auto w = layer.weight.values();
      if (grad) {
        auto gw = grad->weight.values();
        for_each_tap(g, layer.stride, layer.padding, [&](std::size_t oi, std::size_t ii, std::size_t wi) {
          di[oi] += w[wi] * dy[ii];
          gw[wi] += x[oi] * dy[ii];
        });
        const std::size_t per = g.h_in * g.w_in;
        for (std::size_t ci = 0; ci < g.c_in; ++ci) {
          for (std::size_t j = 0; j < per; ++j) grad->bias[ci] += dy[ci * per + j];
        }
      } else {
        for_each_tap(g, layer.stride, layer.padding,
                     [&](std::size_t oi, std::size_t ii, std::size_t wi) { di[oi] += w[wi] * dy[ii]; });
      }
      break;
    }
    case LayerKind::batchnorm_inference: {
      const std::size_t c = in.shape()[0];
      const std::size_t per = x.size() / c;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double inv_std = 1.0 / std::sqrt(layer.running_var[ch] + layer.epsilon);
        const double scale = layer.weight[ch] * inv_std;
        double g_gamma = 0.0, g_beta = 0.0;
        for (std::size_t j = 0; j < per; ++j) {
          const std::size_t i = ch * per + j;
          di[i] = dy[i] * scale;
          g_gamma += dy[i] * (x[i] - layer.running_mean[ch]) * inv_std;
          g_beta += dy[i];
        }
        if (grad) {
          grad->weight[ch] += g_gamma;
          grad->bias[ch] += g_beta;
        }
      }
      break;
    }
    case LayerKind::relu:
      for (std::size_t i = 0; i < x.size(); ++i) di[i] = x[i] > 0.0 ? dy[i] : 0.0;
      break;
    case LayerKind::tanh:
      for (std::size_t i = 0; i < x.size(); ++i) di[i] = dy[i] * (1.0 - y[i] * y[i]);
      break;
    case LayerKind::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) di[i] = dy[i] * y[i] * (1.0 - y[i]);
      break;
    case LayerKind::reshape:
      std::copy(dy.begin(), dy.end(), di.begin());
      break;
    case LayerKind::upsample_nearest: {
      const auto& s = in.shape();
      const std::size_t f = layer.factor;
      const std::size_t ho = s[1] * f, wo = s[2] * f;
      for (std::size_t ch = 0; ch < s[0]; ++ch) {
        for (std::size_t yy = 0; yy < ho; ++yy) {
          for (std::size_t xx = 0; xx < wo; ++xx) {
            di[(ch * s[1] + yy / f) * s[2] + xx / f] += dy[(ch * ho + yy) * wo + xx];
          }
        }
      }
      break;
    }
    case LayerKind::concat_onehot:
      // the one-hot channel is a constant: only the latent part receives gradient
      std::copy(dy.begin(), dy.begin() + static_cast<std::ptrdiff_t>(x.size()), di.begin());
      break;
  }
  return d_in;
}

}  // namespace layer_ops

}  // namespace odx
