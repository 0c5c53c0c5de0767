#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "odx/architecture.hpp"
#include "odx/network.hpp"
#include "odx/tensor.hpp"

namespace odx::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t hash_tensor(const Tensor& t) { return fnv1a(t.data().data(), t.size() * sizeof(double)); }

inline LayerPlan plan(LayerKind kind, std::size_t units = 0, std::size_t kernel = 0, std::size_t stride = 1,
                      std::size_t padding = 0) {
  LayerPlan p;
  p.kind = kind;
  p.units = units;
  p.kernel = kernel;
  p.stride = stride;
  p.padding = padding;
  return p;
}

inline LayerPlan reshape_plan(Shape s) {
  LayerPlan p;
  p.kind = LayerKind::reshape;
  p.target_shape = std::move(s);
  return p;
}

inline LayerPlan upsample_plan(std::size_t f) {
  LayerPlan p;
  p.kind = LayerKind::upsample_nearest;
  p.factor = f;
  return p;
}

// Small generator stacks that together use every layer kind. Index 2 is
// conditional with 3 classes.
inline constexpr std::size_t kFixtureArchCount = 4;

inline GeneratorModel fixture_generator(std::size_t arch, std::size_t latent_dim, std::uint64_t seed) {
  using K = LayerKind;
  std::vector<LayerPlan> layers;
  std::optional<std::size_t> classes;
  switch (arch % kFixtureArchCount) {
    case 0:
      layers = {plan(K::dense, 48), plan(K::sigmoid), reshape_plan({3, 4, 4}), plan(K::conv, 4, 3, 1, 1),
                plan(K::relu), upsample_plan(2), plan(K::conv, 3, 3, 1, 1), plan(K::tanh)};
      break;
    case 1:
      layers = {plan(K::dense, 32), reshape_plan({2, 4, 4}), plan(K::batchnorm_inference), plan(K::relu),
                plan(K::conv_transpose, 3, 4, 2, 1), plan(K::tanh)};
      break;
    case 2:
      classes = 3;
      layers = {plan(K::concat_onehot, 3), plan(K::dense, 40), plan(K::relu), plan(K::dense, 48),
                reshape_plan({3, 4, 4}), plan(K::tanh)};
      break;
    default:
      layers = {plan(K::dense, 36), reshape_plan({4, 3, 3}), plan(K::conv_transpose, 2, 3, 2, 0),
                plan(K::batchnorm_inference), plan(K::sigmoid), plan(K::conv, 1, 2, 1, 0), plan(K::tanh)};
  }
  std::mt19937_64 rng(seed);
  Network net = init_network({latent_dim}, layers, rng);
  return GeneratorModel(std::move(net), PriorSpec::normal(), classes);
}

inline double rel_err(double analytic, double numeric, double floor = 1e-12) {
  return std::abs(analytic - numeric) / std::max(floor, std::abs(numeric));
}

// Weight-gradient check of L = sum_b <d_out_b, G(z_b)> against central
// differences on every parameter. Returns the max relative error over
// entries whose numeric derivative exceeds `min_magnitude`; rounding in L
// puts about 1e-10 of absolute noise on each difference at the default
// step, so smaller entries cannot be judged at 1e-4 relative.
inline double weight_fd_error(GeneratorModel model, const std::vector<Tensor>& zs, const std::vector<Tensor>& d_outs,
                              const std::vector<std::size_t>& ys, double step = 1e-5, double min_magnitude = 1e-5,
                              std::size_t* checked = nullptr) {
  const WeightGrads grads = model.backward_weights(zs, d_outs, ys);
  auto loss = [&](const GeneratorModel& m) {
    double l = 0.0;
    for (std::size_t b = 0; b < zs.size(); ++b) {
      const std::optional<std::size_t> y = ys.empty() ? std::nullopt : std::optional<std::size_t>(ys[b]);
      const Tensor out = m.forward(zs[b], y);
      for (std::size_t i = 0; i < out.size(); ++i) l += d_outs[b][i] * out[i];
    }
    return l;
  };
  const auto params = model.mutable_network().parameters();
  const auto views = Network::gradient_views(grads, model.network());
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k]->size(); ++i) {
      const double orig = (*params[k])[i];
      (*params[k])[i] = orig + step;
      const double lp = loss(model);
      (*params[k])[i] = orig - step;
      const double lm = loss(model);
      (*params[k])[i] = orig;
      const double fd = (lp - lm) / (2 * step);
      if (std::abs(fd) < min_magnitude) continue;
      if (checked) ++*checked;
      worst = std::max(worst, rel_err((*views[k])[i], fd));
    }
  }
  return worst;
}

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("odx_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace odx::testing
