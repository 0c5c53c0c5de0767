#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

#include "odx/architecture.hpp"
#include "odx/errors.hpp"
#include "odx/gtc.hpp"
#include "odx/io.hpp"
#include "odx/network.hpp"
#include "test_support.hpp"

using namespace odx;
using odx::testing::fixture_generator;
using odx::testing::random_tensor;

namespace {

GeneratorModel dense_tanh(Tensor w, Tensor b, OutputMap map = OutputMap::unit_interval) {
  std::vector<Layer> layers{Layer::dense(std::move(w), std::move(b))};
  if (map == OutputMap::unit_interval) layers.push_back(Layer::activation(LayerKind::tanh));
  const std::size_t n = layers.front().weight.shape()[1];
  return GeneratorModel(Network({n}, std::move(layers)), PriorSpec::normal(), std::nullopt, map);
}

// Plain-loop evaluation of dense -> relu -> dense -> relu -> dense -> tanh
// -> (x + 1) / 2, written independently of layer_ops.
std::vector<double> straight_line_mlp(const Network& net, const std::vector<double>& z) {
  std::vector<double> a = z;
  for (const auto& l : net.layers()) {
    if (l.kind == LayerKind::dense) {
      const std::size_t out = l.weight.shape()[0], in = l.weight.shape()[1];
      std::vector<double> next(out);
      for (std::size_t r = 0; r < out; ++r) {
        double s = l.bias[r];
        for (std::size_t c = 0; c < in; ++c) s += l.weight[r * in + c] * a[c];
        next[r] = s;
      }
      a = next;
    } else if (l.kind == LayerKind::relu) {
      for (double& v : a) v = v > 0 ? v : 0;
    } else if (l.kind == LayerKind::tanh) {
      for (double& v : a) v = std::tanh(v);
    }
  }
  for (double& v : a) v = (v + 1) / 2;
  return a;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("shape product must equal data length") {
    CHECK(Tensor({2, 3}).size() == 6);
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor({4}).reshaped({3}), DimensionError);
    CHECK(Tensor({2, 3}, 1.5).reshaped({3, 2}).shape() == Shape{3, 2});
  }
}

TEST_SUITE("forward") {
  TEST_CASE("identity dense layer at zero maps to one half") {
    const auto g = dense_tanh(Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}));
    const Tensor x = g.forward(Tensor::vector({0, 0}));
    CHECK(x[0] == 0.5);
    CHECK(x[1] == 0.5);
  }

  TEST_CASE("tanh saturation maps large inputs to one") {
    const auto g = dense_tanh(Tensor({1, 1}, {1}), Tensor({1}));
    CHECK(std::abs(g.forward(Tensor::vector({10}))[0] - 1.0) < 1e-8);
  }

  TEST_CASE("three-layer fixture matches a straight-line evaluation") {
    std::mt19937_64 rng(11);
    using odx::testing::plan;
    std::vector<LayerPlan> p{plan(LayerKind::dense, 9), plan(LayerKind::relu), plan(LayerKind::dense, 7),
                             plan(LayerKind::relu), plan(LayerKind::dense, 5), plan(LayerKind::tanh)};
    const GeneratorModel g(init_network({6}, p, rng), PriorSpec::normal());
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor z = random_tensor({6}, rng, -2, 2);
      const auto expect = straight_line_mlp(g.network(), z.data());
      const Tensor got = g.forward(z);
      for (std::size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(got[i] - expect[i]) <= 1e-12);
    }
  }

  TEST_CASE("wrong latent length is a dimension error") {
    const auto g = fixture_generator(0, 5, 1);
    CHECK_THROWS_AS(g.forward(Tensor::vector({0, 0, 0})), DimensionError);
  }

  TEST_CASE("conditioning errors") {
    const auto cond = fixture_generator(2, 5, 1);
    const Tensor z({5});
    CHECK_THROWS_AS(cond.forward(z), ConditioningError);
    CHECK_THROWS_AS(cond.forward(z, 3), ConditioningError);
    CHECK_NOTHROW(cond.forward(z, 2));
    const auto plain = fixture_generator(0, 5, 1);
    CHECK_THROWS_AS(plain.forward(z, 0), ConditioningError);
  }

  TEST_CASE("outputs lie in [0, 1] and are deterministic") {
    std::mt19937_64 rng(5);
    for (std::size_t arch = 0; arch < odx::testing::kFixtureArchCount; ++arch) {
      const auto g = fixture_generator(arch, 6, 100 + arch);
      const std::optional<std::size_t> y = g.conditional() ? std::optional<std::size_t>(1) : std::nullopt;
      for (int trial = 0; trial < 10; ++trial) {
        const Tensor z = random_tensor({6}, rng, -4, 4);
        const Tensor a = g.forward(z, y);
        CHECK(a == g.forward(z, y));
        for (double v : a.values()) {
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
        }
      }
    }
  }

  TEST_CASE("unit-interval map requires a final tanh") {
    std::vector<Layer> layers{Layer::dense(Tensor({2, 2}), Tensor({2}))};
    CHECK_THROWS_AS(GeneratorModel(Network({2}, layers), PriorSpec::normal()), DimensionError);
    CHECK_NOTHROW(GeneratorModel(Network({2}, layers), PriorSpec::normal(), std::nullopt, OutputMap::identity));
  }

  TEST_CASE("adjacent layers must agree on shape") {
    std::vector<Layer> layers{Layer::dense(Tensor({3, 2}), Tensor({3})), Layer::dense(Tensor({2, 4}), Tensor({2}))};
    CHECK_THROWS_AS(Network({2}, layers), DimensionError);
  }

  TEST_CASE("batchnorm variance must be strictly positive") {
    std::vector<Layer> layers{Layer::batchnorm(Tensor({2}, 1.0), Tensor({2}), Tensor({2}), Tensor({2}, {1.0, 0.0}))};
    CHECK_THROWS_AS(Network({2, 3, 3}, layers), DimensionError);
  }
}

TEST_SUITE("backward") {
  TEST_CASE("dense tanh at zero: gradient is half W^T 1") {
    const Tensor w({2, 3}, {1, -2, 3, 0.5, 4, -1});
    const auto g = dense_tanh(w, Tensor({2}));
    const Tensor dz = g.backward_input(Tensor({3}), std::nullopt, Tensor({2}, 1.0));
    for (std::size_t c = 0; c < 3; ++c) CHECK(dz[c] == 0.5 * (w[c] + w[3 + c]));
  }

  TEST_CASE("pure linear layer: gradient is W^T d_out") {
    const Tensor w({2, 3}, {1, -2, 3, 0.5, 4, -1});
    const auto g = dense_tanh(w, Tensor({2}, {0.1, 0.2}), OutputMap::identity);
    const Tensor d({2}, {0.7, -1.3});
    const Tensor dz = g.backward_input(Tensor::vector({0.3, 0.1, -0.2}), std::nullopt, d);
    for (std::size_t c = 0; c < 3; ++c) CHECK(dz[c] == w[c] * d[0] + w[3 + c] * d[1]);
  }

  TEST_CASE("backward_input matches finite differences on random fixtures") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const auto g = fixture_generator(static_cast<std::size_t>(trial), 5, 300 + trial);
      const std::optional<std::size_t> y = g.conditional() ? std::optional<std::size_t>(trial % 3) : std::nullopt;
      const Tensor z = random_tensor({5}, rng, -1.5, 1.5);
      CHECK(finite_diff_check(g, z, y, 1e-5) <= 1e-4);
    }
  }

  TEST_CASE("conditional gradient covers only the latent coordinates") {
    const auto g = fixture_generator(2, 5, 9);
    const Tensor d = Tensor(g.output_shape(), 1.0);
    for (std::size_t y = 0; y < 3; ++y) CHECK(g.backward_input(Tensor({5}), y, d).shape() == Shape{5});
  }

  TEST_CASE("one dense layer with squared error: closed-form weight gradient") {
    const Tensor w({2, 3}, {0.2, -0.1, 0.4, 0.3, 0.5, -0.6});
    const auto g = dense_tanh(w, Tensor({2}, {0.05, -0.05}), OutputMap::identity);
    const Tensor z = Tensor::vector({1.0, -2.0, 0.5});
    const Tensor target = Tensor::vector({0.3, -0.7});
    const Tensor yhat = g.forward(z);
    Tensor d({2});
    for (std::size_t r = 0; r < 2; ++r) d[r] = 2 * (yhat[r] - target[r]);
    const WeightGrads grads = g.backward_weights(std::vector<Tensor>{z}, std::vector<Tensor>{d});
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(grads[0].bias[r] == doctest::Approx(d[r]).epsilon(1e-15));
      for (std::size_t c = 0; c < 3; ++c) CHECK(grads[0].weight[r * 3 + c] == doctest::Approx(d[r] * z[c]).epsilon(1e-15));
    }
  }

  TEST_CASE("zero output gradient gives zero weight gradients") {
    const auto g = fixture_generator(1, 4, 3);
    std::mt19937_64 rng(2);
    const std::vector<Tensor> zs{random_tensor({4}, rng), random_tensor({4}, rng)};
    const std::vector<Tensor> ds(2, Tensor(g.output_shape()));
    for (const auto& lg : g.backward_weights(zs, ds)) {
      for (double v : lg.weight.values()) CHECK(v == 0.0);
      for (double v : lg.bias.values()) CHECK(v == 0.0);
    }
  }

  TEST_CASE("backward_weights matches finite differences on every weight") {
    std::mt19937_64 rng(77);
    for (std::size_t arch = 0; arch < odx::testing::kFixtureArchCount; ++arch) {
      const auto g = fixture_generator(arch, 4, 40 + arch);
      std::vector<Tensor> zs, ds;
      std::vector<std::size_t> ys;
      for (int b = 0; b < 2; ++b) {
        zs.push_back(random_tensor({4}, rng));
        ds.push_back(random_tensor(g.output_shape(), rng));
        if (g.conditional()) ys.push_back(static_cast<std::size_t>(b));
      }
      CHECK(odx::testing::weight_fd_error(g, zs, ds, ys) <= 1e-4);
    }
  }

  TEST_CASE("conv_transpose is the adjoint of conv") {
    std::mt19937_64 rng(8);
    // sizes chosen so that every input pixel is reached by some window
    for (auto [stride, pad, k, n] :
         {std::tuple{1, 0, 3, 7}, std::tuple{2, 1, 4, 8}, std::tuple{2, 0, 3, 7}, std::tuple{3, 1, 3, 7}}) {
      const auto sz = [](int v) { return static_cast<std::size_t>(v); };
      const Tensor w = random_tensor({4, 2, sz(k), sz(k)}, rng);
      const Layer conv = Layer::conv(w, Tensor({4}), sz(stride), sz(pad));
      const Layer convt = Layer::conv_transpose(w, Tensor({2}), sz(stride), sz(pad));
      const Shape in{2, sz(n), sz(n)};
      const Shape out = layer_ops::output_shape(conv, in);
      const Tensor x = random_tensor(in, rng);
      const Tensor y = random_tensor(out, rng);
      const Tensor cx = layer_ops::forward(conv, x, std::nullopt);
      const Tensor ty = layer_ops::forward(convt, y, std::nullopt);
      CAPTURE(stride);
      CAPTURE(pad);
      REQUIRE(ty.shape() == in);
      const double lhs = dot(cx, y), rhs = dot(x, ty);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
}

TEST_SUITE("finite_diff_check") {
  TEST_CASE("linear model is exact") {
    std::mt19937_64 rng(4);
    const auto g = dense_tanh(random_tensor({6, 4}, rng), random_tensor({6}, rng), OutputMap::identity);
    CHECK(finite_diff_check(g, random_tensor({4}, rng), std::nullopt, 1e-3) <= 1e-10);
  }

  TEST_CASE("random conv-transpose model") {
    std::mt19937_64 rng(6);
    const auto g = fixture_generator(1, 6, 17);
    CHECK(finite_diff_check(g, random_tensor({6}, rng), std::nullopt, 1e-5) <= 1e-4);
  }

  TEST_CASE("non-positive step is rejected") {
    const auto g = fixture_generator(0, 3, 1);
    CHECK_THROWS_AS(finite_diff_check(g, Tensor({3}), std::nullopt, 0.0), ParameterError);
  }
}

TEST_SUITE("discriminator") {
  TEST_CASE("heads produce a probability and a distribution") {
    std::mt19937_64 rng(3);
    using odx::testing::plan;
    Network trunk = init_network({3, 4, 4}, {plan(LayerKind::dense, 10), plan(LayerKind::relu)}, rng);
    Network src = init_network({10}, {plan(LayerKind::dense, 1)}, rng);
    Network cls = init_network({10}, {plan(LayerKind::dense, 4)}, rng);
    const DiscriminatorModel d(std::move(trunk), std::move(src), std::move(cls));
    for (int t = 0; t < 10; ++t) {
      const auto o = d.forward(random_tensor({3, 4, 4}, rng, 0, 1));
      CHECK(o.source >= 0.0);
      CHECK(o.source <= 1.0);
      double s = 0;
      for (double p : o.class_probs) s += p;
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_SUITE("gtc") {
  TEST_CASE("save/load round trip is bit-identical") {
    odx::testing::TempDir dir;
    std::mt19937_64 rng(12);
    for (std::size_t arch = 0; arch < odx::testing::kFixtureArchCount; ++arch) {
      const auto g = fixture_generator(arch, 5, arch);
      const auto path = dir / ("m" + std::to_string(arch) + ".gtc");
      save_model(g, path);
      const auto back = load_generator(path);
      CHECK(back.class_count() == g.class_count());
      CHECK(back.prior() == g.prior());
      const std::optional<std::size_t> y = g.conditional() ? std::optional<std::size_t>(0) : std::nullopt;
      for (int t = 0; t < 3; ++t) {
        const Tensor z = random_tensor({5}, rng, -2, 2);
        CHECK(back.forward(z, y) == g.forward(z, y));
      }
    }
  }

  TEST_CASE("discriminator round trip") {
    std::mt19937_64 rng(13);
    using odx::testing::plan;
    DiscriminatorModel d(init_network({1, 4, 4}, {plan(LayerKind::dense, 6), plan(LayerKind::relu)}, rng),
                         init_network({6}, {plan(LayerKind::dense, 1)}, rng),
                         init_network({6}, {plan(LayerKind::dense, 3)}, rng));
    const auto any = decode_model(encode_model(d));
    REQUIRE(std::holds_alternative<DiscriminatorModel>(any));
    const Tensor x = random_tensor({1, 4, 4}, rng, 0, 1);
    CHECK(std::get<DiscriminatorModel>(any).forward(x).class_logits == d.forward(x).class_logits);
  }

  TEST_CASE("corrupted magic is a format error") {
    auto bytes = encode_model(fixture_generator(0, 3, 1));
    bytes[0] = 'X';
    try {
      decode_model(bytes);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }

  TEST_CASE("truncated payload is a format error") {
    auto bytes = encode_model(fixture_generator(1, 3, 1));
    bytes.resize(bytes.size() - 5);
    CHECK_THROWS_AS(decode_model(bytes), FormatError);
    bytes.resize(10);
    CHECK_THROWS_AS(decode_model(bytes), FormatError);
  }

  TEST_CASE("overlapping and out-of-bounds tensor entries are rejected") {
    const auto bytes = encode_model(fixture_generator(0, 3, 1));
    std::uint32_t len;
    std::memcpy(&len, bytes.data() + 8, 4);
    const std::vector<std::uint8_t> payload(bytes.begin() + 12 + len, bytes.end());
    auto manifest = nlohmann::json::parse(std::string(bytes.begin() + 12, bytes.begin() + 12 + len));
    auto rebuild = [&](const nlohmann::json& m) {
      const std::string text = m.dump();
      std::vector<std::uint8_t> out(kGtcMagic, kGtcMagic + 8);
      const auto l = static_cast<std::uint32_t>(text.size());
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(l >> (8 * i)));
      out.insert(out.end(), text.begin(), text.end());
      out.insert(out.end(), payload.begin(), payload.end());
      return out;
    };
    CHECK_NOTHROW(decode_model(rebuild(manifest)));
    auto overlap = manifest;
    overlap["tensors"][1]["offset"] = overlap["tensors"][0]["offset"];
    CHECK_THROWS_AS(decode_model(rebuild(overlap)), FormatError);
    auto oob = manifest;
    oob["tensors"][0]["offset"] = payload.size();
    CHECK_THROWS_AS(decode_model(rebuild(oob)), FormatError);
    auto mismatch = manifest;
    mismatch["tensors"][0]["byte_length"] = mismatch["tensors"][0]["byte_length"].get<std::size_t>() + 4;
    CHECK_THROWS_AS(decode_model(rebuild(mismatch)), FormatError);
  }

  TEST_CASE("committed fixture reproduces its recorded output hash") {
    const auto g = load_generator(std::filesystem::path(ODX_FIXTURE_DIR) / "dcgan_l16_s7.gtc");
    CHECK(g.latent_dim() == 16);
    std::mt19937_64 rng(2024);
    const Tensor z = g.prior().sample(16, rng);
    CHECK(odx::testing::hash_tensor(g.forward(z)) == 0x8321e14bccdad56fULL);
  }
}
