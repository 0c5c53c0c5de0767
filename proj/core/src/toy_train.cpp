#include "odx/toy_train.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "odx/architecture.hpp"
#include "odx/errors.hpp"
#include "odx/image_io.hpp"

namespace odx {

namespace {

using Color = std::array<double, 3>;

// Palettes are fixed (independent of the dataset seed) so that class labels
// mean the same thing across datasets.
std::vector<Color> make_palette(std::size_t size, std::uint64_t salt) {
  std::mt19937_64 rng(0xC010u + salt);
  std::uniform_int_distribution<int> level(0, 255);
  std::vector<Color> p(size);
  for (auto& c : p) {
    for (double& v : c) v = level(rng) / 255.0;
  }
  return p;
}

Tensor blank(const Shape& shape) {
  if (shape.size() != 3 || (shape[0] != 1 && shape[0] != 3)) {
    throw DimensionError("toy images must be (1|3, height, width), got " + shape_to_string(shape));
  }
  return Tensor(shape);
}

void put(Tensor& img, std::size_t y, std::size_t x, const Color& c) {
  const auto& s = img.shape();
  for (std::size_t ch = 0; ch < s[0]; ++ch) {
    img[(ch * s[1] + y) * s[2] + x] = s[0] == 1 ? (c[0] + c[1] + c[2]) / 3.0 : c[ch];
  }
}

double log_sigmoid(double l) { return l >= 0 ? -std::log1p(std::exp(-l)) : l - std::log1p(std::exp(l)); }
double sigmoid(double l) { return std::exp(log_sigmoid(l)); }

std::vector<double> softmax(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> p(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (p[i] = std::exp(x[i] - mx));
  for (double& v : p) v /= s;
  return p;
}

double log_softmax_at(std::span<const double> x, std::size_t k) {
  const double mx = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return x[k] - mx - std::log(s);
}

class Adam {
 public:
  Adam(std::vector<Tensor*> params, double lr, double beta1, double beta2)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  void step(const std::vector<const Tensor*>& grads) {
    b1t_ *= b1_;
    b2t_ *= b2_;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = *params_[k];
      const Tensor& g = *grads[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m_[k][i] = b1_ * m_[k][i] + (1 - b1_) * g[i];
        v_[k][i] = b2_ * v_[k][i] + (1 - b2_) * g[i] * g[i];
        p[i] -= lr_ * (m_[k][i] / (1 - b1t_)) / (std::sqrt(v_[k][i] / (1 - b2t_)) + 1e-8);
      }
    }
  }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, b1_, b2_;
  double b1t_ = 1.0, b2t_ = 1.0;
};

// Discriminator evaluation that keeps traces so the backward pass does not
// recompute the forward one.
struct DPass {
  Network::Trace trunk;
  Network::Trace source;
  std::optional<Network::Trace> cls;
  double logit = 0.0;
  std::vector<double> class_logits;
};

DPass d_forward(const DiscriminatorModel& d, const Tensor& x) {
  DPass p;
  p.trunk = d.trunk().trace(x);
  p.source = d.source_head().trace(p.trunk.output());
  p.logit = p.source.output()[0];
  if (d.class_head()) {
    p.cls = d.class_head()->trace(p.trunk.output());
    p.class_logits = p.cls->output().data();
  }
  return p;
}

Tensor d_backward(const DiscriminatorModel& d, const DPass& p, double d_logit, const std::vector<double>& d_class,
                  DiscriminatorModel::Grads* grads) {
  Tensor d_feat = d.source_head().backward(p.source, Tensor({1}, d_logit), grads ? &grads->source : nullptr);
  if (p.cls && !d_class.empty()) {
    const Tensor dc = d.class_head()->backward(*p.cls, Tensor({d_class.size()}, d_class), grads ? &grads->cls : nullptr);
    for (std::size_t i = 0; i < d_feat.size(); ++i) d_feat[i] += dc[i];
  }
  return d.trunk().backward(p.trunk, d_feat, grads ? &grads->trunk : nullptr);
}

LayerPlan plain(LayerKind kind) {
  LayerPlan p;
  p.kind = kind;
  return p;
}

void guard(double loss, const char* name, std::size_t it) {
  if (!std::isfinite(loss) || std::abs(loss) > 1e6) {
    throw NumericError(std::string("training diverged: ") + name + " = " + std::to_string(loss) + " at iteration " +
                       std::to_string(it));
  }
}

TrainResult train_impl(const ToyDataset& dataset, const TrainConfig& cfg, bool acgan) {
  cfg.validate();
  if (dataset.images.empty()) throw ParameterError("training dataset is empty");
  const Shape shape = dataset.shape();
  for (const auto& img : dataset.images) {
    if (img.shape() != shape) throw DimensionError("dataset images do not share one shape");
  }
  std::size_t classes = 0;
  if (acgan) {
    if (!dataset.labeled()) throw ConfigurationError("ACGAN training needs a labeled dataset");
    if (!cfg.class_count || *cfg.class_count != dataset.class_count) {
      throw ConfigurationError("TrainConfig.class_count must equal the dataset's class count (" +
                               std::to_string(dataset.class_count) + ")");
    }
    classes = dataset.class_count;
    for (auto l : dataset.labels) {
      if (l >= classes) throw ConfigurationError("dataset label out of range");
    }
  }

  TrainConfig model_cfg = cfg;
  if (!acgan) model_cfg.class_count.reset();
  TrainResult res{init_toy_generator(shape, model_cfg), init_toy_discriminator(shape, model_cfg), {}};
  GeneratorModel& g = res.generator;
  DiscriminatorModel& d = res.discriminator;

  std::mt19937_64 rng(cfg.seed ^ 0x7a11u);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.images.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_class(0, classes ? classes - 1 : 0);
  Adam opt_g(g.mutable_network().parameters(), cfg.lr_g, cfg.beta1, cfg.beta2);
  Adam opt_d(d.parameters(), cfg.lr_d, cfg.beta1, cfg.beta2);
  const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
  // Moving average of the generator weights; this is the returned generator.
  std::vector<Tensor> ema;
  for (const Tensor* p : g.mutable_network().parameters()) ema.push_back(*p);

  auto onehot_delta = [&](const std::vector<double>& logits, std::size_t label) {
    auto p = softmax(logits);
    p[label] -= 1.0;
    for (double& v : p) v *= inv_b;
    return p;
  };

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    // discriminator step
    auto d_grads = d.zero_grads();
    double loss_d = 0.0, l_source = 0.0, l_class = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = pick(rng);
      const auto real = d_forward(d, dataset.images[idx]);
      std::vector<double> dc;
      l_source += log_sigmoid(real.logit) * inv_b;
      if (acgan) {
        l_class += log_softmax_at(real.class_logits, dataset.labels[idx]) * inv_b;
        dc = onehot_delta(real.class_logits, dataset.labels[idx]);
      }
      d_backward(d, real, (sigmoid(real.logit) - 1.0) * inv_b, dc, &d_grads);

      std::optional<std::size_t> y;
      if (acgan) y = pick_class(rng);
      const Tensor z = cfg.prior.sample(cfg.latent_dim, rng);
      const auto fake = d_forward(d, g.forward(z, y));
      l_source += log_sigmoid(-fake.logit) * inv_b;
      dc.clear();
      if (acgan) {
        l_class += log_softmax_at(fake.class_logits, *y) * inv_b;
        dc = onehot_delta(fake.class_logits, *y);
      }
      d_backward(d, fake, sigmoid(fake.logit) * inv_b, dc, &d_grads);
    }
    loss_d = -(l_source + l_class);
    guard(loss_d, "L_D", it);
    opt_d.step(DiscriminatorModel::gradient_views(d_grads, d));

    // generator step (non-saturating source term)
    auto g_grads = g.network().zero_grads();
    double loss_g = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      std::optional<std::size_t> y;
      if (acgan) y = pick_class(rng);
      const Tensor z = cfg.prior.sample(cfg.latent_dim, rng);
      const auto pass = g.run(z, y);
      const auto dp = d_forward(d, pass.output);
      loss_g -= log_sigmoid(dp.logit) * inv_b;
      std::vector<double> dc;
      if (acgan) {
        loss_g -= log_softmax_at(dp.class_logits, *y) * inv_b;
        dc = onehot_delta(dp.class_logits, *y);
      }
      const Tensor d_img = d_backward(d, dp, (sigmoid(dp.logit) - 1.0) * inv_b, dc, nullptr);
      g.backward(pass, d_img, &g_grads);
    }
    guard(loss_g, "L_G", it);
    opt_g.step(Network::gradient_views(g_grads, g.network()));
    {
      const double decay = cfg.ema_decay;
      const auto params = g.mutable_network().parameters();
      for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < ema[k].size(); ++i) {
          ema[k][i] = decay * ema[k][i] + (1.0 - decay) * (*params[k])[i];
        }
      }
    }

    if (it % cfg.log_every == 0 || it + 1 == cfg.iterations) {
      TrainLogEntry e{it, loss_d, loss_g, std::nullopt, std::nullopt};
      if (acgan) {
        e.l_source = l_source;
        e.l_class = l_class;
      }
      res.log.push_back(e);
    }
  }
  const auto params = g.mutable_network().parameters();
  for (std::size_t k = 0; k < params.size(); ++k) *params[k] = ema[k];
  g.mutable_network().round_to_f32();
  d.round_to_f32();
  return res;
}

}  // namespace

std::string toy_kind_name(ToyKind kind) {
  switch (kind) {
    case ToyKind::flat:
      return "flat";
    case ToyKind::stripes:
      return "stripes";
    case ToyKind::texture:
      return "texture";
  }
  return "flat";
}

ToyKind parse_toy_kind(std::string_view name) {
  if (name == "flat") return ToyKind::flat;
  if (name == "stripes") return ToyKind::stripes;
  if (name == "texture") return ToyKind::texture;
  throw ConfigurationError("unknown toy dataset '" + std::string(name) + "' (expected flat, stripes or texture)");
}

ToyDataset make_toy_dataset(ToyKind kind, std::size_t count, const Shape& shape, std::uint64_t seed) {
  if (count == 0) throw ParameterError("toy dataset needs at least one image");
  ToyDataset ds;
  ds.name = toy_kind_name(kind);
  std::mt19937_64 rng(seed);
  const std::size_t h = shape.at(1), w = shape.at(2);
  switch (kind) {
    case ToyKind::flat: {
      const auto palette = make_palette(4, 1);
      ds.class_count = 4;
      ds.entropy_knob = palette.size();
      std::uniform_int_distribution<std::size_t> pick(0, palette.size() - 1);
      for (std::size_t n = 0; n < count; ++n) {
        const std::size_t c = pick(rng);
        Tensor img = blank(shape);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) put(img, y, x, palette[c]);
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(c);
      }
      break;
    }
    case ToyKind::stripes: {
      const auto palette = make_palette(16, 2);
      ds.class_count = 4;
      ds.entropy_knob = palette.size();
      std::uniform_int_distribution<std::size_t> pick(0, palette.size() - 1);
      std::uniform_int_distribution<std::size_t> orient(0, 3);
      for (std::size_t n = 0; n < count; ++n) {
        const std::size_t a = pick(rng);
        std::size_t b = pick(rng);
        if (b == a) b = (a + 1) % palette.size();
        const std::size_t o = orient(rng);
        Tensor img = blank(shape);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            // horizontal, vertical, diagonal, anti-diagonal
            const std::size_t t = o == 0 ? y : o == 1 ? x : o == 2 ? x + y : x + (h - 1 - y);
            put(img, y, x, (t / 2) % 2 ? palette[a] : palette[b]);
          }
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(o);
      }
      break;
    }
    case ToyKind::texture: {
      const auto palette = make_palette(256, 3);
      ds.class_count = 4;
      ds.entropy_knob = palette.size();
      std::uniform_int_distribution<std::size_t> pick_class(0, 3);
      std::uniform_int_distribution<std::size_t> pick(0, 63);
      for (std::size_t n = 0; n < count; ++n) {
        const std::size_t c = pick_class(rng);
        Tensor img = blank(shape);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) put(img, y, x, palette[c * 64 + pick(rng)]);
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(c);
      }
      break;
    }
  }
  return ds;
}

ToyDataset load_image_dataset(const std::filesystem::path& dir) {
  ToyDataset ds;
  ds.name = dir.filename().string();
  if (ds.name.empty()) ds.name = dir.parent_path().filename().string();
  ds.images = read_image_dir(dir);
  if (ds.images.empty()) throw ParameterError("no .ppm/.pgm images found in '" + dir.string() + "'");
  for (const auto& img : ds.images) {
    if (img.shape() != ds.images.front().shape()) {
      throw DimensionError("images in '" + dir.string() + "' do not share one shape");
    }
  }
  return ds;
}

void TrainConfig::validate() const {
  if (batch_size == 0 || latent_dim == 0 || hidden == 0 || log_every == 0) {
    throw ConfigurationError("batch size, latent dimension, hidden width and log interval must be positive");
  }
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigurationError("learning rates must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigurationError("Adam betas must lie in [0, 1)");
  }
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigurationError("ema_decay must lie in [0, 1)");
  if (class_count && *class_count < 2) throw ConfigurationError("ACGAN needs at least 2 classes");
}

GeneratorModel init_toy_generator(const Shape& image_shape, const TrainConfig& cfg) {
  std::vector<LayerPlan> plan;
  if (cfg.class_count) {
    LayerPlan c;
    c.kind = LayerKind::concat_onehot;
    c.units = *cfg.class_count;
    plan.push_back(c);
  }
  LayerPlan h;
  h.kind = LayerKind::dense;
  h.units = cfg.hidden;
  plan.push_back(h);
  plan.push_back(plain(LayerKind::relu));
  LayerPlan o;
  o.kind = LayerKind::dense;
  o.units = shape_size(image_shape);
  plan.push_back(o);
  LayerPlan r;
  r.kind = LayerKind::reshape;
  r.target_shape = image_shape;
  plan.push_back(r);
  plan.push_back(plain(LayerKind::tanh));
  std::mt19937_64 rng(cfg.seed);
  return GeneratorModel(init_network({cfg.latent_dim}, plan, rng), cfg.prior, cfg.class_count,
                        OutputMap::unit_interval);
}

DiscriminatorModel init_toy_discriminator(const Shape& image_shape, const TrainConfig& cfg) {
  std::mt19937_64 rng(cfg.seed ^ 0xd15c0u);
  LayerPlan h;
  h.kind = LayerKind::dense;
  h.units = cfg.hidden;
  Network trunk = init_network(image_shape, {h, plain(LayerKind::relu)}, rng);
  LayerPlan s;
  s.kind = LayerKind::dense;
  s.units = 1;
  Network source = init_network({cfg.hidden}, {s}, rng);
  std::optional<Network> cls;
  if (cfg.class_count) {
    LayerPlan c;
    c.kind = LayerKind::dense;
    c.units = *cfg.class_count;
    cls = init_network({cfg.hidden}, {c}, rng);
  }
  return DiscriminatorModel(std::move(trunk), std::move(source), std::move(cls));
}

TrainResult train_gan(const ToyDataset& dataset, const TrainConfig& cfg) {
  TrainResult r = train_impl(dataset, cfg, false);
  r.generator.set_dataset(dataset.name);
  return r;
}

TrainResult train_acgan(const ToyDataset& dataset, const TrainConfig& cfg) {
  TrainResult r = train_impl(dataset, cfg, true);
  r.generator.set_dataset(dataset.name);
  return r;
}

std::vector<Tensor> sample_latents(const GeneratorModel& model, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ParameterError("sample count must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<Tensor> zs;
  zs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) zs.push_back(model.prior().sample(model.latent_dim(), rng));
  return zs;
}

std::vector<Tensor> sample(const GeneratorModel& model, std::size_t n, std::uint64_t seed,
                           std::optional<std::size_t> y) {
  std::vector<Tensor> out;
  out.reserve(n);
  for (const auto& z : sample_latents(model, n, seed)) out.push_back(model.forward(z, y));
  return out;
}

}  // namespace odx
