#include "odx/latent_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odx/errors.hpp"
#include "odx/stat_gate.hpp"

namespace odx {

namespace {

constexpr double kLogClamp = 1e-12;
// Separates the clipping stream from the initialisation stream so that the
// starting point does not depend on the clipping mode.
constexpr std::uint64_t kClipStreamSalt = 0x9e3779b97f4a7c15ULL;

std::vector<double> softmax(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> p(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (p[i] = std::exp(x[i] - mx));
  for (double& v : p) v /= s;
  return p;
}

void check_penalty_args(int k, std::span<const double> omega) {
  if (k < 0) throw ParameterError("k must be non-negative");
  if (omega.size() != static_cast<std::size_t>(k)) {
    throw ParameterError("omega has " + std::to_string(omega.size()) + " weights but k = " + std::to_string(k));
  }
  if (k > PriorSpec::kMaxMomentOrder) {
    throw UnsupportedMomentError("k = " + std::to_string(k) + " exceeds the supported moment order " +
                                 std::to_string(PriorSpec::kMaxMomentOrder));
  }
}

}  // namespace

std::string distance_name(Distance d) { return d == Distance::mse ? "mse" : "xe"; }

Distance parse_distance(std::string_view name) {
  if (name == "mse") return Distance::mse;
  if (name == "xe") return Distance::xe;
  throw ConfigurationError("unknown distance '" + std::string(name) + "' (expected mse or xe)");
}

std::string clipping_name(Clipping c) {
  switch (c) {
    case Clipping::none:
      return "none";
    case Clipping::hard:
      return "hard";
    case Clipping::stochastic:
      return "stochastic";
  }
  return "none";
}

Clipping parse_clipping(std::string_view name) {
  if (name == "none") return Clipping::none;
  if (name == "hard") return Clipping::hard;
  if (name == "stochastic") return Clipping::stochastic;
  throw ConfigurationError("unknown clipping '" + std::string(name) + "' (expected none, hard or stochastic)");
}

AttackConfig AttackConfig::defaults_for(const PriorSpec& prior) {
  AttackConfig c;
  if (prior.kind() == PriorKind::uniform_sym) {
    c.k = 6;
    c.clipping = Clipping::hard;
  } else {
    c.k = 4;
    c.clipping = Clipping::none;
  }
  c.omega.assign(static_cast<std::size_t>(c.k), 1.0);
  return c;
}

AttackConfig AttackConfig::relaxed() const {
  AttackConfig c = *this;
  c.k = 0;
  c.omega.clear();
  return c;
}

void AttackConfig::validate() const {
  if (k < 0) throw ConfigurationError("k must be >= 0");
  if (omega.size() != static_cast<std::size_t>(k)) {
    throw ConfigurationError("omega must have exactly k = " + std::to_string(k) + " weights, got " +
                             std::to_string(omega.size()));
  }
  for (double w : omega) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigurationError("omega weights must be finite and >= 0");
  }
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigurationError("learning rate must be > 0");
  if (record_stride == 0) throw ConfigurationError("record_stride must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
    throw ConfigurationError("Adam parameters need 0 <= beta < 1 and epsilon > 0");
  }
}

double distance_mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "distance_mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double distance_xe(const Tensor& target, const Tensor& generated) {
  return distance_value(Distance::xe, target, generated, nullptr);
}

double distance_value(Distance kind, const Tensor& target, const Tensor& generated, Tensor* grad) {
  require_same_shape(target, generated, kind == Distance::mse ? "distance_mse" : "distance_xe");
  const std::size_t m = target.size();
  if (kind == Distance::mse) {
    const double value = distance_mse(target, generated);
    if (grad) {
      *grad = Tensor(generated.shape());
      for (std::size_t i = 0; i < m; ++i) (*grad)[i] = 2.0 * (generated[i] - target[i]) / static_cast<double>(m);
    }
    return value;
  }
  const auto p = softmax(target.values());
  const auto q = softmax(generated.values());
  double value = 0.0;
  double live_mass = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    value -= p[i] * std::log(std::max(q[i], kLogClamp));
    if (q[i] > kLogClamp) live_mass += p[i];
  }
  if (grad) {
    // d/dg_j of -sum_i p_i log q_i over unclamped i: q_j * live_mass - p_j [q_j unclamped]
    *grad = Tensor(generated.shape());
    for (std::size_t j = 0; j < m; ++j) (*grad)[j] = q[j] * live_mass - (q[j] > kLogClamp ? p[j] : 0.0);
  }
  return value;
}

double moment_penalty(std::span<const double> z, const PriorSpec& prior, int k, std::span<const double> omega) {
  check_penalty_args(k, omega);
  if (z.empty()) throw ParameterError("moment penalty of an empty latent vector");
  double total = 0.0;
  for (int i = 1; i <= k; ++i) {
    const double diff = prior.raw_moment(i) - sample_moment(z, i);
    total += omega[static_cast<std::size_t>(i - 1)] * diff * diff;
  }
  return total;
}

std::vector<double> moment_penalty_gradient(std::span<const double> z, const PriorSpec& prior, int k,
                                            std::span<const double> omega) {
  check_penalty_args(k, omega);
  if (z.empty()) throw ParameterError("moment penalty of an empty latent vector");
  const double n = static_cast<double>(z.size());
  // coefficient_i = omega_i * 2 (sample_i - mu_i) * i / n, applied to z_j^(i-1)
  std::vector<double> coef(static_cast<std::size_t>(k));
  for (int i = 1; i <= k; ++i) {
    coef[static_cast<std::size_t>(i - 1)] =
        omega[static_cast<std::size_t>(i - 1)] * 2.0 * (sample_moment(z, i) - prior.raw_moment(i)) * i / n;
  }
  std::vector<double> g(z.size(), 0.0);
  for (std::size_t j = 0; j < z.size(); ++j) {
    double power = 1.0;
    double acc = 0.0;
    for (int i = 1; i <= k; ++i) {
      acc += coef[static_cast<std::size_t>(i - 1)] * power;
      power *= z[j];
    }
    g[j] = acc;
  }
  return g;
}

LossTerms latent_loss(const Tensor& target, const Tensor& z, const GeneratorModel& model, const AttackConfig& cfg,
                      std::optional<std::size_t> y) {
  const Tensor generated = model.forward(z, y);
  LossTerms t;
  t.distance = distance_value(cfg.distance, target, generated);
  t.penalty = cfg.k > 0 ? moment_penalty(z.values(), model.prior(), cfg.k, cfg.omega) : 0.0;
  t.loss = t.distance + t.penalty;
  return t;
}

Tensor clip_hard(const Tensor& z) {
  Tensor out = z;
  for (double& v : out.values()) v = std::clamp(v, -1.0, 1.0);
  return out;
}

Tensor clip_stochastic(const Tensor& z, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor out = z;
  for (double& v : out.values()) {
    if (v < -1.0 || v > 1.0) v = dist(rng);
  }
  return out;
}

Tensor initial_latent(const GeneratorModel& model, const AttackConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  Tensor z = model.prior().sample(model.latent_dim(), rng);
  if (cfg.clipping != Clipping::none) z = clip_hard(z);
  return z;
}

AttackResult search(const GeneratorModel& model, const Tensor& target, const AttackConfig& cfg,
                    std::optional<std::size_t> y) {
  cfg.validate();
  if (target.shape() != model.output_shape()) {
    throw DimensionError("target shape " + shape_to_string(target.shape()) + " does not match generator output " +
                         shape_to_string(model.output_shape()));
  }
  const std::size_t n = model.latent_dim();
  std::mt19937_64 clip_rng(cfg.seed ^ kClipStreamSalt);
  auto apply_clip = [&](Tensor& z) {
    if (cfg.clipping == Clipping::hard) z = clip_hard(z);
    if (cfg.clipping == Clipping::stochastic) z = clip_stochastic(z, clip_rng);
  };

  Tensor z = initial_latent(model, cfg);

  std::vector<double> m(n, 0.0), v(n, 0.0);
  double b1t = 1.0, b2t = 1.0;
  AttackResult r;
  r.y = y;
  r.best_loss = std::numeric_limits<double>::infinity();
  Tensor d_out;

  for (std::size_t it = 0;; ++it) {
    const auto pass = model.run(z, y);
    const double dist = distance_value(cfg.distance, target, pass.output, &d_out);
    const double pen = cfg.k > 0 ? moment_penalty(z.values(), model.prior(), cfg.k, cfg.omega) : 0.0;
    const double loss = dist + pen;
    if (!std::isfinite(loss)) {
      throw NumericError("latent search diverged: non-finite loss at iteration " + std::to_string(it));
    }
    if (it % cfg.record_stride == 0 || it == cfg.max_iters) {
      r.trajectory.emplace_back(it, loss);
      if (loss < r.best_loss) {
        r.best_loss = loss;
        r.distance_value = dist;
        r.penalty_value = pen;
        r.z_hat = z;
        r.x_hat = pass.output;
        r.best_iteration = it;
      }
    }
    if (it == cfg.max_iters) break;

    Tensor grad = model.backward(pass, d_out);
    if (cfg.k > 0) {
      const auto gp = moment_penalty_gradient(z.values(), model.prior(), cfg.k, cfg.omega);
      for (std::size_t j = 0; j < n; ++j) grad[j] += gp[j];
    }
    b1t *= cfg.adam.beta1;
    b2t *= cfg.adam.beta2;
    for (std::size_t j = 0; j < n; ++j) {
      const double g = grad[j];
      m[j] = cfg.adam.beta1 * m[j] + (1.0 - cfg.adam.beta1) * g;
      v[j] = cfg.adam.beta2 * v[j] + (1.0 - cfg.adam.beta2) * g * g;
      const double m_hat = m[j] / (1.0 - b1t);
      const double v_hat = v[j] / (1.0 - b2t);
      z[j] -= cfg.eta * m_hat / (std::sqrt(v_hat) + cfg.adam.epsilon);
    }
    apply_clip(z);
  }
  r.iterations_run = cfg.max_iters;
  return r;
}

std::vector<Tensor> interpolate(const Tensor& z_a, const Tensor& z_b, std::size_t steps) {
  if (steps < 2) throw ParameterError("interpolation needs at least 2 steps");
  require_same_shape(z_a, z_b, "interpolate");
  std::vector<Tensor> out;
  out.reserve(steps);
  out.push_back(z_a);
  for (std::size_t s = 1; s + 1 < steps; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
    Tensor z(z_a.shape());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (1.0 - t) * z_a[i] + t * z_b[i];
    out.push_back(std::move(z));
  }
  out.push_back(z_b);
  return out;
}

}  // namespace odx
