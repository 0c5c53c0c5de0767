#include "odx/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "odx/errors.hpp"
#include "odx/io.hpp"

namespace odx {

namespace {

struct Job {
  std::size_t target;
  std::optional<std::size_t> y;
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception
// thrown is rethrown on the caller's thread.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct Acc {
  std::size_t n = 0;
  double mse = 0, pass = 0, mse_r = 0, pass_r = 0;

  void add(const AttackRecord& a) {
    ++n;
    mse += a.mse;
    pass += a.passed ? 1.0 : 0.0;
    mse_r += a.mse_relaxed;
    pass_r += a.passed_relaxed ? 1.0 : 0.0;
  }
};

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::uint64_t attack_seed(std::uint64_t base, std::size_t target, std::size_t class_count, std::size_t y) {
  return base + static_cast<std::uint64_t>(target) * std::max<std::size_t>(1, class_count) + y;
}

Evaluation evaluate_detailed(const GeneratorModel& model, std::span<const Tensor> targets, const AttackConfig& cfg,
                             const EvalOptions& opts) {
  cfg.validate();
  if (targets.empty()) throw ParameterError("evaluation needs at least one target");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw ConfigurationError("alpha must lie in (0, 1)");
  if (opts.test == GofTest::shapiro_wilk && model.prior().kind() != PriorKind::standard_normal) {
    throw ConfigurationError("Shapiro-Wilk tests normality only; use ad or ks with a uniform prior");
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t].shape() != model.output_shape()) {
      throw DimensionError("target " + std::to_string(t) + " has shape " + shape_to_string(targets[t].shape()) +
                           ", generator emits " + shape_to_string(model.output_shape()));
    }
  }
  const std::size_t classes = model.class_count().value_or(0);

  std::vector<Job> jobs;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (classes == 0) {
      jobs.push_back({t, std::nullopt});
    } else {
      for (std::size_t c = 0; c < classes; ++c) jobs.push_back({t, c});
    }
  }

  Evaluation ev;
  ev.attacks.resize(jobs.size());
  parallel_for(jobs.size(), opts.jobs, [&](std::size_t i) {
    const Job& job = jobs[i];
    AttackRecord& rec = ev.attacks[i];
    rec.target = job.target;
    rec.y = job.y;
    rec.seed = attack_seed(cfg.seed, job.target, classes, job.y.value_or(0));
    AttackConfig c = cfg;
    c.seed = rec.seed;
    const Tensor& target = targets[job.target];
    rec.result = search(model, target, c, job.y);
    rec.mse = distance_mse(target, rec.result.x_hat);
    rec.passed = validate(rec.result.z_hat.values(), model.prior(), opts.test, opts.alpha);
    if (opts.run_relaxed) {
      rec.relaxed = search(model, target, c.relaxed(), job.y);
      rec.mse_relaxed = distance_mse(target, rec.relaxed->x_hat);
      rec.passed_relaxed = validate(rec.relaxed->z_hat.values(), model.prior(), opts.test, opts.alpha);
    }
  });

  EvalRow& row = ev.row;
  row.dataset = model.dataset().empty() ? "model" : model.dataset();
  row.latent_dim = model.latent_dim();
  row.prior = model.prior().kind();
  Acc total;
  std::vector<Acc> per(classes);
  for (const auto& a : ev.attacks) {
    total.add(a);
    if (a.y) per[*a.y].add(a);
  }
  const double n = static_cast<double>(total.n);
  row.attacks = total.n;
  row.avg_mse = total.mse / n;
  row.test_success = total.pass / n;
  row.avg_mse_relaxed = opts.run_relaxed ? total.mse_r / n : 0.0;
  row.test_success_relaxed = opts.run_relaxed ? total.pass_r / n : 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double m = static_cast<double>(per[c].n);
    row.per_class.push_back({c, per[c].n, per[c].mse / m, per[c].pass / m, opts.run_relaxed ? per[c].mse_r / m : 0.0,
                             opts.run_relaxed ? per[c].pass_r / m : 0.0});
  }
  return ev;
}

EvalRow evaluate(const GeneratorModel& model, std::span<const Tensor> targets, const AttackConfig& cfg, double alpha,
                 GofTest test, std::size_t jobs) {
  EvalOptions opts;
  opts.alpha = alpha;
  opts.test = test;
  opts.jobs = jobs;
  return evaluate_detailed(model, targets, cfg, opts).row;
}

std::vector<EvalRow> sweep(std::span<const GeneratorModel> models, std::span<const Tensor> targets,
                           const AttackConfig& cfg, double alpha, GofTest test, std::size_t jobs) {
  if (models.empty()) throw ParameterError("sweep needs at least one model");
  for (const auto& m : models) {
    if (m.output_shape() != models.front().output_shape()) {
      throw DimensionError("swept models must share one output shape");
    }
  }
  std::vector<EvalRow> rows;
  rows.reserve(models.size());
  for (const auto& m : models) rows.push_back(evaluate(m, targets, cfg, alpha, test, jobs));
  return rows;
}

double shannon_entropy(std::span<const Tensor> images, std::size_t bins) {
  if (images.empty()) throw ParameterError("entropy of an empty image set");
  if (bins < 2) throw ParameterError("entropy needs at least 2 bins");
  std::vector<std::uint64_t> hist(bins, 0);
  std::uint64_t total = 0;
  for (const auto& img : images) {
    for (double v : img.values()) {
      if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("entropy input values must lie in [0, 1]");
      ++hist[static_cast<std::size_t>(std::lround(v * static_cast<double>(bins - 1)))];
      ++total;
    }
  }
  double h = 0.0;
  for (auto c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;
}

std::string latents_to_csv(std::span<const Tensor> vectors) {
  std::string out;
  for (const auto& v : vectors) {
    if (v.size() != vectors.front().size()) throw DimensionError("latent vectors must share one length");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += csv_number(v[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<Tensor> parse_latents_csv(std::string_view text) {
  std::vector<Tensor> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      std::vector<double> row;
      const char* p = line.c_str();
      for (;;) {
        char* stop = nullptr;
        errno = 0;
        const double v = std::strtod(p, &stop);
        if (stop == p || errno == ERANGE || !std::isfinite(v)) {
          throw FormatError("malformed number in latent CSV", pos + static_cast<std::size_t>(p - line.c_str()));
        }
        row.push_back(v);
        p = stop;
        while (*p == ' ') ++p;
        if (*p == '\0') break;
        if (*p != ',') throw FormatError("expected ',' in latent CSV", pos + static_cast<std::size_t>(p - line.c_str()));
        ++p;
      }
      if (!out.empty() && row.size() != out.front().size()) {
        throw FormatError("latent CSV rows differ in length", pos);
      }
      out.push_back(Tensor::vector(std::move(row)));
    }
    pos = end + 1;
  }
  if (out.empty()) throw FormatError("latent CSV holds no vectors", 0);
  return out;
}

void export_latents(std::span<const Tensor> vectors, const std::filesystem::path& path) {
  io::write_atomic(path, latents_to_csv(vectors));
}

std::vector<Tensor> read_latents(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  try {
    return parse_latents_csv(text);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.message(), e.offset());
  }
}

std::string eval_csv_header() { return "dataset,latent_dim,prior,avg_mse,test_success,avg_mse_relaxed"; }

std::string eval_rows_to_csv(std::span<const EvalRow> rows, bool per_class) {
  std::string out = eval_csv_header() + "\n";
  for (const auto& r : rows) {
    const std::string prior = PriorSpec(r.prior).name();
    out += r.dataset + "," + std::to_string(r.latent_dim) + "," + prior + "," + csv_number(r.avg_mse) + "," +
           csv_number(r.test_success) + "," + csv_number(r.avg_mse_relaxed) + "\n";
    if (!per_class) continue;
    for (const auto& c : r.per_class) {
      out += r.dataset + "[y=" + std::to_string(c.cls) + "]," + std::to_string(r.latent_dim) + "," + prior + "," +
             csv_number(c.avg_mse) + "," + csv_number(c.test_success) + "," + csv_number(c.avg_mse_relaxed) + "\n";
    }
  }
  return out;
}

std::vector<Tensor> make_outdomain_targets(std::size_t count, const Shape& shape, std::uint64_t seed) {
  if (count == 0) throw ParameterError("target count must be >= 1");
  if (shape.size() != 3) throw DimensionError("targets must be (channels, height, width)");
  const std::size_t ch = shape[0], h = shape[1], w = shape[2];
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto colour = [&] {
    std::vector<double> c(ch);
    for (double& v : c) v = u(rng);
    return c;
  };
  std::vector<Tensor> out;
  for (std::size_t n = 0; n < count; ++n) {
    Tensor img(shape);
    const auto a = colour();
    const auto b = colour();
    const double cx = u(rng) * static_cast<double>(w), cy = u(rng) * static_cast<double>(h);
    const double r = (0.2 + 0.3 * u(rng)) * static_cast<double>(std::min(h, w));
    const double angle = u(rng) * 6.283185307179586;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double t;
        switch (n % 3) {
          case 0:  // disc
            t = std::hypot(x + 0.5 - cx, y + 0.5 - cy) < r ? 1.0 : 0.0;
            break;
          case 1: {  // linear ramp
            const double proj = (x / std::max<double>(1, w - 1.0) - 0.5) * std::cos(angle) +
                                (y / std::max<double>(1, h - 1.0) - 0.5) * std::sin(angle);
            t = std::clamp(proj + 0.5, 0.0, 1.0);
            break;
          }
          default:  // square
            t = std::abs(x + 0.5 - cx) < r && std::abs(y + 0.5 - cy) < r ? 1.0 : 0.0;
        }
        for (std::size_t c = 0; c < ch; ++c) img[(c * h + y) * w + x] = (1.0 - t) * a[c] + t * b[c];
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace odx
