#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <stdexcept>

#include <CLI11.hpp>

#include "odx/architecture.hpp"
#include "odx/errors.hpp"
#include "odx/eval_harness.hpp"
#include "odx/gtc.hpp"
#include "odx/image_io.hpp"
#include "odx/io.hpp"
#include "odx/latent_search.hpp"
#include "odx/stat_gate.hpp"
#include "odx/toy_train.hpp"
#include "report.hpp"

namespace fs = std::filesystem;

namespace odx::cli {

namespace {

using report::Json;

// Flag combinations CLI11 cannot express on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::size_t default_jobs() {
  const char* env = std::getenv("ODX_JOBS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw UsageError("ODX_JOBS must be a positive integer, got '" + std::string(env) + "'");
  return static_cast<std::size_t>(v);
}

Json header(const char* command) {
  Json j;
  j["version"] = report::kVersion;
  j["command"] = command;
  return j;
}

void write_json(const fs::path& path, const Json& j) { io::write_atomic(path, report::dump(j)); }

std::string numbered(const char* stem, std::size_t i, std::size_t count, const char* ext) {
  const int width = std::max<int>(3, static_cast<int>(std::to_string(count - 1).size()));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%0*zu%s", stem, width, i, ext);
  return buf;
}

std::vector<Tensor> load_targets(const fs::path& dir) {
  auto targets = read_image_dir(dir);
  if (targets.empty()) throw ParameterError("no .ppm/.pgm targets in '" + dir.string() + "' (--targets)");
  return targets;
}

Tensor single_latent(const fs::path& path, const char* flag) {
  auto rows = read_latents(path);
  if (rows.size() != 1) {
    throw UsageError(std::string(flag) + " '" + path.string() + "' must hold exactly one latent vector, found " +
                     std::to_string(rows.size()));
  }
  return rows.front();
}

AttackConfig load_attack_config(const std::string& path, const PriorSpec& prior) {
  AttackConfig base = AttackConfig::defaults_for(prior);
  base.eta = 0.01;
  base.max_iters = 2000;
  if (path.empty()) return base;
  Json j;
  try {
    j = Json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + " (--config): " + e.what(), e.byte);
  }
  try {
    return report::attack_config_from(j, base);
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(path + " (--config): " + e.what());
  }
}

std::optional<std::size_t> class_arg(const CLI::Option* opt, std::size_t value) {
  if (opt->count() == 0) return std::nullopt;
  return value;
}

// ---- subcommands ---------------------------------------------------------

struct InitRandomArgs {
  std::string arch = "mlp";
  std::size_t latent_dim = 0;
  std::string prior = "normal";
  std::size_t classes = 0;
  CLI::Option* classes_opt = nullptr;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_init_random(const InitRandomArgs& a, std::ostream& out) {
  const auto names = architecture_preset_names();
  Architecture arch;
  if (std::find(names.begin(), names.end(), a.arch) != names.end()) {
    arch = architecture_preset(a.arch);
  } else if (fs::exists(a.arch)) {
    arch = parse_architecture(io::read_text(a.arch));
  } else {
    throw UsageError("--arch '" + a.arch + "' is neither a preset nor an existing file");
  }
  auto model = init_generator(arch, a.latent_dim, PriorSpec::parse(a.prior), class_arg(a.classes_opt, a.classes), a.seed);
  model.set_dataset(arch.name);
  save_model(model, a.out);
  Json j = header("model init-random");
  j["config"] = {{"arch", a.arch},
                 {"latent_dim", a.latent_dim},
                 {"prior", model.prior().name()},
                 {"classes", model.class_count() ? Json(*model.class_count()) : Json(nullptr)},
                 {"seed", a.seed},
                 {"out", a.out}};
  j["parameters"] = model.network().parameter_count();
  out << report::dump(j);
  return kOk;
}

struct TrainArgs {
  std::string dataset;
  bool acgan = false;
  std::size_t count = 2048;
  std::size_t size = 8;
  std::uint64_t data_seed = 1;
  TrainConfig cfg;
  std::string prior = "normal";
  std::string out;
  std::string log;
};

int cmd_train(TrainArgs a, std::ostream& out) {
  a.cfg.prior = PriorSpec::parse(a.prior);
  ToyDataset ds;
  const bool toy = a.dataset == "flat" || a.dataset == "stripes" || a.dataset == "texture";
  if (toy) {
    ds = make_toy_dataset(parse_toy_kind(a.dataset), a.count, {3, a.size, a.size}, a.data_seed);
  } else if (fs::is_directory(a.dataset)) {
    ds = load_image_dataset(a.dataset);
  } else {
    throw UsageError("--dataset '" + a.dataset + "' is neither flat, stripes, texture nor a directory");
  }
  TrainResult r = [&] {
    if (!a.acgan) return train_gan(ds, a.cfg);
    if (!ds.labeled()) throw ConfigurationError("--acgan needs a labeled dataset; '" + a.dataset + "' has no labels");
    a.cfg.class_count = ds.class_count;
    return train_acgan(ds, a.cfg);
  }();
  save_model(r.generator, a.out);
  Json j = header("train");
  Json cfg = report::train_config(a.cfg);
  cfg["dataset"] = a.dataset;
  cfg["acgan"] = a.acgan;
  if (toy) {
    cfg["count"] = a.count;
    cfg["size"] = a.size;
    cfg["data_seed"] = a.data_seed;
  }
  cfg["out"] = a.out;
  j["config"] = std::move(cfg);
  j["dataset_entropy_bits"] = shannon_entropy(ds.images);
  j["log"] = report::train_log(r.log);
  if (!a.log.empty()) write_json(a.log, j);
  Json summary = header("train");
  summary["out"] = a.out;
  if (!r.log.empty()) summary["final"] = report::train_log(std::span(&r.log.back(), 1))[0];
  out << report::dump(summary);
  return kOk;
}

struct InvertArgs {
  std::string model, target;
  std::size_t cls = 0;
  CLI::Option* cls_opt = nullptr;
  std::string distance = "mse";
  int k = 0;
  CLI::Option* k_opt = nullptr;
  std::vector<double> omega;
  CLI::Option* omega_opt = nullptr;
  double lr = 0.01;
  std::size_t iters = 2000;
  std::string clip;
  CLI::Option* clip_opt = nullptr;
  std::uint64_t seed = 0;
  std::size_t record_stride = 1;
  std::string test = "ad";
  double alpha = 0.05;
  std::string prior;
  CLI::Option* prior_opt = nullptr;
  std::string out_latent, out_image, report;
};

int cmd_invert(const InvertArgs& a, std::ostream& out) {
  if (a.prior_opt->count() > 0) {
    throw UsageError("--prior cannot be combined with --model: the prior is declared by '" + a.model + "'");
  }
  const GeneratorModel model = load_generator(a.model);
  const Tensor target = read_image(a.target);
  AttackConfig cfg = AttackConfig::defaults_for(model.prior());
  cfg.distance = parse_distance(a.distance);
  if (a.k_opt->count() > 0) {
    cfg.k = a.k;
    cfg.omega.assign(static_cast<std::size_t>(std::max(0, a.k)), 1.0);
  }
  if (a.omega_opt->count() > 0) cfg.omega = a.omega;
  if (cfg.omega.size() != static_cast<std::size_t>(std::max(0, cfg.k))) {
    throw UsageError("--omega has " + std::to_string(cfg.omega.size()) + " weights but --k is " +
                     std::to_string(cfg.k));
  }
  cfg.eta = a.lr;
  cfg.max_iters = a.iters;
  if (a.clip_opt->count() > 0) cfg.clipping = parse_clipping(a.clip);
  cfg.seed = a.seed;
  cfg.record_stride = a.record_stride;
  const GofTest test = parse_gof_test(a.test);
  const auto y = class_arg(a.cls_opt, a.cls);

  const AttackResult r = search(model, target, cfg, y);
  const TestReport gate = validate_report(r.z_hat.values(), model.prior(), test, a.alpha);
  if (!a.out_latent.empty()) export_latents(std::span(&r.z_hat, 1), a.out_latent);
  if (!a.out_image.empty()) write_image(r.x_hat, a.out_image);

  Json j = header("invert");
  Json c = report::attack_config(cfg);
  c["model"] = a.model;
  c["target"] = a.target;
  c["class"] = y ? Json(*y) : Json(nullptr);
  c["prior"] = model.prior().name();
  c["test"] = gof_test_name(test);
  c["alpha"] = a.alpha;
  j["config"] = std::move(c);
  j["image_mse"] = distance_mse(target, r.x_hat);
  j["result"] = report::attack_result(r);
  j["gate"] = report::test_report(gate);
  if (!a.report.empty()) write_json(a.report, j);
  Json summary = header("invert");
  summary["best_loss"] = r.best_loss;
  summary["image_mse"] = j["image_mse"];
  summary["gate"] = j["gate"];
  out << report::dump(summary);
  return kOk;
}

struct ValidateArgs {
  std::string latent;
  std::string prior = "normal";
  std::string test = "ad";
  double alpha = 0.05;
  std::string report;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
  const PriorSpec prior = PriorSpec::parse(a.prior);
  const GofTest test = parse_gof_test(a.test);
  const auto rows = read_latents(a.latent);
  Json j = header("validate");
  j["config"] = {{"latent", a.latent}, {"prior", prior.name()}, {"test", gof_test_name(test)}, {"alpha", a.alpha}};
  Json results = Json::array();
  bool all = true;
  for (const auto& z : rows) {
    const TestReport r = validate_report(z.values(), prior, test, a.alpha);
    all = all && r.decision->accepted;
    results.push_back(report::test_report(r));
  }
  j["results"] = std::move(results);
  j["accepted"] = all;
  if (!a.report.empty()) write_json(a.report, j);
  out << report::dump(j);
  return all ? kOk : kRejected;
}

struct EvalArgs {
  std::string model;
  std::vector<std::string> models;
  std::string targets, config;
  double alpha = 0.05;
  std::string test = "ad";
  std::size_t jobs = 1;
  std::string out, json, latents;
  bool per_class = false;
};

Json eval_header(const char* command, const EvalArgs& a, const AttackConfig& cfg, GofTest test) {
  Json j = header(command);
  Json c;
  if (a.models.empty()) {
    c["model"] = a.model;
  } else {
    c["models"] = a.models;
  }
  c["targets"] = a.targets;
  c["attack"] = report::attack_config(cfg);
  c["alpha"] = a.alpha;
  c["test"] = gof_test_name(test);
  c["per_class"] = a.per_class;
  j["config"] = std::move(c);
  return j;
}

int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
  const GeneratorModel model = load_generator(a.model);
  const auto targets = load_targets(a.targets);
  const AttackConfig cfg = load_attack_config(a.config, model.prior());
  EvalOptions opts;
  opts.alpha = a.alpha;
  opts.test = parse_gof_test(a.test);
  opts.jobs = a.jobs;
  const Evaluation ev = evaluate_detailed(model, targets, cfg, opts);
  io::write_atomic(a.out, eval_rows_to_csv(std::span(&ev.row, 1), a.per_class));
  if (!a.latents.empty()) {
    std::vector<Tensor> zs;
    for (const auto& rec : ev.attacks) zs.push_back(rec.result.z_hat);
    export_latents(zs, a.latents);
  }
  Json j = eval_header("evaluate", a, cfg, opts.test);
  j["rows"] = Json::array({report::eval_row(ev.row)});
  if (!a.json.empty()) write_json(a.json, j);
  out << report::dump(j);
  return kOk;
}

int cmd_sweep(const EvalArgs& a, std::ostream& out) {
  if (a.models.empty()) throw UsageError("--models needs at least one model file");
  std::vector<GeneratorModel> models;
  for (const auto& m : a.models) models.push_back(load_generator(m));
  for (const auto& m : models) {
    if (m.prior() != models.front().prior()) throw UsageError("--models must share one prior");
  }
  const auto targets = load_targets(a.targets);
  const AttackConfig cfg = load_attack_config(a.config, models.front().prior());
  const GofTest test = parse_gof_test(a.test);
  const auto rows = sweep(models, targets, cfg, a.alpha, test, a.jobs);
  io::write_atomic(a.out, eval_rows_to_csv(rows, a.per_class));
  Json j = eval_header("sweep", a, cfg, test);
  Json arr = Json::array();
  for (const auto& r : rows) arr.push_back(report::eval_row(r));
  j["rows"] = std::move(arr);
  if (!a.json.empty()) write_json(a.json, j);
  out << report::dump(j);
  return kOk;
}

struct InterpolateArgs {
  std::string model, from, to, out;
  std::size_t steps = 8;
  std::size_t cls = 0;
  CLI::Option* cls_opt = nullptr;
};

int cmd_interpolate(const InterpolateArgs& a, std::ostream& out) {
  const GeneratorModel model = load_generator(a.model);
  const Tensor za = single_latent(a.from, "--from");
  const Tensor zb = single_latent(a.to, "--to");
  if (za.size() != model.latent_dim() || zb.size() != model.latent_dim()) {
    throw DimensionError("--from/--to latents must have length " + std::to_string(model.latent_dim()));
  }
  const auto y = class_arg(a.cls_opt, a.cls);
  const auto zs = interpolate(za, zb, a.steps);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    write_image(model.forward(zs[i], y), fs::path(a.out) / numbered("frame", i, zs.size(), ".ppm"));
  }
  export_latents(zs, fs::path(a.out) / "latents.csv");
  Json j = header("interpolate");
  j["config"] = {{"model", a.model},
                 {"from", a.from},
                 {"to", a.to},
                 {"steps", a.steps},
                 {"class", y ? Json(*y) : Json(nullptr)},
                 {"out", a.out}};
  j["frames"] = zs.size();
  out << report::dump(j);
  return kOk;
}

struct EntropyArgs {
  std::string images;
  std::size_t sample = 1024;
  std::size_t bins = 256;
};

int cmd_entropy(const EntropyArgs& a, std::ostream& out) {
  auto images = read_image_dir(a.images);
  if (images.empty()) throw ParameterError("no .ppm/.pgm images in '" + a.images + "' (--images)");
  if (a.sample == 0) throw UsageError("--sample must be >= 1");
  if (images.size() > a.sample) images.resize(a.sample);
  Json j = header("entropy");
  j["config"] = {{"images", a.images}, {"sample", a.sample}, {"bins", a.bins}};
  j["images_used"] = images.size();
  j["entropy_bits"] = shannon_entropy(images, a.bins);
  out << report::dump(j);
  return kOk;
}

struct SampleArgs {
  std::string model, out;
  std::size_t n = 16;
  std::uint64_t seed = 0;
  std::size_t cls = 0;
  CLI::Option* cls_opt = nullptr;
};

int cmd_sample(const SampleArgs& a, std::ostream& out) {
  const GeneratorModel model = load_generator(a.model);
  const auto y = class_arg(a.cls_opt, a.cls);
  const auto zs = sample_latents(model, a.n, a.seed);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    write_image(model.forward(zs[i], y), fs::path(a.out) / numbered("sample", i, zs.size(), ".ppm"));
  }
  export_latents(zs, fs::path(a.out) / "latents.csv");
  Json j = header("sample");
  j["config"] = {
      {"model", a.model}, {"n", a.n}, {"seed", a.seed}, {"class", y ? Json(*y) : Json(nullptr)}, {"out", a.out}};
  out << report::dump(j);
  return kOk;
}

struct MakeTargetsArgs {
  std::size_t count = 32;
  std::size_t size = 8;
  std::size_t channels = 3;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_make_targets(const MakeTargetsArgs& a, std::ostream& out) {
  const auto targets = make_outdomain_targets(a.count, {a.channels, a.size, a.size}, a.seed);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    write_image(targets[i], fs::path(a.out) / numbered("target", i, targets.size(), a.channels == 1 ? ".pgm" : ".ppm"));
  }
  Json j = header("make-targets");
  j["config"] = {{"count", a.count}, {"size", a.size}, {"channels", a.channels}, {"seed", a.seed}, {"out", a.out}};
  out << report::dump(j);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Out-domain latent search against GAN generators", "odx"};
  app.require_subcommand(1);
  app.set_version_flag("--version", report::kVersion);

  std::size_t jobs_default = 1;
  try {
    jobs_default = default_jobs();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  // model init-random
  InitRandomArgs ia;
  auto* model = app.add_subcommand("model", "Create generator models");
  model->require_subcommand(1);
  auto* init = model->add_subcommand("init-random", "Randomly initialised generator from a preset or JSON stack");
  init->add_option("--arch", ia.arch, "Preset (mlp, dcgan, upconv) or architecture JSON file")->capture_default_str();
  init->add_option("--latent-dim", ia.latent_dim, "Latent dimension")->required()->check(CLI::PositiveNumber);
  init->add_option("--prior", ia.prior, "normal or uniform")->capture_default_str();
  ia.classes_opt = init->add_option("--classes", ia.classes, "Class count for a conditional generator");
  init->add_option("--seed", ia.seed, "Initialisation seed")->capture_default_str();
  init->add_option("--out", ia.out, "Output GTC file")->required();

  // train
  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a toy GAN or ACGAN");
  train->add_option("--dataset", ta.dataset, "flat, stripes, texture or an image directory")->required();
  train->add_flag("--acgan", ta.acgan, "Conditional ACGAN training");
  train->add_option("--latent-dim", ta.cfg.latent_dim, "Latent dimension")->capture_default_str();
  train->add_option("--prior", ta.prior, "normal or uniform")->capture_default_str();
  train->add_option("--iters", ta.cfg.iterations, "Training iterations")->capture_default_str();
  train->add_option("--batch", ta.cfg.batch_size, "Batch size")->capture_default_str();
  train->add_option("--hidden", ta.cfg.hidden, "Hidden width of G and D")->capture_default_str();
  train->add_option("--lr-g", ta.cfg.lr_g, "Generator learning rate")->capture_default_str();
  train->add_option("--lr-d", ta.cfg.lr_d, "Discriminator learning rate")->capture_default_str();
  train->add_option("--ema", ta.cfg.ema_decay, "Generator weight-average decay")->capture_default_str();
  train->add_option("--log-every", ta.cfg.log_every, "Log interval")->capture_default_str();
  train->add_option("--count", ta.count, "Toy dataset size")->capture_default_str();
  train->add_option("--size", ta.size, "Toy image side length")->capture_default_str();
  train->add_option("--data-seed", ta.data_seed, "Toy dataset seed")->capture_default_str();
  train->add_option("--seed", ta.cfg.seed, "Training seed")->capture_default_str();
  train->add_option("--out", ta.out, "Output GTC file")->required();
  train->add_option("--log", ta.log, "Training log JSON");

  // invert
  InvertArgs va;
  auto* invert = app.add_subcommand("invert", "Search for an out-domain latent vector for one target");
  invert->add_option("--model", va.model, "Generator GTC file")->required();
  invert->add_option("--target", va.target, "Target PPM/PGM image")->required();
  va.cls_opt = invert->add_option("--class", va.cls, "Fixed class for conditional generators");
  invert->add_option("--distance", va.distance, "mse or xe")->capture_default_str();
  va.k_opt = invert->add_option("--k", va.k, "Moment penalty order (default 4 normal, 6 uniform)");
  va.omega_opt = invert->add_option("--omega", va.omega, "Comma separated moment weights")->delimiter(',');
  invert->add_option("--lr", va.lr, "Adam learning rate")->capture_default_str();
  invert->add_option("--iters", va.iters, "Iterations")->capture_default_str();
  va.clip_opt = invert->add_option("--clip", va.clip, "none, hard or stochastic (default hard iff uniform prior)");
  invert->add_option("--seed", va.seed, "Search seed")->capture_default_str();
  invert->add_option("--record-stride", va.record_stride, "Trajectory recording stride")->capture_default_str();
  invert->add_option("--test", va.test, "Gate test reported: ad, ks or sw")->capture_default_str();
  invert->add_option("--alpha", va.alpha, "Gate level reported")->capture_default_str();
  va.prior_opt = invert->add_option("--prior", va.prior, "Not accepted: the model declares its prior");
  invert->add_option("--out-latent", va.out_latent, "Latent CSV output");
  invert->add_option("--out-image", va.out_image, "Generated image output");
  invert->add_option("--report", va.report, "Report JSON output");

  // validate
  ValidateArgs la;
  auto* validate_cmd = app.add_subcommand("validate", "Defender gate on latent vectors");
  validate_cmd->add_option("--latent", la.latent, "Latent CSV")->required();
  validate_cmd->add_option("--prior", la.prior, "normal or uniform")->capture_default_str();
  validate_cmd->add_option("--test", la.test, "ad, ks or sw")->capture_default_str();
  validate_cmd->add_option("--alpha", la.alpha, "Significance level")->capture_default_str();
  validate_cmd->add_option("--report", la.report, "Report JSON output");

  // evaluate / sweep
  EvalArgs ea;
  ea.jobs = jobs_default;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Batch attack over a target directory");
  evaluate_cmd->add_option("--model", ea.model, "Generator GTC file")->required();
  evaluate_cmd->add_option("--targets", ea.targets, "Target image directory")->required();
  evaluate_cmd->add_option("--config", ea.config, "Attack config JSON");
  evaluate_cmd->add_option("--alpha", ea.alpha, "Significance level")->capture_default_str();
  evaluate_cmd->add_option("--test", ea.test, "ad, ks or sw")->capture_default_str();
  evaluate_cmd->add_option("--jobs", ea.jobs, "Parallel attacks (default $ODX_JOBS or 1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  evaluate_cmd->add_option("--out", ea.out, "Result CSV")->required();
  evaluate_cmd->add_option("--json", ea.json, "Result JSON with per-class rows");
  evaluate_cmd->add_option("--latents", ea.latents, "CSV of every penalised z_hat");
  evaluate_cmd->add_flag("--per-class", ea.per_class, "Add per-class rows to the CSV");

  EvalArgs sa;
  sa.jobs = jobs_default;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate several generators on shared targets");
  sweep_cmd->add_option("--models", sa.models, "Comma separated GTC files")->required()->delimiter(',');
  sweep_cmd->add_option("--targets", sa.targets, "Target image directory")->required();
  sweep_cmd->add_option("--config", sa.config, "Attack config JSON");
  sweep_cmd->add_option("--alpha", sa.alpha, "Significance level")->capture_default_str();
  sweep_cmd->add_option("--test", sa.test, "ad, ks or sw")->capture_default_str();
  sweep_cmd->add_option("--jobs", sa.jobs, "Parallel attacks (default $ODX_JOBS or 1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sweep_cmd->add_option("--out", sa.out, "Result CSV")->required();
  sweep_cmd->add_option("--json", sa.json, "Result JSON");
  sweep_cmd->add_flag("--per-class", sa.per_class, "Add per-class rows to the CSV");

  // interpolate
  InterpolateArgs pa;
  auto* interp = app.add_subcommand("interpolate", "Frames along the segment between two latents");
  interp->add_option("--model", pa.model, "Generator GTC file")->required();
  interp->add_option("--from", pa.from, "Start latent CSV")->required();
  interp->add_option("--to", pa.to, "End latent CSV")->required();
  interp->add_option("--steps", pa.steps, "Frame count including endpoints")->capture_default_str();
  pa.cls_opt = interp->add_option("--class", pa.cls, "Fixed class for conditional generators");
  interp->add_option("--out", pa.out, "Output directory")->required();

  // entropy
  EntropyArgs na;
  auto* entropy = app.add_subcommand("entropy", "Pooled pixel-value Shannon entropy of an image set");
  entropy->add_option("--images", na.images, "Image directory")->required();
  entropy->add_option("--sample", na.sample, "Use the first N images by filename")->capture_default_str();
  entropy->add_option("--bins", na.bins, "Quantisation levels")->capture_default_str();

  // sample
  SampleArgs ma;
  auto* sample_cmd = app.add_subcommand("sample", "Generator outputs on prior draws");
  sample_cmd->add_option("--model", ma.model, "Generator GTC file")->required();
  sample_cmd->add_option("--n", ma.n, "Sample count")->capture_default_str();
  sample_cmd->add_option("--seed", ma.seed, "Sampling seed")->capture_default_str();
  ma.cls_opt = sample_cmd->add_option("--class", ma.cls, "Fixed class for conditional generators");
  sample_cmd->add_option("--out", ma.out, "Output directory")->required();

  // make-targets
  MakeTargetsArgs ka;
  auto* targets = app.add_subcommand("make-targets", "Synthetic out-domain target images");
  targets->add_option("--count", ka.count, "Image count")->capture_default_str();
  targets->add_option("--size", ka.size, "Side length")->capture_default_str();
  targets->add_option("--channels", ka.channels, "1 or 3")->capture_default_str();
  targets->add_option("--seed", ka.seed, "Seed")->capture_default_str();
  targets->add_option("--out", ka.out, "Output directory")->required();

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << report::kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    if (sub != &app && !sub->get_subcommands().empty()) sub = sub->get_subcommands().front();
    err << sub->help();
    return kUsage;
  }

  try {
    if (init->parsed()) return cmd_init_random(ia, out);
    if (train->parsed()) return cmd_train(ta, out);
    if (invert->parsed()) return cmd_invert(va, out);
    if (validate_cmd->parsed()) return cmd_validate(la, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(ea, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sa, out);
    if (interp->parsed()) return cmd_interpolate(pa, out);
    if (entropy->parsed()) return cmd_entropy(na, out);
    if (sample_cmd->parsed()) return cmd_sample(ma, out);
    if (targets->parsed()) return cmd_make_targets(ka, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  err << app.help();
  return kUsage;
}

}  // namespace odx::cli
