#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "odx/latent_search.hpp"
#include "odx/network.hpp"
#include "odx/stat_gate.hpp"
#include "odx/tensor.hpp"

namespace odx {

struct ClassRow {
  std::size_t cls = 0;
  std::size_t attacks = 0;
  double avg_mse = 0.0;
  double test_success = 0.0;
  double avg_mse_relaxed = 0.0;
  double test_success_relaxed = 0.0;

  bool operator==(const ClassRow&) const = default;
};

struct EvalRow {
  std::string dataset;
  std::size_t latent_dim = 0;
  PriorKind prior = PriorKind::standard_normal;
  std::size_t attacks = 0;
  double avg_mse = 0.0;
  double test_success = 0.0;
  double avg_mse_relaxed = 0.0;
  // Gate pass rate of the k = 0 runs; reported alongside, not part of the CSV.
  double test_success_relaxed = 0.0;
  std::vector<ClassRow> per_class;  // conditional models only

  bool operator==(const EvalRow&) const = default;
};

struct EvalOptions {
  double alpha = 0.05;
  GofTest test = GofTest::anderson_darling;
  std::size_t jobs = 1;
  bool run_relaxed = true;
};

// One attack of the batch. `seed` is the attack seed actually used.
struct AttackRecord {
  std::size_t target = 0;
  std::optional<std::size_t> y;
  std::uint64_t seed = 0;
  AttackResult result;
  double mse = 0.0;
  bool passed = false;
  std::optional<AttackResult> relaxed;
  double mse_relaxed = 0.0;
  bool passed_relaxed = false;
};

struct Evaluation {
  EvalRow row;
  std::vector<AttackRecord> attacks;  // target-major, then class
};

// Seed of the attack on target `t` with class `y`:
// cfg.seed + t * max(1, class_count) + y.
std::uint64_t attack_seed(std::uint64_t base, std::size_t target, std::size_t class_count, std::size_t y);

// Attacks every target (and, for conditional models, every class in turn),
// with and without the moment penalty. Results do not depend on `jobs`.
Evaluation evaluate_detailed(const GeneratorModel& model, std::span<const Tensor> targets, const AttackConfig& cfg,
                             const EvalOptions& opts);
EvalRow evaluate(const GeneratorModel& model, std::span<const Tensor> targets, const AttackConfig& cfg, double alpha,
                 GofTest test, std::size_t jobs = 1);

std::vector<EvalRow> sweep(std::span<const GeneratorModel> models, std::span<const Tensor> targets,
                           const AttackConfig& cfg, double alpha, GofTest test, std::size_t jobs = 1);

// Pooled histogram of every channel value quantised to round(v * (bins - 1)),
// in bits.
double shannon_entropy(std::span<const Tensor> images, std::size_t bins = 256);

// One vector per row, %.17g, comma separated, no header.
std::string latents_to_csv(std::span<const Tensor> vectors);
std::vector<Tensor> parse_latents_csv(std::string_view text);
void export_latents(std::span<const Tensor> vectors, const std::filesystem::path& path);
std::vector<Tensor> read_latents(const std::filesystem::path& path);

std::string eval_csv_header();
// With `per_class` set, class rows follow their aggregate as "name[y=c]".
std::string eval_rows_to_csv(std::span<const EvalRow> rows, bool per_class = false);

// Smooth shapes and gradients unlike any toy training set.
std::vector<Tensor> make_outdomain_targets(std::size_t count, const Shape& shape, std::uint64_t seed);

}  // namespace odx
