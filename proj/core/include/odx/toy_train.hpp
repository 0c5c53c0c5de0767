#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "odx/network.hpp"
#include "odx/prior.hpp"
#include "odx/tensor.hpp"

namespace odx {

enum class ToyKind { flat, stripes, texture };

std::string toy_kind_name(ToyKind kind);
ToyKind parse_toy_kind(std::string_view name);

struct ToyDataset {
  std::string name;
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;  // empty when unlabeled
  std::size_t class_count = 0;
  // Size of the colour palette the images are drawn from.
  std::size_t entropy_knob = 0;

  bool labeled() const noexcept { return !labels.empty(); }
  const Shape& shape() const { return images.front().shape(); }
};

// Synthetic image sets of increasing pixel diversity:
//   flat     one colour per image from a 4-colour palette; class = colour
//   stripes  two-colour bars from a 16-colour palette; class = one of four
//            orientations
//   texture  per-pixel colours from a 256-colour palette split into 4
//            sub-palettes; class = sub-palette
// Labels are always filled in; drop them for unconditional training.
ToyDataset make_toy_dataset(ToyKind kind, std::size_t count, const Shape& shape, std::uint64_t seed);

// Every .ppm / .pgm in `dir`, unlabeled.
ToyDataset load_image_dataset(const std::filesystem::path& dir);

struct TrainConfig {
  std::size_t iterations = 4000;
  std::size_t batch_size = 32;
  double lr_g = 5e-4;
  double lr_d = 5e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::size_t latent_dim = 32;
  std::size_t hidden = 128;
  PriorSpec prior;
  std::uint64_t seed = 0;
  std::optional<std::size_t> class_count;  // ACGAN only
  std::size_t log_every = 10;
  // Decay of the generator weight average that is returned; 0 returns the
  // last iterate. The average starts from the initial weights, so runs much
  // shorter than 1 / (1 - ema_decay) steps keep part of the initialisation.
  double ema_decay = 0.999;

  void validate() const;
};

// One training-log row. For train_gan: loss_d is the discriminator's
// binary cross-entropy, loss_g the non-saturating generator loss. For
// train_acgan the log-likelihood terms are also reported, with
// loss_d = -(L_class + L_source) and loss_g = -L_class + (non-saturating
// source loss).
struct TrainLogEntry {
  std::size_t iteration = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  std::optional<double> l_source;
  std::optional<double> l_class;
};

struct TrainResult {
  GeneratorModel generator;
  DiscriminatorModel discriminator;
  std::vector<TrainLogEntry> log;
};

// MLP models as trained here: G = [concat_onehot] dense relu dense reshape
// tanh, D trunk = dense relu with a dense source head (and class head).
GeneratorModel init_toy_generator(const Shape& image_shape, const TrainConfig& cfg);
DiscriminatorModel init_toy_discriminator(const Shape& image_shape, const TrainConfig& cfg);

TrainResult train_gan(const ToyDataset& dataset, const TrainConfig& cfg);
TrainResult train_acgan(const ToyDataset& dataset, const TrainConfig& cfg);

// n generator outputs on seeded prior draws.
std::vector<Tensor> sample(const GeneratorModel& model, std::size_t n, std::uint64_t seed,
                           std::optional<std::size_t> y = std::nullopt);
// The latent vectors sample() feeds to the generator for the same seed.
std::vector<Tensor> sample_latents(const GeneratorModel& model, std::size_t n, std::uint64_t seed);

}  // namespace odx
