#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "odx/tensor.hpp"

namespace odx {

// Binary PPM (P6, 3 channels) and PGM (P5, 1 channel), maxval 255. Pixels
// map to floats as v / 255 in a (channels, height, width) tensor; writing
// rounds to the nearest level after clamping to [0, 1].
Tensor decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const Tensor& image);

Tensor read_image(const std::filesystem::path& path);
void write_image(const Tensor& image, const std::filesystem::path& path);

// All .ppm / .pgm files in `dir`, sorted by filename.
std::vector<Tensor> read_image_dir(const std::filesystem::path& dir);

// Rounds every value to the nearest u8 level, as if written and reread.
Tensor quantize_image(const Tensor& image);

}  // namespace odx
