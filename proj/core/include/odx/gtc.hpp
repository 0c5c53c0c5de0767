#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "odx/network.hpp"

namespace odx {

// GTC weight container:
//
//   bytes 0..7     magic "GTCv0001"
//   bytes 8..11    manifest length L, uint32 little-endian
//   bytes 12..12+L UTF-8 JSON manifest
//   remainder      payload: little-endian float32 tensors, row-major
//
// Tensor offsets in the manifest are relative to the payload start. Values
// are widened to double on load.
using AnyModel = std::variant<GeneratorModel, DiscriminatorModel>;

inline constexpr char kGtcMagic[8] = {'G', 'T', 'C', 'v', '0', '0', '0', '1'};

std::vector<std::uint8_t> encode_model(const GeneratorModel& model);
std::vector<std::uint8_t> encode_model(const DiscriminatorModel& model);
AnyModel decode_model(std::span<const std::uint8_t> bytes);

void save_model(const GeneratorModel& model, const std::filesystem::path& path);
void save_model(const DiscriminatorModel& model, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);

// load_model() narrowed to a generator; FormatError for any other kind.
GeneratorModel load_generator(const std::filesystem::path& path);

}  // namespace odx
