#include "odx/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "odx/errors.hpp"
#include "odx/io.hpp"

namespace odx {

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(std::span<const std::uint8_t> b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1u << 20) throw FormatError(std::string("image ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("expected image ") + what, pos_);
    return v;
  }

  std::size_t pos_ = 0;

 private:
  std::span<const std::uint8_t> b_;
};

std::uint8_t to_level(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

Tensor decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    throw FormatError("not a binary PPM/PGM file (expected P6 or P5)", 0);
  }
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  HeaderParser p(bytes);
  p.pos_ = 2;
  const std::size_t width = p.number("width");
  const std::size_t height = p.number("height");
  const std::size_t maxval = p.number("maxval");
  if (width == 0 || height == 0) throw FormatError("image has zero extent", p.pos_);
  if (maxval != 255) throw FormatError("only maxval 255 is supported", p.pos_);
  if (p.pos_ >= bytes.size() || !std::isspace(bytes[p.pos_])) throw FormatError("missing header terminator", p.pos_);
  const std::size_t start = p.pos_ + 1;
  const std::size_t count = width * height * channels;
  if (bytes.size() - start < count) throw FormatError("truncated pixel data", bytes.size());
  Tensor img({channels, height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        img[(c * height + y) * width + x] = bytes[start + (y * width + x) * channels + c] / 255.0;
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_pnm(const Tensor& image) {
  const auto& s = image.shape();
  if (s.size() != 3 || (s[0] != 1 && s[0] != 3)) {
    throw DimensionError("image must be (1|3, height, width), got " + shape_to_string(s));
  }
  const std::size_t channels = s[0], height = s[1], width = s[2];
  const std::string header = std::string(channels == 3 ? "P6" : "P5") + "\n" + std::to_string(width) + " " +
                             std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.size());
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) out.push_back(to_level(image[(c * height + y) * width + x]));
    }
  }
  return out;
}

Tensor read_image(const std::filesystem::path& path) {
  const auto bytes = io::read_bytes(path);
  try {
    return decode_pnm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.message(), e.offset());
  }
}

void write_image(const Tensor& image, const std::filesystem::path& path) { io::write_atomic(path, encode_pnm(image)); }

std::vector<Tensor> read_image_dir(const std::filesystem::path& dir) {
  std::vector<Tensor> out;
  for (const auto& p : io::list_files(dir, {".ppm", ".pgm"})) out.push_back(read_image(p));
  return out;
}

Tensor quantize_image(const Tensor& image) {
  Tensor q = image;
  for (double& v : q.values()) v = to_level(v) / 255.0;
  return q;
}

}  // namespace odx
