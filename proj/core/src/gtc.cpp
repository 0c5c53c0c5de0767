#include "odx/gtc.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <map>
#include <string>

#include <json.hpp>

#include "odx/errors.hpp"
#include "odx/io.hpp"

namespace odx {

using nlohmann::json;

namespace {

constexpr std::size_t kHeaderSize = 12;

struct PayloadWriter {
  std::vector<std::uint8_t> bytes;
  json entries = json::array();

  std::string add(const std::string& name, const Tensor& t) {
    const std::size_t offset = bytes.size();
    for (double v : t.values()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
    entries.push_back({{"name", name},
                       {"shape", t.shape()},
                       {"dtype", "f32"},
                       {"offset", offset},
                       {"byte_length", bytes.size() - offset}});
    return name;
  }
};

json encode_network(const Network& net, const std::string& prefix, PayloadWriter& w) {
  json layers = json::array();
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const Layer& l = net.layers()[i];
    const std::string base = prefix + "." + std::to_string(i) + ".";
    json j = {{"kind", std::string(layer_kind_name(l.kind))}};
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::conv_transpose:
        j["stride"] = l.stride;
        j["padding"] = l.padding;
        break;
      case LayerKind::batchnorm_inference:
        j["epsilon"] = l.epsilon;
        j["running_mean"] = w.add(base + "running_mean", l.running_mean);
        j["running_var"] = w.add(base + "running_var", l.running_var);
        break;
      case LayerKind::reshape:
        j["target_shape"] = l.target_shape;
        break;
      case LayerKind::upsample_nearest:
        j["factor"] = l.factor;
        break;
      case LayerKind::concat_onehot:
        j["classes"] = l.classes;
        break;
      default:
        break;
    }
    if (l.has_params()) {
      j["weight"] = w.add(base + "weight", l.weight);
      j["bias"] = w.add(base + "bias", l.bias);
    }
    layers.push_back(std::move(j));
  }
  return {{"input_shape", net.input_shape()}, {"layers", std::move(layers)}};
}

std::vector<std::uint8_t> assemble(json manifest, PayloadWriter& w) {
  manifest["tensors"] = std::move(w.entries);
  const std::string text = manifest.dump();
  std::vector<std::uint8_t> out(kGtcMagic, kGtcMagic + 8);
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(len >> (8 * b)));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), w.bytes.begin(), w.bytes.end());
  return out;
}

// Reads tensors referenced by the manifest out of the payload.
class PayloadReader {
 public:
  PayloadReader(std::span<const std::uint8_t> payload, std::size_t payload_start, const json& entries)
      : payload_(payload), start_(payload_start) {
    if (!entries.is_array()) throw FormatError("manifest 'tensors' must be an array", start_);
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& e : entries) {
      const auto name = e.at("name").get<std::string>();
      if (e.at("dtype").get<std::string>() != "f32") throw FormatError("tensor '" + name + "' has unsupported dtype", start_);
      Shape shape = e.at("shape").get<Shape>();
      const auto offset = e.at("offset").get<std::size_t>();
      const auto length = e.at("byte_length").get<std::size_t>();
      if (shape.empty() || std::find(shape.begin(), shape.end(), 0u) != shape.end()) {
        throw FormatError("tensor '" + name + "' has an empty shape", start_);
      }
      if (length != 4 * shape_size(shape)) {
        throw FormatError("tensor '" + name + "' byte_length " + std::to_string(length) + " does not match shape " +
                              shape_to_string(shape),
                          start_ + offset);
      }
      if (offset > payload_.size() || length > payload_.size() - offset) {
        throw FormatError("tensor '" + name + "' extends past the end of the payload", start_ + payload_.size());
      }
      if (!index_.emplace(name, Entry{shape, offset}).second) {
        throw FormatError("duplicate tensor name '" + name + "'", start_);
      }
      ranges.emplace_back(offset, length);
    }
    std::sort(ranges.begin(), ranges.end());
    for (std::size_t i = 1; i < ranges.size(); ++i) {
      if (ranges[i - 1].first + ranges[i - 1].second > ranges[i].first) {
        throw FormatError("overlapping tensor entries", start_ + ranges[i].first);
      }
    }
  }

  Tensor get(const json& ref) const {
    const auto name = ref.get<std::string>();
    auto it = index_.find(name);
    if (it == index_.end()) throw FormatError("manifest references missing tensor '" + name + "'", start_);
    const Entry& e = it->second;
    std::vector<double> values(shape_size(e.shape));
    const std::uint8_t* p = payload_.data() + e.offset;
    for (std::size_t i = 0; i < values.size(); ++i, p += 4) {
      const std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
                                 (std::uint32_t{p[3]} << 24);
      values[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return Tensor(e.shape, std::move(values));
  }

  std::size_t start() const { return start_; }

 private:
  struct Entry {
    Shape shape;
    std::size_t offset;
  };
  std::span<const std::uint8_t> payload_;
  std::size_t start_;
  std::map<std::string, Entry> index_;
};

Network decode_network(const json& j, const PayloadReader& r) {
  std::vector<Layer> layers;
  for (const auto& lj : j.at("layers")) {
    Layer l;
    l.kind = parse_layer_kind(lj.at("kind").get<std::string>());
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::conv_transpose:
        l.stride = lj.at("stride").get<std::size_t>();
        l.padding = lj.at("padding").get<std::size_t>();
        break;
      case LayerKind::batchnorm_inference:
        l.epsilon = lj.at("epsilon").get<double>();
        l.running_mean = r.get(lj.at("running_mean"));
        l.running_var = r.get(lj.at("running_var"));
        break;
      case LayerKind::reshape:
        l.target_shape = lj.at("target_shape").get<Shape>();
        break;
      case LayerKind::upsample_nearest:
        l.factor = lj.at("factor").get<std::size_t>();
        break;
      case LayerKind::concat_onehot:
        l.classes = lj.at("classes").get<std::size_t>();
        break;
      default:
        break;
    }
    if (l.has_params()) {
      l.weight = r.get(lj.at("weight"));
      l.bias = r.get(lj.at("bias"));
    }
    layers.push_back(std::move(l));
  }
  return Network(j.at("input_shape").get<Shape>(), std::move(layers));
}

}  // namespace

std::vector<std::uint8_t> encode_model(const GeneratorModel& model) {
  PayloadWriter w;
  json m;
  m["model"] = "generator";
  m["network"] = encode_network(model.network(), "layers", w);
  m["latent_dim"] = model.latent_dim();
  m["prior"] = model.prior().name();
  m["class_count"] = model.class_count() ? json(*model.class_count()) : json(nullptr);
  m["output_shape"] = model.output_shape();
  m["output_map"] = model.output_map() == OutputMap::unit_interval ? "unit_interval" : "identity";
  m["dataset"] = model.dataset();
  return assemble(std::move(m), w);
}

std::vector<std::uint8_t> encode_model(const DiscriminatorModel& model) {
  PayloadWriter w;
  json m;
  m["model"] = "discriminator";
  m["trunk"] = encode_network(model.trunk(), "trunk", w);
  m["source_head"] = encode_network(model.source_head(), "source", w);
  m["class_head"] = model.class_head() ? encode_network(*model.class_head(), "class", w) : json(nullptr);
  m["class_count"] = model.class_count() ? json(*model.class_count()) : json(nullptr);
  m["input_shape"] = model.input_shape();
  return assemble(std::move(m), w);
}

AnyModel decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw FormatError("file too short for a GTC header", bytes.size());
  if (std::memcmp(bytes.data(), kGtcMagic, 8) != 0) throw FormatError("bad magic, expected GTCv0001", 0);
  const std::uint32_t len = std::uint32_t{bytes[8]} | (std::uint32_t{bytes[9]} << 8) |
                            (std::uint32_t{bytes[10]} << 16) | (std::uint32_t{bytes[11]} << 24);
  if (len > bytes.size() - kHeaderSize) throw FormatError("manifest length exceeds file size", 8);
  json m;
  try {
    m = json::parse(bytes.begin() + kHeaderSize, bytes.begin() + kHeaderSize + len);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what(), kHeaderSize + e.byte);
  }
  const std::size_t payload_start = kHeaderSize + len;
  try {
    PayloadReader reader(bytes.subspan(payload_start), payload_start, m.at("tensors"));
    const auto kind = m.at("model").get<std::string>();
    if (kind == "generator") {
      Network net = decode_network(m.at("network"), reader);
      std::optional<std::size_t> classes;
      if (!m.at("class_count").is_null()) classes = m.at("class_count").get<std::size_t>();
      const auto map = m.at("output_map").get<std::string>();
      if (map != "unit_interval" && map != "identity") throw FormatError("unknown output_map '" + map + "'", kHeaderSize);
      GeneratorModel g(std::move(net), PriorSpec::parse(m.at("prior").get<std::string>()), classes,
                       map == "identity" ? OutputMap::identity : OutputMap::unit_interval,
                       m.value("dataset", std::string{}));
      if (g.latent_dim() != m.at("latent_dim").get<std::size_t>() ||
          g.output_shape() != m.at("output_shape").get<Shape>()) {
        throw FormatError("manifest latent_dim/output_shape disagree with the layer list", kHeaderSize);
      }
      return g;
    }
    if (kind == "discriminator") {
      Network trunk = decode_network(m.at("trunk"), reader);
      Network source = decode_network(m.at("source_head"), reader);
      std::optional<Network> cls;
      if (!m.at("class_head").is_null()) cls = decode_network(m.at("class_head"), reader);
      return DiscriminatorModel(std::move(trunk), std::move(source), std::move(cls));
    }
    throw FormatError("unknown model kind '" + kind + "'", kHeaderSize);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what(), kHeaderSize);
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("manifest describes an invalid model: ") + e.what(), kHeaderSize);
  }
}

void save_model(const GeneratorModel& model, const std::filesystem::path& path) {
  io::write_atomic(path, encode_model(model));
}

void save_model(const DiscriminatorModel& model, const std::filesystem::path& path) {
  io::write_atomic(path, encode_model(model));
}

AnyModel load_model(const std::filesystem::path& path) {
  const auto bytes = io::read_bytes(path);
  try {
    return decode_model(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.message(), e.offset());
  }
}

GeneratorModel load_generator(const std::filesystem::path& path) {
  auto m = load_model(path);
  if (auto* g = std::get_if<GeneratorModel>(&m)) return std::move(*g);
  throw FormatError(path.string() + ": expected a generator model", 0);
}

}  // namespace odx
