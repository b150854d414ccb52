#pragma once

// Model file: "TFQNN1\n", one JSON line describing the architecture, then
// every parameter tensor (weight, bias per layer) as little-endian float64.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <nlohmann/json.hpp>

#include "tfq/nn/siamese.hpp"

namespace tfq::nn {

inline constexpr std::string_view kModelMagicPrefix = "TFQNN";
inline constexpr int kModelVersion = 1;

inline nlohmann::json architecture_to_json(const Architecture& a) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : a.layers) {
    nlohmann::json j{{"type", kind_name(l.kind)}, {"name", l.name}};
    if (l.kind == LayerKind::Conv) {
      j.update({{"in", l.in}, {"out", l.out}, {"kernel", l.kernel}, {"pad", l.pad}, {"stride", l.stride},
                {"weightShape", l.weight_shape()}, {"biasShape", Shape{l.out}}});
    } else if (l.kind == LayerKind::Fc) {
      j.update({{"in", l.in}, {"out", l.out}, {"weightShape", l.weight_shape()}, {"biasShape", Shape{l.out}}});
    } else if (l.kind == LayerKind::MaxPool) {
      j.update({{"size", 2}, {"stride", 2}});
    }
    layers.push_back(std::move(j));
  }
  return {{"version", kModelVersion}, {"input", a.input_size}, {"margin", a.margin}, {"layers", layers}};
}

inline Architecture architecture_from_json(const nlohmann::json& j) {
  try {
    Architecture a;
    a.input_size = j.at("input").get<std::size_t>();
    a.margin = j.at("margin").get<double>();
    for (const auto& lj : j.at("layers")) {
      const auto type = lj.at("type").get<std::string>();
      const auto name = lj.value("name", type);
      if (type == "conv") {
        a.layers.push_back(LayerSpec::conv(name, lj.at("in"), lj.at("out"), lj.at("kernel"), lj.at("pad"),
                                           lj.at("stride")));
      } else if (type == "fc") {
        a.layers.push_back(LayerSpec::fc(name, lj.at("in"), lj.at("out")));
      } else if (type == "relu") {
        a.layers.push_back(LayerSpec::relu());
      } else if (type == "maxpool") {
        a.layers.push_back(LayerSpec::maxpool(name));
      } else {
        throw FormatError("unknown layer type '" + type + "'");
      }
      const auto& spec = a.layers.back();
      if (spec.has_params() &&
          (lj.at("weightShape").get<Shape>() != spec.weight_shape() || lj.at("biasShape").get<Shape>() != Shape{spec.out})) {
        throw FormatError("layer " + name + ": declared tensor shapes disagree with its geometry");
      }
    }
    a.output_shapes();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad architecture descriptor: ") + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(std::string("architecture does not compose: ") + e.what());
  }
}

inline std::string serialize_model(const SiameseModel& m) {
  std::string out;
  out += kModelMagicPrefix;
  out += std::to_string(kModelVersion);
  out += '\n';
  out += architecture_to_json(m.arch).dump();
  out += '\n';
  out.reserve(out.size() + m.parameter_count() * 8);
  for (const auto& t : m.params) {
    for (double v : t.data) {
      std::uint64_t raw = std::bit_cast<std::uint64_t>(v);
      if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap64(raw);
      char buf[8];
      std::memcpy(buf, &raw, 8);
      out.append(buf, 8);
    }
  }
  return out;
}

inline SiameseModel parse_model(const std::string& bytes, const std::string& origin = "<memory>") {
  const std::size_t magic_end = bytes.find('\n');
  if (magic_end == std::string::npos || bytes.compare(0, kModelMagicPrefix.size(), kModelMagicPrefix) != 0) {
    throw FormatError(origin + ": not a model file (bad magic)");
  }
  const std::string version = bytes.substr(kModelMagicPrefix.size(), magic_end - kModelMagicPrefix.size());
  if (version != std::to_string(kModelVersion)) {
    throw VersionError(origin + ": model format version '" + version + "' unsupported (reader supports " +
                       std::to_string(kModelVersion) + ")");
  }
  const std::size_t json_end = bytes.find('\n', magic_end + 1);
  if (json_end == std::string::npos) throw FormatError(origin + ": missing architecture line");
  nlohmann::json desc;
  try {
    desc = nlohmann::json::parse(bytes.substr(magic_end + 1, json_end - magic_end - 1));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(origin + ": malformed architecture line: " + e.what());
  }
  if (desc.value("version", 0) != kModelVersion) {
    throw VersionError(origin + ": descriptor version unsupported");
  }
  SiameseModel m(architecture_from_json(desc));
  const std::size_t expected = m.parameter_count() * 8;
  const std::size_t actual = bytes.size() - json_end - 1;
  if (actual != expected) {
    throw FormatError(origin + ": expected " + std::to_string(expected) + " weight bytes, got " +
                      std::to_string(actual));
  }
  const char* p = bytes.data() + json_end + 1;
  for (auto& t : m.params) {
    for (double& v : t.data) {
      std::uint64_t raw;
      std::memcpy(&raw, p, 8);
      if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap64(raw);
      v = std::bit_cast<double>(raw);
      p += 8;
    }
    if (!t.all_finite()) throw FormatError(origin + ": non-finite weight");
  }
  return m;
}

inline void save_model(const SiameseModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  const std::string bytes = serialize_model(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

inline SiameseModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open model file");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_model(bytes, path.string());
}

}  // namespace tfq::nn
