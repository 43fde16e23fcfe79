#pragma once

#include <bit>
#include <cstring>
#include <fstream>

#include "gpa/configfile.hpp"

namespace gpa {

namespace detail {

inline void write_f32_le(std::ostream& out, const float* data, size_t n) {
  static_assert(sizeof(float) == 4);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(n * 4));
  } else {
    for (size_t i = 0; i < n; ++i) {
      uint32_t bits;
      std::memcpy(&bits, &data[i], 4);
      char b[4] = {char(bits), char(bits >> 8), char(bits >> 16),
                   char(bits >> 24)};
      out.write(b, 4);
    }
  }
}

inline void read_f32_le(std::istream& in, float* data, size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
  } else {
    for (size_t i = 0; i < n; ++i) {
      unsigned char b[4];
      in.read(reinterpret_cast<char*>(b), 4);
      uint32_t bits = uint32_t(b[0]) | uint32_t(b[1]) << 8 |
                      uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
      std::memcpy(&data[i], &bits, 4);
    }
  }
}

}  // namespace detail

// Single-file checkpoint: a text manifest (config key=value pairs, then one
// `param=<name> <d0,d1,...>` line per tensor in store order), a `blob=<n>`
// line, and n little-endian float32 values in manifest order.
inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            const ParamStore<float>& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out << "format=gpaseg-checkpoint-v1\n";
  for (const auto& [k, v] : model_config_kv(cfg)) out << k << "=" << v << "\n";
  int64_t total = 0;
  for (const auto& p : store.items()) {
    out << "param=" << p.name << " ";
    for (size_t i = 0; i < p.value.shape().size(); ++i)
      out << (i ? "," : "") << p.value.shape()[i];
    out << "\n";
    total += p.value.numel();
  }
  out << "blob=" << total << "\n";
  for (const auto& p : store.items())
    detail::write_f32_le(out, p.value.ptr(),
                         static_cast<size_t>(p.value.numel()));
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

template <class ModelT = Model<float>>
ModelT load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "format=gpaseg-checkpoint-v1")
    throw ParseError("checkpoint: bad format line in " + path);

  ModelConfig cfg;
  std::vector<std::pair<std::string, Shape>> manifest;
  int64_t blob = -1;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("checkpoint: malformed manifest line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "param") {
      const auto sp = value.find(' ');
      if (sp == std::string::npos)
        throw ParseError("checkpoint: malformed param line '" + line + "'");
      Shape shape;
      std::stringstream ss(value.substr(sp + 1));
      std::string item;
      while (std::getline(ss, item, ','))
        shape.push_back(detail::parse_int("param shape", item));
      manifest.emplace_back(value.substr(0, sp), std::move(shape));
    } else if (key == "blob") {
      blob = detail::parse_int("blob", value);
      break;
    } else if (!apply_model_config_key(cfg, key, value)) {
      throw ParseError("checkpoint: unknown manifest key '" + key + "'");
    }
  }
  if (blob < 0) throw ParseError("checkpoint: missing blob section in " + path);

  ModelT model(cfg, 0);
  auto& items = model.store.items();
  if (items.size() != manifest.size())
    throw ParseError("checkpoint: manifest lists " +
                     std::to_string(manifest.size()) + " tensors, config " +
                     "implies " + std::to_string(items.size()));
  int64_t total = 0;
  for (size_t i = 0; i < items.size(); ++i) {
    if (items[i].name != manifest[i].first ||
        items[i].value.shape() != manifest[i].second)
      throw ParseError("checkpoint: tensor " + std::to_string(i) +
                       " mismatch: expected " + items[i].name + shape_str(
                           items[i].value.shape()) + ", manifest has " +
                       manifest[i].first + shape_str(manifest[i].second));
    total += items[i].value.numel();
  }
  if (total != blob)
    throw ParseError("checkpoint: blob holds " + std::to_string(blob) +
                     " values, manifest needs " + std::to_string(total));
  for (auto& p : items) {
    std::vector<float> buf(static_cast<size_t>(p.value.numel()));
    detail::read_f32_le(in, buf.data(), buf.size());
    if (!in) throw ParseError("checkpoint: blob truncated in " + path);
    std::copy(buf.begin(), buf.end(), p.value.data().begin());
  }
  return model;
}

}  // namespace gpa
