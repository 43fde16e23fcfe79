#pragma once

#include <fstream>
#include <map>
#include <sstream>

#include "gpa/network.hpp"

namespace gpa {

// Plain key=value text: one pair per line, '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_kv_text(
    std::istream& in) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) +
                       ": expected key=value, got '" + line + "'");
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

namespace detail {

inline int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ParseError("config: " + key + " expects an integer, got '" + v + "'");
  }
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ParseError("config: " + key + " expects a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ParseError("config: " + key + " expects a boolean, got '" + v + "'");
}

inline std::vector<int64_t> parse_int_list(const std::string& key,
                                           const std::string& v, size_t n) {
  std::vector<int64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, item));
  if (out.size() != n)
    throw ParseError("config: " + key + " expects " + std::to_string(n) +
                     " comma-separated integers, got '" + v + "'");
  return out;
}

inline GridDims parse_dims(const std::string& key, const std::string& v) {
  auto l = parse_int_list(key, v, 3);
  return {l[0], l[1], l[2]};
}

}  // namespace detail

// Returns false when the key is not a model key (so callers can route the
// pair elsewhere); throws on a malformed value.
inline bool apply_model_config_key(ModelConfig& cfg, const std::string& key,
                                   const std::string& value) {
  using namespace detail;
  if (key == "in_channels") cfg.in_channels = parse_int(key, value);
  else if (key == "num_classes") cfg.num_classes = parse_int(key, value);
  else if (key == "input_dims") cfg.input_dims = parse_dims(key, value);
  else if (key == "stage_dims") {
    auto l = parse_int_list(key, value, 3);
    cfg.stage_dims = {l[0], l[1], l[2]};
  } else if (key == "k_ratio") cfg.k_ratio = parse_real(key, value);
  else if (key == "tau") cfg.tau = parse_real(key, value);
  else if (key == "enable_masa") cfg.enable_masa = parse_bool(key, value);
  else if (key == "enable_mpga") cfg.enable_mpga = parse_bool(key, value);
  else if (key == "heads") cfg.heads = static_cast<int>(parse_int(key, value));
  else if (key == "mlp_ratio") cfg.mlp_ratio = parse_real(key, value);
  else if (key == "decoder_dim") cfg.decoder_dim = parse_int(key, value);
  else if (key == "pos_embed") cfg.pos_embed = parse_bool(key, value);
  else return false;
  return true;
}

inline std::vector<std::pair<std::string, std::string>> model_config_kv(
    const ModelConfig& cfg) {
  auto real = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  std::ostringstream dims, sd;
  dims << cfg.input_dims.d << "," << cfg.input_dims.h << "," << cfg.input_dims.w;
  sd << cfg.stage_dims[0] << "," << cfg.stage_dims[1] << ","
     << cfg.stage_dims[2];
  return {
      {"in_channels", std::to_string(cfg.in_channels)},
      {"num_classes", std::to_string(cfg.num_classes)},
      {"input_dims", dims.str()},
      {"stage_dims", sd.str()},
      {"k_ratio", real(cfg.k_ratio)},
      {"tau", real(cfg.tau)},
      {"enable_masa", cfg.enable_masa ? "1" : "0"},
      {"enable_mpga", cfg.enable_mpga ? "1" : "0"},
      {"heads", std::to_string(cfg.heads)},
      {"mlp_ratio", real(cfg.mlp_ratio)},
      {"decoder_dim", std::to_string(cfg.decoder_dim)},
      {"pos_embed", cfg.pos_embed ? "1" : "0"},
  };
}

}  // namespace gpa
