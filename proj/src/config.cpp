#include "mreal/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include "mreal/error.hpp"

namespace mreal {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues parse_kv(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IngestError("expected key = value", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw IngestError("empty key", line_no);
    if (kv.count(key)) throw IngestError("duplicate key '" + key + "'", line_no);
    kv[key] = value;
  }
  return kv;
}

KeyValues read_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  return parse_kv(in);
}

double parse_real(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw Error("config key '" + key + "': expected a number, got '" + value + "'");
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw Error("config key '" + key + "': expected an integer, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

KeyValues apply_arch(ArchConfig& arch, const KeyValues& kv) {
  KeyValues rest;
  for (const auto& [key, value] : kv) {
    if (key == "n_blocks") arch.n_blocks = static_cast<int>(parse_int(key, value));
    else if (key == "latent_dim") arch.latent_dim = static_cast<int>(parse_int(key, value));
    else if (key == "base_len") arch.base_len = static_cast<int>(parse_int(key, value));
    else if (key == "channels") arch.channels = static_cast<int>(parse_int(key, value));
    else if (key == "kernel_len") arch.kernel_len = static_cast<int>(parse_int(key, value));
    else if (key == "n_app") arch.n_app = static_cast<int>(parse_int(key, value));
    else if (key == "leaky_slope") arch.leaky_slope = parse_real(key, value);
    else if (key == "output_activation") arch.output_activation = parse_output_activation(value);
    else rest[key] = value;
  }
  arch.validate();
  return rest;
}

KeyValues arch_to_map(const ArchConfig& arch) {
  return {{"n_blocks", std::to_string(arch.n_blocks)},
          {"latent_dim", std::to_string(arch.latent_dim)},
          {"base_len", std::to_string(arch.base_len)},
          {"channels", std::to_string(arch.channels)},
          {"kernel_len", std::to_string(arch.kernel_len)},
          {"n_app", std::to_string(arch.n_app)},
          {"leaky_slope", format_real(arch.leaky_slope)},
          {"output_activation", to_string(arch.output_activation)}};
}

}  // namespace mreal
