#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "mreal/model.hpp"

namespace mreal {

/// `key = value` lines; `#` starts a comment; blank lines ignored.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_kv(std::istream& in);
KeyValues read_kv_file(const std::filesystem::path& path);

double parse_real(const std::string& key, const std::string& value);
std::int64_t parse_int(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
/// Shortest text that parses back to the same double.
std::string format_real(double v);

/// Architecture keys: n_blocks, latent_dim, base_len, channels, kernel_len,
/// n_app, leaky_slope, output_activation. Returns the unconsumed entries.
KeyValues apply_arch(ArchConfig& arch, const KeyValues& kv);
KeyValues arch_to_map(const ArchConfig& arch);

}  // namespace mreal
