#pragma once

#include <string>
#include <vector>

namespace recall::cli {

struct ConfigEntry {
  std::size_t line = 0;
  std::string key;
  std::string value;
};

/// Flat "key = value" file; '#' starts a comment, blank lines are skipped.
/// Throws ConfigError naming the line for malformed entries or repeated keys.
std::vector<ConfigEntry> read_config_file(const std::string& path);
std::vector<ConfigEntry> parse_config_text(const std::string& text);

}  // namespace recall::cli
