#include "cli/config_file.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "recall/errors.hpp"

namespace recall::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<ConfigEntry> parse_config_text(const std::string& text) {
  std::vector<ConfigEntry> out;
  std::set<std::string> keys;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const auto body = trim(raw);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line) +
                        ": expected 'key = value', got '" + body + "'");
    }
    ConfigEntry e{line, trim(body.substr(0, eq)), trim(body.substr(eq + 1))};
    if (e.key.empty()) {
      throw ConfigError("config line " + std::to_string(line) + ": empty key");
    }
    if (!keys.insert(e.key).second) {
      throw ConfigError("config line " + std::to_string(line) + ": key '" + e.key +
                        "' is set twice");
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ConfigEntry> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace recall::cli
