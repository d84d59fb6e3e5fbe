#include "config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mzo/common.hpp"

namespace mzo::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

double parse_real(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(what + ": '" + s + "' is not a number");
  if (!std::isfinite(v)) throw ConfigError(what + ": '" + s + "' is not finite");
  return v;
}

std::uint64_t parse_integer(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec == std::errc() && ptr == end) return v;
  // accept 1e4 style integers
  const double d = parse_real(s, what);
  if (d < 0 || d != std::floor(d) || d > 9.0e18) throw ConfigError(what + ": '" + s + "' is not a non-negative integer");
  return static_cast<std::uint64_t>(d);
}

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.values_.count(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.values_[key] = value;
    kv.lines_[key] = lineno;
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot read config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::string KeyValues::where(const std::string& key) const {
  auto it = lines_.find(key);
  return origin_ + (it == lines_.end() ? "" : ":" + std::to_string(it->second)) + ": " + key;
}

const std::string& KeyValues::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
  return it->second;
}

std::string KeyValues::text(const std::string& key, const std::string& fallback) const {
  return has(key) ? raw(key) : fallback;
}

double KeyValues::real(const std::string& key, double fallback) const {
  return has(key) ? parse_real(raw(key), where(key)) : fallback;
}

std::optional<double> KeyValues::optional_real(const std::string& key) const {
  if (!has(key) || raw(key) == "auto") return std::nullopt;
  return parse_real(raw(key), where(key));
}

std::uint64_t KeyValues::integer(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? parse_integer(raw(key), where(key)) : fallback;
}

std::vector<double> KeyValues::reals(const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(raw(key))) out.push_back(parse_real(item, where(key)));
  if (out.empty()) throw ConfigError(where(key) + ": empty list");
  return out;
}

std::vector<std::uint64_t> KeyValues::integers(const std::string& key,
                                               const std::vector<std::uint64_t>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(raw(key))) out.push_back(parse_integer(item, where(key)));
  if (out.empty()) throw ConfigError(where(key) + ": empty list");
  return out;
}

void KeyValues::require_known(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    bool found = false;
    for (const auto& k : known) found = found || k == key;
    if (!found) throw ConfigError(where(key) + ": unknown key");
  }
}

}  // namespace mzo::cli
