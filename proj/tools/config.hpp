#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mzo::cli {

/// Flat `section.key = value` text; `#` starts a comment, lists are
/// comma-separated.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "<config>");
  static KeyValues load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& raw(const std::string& key) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string text(const std::string& key, const std::string& fallback) const;
  double real(const std::string& key, double fallback) const;
  std::optional<double> optional_real(const std::string& key) const;
  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::uint64_t> integers(const std::string& key, const std::vector<std::uint64_t>& fallback) const;

  /// Throws ConfigError naming the first key not in `known`.
  void require_known(const std::vector<std::string>& known) const;

  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  std::string origin_;

  std::string where(const std::string& key) const;
};

double parse_real(const std::string& s, const std::string& what);
std::uint64_t parse_integer(const std::string& s, const std::string& what);

}  // namespace mzo::cli
