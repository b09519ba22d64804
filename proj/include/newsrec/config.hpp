#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace newsrec {

/// Flat "key = value" text with '#' comments. Typed getters raise
/// ConfigError naming the offending field.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string source = "config");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.contains(key); }
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
  void erase(const std::string& key) { entries_.erase(key); }

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::size_t get_positive(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_size_list(const std::string& key,
                                         std::vector<std::size_t> fallback) const;

  /// Throws ConfigError for the first key no getter asked for.
  void require_all_consumed() const;

  /// Sorted "key = value" lines; whitespace and comments do not survive.
  std::string normalized() const;
  std::uint64_t digest() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& expected,
                         const std::string& got) const;

  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> consumed_;
  std::string source_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex_digest(std::uint64_t digest);

}  // namespace newsrec
