#include "newsrec/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "newsrec/error.hpp"

namespace newsrec {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string source) {
  KeyValueConfig cfg;
  cfg.source_ = std::move(source);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(cfg.source_ + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(cfg.source_ + ":" + std::to_string(line_no) + ": empty key");
    }
    if (cfg.entries_.contains(key)) {
      throw ConfigError(cfg.source_ + ":" + std::to_string(line_no) + ": field '" + key +
                        "' given twice");
    }
    cfg.entries_.emplace(std::move(key), std::move(value));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

void KeyValueConfig::fail(const std::string& key, const std::string& expected,
                          const std::string& got) const {
  throw ConfigError(source_ + ": field '" + key + "': expected " + expected + ", got '" + got +
                    "'");
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  consumed_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) fail(key, "a non-negative integer", *v);
  return out;
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

std::size_t KeyValueConfig::get_positive(const std::string& key, std::size_t fallback) const {
  const std::size_t v = get_size(key, fallback);
  if (v == 0) fail(key, "a positive integer", "0");
  return v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "inf" || *v == "infinity") return INFINITY;
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size() || !std::isfinite(out)) {
    fail(key, "a number", *v);
  }
  return out;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  fail(key, "true or false", *v);
}

std::vector<std::size_t> KeyValueConfig::get_size_list(const std::string& key,
                                                       std::vector<std::size_t> fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::vector<std::size_t> out;
  std::string item;
  std::istringstream in(*v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    std::size_t x = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || x == 0) {
      fail(key, "a comma-separated list of positive integers", *v);
    }
    if (!out.empty() && x <= out.back()) fail(key, "strictly ascending values", *v);
    out.push_back(x);
  }
  if (out.empty()) fail(key, "at least one value", *v);
  return out;
}

void KeyValueConfig::require_all_consumed() const {
  for (const auto& [key, value] : entries_) {
    if (!consumed_.contains(key)) throw ConfigError(source_ + ": unknown field '" + key + "'");
  }
}

std::string KeyValueConfig::normalized() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + " = " + value + "\n";
  return out;
}

std::uint64_t KeyValueConfig::digest() const { return fnv1a(normalized()); }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace newsrec
