#include "newsrec/frozen_store.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "newsrec/binary_io.hpp"
#include "newsrec/error.hpp"

namespace newsrec {

void FrozenStore::insert(std::string id, std::vector<float> values) {
  if (ids_.empty() && dim_ == 0) dim_ = values.size();
  if (values.size() != dim_) {
    throw FormatError("vector for '" + id + "' has " + std::to_string(values.size()) +
                      " values, store dimension is " + std::to_string(dim_));
  }
  if (index_.contains(id)) throw FormatError("duplicate id '" + id + "' in frozen store");
  index_.emplace(id, rows_.size());
  ids_.push_back(std::move(id));
  rows_.push_back(std::move(values));
}

const std::vector<float>* FrozenStore::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &rows_[it->second];
}

const std::vector<float>& FrozenStore::at(std::string_view id) const {
  const auto* row = find(id);
  if (!row) throw DataError("no frozen vector for id '" + std::string(id) + "'");
  return *row;
}

std::string token_key(std::string_view news_id, std::size_t position) {
  return std::string(news_id) + "#" + std::to_string(position);
}

void write_frozen_store_binary(const FrozenStore& store, std::ostream& out) {
  out.write(kFrozenStoreMagic, sizeof kFrozenStoreMagic);
  binary::write_le(out, static_cast<std::uint32_t>(store.size()));
  binary::write_le(out, static_cast<std::uint32_t>(store.dim()));
  for (const auto& id : store.ids()) {
    binary::write_short_string(out, id);
    for (float v : store.at(id)) binary::write_f32(out, v);
  }
}

void write_frozen_store_tsv(const FrozenStore& store, std::ostream& out) {
  out << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (const auto& id : store.ids()) {
    out << id << '\t';
    const auto& row = store.at(id);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ' ';
      out << row[i];
    }
    out << '\n';
  }
}

void save_frozen_store(const FrozenStore& store, const std::filesystem::path& path, bool tsv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  if (tsv) {
    write_frozen_store_tsv(store, out);
  } else {
    write_frozen_store_binary(store, out);
  }
}

namespace {

FrozenStore read_binary(std::istream& in, const std::string& source) {
  const auto count = binary::read_le<std::uint32_t>(in, source + " header");
  const auto dim = binary::read_le<std::uint32_t>(in, source + " header");
  FrozenStore store(dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::string what = source + " record " + std::to_string(r);
    std::string id = binary::read_short_string(in, what);
    std::vector<float> values(dim);
    for (auto& v : values) v = binary::read_f32(in, what);
    store.insert(std::move(id), std::move(values));
  }
  return store;
}

FrozenStore read_tsv(std::istream& in, const std::string& source) {
  FrozenStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected '<id>\\t<values>'");
    }
    std::istringstream values(line.substr(tab + 1));
    std::vector<float> row;
    std::string item;
    while (values >> item) {
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size()) {
        throw FormatError(source + ":" + std::to_string(line_no) + ": bad number '" + item + "'");
      }
      row.push_back(v);
    }
    try {
      store.insert(line.substr(0, tab), std::move(row));
    } catch (const FormatError& e) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return store;
}

}  // namespace

FrozenStore read_frozen_store(std::istream& in, const std::string& source) {
  char head[sizeof kFrozenStoreMagic] = {};
  in.read(head, sizeof head);
  const auto got = in.gcount();
  if (got == static_cast<std::streamsize>(sizeof head) &&
      std::memcmp(head, kFrozenStoreMagic, sizeof head) == 0) {
    return read_binary(in, source);
  }
  const bool looks_binary =
      (got >= 4 && std::memcmp(head, kFrozenStoreMagic, 4) == 0) ||
      std::any_of(head, head + got, [](char c) { return c == '\0'; });
  if (looks_binary) throw FormatError(source + ": corrupt magic");
  in.clear();
  in.seekg(0);
  return read_tsv(in, source);
}

FrozenStore load_frozen_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  return read_frozen_store(in, path.string());
}

}  // namespace newsrec
