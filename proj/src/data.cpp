#include "newsrec/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "newsrec/error.hpp"
#include "newsrec/rng.hpp"

namespace newsrec {
namespace {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string item;
  while (in >> item) out.push_back(item);
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  return in;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

}  // namespace

Vocabulary Vocabulary::words() { return from_tokens({"<pad>", "<oov>"}, kOovIndex); }

Vocabulary Vocabulary::labels() { return from_tokens({"<unk>"}, 0); }

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, std::int32_t fallback) {
  Vocabulary v;
  v.fallback_ = fallback;
  for (auto& t : tokens) v.add(t);
  return v;
}

std::int32_t Vocabulary::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::optional<std::int32_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::int32_t Vocabulary::index_of(std::string_view token) const {
  return find(token).value_or(fallback_);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) && c < 128) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::size_t NewsFeatures::title_length() const {
  return static_cast<std::size_t>(std::count(title_mask.begin(), title_mask.end(), true));
}

NewsFeatures featurize(const NewsRecord& record, const Vocabularies& vocab,
                       std::size_t max_title_length) {
  NewsFeatures f;
  f.news_id = record.id;
  f.title_tokens.assign(max_title_length, kPaddingIndex);
  f.title_mask.assign(max_title_length, false);
  const std::size_t n = std::min(max_title_length, record.tokens.size());
  for (std::size_t i = 0; i < n; ++i) {
    f.title_tokens[i] = vocab.words.index_of(record.tokens[i]);
    f.title_mask[i] = true;
  }
  if (!record.category.empty()) f.category_id = vocab.categories.index_of(record.category);
  if (!record.subcategory.empty()) {
    f.subcategory_id = vocab.subcategories.index_of(record.subcategory);
  }
  return f;
}

void NewsCatalog::add(NewsRecord record) {
  if (index.contains(record.id)) throw DataError("duplicate news id '" + record.id + "'");
  for (const auto& t : record.tokens) vocab.words.add(t);
  if (!record.category.empty()) vocab.categories.add(record.category);
  if (!record.subcategory.empty()) vocab.subcategories.add(record.subcategory);
  index.emplace(record.id, records.size());
  records.push_back(std::move(record));
}

const NewsRecord& NewsCatalog::at(std::string_view id) const {
  auto it = index.find(std::string(id));
  if (it == index.end()) throw DataError("unknown news id '" + std::string(id) + "'");
  return records[it->second];
}

NewsCatalog parse_news_tsv(std::istream& in, const std::string& source) {
  NewsCatalog catalog;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() < 4 || cols[0].empty()) {
      throw FormatError(where(source, line_no) +
                        ": expected at least 4 tab-separated columns (id, category, "
                        "subcategory, title), got " +
                        std::to_string(cols.size()));
    }
    NewsRecord rec{cols[0], cols[1], cols[2], cols[3], tokenize(cols[3])};
    if (rec.tokens.empty()) {
      catalog.warnings.push_back(where(source, line_no) + ": empty title for " + rec.id);
    }
    if (catalog.contains(rec.id)) {
      throw DataError(where(source, line_no) + ": duplicate news id '" + rec.id + "'");
    }
    catalog.add(std::move(rec));
  }
  return catalog;
}

NewsCatalog parse_news_tsv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_news_tsv(in, path.string());
}

void write_news_tsv(const NewsCatalog& catalog, std::ostream& out) {
  for (const auto& r : catalog.records) {
    out << r.id << '\t' << r.category << '\t' << r.subcategory << '\t' << r.title
        << "\t\t\t[]\t[]\n";
  }
}

void merge_catalog(NewsCatalog& into, const NewsCatalog& from) {
  for (const auto& r : from.records) {
    if (!into.contains(r.id)) into.add(r);
  }
}

std::int64_t parse_timestamp(std::string_view text) {
  unsigned month = 0, day = 0, year = 0, hour = 0, minute = 0, second = 0;
  char meridiem[3] = {0, 0, 0};
  const std::string s(text);
  if (std::sscanf(s.c_str(), "%u/%u/%u %u:%u:%u %2s", &month, &day, &year, &hour, &minute,
                  &second, meridiem) != 7 ||
      month < 1 || month > 12 || day < 1 || day > 31 || hour < 1 || hour > 12 ||
      minute > 59 || second > 59) {
    throw FormatError("malformed timestamp '" + s + "'");
  }
  const std::string m = meridiem;
  if (m != "AM" && m != "PM") throw FormatError("malformed timestamp '" + s + "'");
  hour %= 12;
  if (m == "PM") hour += 12;
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year(static_cast<int>(year)),
                           std::chrono::month(month), std::chrono::day(day)};
  if (!ymd.ok()) throw FormatError("invalid date in timestamp '" + s + "'");
  const auto days = sys_days(ymd).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(std::int64_t seconds) {
  using namespace std::chrono;
  const auto days = static_cast<int>(seconds >= 0 ? seconds / 86400 : (seconds - 86399) / 86400);
  const std::int64_t rem = seconds - static_cast<std::int64_t>(days) * 86400;
  const year_month_day ymd{sys_days(std::chrono::days(days))};
  unsigned hour = static_cast<unsigned>(rem / 3600);
  const unsigned minute = static_cast<unsigned>((rem % 3600) / 60);
  const unsigned second = static_cast<unsigned>(rem % 60);
  const char* meridiem = hour >= 12 ? "PM" : "AM";
  hour %= 12;
  if (hour == 0) hour = 12;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%u/%u/%d %u:%02u:%02u %s", static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(ymd.year()), hour, minute,
                second, meridiem);
  return buf;
}

std::int64_t parse_boundary(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec == std::errc() && ptr == text.data() + text.size()) return value;
  return parse_timestamp(text);
}

BehaviorLog parse_behaviors_tsv(std::istream& in, const NewsCatalog& catalog,
                                std::size_t max_history, const std::string& source) {
  BehaviorLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 5) {
      throw FormatError(where(source, line_no) + ": expected 5 tab-separated columns, got " +
                        std::to_string(cols.size()));
    }
    Impression imp;
    imp.impression_id = cols[0];
    imp.user_id = cols[1];
    try {
      imp.timestamp = parse_timestamp(cols[2]);
    } catch (const FormatError& e) {
      throw FormatError(where(source, line_no) + ": " + e.what());
    }
    imp.history = split_whitespace(cols[3]);
    for (const auto& id : imp.history) {
      if (!catalog.contains(id)) {
        throw DataError("impression " + imp.impression_id + ": unknown news id '" + id + "'");
      }
    }
    if (imp.history.size() > max_history) {
      imp.history.erase(imp.history.begin(),
                        imp.history.end() - static_cast<std::ptrdiff_t>(max_history));
    }
    for (const auto& token : split_whitespace(cols[4])) {
      const auto dash = token.rfind('-');
      if (dash == std::string::npos || dash + 2 != token.size() ||
          (token[dash + 1] != '0' && token[dash + 1] != '1')) {
        throw FormatError(where(source, line_no) + ": impression " + imp.impression_id +
                          ": malformed label in '" + token + "'");
      }
      std::string id = token.substr(0, dash);
      if (!catalog.contains(id)) {
        throw DataError("impression " + imp.impression_id + ": unknown news id '" + id + "'");
      }
      imp.candidates.push_back(std::move(id));
      imp.labels.push_back(token[dash + 1] - '0');
    }
    if (imp.candidates.empty()) {
      throw FormatError(where(source, line_no) + ": impression " + imp.impression_id +
                        " has no candidates");
    }
    log.impressions.push_back(std::move(imp));
  }
  std::stable_sort(log.impressions.begin(), log.impressions.end(),
                   [](const Impression& a, const Impression& b) { return a.timestamp < b.timestamp; });
  return log;
}

BehaviorLog parse_behaviors_tsv(const std::filesystem::path& path, const NewsCatalog& catalog,
                                std::size_t max_history) {
  auto in = open_input(path);
  return parse_behaviors_tsv(in, catalog, max_history, path.string());
}

void write_behaviors_tsv(const BehaviorLog& log, std::ostream& out) {
  for (const auto& imp : log.impressions) {
    out << imp.impression_id << '\t' << imp.user_id << '\t' << format_timestamp(imp.timestamp)
        << '\t';
    for (std::size_t i = 0; i < imp.history.size(); ++i) {
      if (i) out << ' ';
      out << imp.history[i];
    }
    out << '\t';
    for (std::size_t i = 0; i < imp.candidates.size(); ++i) {
      if (i) out << ' ';
      out << imp.candidates[i] << '-' << imp.labels[i];
    }
    out << '\n';
  }
}

TemporalSplit temporal_split(const BehaviorLog& log, std::int64_t boundary) {
  TemporalSplit split;
  for (const auto& imp : log.impressions) {
    (imp.timestamp < boundary ? split.train : split.validation).impressions.push_back(imp);
  }
  if (split.train.impressions.empty() || split.validation.impressions.empty()) {
    throw ConfigError("temporal split at " + format_timestamp(boundary) + " (" +
                      std::to_string(boundary) + ") leaves the " +
                      (split.train.impressions.empty() ? "training" : "validation") +
                      " side empty");
  }
  return split;
}

std::int64_t last_day_boundary(const BehaviorLog& log) {
  if (log.impressions.empty()) throw ConfigError("cannot split an empty behavior log");
  std::int64_t latest = log.impressions.front().timestamp;
  for (const auto& imp : log.impressions) latest = std::max(latest, imp.timestamp);
  const std::int64_t day = latest >= 0 ? latest / 86400 : (latest - 86399) / 86400;
  return day * 86400;
}

WordVectorTable random_word_embeddings(const Vocabulary& vocab, std::size_t dim,
                                       std::uint64_t seed) {
  WordVectorTable out;
  out.dim = dim;
  out.table = Tensor(Shape{vocab.size(), dim});
  Rng rng(seed);
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    for (double& v : out.table.row(r)) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  }
  for (double& v : out.table.row(kPaddingIndex)) v = 0.0;
  return out;
}

WordVectorTable load_word_embeddings(std::istream& in, const Vocabulary& vocab,
                                     std::uint64_t seed, const std::string& source) {
  std::vector<std::optional<std::vector<double>>> rows(vocab.size());
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    const std::size_t d = fields.size() - 1;
    if (d == 0) throw FormatError(where(source, line_no) + ": token without values");
    if (dim == 0) dim = d;
    if (d != dim) {
      throw FormatError(where(source, line_no) + ": expected " + std::to_string(dim) +
                        " values, got " + std::to_string(d));
    }
    auto idx = vocab.find(fields[0]);
    if (!idx || *idx == kPaddingIndex) continue;
    std::vector<double> values(d);
    for (std::size_t i = 0; i < d; ++i) {
      const std::string& f = fields[i + 1];
      float parsed = 0.0f;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), parsed);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw FormatError(where(source, line_no) + ": bad number '" + f + "'");
      }
      values[i] = parsed;
    }
    rows[static_cast<std::size_t>(*idx)] = std::move(values);
  }
  if (dim == 0) throw FormatError(source + ": no vectors found");
  WordVectorTable out = random_word_embeddings(vocab, dim, seed);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r]) continue;
    std::copy(rows[r]->begin(), rows[r]->end(), out.table.row(r).begin());
    ++out.found;
  }
  return out;
}

WordVectorTable load_word_embeddings(const std::filesystem::path& path,
                                     const Vocabulary& vocab, std::uint64_t seed) {
  auto in = open_input(path);
  return load_word_embeddings(in, vocab, seed, path.string());
}

}  // namespace newsrec
