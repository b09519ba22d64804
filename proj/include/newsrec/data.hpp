#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "newsrec/ops.hpp"
#include "newsrec/tensor.hpp"

namespace newsrec {

inline constexpr std::int32_t kPaddingIndex = 0;
inline constexpr std::int32_t kOovIndex = 1;
inline constexpr std::size_t kDefaultMaxTitleLength = 30;
inline constexpr std::size_t kDefaultMaxHistory = 50;

/// Token to index map assigned in first-seen order after reserved entries.
class Vocabulary {
 public:
  /// Words reserve "<pad>" = 0 and "<oov>" = 1; unknown words map to 1.
  static Vocabulary words();
  /// Category labels reserve "<unk>" = 0; unknown labels map to 0.
  static Vocabulary labels();
  static Vocabulary from_tokens(std::vector<std::string> tokens, std::int32_t fallback);

  std::int32_t add(const std::string& token);
  std::int32_t index_of(std::string_view token) const;
  std::optional<std::int32_t> find(std::string_view token) const;
  const std::string& token(std::int32_t index) const { return tokens_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  std::int32_t fallback() const { return fallback_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::int32_t fallback_ = 0;
};

struct Vocabularies {
  Vocabulary words = Vocabulary::words();
  Vocabulary categories = Vocabulary::labels();
  Vocabulary subcategories = Vocabulary::labels();
};

/// Lowercase, split on anything that is not an ASCII letter or digit.
std::vector<std::string> tokenize(std::string_view text);

struct NewsRecord {
  std::string id;
  std::string category;
  std::string subcategory;
  std::string title;
  std::vector<std::string> tokens;
};

/// Model input for one article: padded title indices plus optional labels.
struct NewsFeatures {
  std::string news_id;
  std::vector<std::int32_t> title_tokens;
  Mask title_mask;
  std::optional<std::int32_t> category_id;
  std::optional<std::int32_t> subcategory_id;

  std::size_t title_length() const;
};

NewsFeatures featurize(const NewsRecord& record, const Vocabularies& vocab,
                       std::size_t max_title_length = kDefaultMaxTitleLength);

struct NewsCatalog {
  std::vector<NewsRecord> records;
  std::unordered_map<std::string, std::size_t> index;
  Vocabularies vocab;
  std::vector<std::string> warnings;

  /// Adds a record and grows the vocabularies. Throws DataError on a
  /// duplicate id.
  void add(NewsRecord record);
  bool contains(std::string_view id) const { return index.contains(std::string(id)); }
  const NewsRecord& at(std::string_view id) const;
};

NewsCatalog parse_news_tsv(std::istream& in, const std::string& source = "news.tsv");
NewsCatalog parse_news_tsv(const std::filesystem::path& path);
void write_news_tsv(const NewsCatalog& catalog, std::ostream& out);
/// Adds every record of `from` whose id is not yet in `into`.
void merge_catalog(NewsCatalog& into, const NewsCatalog& from);

struct Impression {
  std::string impression_id;
  std::string user_id;
  std::int64_t timestamp = 0;
  std::vector<std::string> history;
  std::vector<std::string> candidates;
  std::vector<int> labels;
};

/// Impressions ordered by timestamp.
struct BehaviorLog {
  std::vector<Impression> impressions;
};

BehaviorLog parse_behaviors_tsv(std::istream& in, const NewsCatalog& catalog,
                                std::size_t max_history = kDefaultMaxHistory,
                                const std::string& source = "behaviors.tsv");
BehaviorLog parse_behaviors_tsv(const std::filesystem::path& path, const NewsCatalog& catalog,
                                std::size_t max_history = kDefaultMaxHistory);
void write_behaviors_tsv(const BehaviorLog& log, std::ostream& out);

/// "MM/DD/YYYY HH:MM:SS AM|PM" to seconds since the Unix epoch (UTC).
std::int64_t parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t seconds);
/// Accepts either the MIND timestamp format or a plain integer.
std::int64_t parse_boundary(std::string_view text);

struct TemporalSplit {
  BehaviorLog train;
  BehaviorLog validation;
};

/// Impressions strictly before `boundary` go to train, the rest to
/// validation. Throws ConfigError when either side is empty.
TemporalSplit temporal_split(const BehaviorLog& log, std::int64_t boundary);
/// Midnight starting the day of the latest impression, so the last day of
/// data becomes the validation side.
std::int64_t last_day_boundary(const BehaviorLog& log);

struct WordVectorTable {
  std::size_t dim = 0;
  Tensor table;  // [vocabulary size x dim], row kPaddingIndex is zero
  std::size_t found = 0;
};

/// Reads "token v1 ... vd" lines. Vocabulary tokens absent from the file get
/// seeded Uniform(-0.1, 0.1) vectors.
WordVectorTable load_word_embeddings(std::istream& in, const Vocabulary& vocab,
                                     std::uint64_t seed,
                                     const std::string& source = "word vectors");
WordVectorTable load_word_embeddings(const std::filesystem::path& path,
                                     const Vocabulary& vocab, std::uint64_t seed);
/// Table with every row drawn from Uniform(-0.1, 0.1), padding row zero.
WordVectorTable random_word_embeddings(const Vocabulary& vocab, std::size_t dim,
                                       std::uint64_t seed);

}  // namespace newsrec
