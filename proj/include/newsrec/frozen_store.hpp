#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace newsrec {

/// Eight bytes opening a binary store; anything else is read as TSV.
inline constexpr char kFrozenStoreMagic[8] = {'N', 'R', 'F', 'R', 'O', 'Z', 'E', 'N'};

/// Precomputed id -> float vector table (article vectors, per-token vectors
/// keyed "<news id>#<position>", or dumped embeddings).
class FrozenStore {
 public:
  FrozenStore() = default;
  explicit FrozenStore(std::size_t dim) : dim_(dim) {}

  /// Throws FormatError on a duplicate id or a dimension mismatch.
  void insert(std::string id, std::vector<float> values);
  const std::vector<float>* find(std::string_view id) const;
  /// Throws DataError naming the id when absent.
  const std::vector<float>& at(std::string_view id) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<std::vector<float>> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::string token_key(std::string_view news_id, std::size_t position);

void write_frozen_store_binary(const FrozenStore& store, std::ostream& out);
void write_frozen_store_tsv(const FrozenStore& store, std::ostream& out);
void save_frozen_store(const FrozenStore& store, const std::filesystem::path& path,
                       bool tsv = false);

FrozenStore read_frozen_store(std::istream& in, const std::string& source = "store");
/// Detects the encoding from the leading magic.
FrozenStore load_frozen_store(const std::filesystem::path& path);

}  // namespace newsrec
