#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "newsrec/config.hpp"
#include "newsrec/model.hpp"

namespace newsrec {

inline constexpr char kCheckpointMagic[8] = {'N', 'R', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Model section of a config: news.*, user.* and the frozen store paths.
ModelConfig parse_model_config(const KeyValueConfig& cfg);
/// Every model key written out explicitly, so a checkpoint does not depend
/// on defaults of the build that reads it.
KeyValueConfig model_config_entries(const ModelConfig& config);

/// Loads the frozen stores a model section names (paths under
/// "frozen_news" and "frozen_tokens"), skipping those the text family
/// does not use.
void load_frozen_sources(const ModelConfig& config, const KeyValueConfig& paths,
                         ModelResources& resources);

struct LoadedCheckpoint {
  std::unique_ptr<RecommenderModel> model;
  KeyValueConfig model_section;
  std::uint64_t config_digest = 0;
  std::size_t max_history = kDefaultMaxHistory;
};

/// Layout: magic, u32 version, u64 config digest, model section text,
/// word/category/subcategory vocabularies, long-term users, then named
/// parameters (u16 name, u32 rank, u32 extents, little-endian f32 values).
void save_checkpoint(const RecommenderModel& model, const KeyValueConfig& model_section,
                     std::uint64_t config_digest, const std::filesystem::path& path);

/// Rebuilds the model from its embedded section and overwrites every
/// parameter. `overrides` replaces entries of the section (e.g. store
/// paths). Shape disagreements raise ArtifactMismatchError.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const KeyValueConfig& overrides = {});

/// Writes to a sibling temporary file and renames it into place.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& writer);

}  // namespace newsrec
