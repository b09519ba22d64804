#include "newsrec/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "newsrec/binary_io.hpp"
#include "newsrec/error.hpp"

namespace newsrec {
namespace {

void write_tokens(std::ostream& out, const std::vector<std::string>& tokens) {
  binary::write_le(out, static_cast<std::uint32_t>(tokens.size()));
  for (const auto& t : tokens) binary::write_short_string(out, t);
}

std::vector<std::string> read_tokens(std::istream& in, const std::string& what) {
  const auto n = binary::read_le<std::uint32_t>(in, what);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(binary::read_short_string(in, what));
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

ModelConfig parse_model_config(const KeyValueConfig& cfg) {
  ModelConfig m;
  auto& t = m.news.text;
  t.family = parse_text_family(cfg.get_string("news.text_encoder", "cnn_addatt"));
  t.word_dim = cfg.get_positive("news.word_dim", t.word_dim);
  t.output_dim = cfg.get_positive("news.text_dim", t.output_dim);
  t.cnn_window = cfg.get_positive("news.cnn_window", t.cnn_window);
  t.heads = cfg.get_positive("news.heads", t.heads);
  t.query_dim = cfg.get_positive("news.query_dim", t.query_dim);
  t.frozen_projection = cfg.get_bool("news.frozen_projection", t.frozen_projection);
  t.train_word_embeddings = cfg.get_bool("news.train_word_embeddings", t.train_word_embeddings);
  m.news.aggregation = parse_aggregation(cfg.get_string("news.aggregation", "none"));
  m.news.category_embedding_dim = cfg.get_positive("news.category_embedding_dim", m.news.category_embedding_dim);
  m.news.category_dim = cfg.get_positive("news.category_dim", m.news.category_dim);
  m.news.max_title_length = cfg.get_positive("news.max_title_length", m.news.max_title_length);

  auto& u = m.user;
  u.family = parse_user_family(cfg.get_string("user.encoder", "lf"));
  u.heads = cfg.get_positive("user.heads", u.heads);
  u.query_dim = cfg.get_positive("user.query_dim", u.query_dim);
  u.gru_dim = cfg.get_size("user.gru_dim", u.gru_dim);
  u.long_term_dim = cfg.get_size("user.long_term_dim", u.long_term_dim);
  u.cnn_window = cfg.get_positive("user.cnn_window", u.cnn_window);
  return m;
}

KeyValueConfig model_config_entries(const ModelConfig& m) {
  KeyValueConfig cfg;
  const auto& t = m.news.text;
  cfg.set("news.text_encoder", std::string(name_of(t.family)));
  cfg.set("news.word_dim", std::to_string(t.word_dim));
  cfg.set("news.text_dim", std::to_string(t.output_dim));
  cfg.set("news.cnn_window", std::to_string(t.cnn_window));
  cfg.set("news.heads", std::to_string(t.heads));
  cfg.set("news.query_dim", std::to_string(t.query_dim));
  cfg.set("news.frozen_projection", bool_text(t.frozen_projection));
  cfg.set("news.train_word_embeddings", bool_text(t.train_word_embeddings));
  cfg.set("news.aggregation", std::string(name_of(m.news.aggregation)));
  cfg.set("news.category_embedding_dim", std::to_string(m.news.category_embedding_dim));
  cfg.set("news.category_dim", std::to_string(m.news.category_dim));
  cfg.set("news.max_title_length", std::to_string(m.news.max_title_length));
  cfg.set("user.encoder", std::string(name_of(m.user.family)));
  cfg.set("user.heads", std::to_string(m.user.heads));
  cfg.set("user.query_dim", std::to_string(m.user.query_dim));
  cfg.set("user.gru_dim", std::to_string(m.user.gru_dim));
  cfg.set("user.long_term_dim", std::to_string(m.user.long_term_dim));
  cfg.set("user.cnn_window", std::to_string(m.user.cnn_window));
  return cfg;
}

void load_frozen_sources(const ModelConfig& config, const KeyValueConfig& paths,
                         ModelResources& resources) {
  const auto family = config.news.text.family;
  auto load = [&](const char* key) {
    auto path = paths.get(key);
    if (!path || path->empty()) {
      throw ConfigError("field '" + std::string(key) + "': required by text encoder '" +
                        std::string(name_of(family)) + "'");
    }
    if (!std::filesystem::exists(*path)) {
      throw ConfigError("field '" + std::string(key) + "': no such file '" + *path + "'");
    }
    return std::make_shared<const FrozenStore>(load_frozen_store(*path));
  };
  if (family == TextFamily::kFrozenCls) resources.frozen_news = load("frozen_news");
  if (family == TextFamily::kFrozenTokensAtt) resources.frozen_tokens = load("frozen_tokens");
}

void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& writer) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    writer(out);
    out.flush();
    if (!out) throw ConfigError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const RecommenderModel& model, const KeyValueConfig& model_section,
                     std::uint64_t config_digest, const std::filesystem::path& path) {
  write_atomically(path, [&](std::ostream& out) {
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    binary::write_le(out, kCheckpointVersion);
    binary::write_le(out, config_digest);
    KeyValueConfig section = model_section;
    section.set("model.news_dim", std::to_string(model.dim()));
    binary::write_long_string(out, section.normalized());
    const auto& vocab = model.resources().vocab;
    write_tokens(out, vocab.words.tokens());
    write_tokens(out, vocab.categories.tokens());
    write_tokens(out, vocab.subcategories.tokens());
    write_tokens(out, model.resources().users);
    const auto params = model.params().all();
    binary::write_le(out, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
      binary::write_short_string(out, p->name);
      binary::write_le(out, static_cast<std::uint32_t>(p->value.rank()));
      for (std::size_t e : p->value.shape()) binary::write_le(out, static_cast<std::uint32_t>(e));
      for (double v : p->value.values()) binary::write_f32(out, static_cast<float>(v));
    }
  });
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const KeyValueConfig& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  const std::string where = "checkpoint '" + path.string() + "'";
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw FormatError(where + ": corrupt magic");
  }
  const auto version = binary::read_le<std::uint32_t>(in, where + " header");
  if (version != kCheckpointVersion) {
    throw ArtifactMismatchError(where + ": format version " + std::to_string(version) +
                                ", expected " + std::to_string(kCheckpointVersion));
  }
  LoadedCheckpoint out;
  out.config_digest = binary::read_le<std::uint64_t>(in, where + " header");
  out.model_section = KeyValueConfig::parse(binary::read_long_string(in, where + " config"), where);
  // Stores saved next to the checkpoint are recorded relative to it.
  for (const char* key : {"frozen_news", "frozen_tokens"}) {
    auto value = out.model_section.get(key);
    if (value && !value->empty() && std::filesystem::path(*value).is_relative()) {
      out.model_section.set(key, (path.parent_path() / *value).string());
    }
  }
  for (const auto& [key, value] : overrides.entries()) out.model_section.set(key, value);

  ModelResources resources;
  resources.vocab.words = Vocabulary::from_tokens(read_tokens(in, where + " vocabulary"), kOovIndex);
  resources.vocab.categories = Vocabulary::from_tokens(read_tokens(in, where + " vocabulary"), 0);
  resources.vocab.subcategories = Vocabulary::from_tokens(read_tokens(in, where + " vocabulary"), 0);
  resources.users = read_tokens(in, where + " users");

  const ModelConfig config = parse_model_config(out.model_section);
  out.max_history = out.model_section.get_positive("train.max_history", kDefaultMaxHistory);
  load_frozen_sources(config, out.model_section, resources);
  try {
    out.model = std::make_unique<RecommenderModel>(config, std::move(resources), 0);
  } catch (const DimensionError& e) {
    throw ArtifactMismatchError(where + ": " + e.what());
  }

  const std::size_t saved_dim = out.model_section.get_size("model.news_dim", out.model->dim());
  if (saved_dim != out.model->dim()) {
    throw ArtifactMismatchError(where + ": news embeddings had dimension " + std::to_string(saved_dim) +
                                ", the current inputs give " + std::to_string(out.model->dim()));
  }
  const auto count = binary::read_le<std::uint32_t>(in, where + " parameters");
  auto params = out.model->params().all();
  if (count != params.size()) {
    throw ArtifactMismatchError(where + ": holds " + std::to_string(count) + " parameters, config builds " +
                                std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    const std::string name = binary::read_short_string(in, where + " parameter name");
    if (name != p->name) {
      throw ArtifactMismatchError(where + ": parameter '" + name + "' where config builds '" + p->name + "'");
    }
    const auto rank = binary::read_le<std::uint32_t>(in, where + " parameter shape");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(binary::read_le<std::uint32_t>(in, where + " parameter shape"));
    if (shape != p->value.shape()) {
      throw ArtifactMismatchError(where + ": parameter '" + name + "' has shape " + to_string(shape) +
                                  ", config builds " + to_string(p->value.shape()));
    }
    for (double& v : p->value.values()) v = binary::read_f32(in, where + " parameter " + name);
  }
  return out;
}

}  // namespace newsrec
