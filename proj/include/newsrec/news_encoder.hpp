#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "newsrec/data.hpp"
#include "newsrec/frozen_store.hpp"
#include "newsrec/nn.hpp"

namespace newsrec {

enum class TextFamily { kCnnAddAtt, kMhsaAddAtt, kCnnMhsaAddAtt, kFrozenCls, kFrozenTokensAtt };
enum class Aggregation { kNone, kAddAtt, kLinear, kCon };

TextFamily parse_text_family(std::string_view name);
Aggregation parse_aggregation(std::string_view name);
std::string_view name_of(TextFamily family);
std::string_view name_of(Aggregation aggregation);

struct TextEncoderConfig {
  TextFamily family = TextFamily::kCnnAddAtt;
  std::size_t word_dim = 300;
  std::size_t output_dim = 256;
  std::size_t cnn_window = 3;
  std::size_t heads = 16;
  std::size_t query_dim = 200;
  /// frozen_cls only: project the stored vector to output_dim.
  bool frozen_projection = true;
  bool train_word_embeddings = true;
};

struct NewsEncoderConfig {
  TextEncoderConfig text;
  Aggregation aggregation = Aggregation::kNone;  // kNone = title only
  std::size_t category_embedding_dim = 100;
  std::size_t category_dim = 100;
  std::size_t max_title_length = kDefaultMaxTitleLength;
};

/// Frozen vectors standing in for pretrained backbones.
struct FrozenSources {
  const FrozenStore* news = nullptr;    // frozen_cls
  const FrozenStore* tokens = nullptr;  // frozen_tokens_att, keyed by token_key
};

/// Title encoder, optional category encoder and feature aggregation.
/// Parameters live in the store passed at construction under "news.".
class NewsEncoder {
 public:
  /// `word_vectors` initializes the word table when given (its dim must
  /// equal word_dim); otherwise the table is drawn at random.
  NewsEncoder(ParameterStore& store, const NewsEncoderConfig& config, const Vocabularies& vocab,
              FrozenSources frozen, Rng& rng, const WordVectorTable* word_vectors = nullptr);

  Var encode(Tape& tape, const NewsFeatures& features) const;

  Var encode_text(Tape& tape, const NewsFeatures& features) const;
  Var encode_category(Tape& tape, const NewsFeatures& features) const;
  Var aggregate(Tape& tape, Var text, Var category) const;

  std::size_t text_dim() const { return text_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  bool multi_feature() const { return config_.aggregation != Aggregation::kNone; }
  const NewsEncoderConfig& config() const { return config_; }

  // Exposed for tests that pin weights.
  Parameter* word_embeddings = nullptr;
  Conv1d conv;
  MultiHeadSelfAttention mhsa;
  AdditiveAttention text_attention;
  Linear frozen_projection;
  Parameter* category_table = nullptr;
  Parameter* subcategory_table = nullptr;
  Linear category_dense;
  Linear text_to_news;
  Linear category_to_news;
  AdditiveAttention feature_attention;
  Linear aggregation_projection;

 private:
  Var word_sequence(Tape& tape, const NewsFeatures& features) const;

  NewsEncoderConfig config_;
  FrozenSources frozen_;
  std::size_t text_dim_ = 0;
  std::size_t output_dim_ = 0;
};

}  // namespace newsrec
