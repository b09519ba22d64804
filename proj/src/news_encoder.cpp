#include "newsrec/news_encoder.hpp"

#include <array>

#include "newsrec/error.hpp"

namespace newsrec {
namespace {

bool has_cnn(TextFamily f) { return f == TextFamily::kCnnAddAtt || f == TextFamily::kCnnMhsaAddAtt; }
bool has_mhsa(TextFamily f) {
  return f == TextFamily::kMhsaAddAtt || f == TextFamily::kCnnMhsaAddAtt;
}
bool uses_words(TextFamily f) { return has_cnn(f) || has_mhsa(f); }

Var constant_vector(Tape& tape, const std::vector<float>& values) {
  return tape.constant(Tensor::vector(std::vector<double>(values.begin(), values.end())));
}

}  // namespace

TextFamily parse_text_family(std::string_view name) {
  if (name == "cnn_addatt") return TextFamily::kCnnAddAtt;
  if (name == "mhsa_addatt") return TextFamily::kMhsaAddAtt;
  if (name == "cnn_mhsa_addatt") return TextFamily::kCnnMhsaAddAtt;
  if (name == "frozen_cls") return TextFamily::kFrozenCls;
  if (name == "frozen_tokens_att") return TextFamily::kFrozenTokensAtt;
  throw ConfigError("unknown text encoder '" + std::string(name) +
                    "' (expected cnn_addatt, mhsa_addatt, cnn_mhsa_addatt, frozen_cls or "
                    "frozen_tokens_att)");
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "none") return Aggregation::kNone;
  if (name == "addatt") return Aggregation::kAddAtt;
  if (name == "linear") return Aggregation::kLinear;
  if (name == "con") return Aggregation::kCon;
  throw ConfigError("unknown aggregation '" + std::string(name) +
                    "' (expected none, addatt, linear or con)");
}

std::string_view name_of(TextFamily family) {
  switch (family) {
    case TextFamily::kCnnAddAtt: return "cnn_addatt";
    case TextFamily::kMhsaAddAtt: return "mhsa_addatt";
    case TextFamily::kCnnMhsaAddAtt: return "cnn_mhsa_addatt";
    case TextFamily::kFrozenCls: return "frozen_cls";
    case TextFamily::kFrozenTokensAtt: return "frozen_tokens_att";
  }
  return "?";
}

std::string_view name_of(Aggregation aggregation) {
  switch (aggregation) {
    case Aggregation::kNone: return "none";
    case Aggregation::kAddAtt: return "addatt";
    case Aggregation::kLinear: return "linear";
    case Aggregation::kCon: return "con";
  }
  return "?";
}

NewsEncoder::NewsEncoder(ParameterStore& store, const NewsEncoderConfig& config,
                         const Vocabularies& vocab, FrozenSources frozen, Rng& rng,
                         const WordVectorTable* word_vectors)
    : config_(config), frozen_(frozen) {
  const auto& t = config.text;
  if (t.output_dim == 0 || t.query_dim == 0) throw ConfigError("news encoder: dimensions must be positive");

  if (uses_words(t.family)) {
    if (t.word_dim == 0) throw ConfigError("news encoder: word_dim must be positive");
    Tensor init;
    if (word_vectors) {
      if (word_vectors->dim != t.word_dim || word_vectors->table.rows() != vocab.words.size()) {
        throw ConfigError("news encoder: word vectors have dim " + std::to_string(word_vectors->dim) +
                          ", config says word_dim = " + std::to_string(t.word_dim));
      }
      init = word_vectors->table;
    } else {
      init = random_word_embeddings(vocab.words, t.word_dim, rng.engine()()).table;
    }
    word_embeddings = &store.add("news.word_embeddings", std::move(init), t.train_word_embeddings);

    std::size_t dim = t.word_dim;
    if (has_cnn(t.family)) {
      conv = Conv1d::create(store, "news.text.conv", t.cnn_window, dim, t.output_dim, rng);
      dim = t.output_dim;
    }
    if (has_mhsa(t.family)) {
      mhsa = MultiHeadSelfAttention::create(store, "news.text.mhsa", dim, t.output_dim, t.heads, rng);
      dim = t.output_dim;
    }
    text_attention = AdditiveAttention::create(store, "news.text.attention", dim, t.query_dim, rng);
    text_dim_ = dim;
  } else if (t.family == TextFamily::kFrozenCls) {
    if (!frozen.news) throw ConfigError("news encoder: frozen_cls needs a frozen news store");
    text_dim_ = frozen.news->dim();
    if (t.frozen_projection) {
      frozen_projection = Linear::create(store, "news.text.projection", text_dim_, t.output_dim, rng);
      text_dim_ = t.output_dim;
    }
  } else {
    if (!frozen.tokens) throw ConfigError("news encoder: frozen_tokens_att needs a frozen token store");
    text_dim_ = frozen.tokens->dim();
    text_attention = AdditiveAttention::create(store, "news.text.attention", text_dim_, t.query_dim, rng);
  }
  if (text_dim_ == 0) throw ConfigError("news encoder: frozen store has dimension 0");
  output_dim_ = text_dim_;

  if (config.aggregation == Aggregation::kNone) return;
  const std::size_t ce = config.category_embedding_dim, cd = config.category_dim;
  if (ce == 0 || cd == 0) throw ConfigError("news encoder: category dimensions must be positive");
  category_table = &store.add("news.category.table",
                              fan_in_uniform({vocab.categories.size(), ce}, ce, rng));
  subcategory_table = &store.add("news.subcategory.table",
                                 fan_in_uniform({vocab.subcategories.size(), ce}, ce, rng));
  category_dense = Linear::create(store, "news.category.dense", ce, cd, rng);
  switch (config.aggregation) {
    case Aggregation::kAddAtt:
      text_to_news = Linear::create(store, "news.aggregate.text", text_dim_, text_dim_, rng);
      category_to_news = Linear::create(store, "news.aggregate.category", cd, text_dim_, rng);
      feature_attention = AdditiveAttention::create(store, "news.aggregate.attention", text_dim_,
                                                    t.query_dim, rng);
      break;
    case Aggregation::kLinear:
      aggregation_projection =
          Linear::create(store, "news.aggregate.linear", text_dim_ + cd, text_dim_, rng);
      break;
    case Aggregation::kCon:
      output_dim_ = text_dim_ + cd;
      break;
    case Aggregation::kNone:
      break;
  }
}

Var NewsEncoder::word_sequence(Tape& tape, const NewsFeatures& f) const {
  std::vector<std::int32_t> ids;
  for (std::size_t i = 0; i < f.title_tokens.size() && ids.size() < config_.max_title_length; ++i) {
    if (i < f.title_mask.size() && f.title_mask[i]) ids.push_back(f.title_tokens[i]);
  }
  if (ids.empty()) throw DegenerateInputError("news encoder: empty title for '" + f.news_id + "'");
  return gather_rows(tape.parameter(*word_embeddings), ids);
}

Var NewsEncoder::encode_text(Tape& tape, const NewsFeatures& f) const {
  const auto family = config_.text.family;
  if (family == TextFamily::kFrozenCls) {
    Var v = constant_vector(tape, frozen_.news->at(f.news_id));
    return config_.text.frozen_projection ? linear(tape, frozen_projection, v) : v;
  }
  if (family == TextFamily::kFrozenTokensAtt) {
    std::vector<Var> rows;
    for (std::size_t i = 0; i < config_.max_title_length; ++i) {
      const auto* v = frozen_.tokens->find(token_key(f.news_id, i));
      if (!v) break;
      rows.push_back(constant_vector(tape, *v));
    }
    if (rows.empty()) throw DataError("news encoder: no frozen token vectors for '" + f.news_id + "'");
    Var seq = stack_rows(rows);
    return additive_attention_pool(tape, text_attention, seq, Mask(rows.size(), true)).pooled;
  }
  Var seq = word_sequence(tape, f);
  const Mask mask(seq.value().rows(), true);
  if (has_cnn(family)) seq = relu(conv1d_same(tape, conv, seq));
  if (has_mhsa(family)) seq = multi_head_self_attention(tape, mhsa, seq, mask);
  return additive_attention_pool(tape, text_attention, seq, mask).pooled;
}

Var NewsEncoder::encode_category(Tape& tape, const NewsFeatures& f) const {
  if (!category_table) throw ConfigError("news encoder: category encoder is disabled");
  if (!f.category_id) {
    throw ConfigError("news encoder: multi-feature mode needs a category for '" + f.news_id + "'");
  }
  auto check = [&](std::int32_t id, const Parameter& table, const char* what) {
    if (id < 0 || static_cast<std::size_t>(id) >= table.value.rows()) {
      throw DataError("news encoder: " + std::string(what) + " id " + std::to_string(id) +
                      " out of range for '" + f.news_id + "'");
    }
  };
  check(*f.category_id, *category_table, "category");
  const std::array<std::int32_t, 1> cat{*f.category_id};
  Var e = reshape(gather_rows(tape.parameter(*category_table), cat), {config_.category_embedding_dim});
  if (f.subcategory_id) {
    check(*f.subcategory_id, *subcategory_table, "subcategory");
    const std::array<std::int32_t, 1> sub{*f.subcategory_id};
    e = add(e, reshape(gather_rows(tape.parameter(*subcategory_table), sub),
                       {config_.category_embedding_dim}));
  }
  return relu(linear(tape, category_dense, e));
}

Var NewsEncoder::aggregate(Tape& tape, Var text, Var category) const {
  switch (config_.aggregation) {
    case Aggregation::kAddAtt: {
      const std::array<Var, 2> rows{linear(tape, text_to_news, text),
                                    linear(tape, category_to_news, category)};
      return additive_attention_pool(tape, feature_attention, stack_rows(rows), Mask(2, true)).pooled;
    }
    case Aggregation::kLinear: {
      const std::array<Var, 2> parts{text, category};
      return linear(tape, aggregation_projection, concat(parts));
    }
    case Aggregation::kCon: {
      const std::array<Var, 2> parts{text, category};
      return concat(parts);
    }
    case Aggregation::kNone:
      break;
  }
  return text;
}

Var NewsEncoder::encode(Tape& tape, const NewsFeatures& f) const {
  Var text = encode_text(tape, f);
  if (!multi_feature()) return text;
  return aggregate(tape, text, encode_category(tape, f));
}

}  // namespace newsrec
