#include "newsrec/user_encoder.hpp"

#include <array>

#include "newsrec/error.hpp"

namespace newsrec {

UserFamily parse_user_family(std::string_view name) {
  if (name == "lf") return UserFamily::kLf;
  if (name == "addatt") return UserFamily::kAddAtt;
  if (name == "mhsa_addatt") return UserFamily::kMhsaAddAtt;
  if (name == "gru_ini") return UserFamily::kGruIni;
  if (name == "gru_con") return UserFamily::kGruCon;
  if (name == "gru_mhsa_addatt") return UserFamily::kGruMhsaAddAtt;
  if (name == "cand_aware") return UserFamily::kCandAware;
  throw ConfigError("unknown user encoder '" + std::string(name) +
                    "' (expected lf, addatt, mhsa_addatt, gru_ini, gru_con, gru_mhsa_addatt or "
                    "cand_aware)");
}

std::string_view name_of(UserFamily family) {
  switch (family) {
    case UserFamily::kLf: return "lf";
    case UserFamily::kAddAtt: return "addatt";
    case UserFamily::kMhsaAddAtt: return "mhsa_addatt";
    case UserFamily::kGruIni: return "gru_ini";
    case UserFamily::kGruCon: return "gru_con";
    case UserFamily::kGruMhsaAddAtt: return "gru_mhsa_addatt";
    case UserFamily::kCandAware: return "cand_aware";
  }
  return "?";
}

UserEncoder::UserEncoder(ParameterStore& store, const UserEncoderConfig& config, std::size_t news_dim,
                         std::vector<std::string> users, Rng& rng)
    : config_(config), news_dim_(news_dim), users_(std::move(users)) {
  if (news_dim == 0) throw ConfigError("user encoder: news dimension is 0");
  gru_dim_ = config.gru_dim ? config.gru_dim : news_dim;
  long_term_dim_ = config.long_term_dim ? config.long_term_dim : news_dim;
  const std::size_t d = news_dim, q = config.query_dim;
  switch (config.family) {
    case UserFamily::kLf:
      break;
    case UserFamily::kAddAtt:
      attention = AdditiveAttention::create(store, "user.attention", d, q, rng);
      break;
    case UserFamily::kMhsaAddAtt:
      mhsa = MultiHeadSelfAttention::create(store, "user.mhsa", d, d, config.heads, rng);
      attention = AdditiveAttention::create(store, "user.attention", d, q, rng);
      break;
    case UserFamily::kGruIni:
      if (gru_dim_ != d) {
        throw ConfigError("user encoder: gru_ini needs gru_dim = news dim (" + std::to_string(d) +
                          "), got " + std::to_string(gru_dim_));
      }
      long_term_dim_ = gru_dim_;
      gru = Gru::create(store, "user.gru", d, gru_dim_, rng);
      break;
    case UserFamily::kGruCon:
      gru = Gru::create(store, "user.gru", d, gru_dim_, rng);
      output_projection = Linear::create(store, "user.projection", gru_dim_ + long_term_dim_, d, rng);
      break;
    case UserFamily::kGruMhsaAddAtt:
      gru = Gru::create(store, "user.gru", d, gru_dim_, rng);
      mhsa = MultiHeadSelfAttention::create(store, "user.mhsa", gru_dim_, d, config.heads, rng);
      attention = AdditiveAttention::create(store, "user.attention", d, q, rng);
      break;
    case UserFamily::kCandAware:
      conv = Conv1d::create(store, "user.conv", config.cnn_window, d, d, rng);
      mhsa = MultiHeadSelfAttention::create(store, "user.mhsa", d, d, config.heads, rng);
      attention = AdditiveAttention::create(store, "user.attention", d, q, rng, d);
      break;
  }
  if (config.family == UserFamily::kGruIni || config.family == UserFamily::kGruCon) {
    for (std::size_t i = 0; i < users_.size(); ++i) {
      if (!user_index_.emplace(users_[i], static_cast<std::int32_t>(i)).second) {
        throw ConfigError("user encoder: duplicate user '" + users_[i] + "'");
      }
    }
    long_term = &store.add("user.long_term",
                           fan_in_uniform({users_.size(), long_term_dim_}, long_term_dim_, rng));
  }
}

Var UserEncoder::zeros(Tape& tape, std::size_t dim) const { return tape.constant(Tensor({dim})); }

Var UserEncoder::long_term_state(Tape& tape, std::string_view user_id) const {
  auto it = user_index_.find(std::string(user_id));
  if (it == user_index_.end()) return zeros(tape, long_term_dim_);
  const std::array<std::int32_t, 1> idx{it->second};
  return reshape(gather_rows(tape.parameter(*long_term), idx), {long_term_dim_});
}

Var UserEncoder::encode(Tape& tape, Var history, const Mask& mask, std::string_view user_id,
                        std::optional<Var> candidate) const {
  if (history.value().rank() != 2 || history.value().cols() != news_dim_) {
    throw DimensionError("user encoder: history must be [H x " + std::to_string(news_dim_) + "], got " +
                         to_string(history.shape()));
  }
  if (mask.size() != history.value().rows()) {
    throw DimensionError("user encoder: mask length " + std::to_string(mask.size()) + " for " +
                         std::to_string(history.value().rows()) + " rows");
  }
  if (candidate_aware() && !candidate) throw UsageError("user encoder: cand_aware needs a candidate");

  std::vector<std::int32_t> keep;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) keep.push_back(static_cast<std::int32_t>(i));

  if (keep.empty()) {
    switch (config_.family) {
      case UserFamily::kGruIni:
        return long_term_state(tape, user_id);
      case UserFamily::kGruCon: {
        const std::array<Var, 2> parts{zeros(tape, gru_dim_), long_term_state(tape, user_id)};
        return linear(tape, output_projection, concat(parts));
      }
      default:
        return zeros(tape, news_dim_);
    }
  }

  Var seq = keep.size() == mask.size() ? history : gather_rows(history, keep);
  const Mask all(keep.size(), true);
  switch (config_.family) {
    case UserFamily::kLf:
      return masked_mean_rows(seq, all);
    case UserFamily::kAddAtt:
      return additive_attention_pool(tape, attention, seq, all).pooled;
    case UserFamily::kMhsaAddAtt:
      seq = multi_head_self_attention(tape, mhsa, seq, all);
      return additive_attention_pool(tape, attention, seq, all).pooled;
    case UserFamily::kGruIni:
      return gru_forward(tape, gru, seq, all, long_term_state(tape, user_id)).last;
    case UserFamily::kGruCon: {
      Var last = gru_forward(tape, gru, seq, all, zeros(tape, gru_dim_)).last;
      const std::array<Var, 2> parts{last, long_term_state(tape, user_id)};
      return linear(tape, output_projection, concat(parts));
    }
    case UserFamily::kGruMhsaAddAtt: {
      Var states = gru_forward(tape, gru, seq, all, zeros(tape, gru_dim_)).states;
      seq = multi_head_self_attention(tape, mhsa, states, all);
      return additive_attention_pool(tape, attention, seq, all).pooled;
    }
    case UserFamily::kCandAware:
      seq = relu(conv1d_same(tape, conv, seq));
      seq = multi_head_self_attention(tape, mhsa, seq, all);
      return additive_attention_pool(tape, attention, seq, all, *candidate).pooled;
  }
  return zeros(tape, news_dim_);
}

}  // namespace newsrec
