#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "newsrec/nn.hpp"

namespace newsrec {

enum class UserFamily { kLf, kAddAtt, kMhsaAddAtt, kGruIni, kGruCon, kGruMhsaAddAtt, kCandAware };

UserFamily parse_user_family(std::string_view name);
std::string_view name_of(UserFamily family);

struct UserEncoderConfig {
  UserFamily family = UserFamily::kLf;
  std::size_t heads = 16;
  std::size_t query_dim = 200;
  std::size_t gru_dim = 0;        // 0: news dim
  std::size_t long_term_dim = 0;  // 0: news dim
  std::size_t cnn_window = 3;     // cand_aware only
};

/// Maps a click history [H x d_news] to a user vector [d_news]. Masked rows
/// are dropped before encoding; an empty history yields the zero vector
/// (or the long-term state for the GRU families).
class UserEncoder {
 public:
  UserEncoder(ParameterStore& store, const UserEncoderConfig& config, std::size_t news_dim,
              std::vector<std::string> users, Rng& rng);

  /// `candidate` is required by cand_aware and ignored otherwise.
  Var encode(Tape& tape, Var history, const Mask& mask, std::string_view user_id,
             std::optional<Var> candidate = std::nullopt) const;

  bool candidate_aware() const { return config_.family == UserFamily::kCandAware; }
  std::size_t output_dim() const { return news_dim_; }
  const UserEncoderConfig& config() const { return config_; }
  const std::vector<std::string>& users() const { return users_; }

  AdditiveAttention attention;
  MultiHeadSelfAttention mhsa;
  Gru gru;
  Conv1d conv;
  Parameter* long_term = nullptr;  // [users x long_term_dim]
  Linear output_projection;        // gru_con

 private:
  Var long_term_state(Tape& tape, std::string_view user_id) const;
  Var zeros(Tape& tape, std::size_t dim) const;

  UserEncoderConfig config_;
  std::size_t news_dim_ = 0;
  std::size_t gru_dim_ = 0;
  std::size_t long_term_dim_ = 0;
  std::vector<std::string> users_;
  std::unordered_map<std::string, std::int32_t> user_index_;
};

}  // namespace newsrec
