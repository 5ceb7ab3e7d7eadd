#pragma once

#include <cstdint>
#include <string>

#include "uen/corpus.hpp"

namespace uen {

/// Synthetic cascades with planted structure.
///
/// Users belong to communities; the first half of the communities are
/// fake-prone. Every participant of a post is drawn from the community
/// group aligned with the post's label with probability
/// `user_signal_strength`, otherwise from any community. Texts mix
/// label-leaning tokens (informative in proportion to
/// `text_signal_strength`), community dialect tokens and shared noise.
/// Samples after the training window use held-back cold users of the same
/// communities, so text similarity can recover a cold user's community.
struct SynthConfig {
  std::size_t n_users = 600;
  std::size_t n_communities = 8;
  std::size_t n_samples = 2000;
  std::size_t comments_min = 2;
  std::size_t comments_max = 8;
  std::size_t max_chain_depth = 3;
  double fake_fraction = 0.5;
  double text_signal_strength = 0.3;
  double user_signal_strength = 0.8;
  double cold_user_rate_test = 0.3;
  std::uint64_t seed = 1;

  /// Share of a post's participants drawn from its dominant community.
  double cohesion = 0.85;

  // Text shape.
  std::size_t tokens_per_text = 8;
  double label_token_rate = 0.15;   // share of slots carrying a label-leaning token
  double dialect_token_rate = 0.3;  // share of slots carrying one of the writer's style tokens
  std::size_t label_vocab = 20;     // per class
  std::size_t dialect_vocab = 60;   // per community
  std::size_t style_tokens = 4;     // per user, drawn from the community vocabulary
  std::size_t noise_vocab = 3000;
  /// Fraction of users held back as cold users (only when cold_user_rate_test > 0).
  double cold_pool_fraction = 0.25;

  void validate() const;
  std::string to_json() const;
  static SynthConfig from_json(const std::string& json);
};

Corpus generate(const SynthConfig& cfg);

struct SplitSpan {
  std::size_t samples = 0;
  std::int64_t first_timestamp = 0;
  std::int64_t last_timestamp = 0;
};

struct CorpusStats {
  std::size_t samples = 0;
  std::size_t comments = 0;
  std::size_t fake = 0;
  std::size_t true_ = 0;
  std::size_t unique_users = 0;
  std::size_t cold_users = 0;  // test users absent from the training split
  SplitSpan train, val, test;

  std::string to_json() const;
};

CorpusStats describe(const Corpus& corpus);

}  // namespace uen
