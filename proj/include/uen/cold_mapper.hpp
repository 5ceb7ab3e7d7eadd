#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <unordered_map>
#include <string>
#include <vector>

#include "uen/corpus.hpp"
#include "uen/embedding_table.hpp"
#include "uen/feature_assembly.hpp"
#include "uen/text_embed.hpp"

namespace uen {

struct IndexEntry {
  std::string key;
  std::vector<float> vector;
  UserId owner;
};

struct SearchHit {
  std::string key;
  UserId owner;
  double score = 0;

  bool operator==(const SearchHit&) const = default;
};

/// Exact cosine index. Rows are L2-normalized at build time; zero rows are
/// kept and score 0 against every query.
class SimIndex {
 public:
  SimIndex() = default;
  explicit SimIndex(std::vector<IndexEntry> entries);
  SimIndex(std::vector<std::string> keys, std::vector<UserId> owners, std::size_t dim, std::vector<float> normalized);

  std::size_t size() const { return keys_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return keys_.empty(); }
  const std::vector<std::string>& keys() const { return keys_; }
  const std::vector<UserId>& owners() const { return owners_; }
  const std::vector<float>& matrix() const { return rows_; }
  std::span<const float> row(std::size_t i) const { return {rows_.data() + i * dim_, dim_}; }

  /// min(k, n) hits by descending cosine, ties by key ascending.
  std::vector<SearchHit> topk(std::span<const float> query, std::size_t k) const;

  bool operator==(const SimIndex& o) const {
    return dim_ == o.dim_ && keys_ == o.keys_ && owners_ == o.owners_ && rows_ == o.rows_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> keys_;
  std::vector<UserId> owners_;
  std::vector<float> rows_;
};

SimIndex build_index(std::vector<IndexEntry> entries);

/// UENIDX1: magic, u32 n, u32 dim, keys, owners, normalized f32 rows; sha256 sidecar.
void save_index(const std::filesystem::path& path, const SimIndex& index);
SimIndex load_index(const std::filesystem::path& path);

struct HeuristicSet {
  bool post_similarity = true;      // H1
  bool reaction_similarity = true;  // H2
  bool chain_history = true;        // H3

  static HeuristicSet parse(std::string_view csv);  // e.g. "h1,h2,h3"
  std::string to_string() const;
  bool operator==(const HeuristicSet&) const = default;
};

struct ColdMapConfig {
  std::size_t k1 = 19;
  std::size_t k2 = 72;
  HeuristicSet heuristics;

  void validate() const;
};

/// Mean of the owners' vectors of `hits`, one term per hit.
std::vector<float> mean_of_owners(const std::vector<SearchHit>& hits, const EmbeddingTable& users);

/// Cold post author: mean of the authors of the k1 most similar train posts.
/// An empty index falls back to the global mean user vector.
std::vector<float> map_cold_author(std::span<const float> post_vec, const SimIndex& post_index,
                                   const EmbeddingTable& users, std::size_t k1);

/// Train-side state for the cold mapper: the post index plus every train
/// comment with its (chain-summed or raw) representation, grouped by post.
class ColdMapper {
 public:
  ColdMapper(const std::vector<Sample>& train, const EmbeddingTable& users, const TextProvider& texts,
             ColdMapConfig cfg);

  const SimIndex& post_index() const { return post_index_; }
  const ColdMapConfig& config() const { return cfg_; }
  const EmbeddingTable& users() const { return *users_; }

  /// Representation of a comment used for reaction matching.
  std::vector<float> comment_representation(const Sample& sample, std::size_t comment) const;

  std::vector<float> map_author(const Sample& sample) const;
  std::vector<float> map_commenter(const Sample& sample, std::size_t comment) const;

  /// Comments of the train posts `post_keys` (𝒞_collect), as index entries.
  std::vector<IndexEntry> collect_comments(const std::vector<std::string>& post_keys) const;
  /// Every train comment.
  std::vector<IndexEntry> all_comments() const;

 private:
  struct StoredComment {
    std::string key;
    UserId author;
    std::vector<float> vec;
  };
  const EmbeddingTable* users_;
  const TextProvider* texts_;
  ColdMapConfig cfg_;
  SimIndex post_index_;
  std::vector<float> global_mean_;
  std::unordered_map<std::string, std::vector<StoredComment>> comments_by_post_;
  std::vector<std::string> post_order_;
};

std::vector<float> map_cold_commenter(const Sample& sample, const CommentId& comment_id, const ColdMapper& mapper);

/// Known users resolve directly; authors of posts go to H1, commenters to
/// H2/H3 (with the fallback ladder commenter -> author -> global mean).
class ColdMapperResolver final : public UserResolver {
 public:
  explicit ColdMapperResolver(std::shared_ptr<const ColdMapper> mapper) : mapper_(std::move(mapper)) {}
  std::size_t dim() const override { return mapper_->users().dim(); }
  std::vector<float> resolve(const UserId& user, const Occurrence& where) const override;

 private:
  std::shared_ptr<const ColdMapper> mapper_;
};

enum class ResolverMode { TrainLookup, MeanFallback, ColdMapper };

ResolverMode parse_resolver_mode(std::string_view s);

struct ResolverInputs {
  const EmbeddingTable* users = nullptr;
  // Needed for ResolverMode::ColdMapper only.
  const std::vector<Sample>* train = nullptr;
  const TextProvider* texts = nullptr;
  ColdMapConfig cold;
};

std::unique_ptr<UserResolver> make_resolver(ResolverMode mode, const ResolverInputs& in);

}  // namespace uen
