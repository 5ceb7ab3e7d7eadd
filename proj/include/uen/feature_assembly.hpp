#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "uen/corpus.hpp"
#include "uen/embedding_table.hpp"
#include "uen/matrix.hpp"
#include "uen/text_embed.hpp"

namespace uen {

/// Where a user occurs: the post (comment == nullopt) or one comment.
struct Occurrence {
  const Sample* sample = nullptr;
  std::optional<std::size_t> comment;
};

/// Maps a user occurrence to a user vector. Known training users always
/// resolve to their own row.
class UserResolver {
 public:
  virtual ~UserResolver() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<float> resolve(const UserId& user, const Occurrence& where) const = 0;
};

/// Direct lookup; unknown users are an error.
class LookupResolver : public UserResolver {
 public:
  explicit LookupResolver(const EmbeddingTable& users) : users_(&users) {}
  std::size_t dim() const override { return users_->dim(); }
  std::vector<float> resolve(const UserId& user, const Occurrence& where) const override;

 protected:
  const EmbeddingTable* users_;
};

/// Unknown users get the mean of all user vectors.
class MeanFallbackResolver final : public UserResolver {
 public:
  explicit MeanFallbackResolver(const EmbeddingTable& users) : users_(&users), mean_(mean_embedding(users)) {}
  std::size_t dim() const override { return users_->dim(); }
  std::vector<float> resolve(const UserId& user, const Occurrence& where) const override;
  const std::vector<float>& mean() const { return mean_; }

 private:
  const EmbeddingTable* users_;
  std::vector<float> mean_;
};

/// GNN input for one sample. Node 0 is the post, node i+1 is comment i.
struct SampleGraph {
  std::string post_id;
  Matrix<float> features;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // (parent, child)
  std::optional<Label> label;

  std::size_t node_count() const { return features.rows(); }
};

/// Rows are text ∥ user. A null resolver produces text-only rows.
SampleGraph assemble(const Sample& sample, const TextProvider& texts, const UserResolver* resolver);

/// Sum of text vectors from the first-level comment down to `comment_id`.
std::vector<float> chain_prefix_representation(const Sample& sample, const CommentId& comment_id,
                                               const TextProvider& texts);

/// chain_prefix_representation for every comment of `sample`, in comment
/// order, computed with one pass over the tree.
std::vector<std::vector<float>> chain_prefix_all(const Sample& sample, const TextProvider& texts);

}  // namespace uen
