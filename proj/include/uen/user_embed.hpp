#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "uen/embedding_table.hpp"
#include "uen/interaction_graph.hpp"

namespace uen {

struct Node2VecConfig {
  std::size_t dim = 128;
  double p = 1.0;  // return parameter
  double q = 1.0;  // in-out parameter
  std::size_t walk_length = 40;
  std::size_t walks_per_node = 10;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 3;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
  /// Worker threads for walk sampling. Output does not depend on it.
  std::size_t threads = 1;

  void validate() const;
};

struct Transition {
  NodeIndex node;
  double probability;
};

/// Second-order transition law out of `cur` given the previous node
/// (nullopt on the first step). Empty when `cur` has no neighbors.
std::vector<Transition> next_step_distribution(const InteractionGraph& g, std::optional<NodeIndex> prev,
                                               NodeIndex cur, double p, double q);

using Walk = std::vector<NodeIndex>;

/// `walks_per_node` walks from every node, ordered round-major
/// (round 0 for all nodes, then round 1, ...). Each walk has its own RNG
/// stream derived from (seed, round, start node).
std::vector<Walk> sample_walks(const InteractionGraph& g, const Node2VecConfig& cfg);

/// Skip-gram with negative sampling over `vocab_size` nodes.
/// Rows of the returned matrix are the center (input) vectors.
std::vector<float> train_skipgram(const std::vector<Walk>& walks, std::size_t vocab_size, const Node2VecConfig& cfg);

/// Walks + skip-gram, packaged as a table keyed by user id.
EmbeddingTable embed_users(const InteractionGraph& g, const Node2VecConfig& cfg);

/// Objective for one (center, context, negatives) group:
///   -log σ(v·u_ctx) - Σ log σ(-v·u_neg).
/// Exposed in double precision for gradient checking.
struct SkipgramGrad {
  std::vector<double> center;
  std::vector<double> context;
  std::vector<std::vector<double>> negatives;
};

double skipgram_loss(std::span<const double> center, std::span<const double> context,
                     const std::vector<std::vector<double>>& negatives);
SkipgramGrad skipgram_grad(std::span<const double> center, std::span<const double> context,
                           const std::vector<std::vector<double>>& negatives);

}  // namespace uen
