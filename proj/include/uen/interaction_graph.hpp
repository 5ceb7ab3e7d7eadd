#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "uen/corpus.hpp"

namespace uen {

using NodeIndex = std::uint32_t;

struct Neighbor {
  NodeIndex node;
  double weight;
};

/// Undirected global user graph built from training samples. Nodes are
/// numbered in first-appearance order; adjacency lists are sorted by node.
class InteractionGraph {
 public:
  std::size_t node_count() const { return users_.size(); }
  const std::vector<UserId>& users() const { return users_; }
  const UserId& user(NodeIndex i) const { return users_.at(i); }
  std::optional<NodeIndex> index_of(const UserId& u) const;
  bool contains(const UserId& u) const { return index_.contains(u); }

  /// Sorted by neighbor index. A self-loop appears once in its own list.
  const std::vector<Neighbor>& neighbors(NodeIndex i) const { return adjacency_.at(i); }
  bool has_edge(NodeIndex a, NodeIndex b) const;
  double weight(NodeIndex a, NodeIndex b) const;  // 0 when absent

  /// Unordered pair (min,max) -> accumulated event count.
  const std::map<std::pair<NodeIndex, NodeIndex>, double>& edges() const { return edges_; }

  NodeIndex add_node(const UserId& u);
  void add_event(NodeIndex a, NodeIndex b, double weight = 1.0);
  /// Rebuild adjacency lists from the edge map. Called by the builders.
  void finalize();

 private:
  std::vector<UserId> users_;
  std::unordered_map<UserId, NodeIndex> index_;
  std::map<std::pair<NodeIndex, NodeIndex>, double> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

struct GraphBuildOptions {
  bool unweighted = false;
};

/// One event per comment between its author and the author of its parent.
InteractionGraph build_interaction_graph(const std::vector<Sample>& train, const GraphBuildOptions& opts = {});

struct GraphStats {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  double total_weight = 0;
  std::size_t isolated_count = 0;
  std::size_t self_loop_count = 0;
  std::map<std::size_t, std::size_t> degree_histogram;  // degree -> node count

  std::string to_json() const;
};

GraphStats graph_stats(const InteractionGraph& g);

/// `u v w` per line for edges, `u` per line for nodes.
void export_graph(const InteractionGraph& g, const std::filesystem::path& edges_path,
                  const std::filesystem::path& nodes_path);
InteractionGraph import_graph(const std::filesystem::path& edges_path, const std::filesystem::path& nodes_path);

}  // namespace uen
