#include "uen/interaction_graph.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace uen {

std::optional<NodeIndex> InteractionGraph::index_of(const UserId& u) const {
  auto it = index_.find(u);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool InteractionGraph::has_edge(NodeIndex a, NodeIndex b) const {
  const auto& adj = adjacency_.at(a);
  auto it = std::lower_bound(adj.begin(), adj.end(), b, [](const Neighbor& n, NodeIndex v) { return n.node < v; });
  return it != adj.end() && it->node == b;
}

double InteractionGraph::weight(NodeIndex a, NodeIndex b) const {
  auto it = edges_.find({std::min(a, b), std::max(a, b)});
  return it == edges_.end() ? 0.0 : it->second;
}

NodeIndex InteractionGraph::add_node(const UserId& u) {
  auto [it, inserted] = index_.emplace(u, static_cast<NodeIndex>(users_.size()));
  if (inserted) users_.push_back(u);
  return it->second;
}

void InteractionGraph::add_event(NodeIndex a, NodeIndex b, double weight) {
  edges_[{std::min(a, b), std::max(a, b)}] += weight;
}

void InteractionGraph::finalize() {
  adjacency_.assign(users_.size(), {});
  for (const auto& [pair, w] : edges_) {
    adjacency_[pair.first].push_back({pair.second, w});
    if (pair.first != pair.second) adjacency_[pair.second].push_back({pair.first, w});
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end(), [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
  }
}

InteractionGraph build_interaction_graph(const std::vector<Sample>& train, const GraphBuildOptions& opts) {
  InteractionGraph g;
  for (const auto& s : train) {
    const NodeIndex post_author = g.add_node(s.author);
    std::vector<NodeIndex> comment_author(s.comments.size());
    for (std::size_t i = 0; i < s.comments.size(); ++i) comment_author[i] = g.add_node(s.comments[i].author);
    const auto parents = s.parent_indices();
    for (std::size_t i = 0; i < s.comments.size(); ++i) {
      const NodeIndex parent = parents[i] < 0 ? post_author : comment_author[static_cast<std::size_t>(parents[i])];
      g.add_event(comment_author[i], parent);
    }
  }
  if (opts.unweighted) {
    InteractionGraph collapsed;
    for (const auto& u : g.users()) collapsed.add_node(u);
    for (const auto& [pair, w] : g.edges()) collapsed.add_event(pair.first, pair.second, 1.0);
    collapsed.finalize();
    return collapsed;
  }
  g.finalize();
  return g;
}

GraphStats graph_stats(const InteractionGraph& g) {
  GraphStats st;
  st.node_count = g.node_count();
  st.edge_count = g.edges().size();
  for (const auto& [pair, w] : g.edges()) {
    st.total_weight += w;
    if (pair.first == pair.second) ++st.self_loop_count;
  }
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    const auto deg = g.neighbors(i).size();
    if (deg == 0) ++st.isolated_count;
    ++st.degree_histogram[deg];
  }
  return st;
}

std::string GraphStats::to_json() const {
  nlohmann::ordered_json j;
  j["node_count"] = node_count;
  j["edge_count"] = edge_count;
  j["total_weight"] = total_weight;
  j["isolated_count"] = isolated_count;
  j["self_loop_count"] = self_loop_count;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [d, c] : degree_histogram) hist[std::to_string(d)] = c;
  j["degree_histogram"] = hist;
  return j.dump(2);
}

void export_graph(const InteractionGraph& g, const std::filesystem::path& edges_path,
                  const std::filesystem::path& nodes_path) {
  std::ostringstream nodes;
  for (const auto& u : g.users()) nodes << u << '\n';
  std::ostringstream edges;
  for (const auto& [pair, w] : g.edges()) edges << g.user(pair.first) << ' ' << g.user(pair.second) << ' ' << w << '\n';
  write_file(nodes_path, nodes.str());
  write_file(edges_path, edges.str());
}

InteractionGraph import_graph(const std::filesystem::path& edges_path, const std::filesystem::path& nodes_path) {
  InteractionGraph g;
  {
    std::istringstream in(read_file(nodes_path));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) g.add_node(line);
    }
  }
  std::istringstream in(read_file(edges_path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string u, v;
    double w = 0;
    if (!(ls >> u >> v >> w) || w <= 0) {
      throw FormatError(edges_path.string() + ":" + std::to_string(line_no) + ": expected 'u v w'");
    }
    auto a = g.index_of(u), b = g.index_of(v);
    if (!a || !b) throw FormatError(edges_path.string() + ":" + std::to_string(line_no) + ": unknown node");
    g.add_event(*a, *b, w);
  }
  g.finalize();
  return g;
}

}  // namespace uen
