#include "uen/user_embed.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace uen {

void Node2VecConfig::validate() const {
  if (dim == 0) throw Error("node2vec: dim must be positive");
  if (!(p > 0) || !(q > 0)) throw Error("node2vec: p and q must be positive");
  if (walk_length < 2) throw Error("node2vec: walk_length must be >= 2");
  if (walks_per_node < 1 || window < 1 || negatives < 1 || epochs < 1) {
    throw Error("node2vec: walks_per_node, window, negatives and epochs must be >= 1");
  }
  if (!(learning_rate > 0)) throw Error("node2vec: learning_rate must be positive");
}

namespace {

// Unnormalized weights over neighbors of `cur`, aligned with g.neighbors(cur).
void transition_weights(const InteractionGraph& g, std::optional<NodeIndex> prev, NodeIndex cur, double p, double q,
                        std::vector<double>& out) {
  const auto& adj = g.neighbors(cur);
  out.resize(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) {
    double alpha = 1.0;
    if (prev) {
      const NodeIndex x = adj[i].node;
      if (x == *prev) {
        alpha = 1.0 / p;
      } else if (g.has_edge(*prev, x)) {
        alpha = 1.0;
      } else {
        alpha = 1.0 / q;
      }
    }
    out[i] = adj[i].weight * alpha;
  }
}

Walk walk_from(const InteractionGraph& g, NodeIndex start, const Node2VecConfig& cfg, Rng& rng,
               std::vector<double>& scratch) {
  Walk walk;
  walk.reserve(cfg.walk_length);
  walk.push_back(start);
  std::optional<NodeIndex> prev;
  NodeIndex cur = start;
  while (walk.size() < cfg.walk_length) {
    const auto& adj = g.neighbors(cur);
    if (adj.empty()) break;
    transition_weights(g, prev, cur, cfg.p, cfg.q, scratch);
    const auto pick = sample_discrete(scratch, rng);
    if (pick >= adj.size()) break;
    prev = cur;
    cur = adj[pick].node;
    walk.push_back(cur);
  }
  return walk;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::vector<Transition> next_step_distribution(const InteractionGraph& g, std::optional<NodeIndex> prev,
                                               NodeIndex cur, double p, double q) {
  if (cur >= g.node_count()) throw Error("next_step_distribution: node out of range");
  if (prev && !g.has_edge(cur, *prev)) throw Error("next_step_distribution: prev is not adjacent to cur");
  std::vector<double> w;
  transition_weights(g, prev, cur, p, q, w);
  double total = 0;
  for (double x : w) total += x;
  std::vector<Transition> out;
  if (!(total > 0)) return out;
  const auto& adj = g.neighbors(cur);
  out.reserve(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) out.push_back({adj[i].node, w[i] / total});
  return out;
}

std::vector<Walk> sample_walks(const InteractionGraph& g, const Node2VecConfig& cfg) {
  cfg.validate();
  const std::size_t n = g.node_count();
  if (n == 0) throw Error("sample_walks: empty graph");
  const std::size_t total = n * cfg.walks_per_node;
  std::vector<Walk> walks(total);

  auto run = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scratch;
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t round = k / n;
      const auto start = static_cast<NodeIndex>(k % n);
      Rng rng(mix_seed(cfg.seed, round, start));
      walks[k] = walk_from(g, start, cfg, rng, scratch);
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.threads, total));
  if (threads == 1) {
    run(0, total);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (total + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(total, b + chunk);
      if (b < e) pool.emplace_back(run, b, e);
    }
  }
  return walks;
}

std::vector<float> train_skipgram(const std::vector<Walk>& walks, std::size_t vocab_size, const Node2VecConfig& cfg) {
  cfg.validate();
  if (walks.empty()) throw Error("train_skipgram: empty walk corpus");
  const std::size_t d = cfg.dim;
  Rng rng(mix_seed(cfg.seed, 0x5347u));

  std::vector<float> center(vocab_size * d);
  std::vector<float> context(vocab_size * d, 0.0f);
  const float half = 0.5f / static_cast<float>(d);
  for (auto& v : center) v = static_cast<float>(rng.uniform(-half, half));

  // Negative-sampling law: unigram counts raised to 3/4, as a cumulative table.
  std::vector<double> counts(vocab_size, 0.0);
  std::size_t tokens = 0;
  for (const auto& w : walks) {
    for (NodeIndex v : w) {
      if (v >= vocab_size) throw Error("train_skipgram: node index outside vocabulary");
      counts[v] += 1.0;
    }
    tokens += w.size();
  }
  std::vector<double> cumulative(vocab_size);
  double acc = 0;
  for (std::size_t v = 0; v < vocab_size; ++v) {
    acc += std::pow(counts[v], 0.75);
    cumulative[v] = acc;
  }
  auto draw_negative = [&]() -> NodeIndex {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<NodeIndex>(std::min<std::size_t>(it - cumulative.begin(), vocab_size - 1));
  };

  // Walks are visited in a seeded order that is fixed across epochs.
  std::vector<std::size_t> order(walks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  const double total_steps = static_cast<double>(cfg.epochs) * static_cast<double>(tokens);
  double processed = 0;
  std::vector<float> grad_center(d);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t wi : order) {
      const auto& walk = walks[wi];
      for (std::size_t pos = 0; pos < walk.size(); ++pos) {
        const float lr =
            static_cast<float>(cfg.learning_rate * std::max(1e-4, 1.0 - processed / total_steps));
        processed += 1.0;
        const NodeIndex c = walk[pos];
        float* vc = center.data() + static_cast<std::size_t>(c) * d;
        const std::size_t lo = pos >= cfg.window ? pos - cfg.window : 0;
        const std::size_t hi = std::min(walk.size() - 1, pos + cfg.window);
        for (std::size_t cp = lo; cp <= hi; ++cp) {
          if (cp == pos) continue;
          const NodeIndex ctx = walk[cp];
          std::fill(grad_center.begin(), grad_center.end(), 0.0f);
          for (std::size_t s = 0; s <= cfg.negatives; ++s) {
            NodeIndex target;
            double label;
            if (s == 0) {
              target = ctx;
              label = 1.0;
            } else {
              target = draw_negative();
              if (target == ctx) continue;
              label = 0.0;
            }
            float* ut = context.data() + static_cast<std::size_t>(target) * d;
            double dot = 0;
            for (std::size_t k = 0; k < d; ++k) dot += static_cast<double>(vc[k]) * ut[k];
            // d(loss)/d(dot) = σ(dot) - label
            const auto g = static_cast<float>((sigmoid(dot) - label) * lr);
            for (std::size_t k = 0; k < d; ++k) {
              grad_center[k] += g * ut[k];
              ut[k] -= g * vc[k];
            }
          }
          for (std::size_t k = 0; k < d; ++k) vc[k] -= grad_center[k];
        }
      }
    }
  }
  return center;
}

EmbeddingTable embed_users(const InteractionGraph& g, const Node2VecConfig& cfg) {
  auto walks = sample_walks(g, cfg);
  auto data = train_skipgram(walks, g.node_count(), cfg);
  return EmbeddingTable(g.users(), cfg.dim, std::move(data));
}

double skipgram_loss(std::span<const double> center, std::span<const double> context,
                     const std::vector<std::vector<double>>& negatives) {
  auto dot = [&](std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  };
  double loss = -std::log(sigmoid(dot(center, context)));
  for (const auto& n : negatives) loss -= std::log(sigmoid(-dot(center, n)));
  return loss;
}

SkipgramGrad skipgram_grad(std::span<const double> center, std::span<const double> context,
                           const std::vector<std::vector<double>>& negatives) {
  const std::size_t d = center.size();
  SkipgramGrad g;
  g.center.assign(d, 0.0);
  auto accumulate = [&](std::span<const double> target, double label, std::vector<double>& target_grad) {
    double dot = 0;
    for (std::size_t k = 0; k < d; ++k) dot += center[k] * target[k];
    const double coef = sigmoid(dot) - label;
    target_grad.assign(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      g.center[k] += coef * target[k];
      target_grad[k] = coef * center[k];
    }
  };
  accumulate(context, 1.0, g.context);
  g.negatives.resize(negatives.size());
  for (std::size_t i = 0; i < negatives.size(); ++i) accumulate(negatives[i], 0.0, g.negatives[i]);
  return g;
}

}  // namespace uen
