#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <tuple>

#include "helpers.hpp"
#include "uen/synth_bench.hpp"
#include "uen/user_embed.hpp"

using namespace uen;

namespace {

InteractionGraph make_graph(std::size_t n, const std::vector<std::tuple<int, int, double>>& edges) {
  InteractionGraph g;
  for (std::size_t i = 0; i < n; ++i) g.add_node("n" + std::to_string(i));
  for (auto [a, b, w] : edges) g.add_event(a, b, w);
  g.finalize();
  return g;
}

double prob(const std::vector<Transition>& d, NodeIndex x) {
  for (auto& t : d)
    if (t.node == x) return t.probability;
  return 0;
}

double cos_rows(const EmbeddingTable& t, std::size_t a, std::size_t b) {
  auto x = t.row(a), y = t.row(b);
  return testing::cosine({x.begin(), x.end()}, {y.begin(), y.end()});
}

}  // namespace

TEST_CASE("path a-b-c with p=4, q=0.25") {
  auto g = make_graph(3, {{0, 1, 1}, {1, 2, 1}});
  auto d = next_step_distribution(g, 0, 1, 4.0, 0.25);
  CHECK(prob(d, 0) == doctest::Approx(1.0 / 17).epsilon(1e-12));
  CHECK(prob(d, 2) == doctest::Approx(16.0 / 17).epsilon(1e-12));
}

TEST_CASE("p=q=1 is proportional to weights; first step ignores p and q") {
  auto g = make_graph(4, {{0, 1, 1}, {0, 2, 3}, {0, 3, 4}, {1, 2, 1}});
  auto d = next_step_distribution(g, 1, 0, 1, 1);
  CHECK(prob(d, 1) == doctest::Approx(1.0 / 8));
  CHECK(prob(d, 2) == doctest::Approx(3.0 / 8));
  CHECK(prob(d, 3) == doctest::Approx(4.0 / 8));
  auto first = next_step_distribution(g, std::nullopt, 0, 7, 0.1);
  CHECK(prob(first, 3) == doctest::Approx(0.5));
  double total = 0;
  for (auto& t : next_step_distribution(g, 1, 0, 2, 0.5)) total += t.probability;
  CHECK(std::abs(total - 1) < 1e-9);
}

TEST_CASE("isolated node has an empty distribution") {
  auto g = make_graph(2, {});
  CHECK(next_step_distribution(g, std::nullopt, 0, 1, 1).empty());
}

TEST_CASE("single edge walks alternate") {
  auto g = make_graph(2, {{0, 1, 1}});
  Node2VecConfig cfg;
  cfg.walk_length = 3;
  cfg.walks_per_node = 4;
  auto walks = sample_walks(g, cfg);
  CHECK(walks.size() == 8);
  for (auto& w : walks) {
    REQUIRE(w.size() == 3);
    CHECK(w[0] == w[2]);
    CHECK(w[0] != w[1]);
  }
}

TEST_CASE("walks are deterministic and thread independent") {
  SynthConfig sc;
  sc.n_samples = 200;
  auto g = build_interaction_graph(temporal_split(generate(sc)).train);
  Node2VecConfig cfg;
  cfg.walks_per_node = 3;
  auto a = sample_walks(g, cfg);
  CHECK(a == sample_walks(g, cfg));
  cfg.threads = 3;
  CHECK(a == sample_walks(g, cfg));
  cfg.seed = 2;
  CHECK(a != sample_walks(g, cfg));
}

TEST_CASE("unweighted uniform transitions pass a chi-square test") {
  auto g = make_graph(5, {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {0, 4, 1}, {1, 2, 1}});
  Node2VecConfig cfg;
  cfg.walk_length = 2;
  cfg.walks_per_node = 100000;
  std::map<NodeIndex, double> counts;
  std::size_t total = 0;
  for (auto& w : sample_walks(g, cfg)) {
    if (w[0] != 0) continue;
    counts[w[1]] += 1;
    ++total;
  }
  double chi2 = 0;
  for (NodeIndex x = 1; x <= 4; ++x) {
    double e = total / 4.0;
    chi2 += (counts[x] - e) * (counts[x] - e) / e;
  }
  CHECK(chi2 < 11.345);  // chi-square, 3 dof, 0.01
}

TEST_CASE("skip-gram gradient matches central differences") {
  Rng rng(4);
  auto vec = [&](std::size_t d) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.uniform(-0.5, 0.5);
    return v;
  };
  const std::size_t d = 6;
  auto center = vec(d), ctx = vec(d);
  std::vector<std::vector<double>> negs{vec(d), vec(d)};
  auto g = skipgram_grad(center, ctx, negs);
  const double h = 1e-4;
  auto check = [&](std::vector<double>& v, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + h;
      double up = skipgram_loss(center, ctx, negs);
      v[i] = keep - h;
      double down = skipgram_loss(center, ctx, negs);
      v[i] = keep;
      double fd = (up - down) / (2 * h);
      CHECK(std::abs(fd - grad[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  };
  check(center, g.center);
  check(ctx, g.context);
  check(negs[0], g.negatives[0]);
  check(negs[1], g.negatives[1]);
}

TEST_CASE("two cliques separate") {
  std::vector<std::tuple<int, int, double>> edges;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 10; ++i)
      for (int j = i + 1; j < 10; ++j) edges.emplace_back(c * 10 + i, c * 10 + j, 1.0);
  auto g = make_graph(20, edges);
  Node2VecConfig cfg;
  cfg.dim = 8;
  auto t = embed_users(g, cfg);
  double intra = 0, inter = 0;
  int ni = 0, nx = 0;
  for (int a = 0; a < 20; ++a)
    for (int b = a + 1; b < 20; ++b) {
      if ((a < 10) == (b < 10)) {
        intra += cos_rows(t, a, b);
        ++ni;
      } else {
        inter += cos_rows(t, a, b);
        ++nx;
      }
    }
  CHECK(intra / ni > inter / nx);
}

TEST_CASE("degenerate and default-sized tables") {
  auto one = make_graph(1, {});
  Node2VecConfig cfg;
  auto t = embed_users(one, cfg);
  CHECK(t.rows() == 1);
  for (float v : t.data()) CHECK(std::isfinite(v));

  SynthConfig sc;
  sc.n_samples = 300;
  auto g = build_interaction_graph(temporal_split(generate(sc)).train);
  cfg.walks_per_node = 2;
  auto big = embed_users(g, cfg);
  CHECK(big.rows() == g.node_count());
  CHECK(big.dim() == 128);
  for (float v : big.data()) REQUIRE(std::isfinite(v));
  CHECK(big == embed_users(g, cfg));
  CHECK(big.ids() == g.users());
}

TEST_CASE("config validation") {
  Node2VecConfig cfg;
  cfg.p = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.walk_length = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
