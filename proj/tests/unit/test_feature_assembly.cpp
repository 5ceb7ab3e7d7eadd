#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>

#include "helpers.hpp"
#include "uen/feature_assembly.hpp"

using namespace uen;
using testing::C;

namespace {

// Text i has a single 1 at position i, so rows are easy to recognise.
class SentinelTexts : public TextProvider {
 public:
  std::size_t dim() const override { return 8; }
  std::vector<float> embed(const TextRef& ref) const override {
    std::vector<float> v(8, 0.0f);
    v[std::hash<std::string_view>{}(ref.key) % 8] += 1.0f;
    v[ref.key.size() % 8] += 0.5f;
    return v;
  }
};

EmbeddingTable users() { return EmbeddingTable({"a", "b", "c"}, 2, {10, 11, 20, 21, 30, 31}); }

}  // namespace

TEST_CASE("one post and one comment") {
  auto s = testing::sample("p", "a", {{"c1", "b", "p"}});
  HashingTextProvider texts;
  auto table = users();
  LookupResolver r(table);
  auto g = assemble(s, texts, &r);
  CHECK(g.features.rows() == 2);
  CHECK(g.features.cols() == 256 + 2);
  CHECK(g.edges.size() == 1);
  CHECK(g.edges[0] == std::pair<std::uint32_t, std::uint32_t>{0, 1});
}

TEST_CASE("text first, user second") {
  auto s = testing::sample("p", "a", {{"c1", "b", "p"}, {"c2", "c", "c1"}});
  SentinelTexts texts;
  auto table = users();
  LookupResolver r(table);
  auto g = assemble(s, texts, &r);
  REQUIRE(g.features.cols() == 10);
  auto check_row = [&](std::size_t row, const TextRef& ref, const std::string& user) {
    auto t = texts.embed(ref);
    for (std::size_t k = 0; k < 8; ++k) CHECK(g.features(row, k) == t[k]);
    CHECK(g.features(row, 8) == table.at(user)[0]);
    CHECK(g.features(row, 9) == table.at(user)[1]);
  };
  check_row(0, text_ref(s), "a");
  check_row(1, text_ref(s.comments[0]), "b");
  check_row(2, text_ref(s.comments[1]), "c");
  CHECK(g.edges[1] == std::pair<std::uint32_t, std::uint32_t>{1, 2});
  CHECK(g.node_count() == g.edges.size() + 1);
}

TEST_CASE("mean fallback for cold users, lookup rejects them") {
  auto s = testing::sample("p", "zz", {{"c1", "b", "p"}});
  SentinelTexts texts;
  auto table = users();
  MeanFallbackResolver mean(table);
  auto g = assemble(s, texts, &mean);
  auto m = mean_embedding(table);
  CHECK(g.features(0, 8) == m[0]);
  CHECK(g.features(0, 9) == m[1]);
  CHECK(g.features(1, 8) == 20);
  LookupResolver strict(table);
  CHECK_THROWS_AS(assemble(s, texts, &strict), Error);
}

TEST_CASE("null resolver gives text-only rows") {
  auto s = testing::sample("p", "zz", {{"c1", "b", "p"}});
  SentinelTexts texts;
  CHECK(assemble(s, texts, nullptr).features.cols() == 8);
}

TEST_CASE("missing text key is an error") {
  auto s = testing::sample("p", "a", {{"c1", "b", "p"}});
  TableTextProvider texts(EmbeddingTable({"p"}, 2, {1, 0}));
  CHECK_THROWS_AS(assemble(s, texts, nullptr), Error);
}

TEST_CASE("chain prefix sums") {
  auto s = testing::sample("p", "a", {{"c1", "b", "p"}, {"c2", "c", "c1"}, {"c3", "a", "c2"}, {"c4", "b", "c3"}, {"c5", "c", "p"}});
  SentinelTexts texts;
  auto t = [&](int i) { return texts.embed(text_ref(s.comments[i])); };
  CHECK(chain_prefix_representation(s, "c1", texts) == t(0));
  auto two = chain_prefix_representation(s, "c2", texts);
  for (int k = 0; k < 8; ++k) CHECK(two[k] == t(0)[k] + t(1)[k]);

  // Walk parents upward from the depth-4 comment and sum.
  std::vector<double> oracle(8, 0.0);
  for (int cur = 3; cur >= 0; cur = s.parent_indices()[cur]) {
    auto v = t(cur);
    for (int k = 0; k < 8; ++k) oracle[k] += v[k];
  }
  auto four = chain_prefix_representation(s, "c4", texts);
  for (int k = 0; k < 8; ++k) CHECK(four[k] == doctest::Approx(oracle[k]));

  auto all = chain_prefix_all(s, texts);
  for (std::size_t i = 0; i < s.comments.size(); ++i) {
    CHECK(all[i] == chain_prefix_representation(s, s.comments[i].id, texts));
    auto parents = s.parent_indices();
    if (parents[i] >= 0) {
      auto expect = all[parents[i]];
      auto own = t(static_cast<int>(i));
      for (int k = 0; k < 8; ++k) CHECK(all[i][k] == doctest::Approx(expect[k] + own[k]));
    }
  }
  CHECK_THROWS_AS(chain_prefix_representation(s, "nope", texts), Error);
}
