#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "uen/text_embed.hpp"

using namespace uen;

namespace {

double norm(const std::vector<float>& v) {
  double s = 0;
  for (float x : v) s += double(x) * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("tokenizer lowercases and splits on non-word bytes") {
  CHECK(tokenize("Breaking NEWS, today!") == std::vector<std::string>{"breaking", "news", "today"});
  CHECK(tokenize("caf\xc3\xa9 ok") == std::vector<std::string>{"caf\xc3\xa9", "ok"});
  CHECK(tokenize("  ").empty());
}

TEST_CASE("empty text is the zero vector") {
  auto v = hash_embed("");
  CHECK(v.size() == 256);
  CHECK(norm(v) == 0);
}

TEST_CASE("deterministic and unit norm") {
  auto a = hash_embed("the quick brown fox");
  CHECK(a == hash_embed("the quick brown fox"));
  CHECK(std::abs(norm(a) - 1) < 1e-6);
  TextEmbedConfig other;
  other.hash_seed = 99;
  CHECK(a != hash_embed("the quick brown fox", other));
}

TEST_CASE("shared words raise cosine") {
  auto a = hash_embed("breaking news");
  double near = testing::cosine(a, hash_embed("breaking news today"));
  double far = testing::cosine(a, hash_embed("weather forecast sunny"));
  CHECK(near > far);
}

TEST_CASE("unigram collisions stay rare over a 10k vocabulary") {
  std::set<std::vector<float>> seen;
  std::size_t collisions = 0;
  for (int i = 0; i < 10000; ++i) {
    if (!seen.insert(hash_embed("w" + std::to_string(i))).second) ++collisions;
  }
  CHECK(collisions / 10000.0 < 0.05);
}

TEST_CASE("providers") {
  std::optional<std::string> text = "hello world";
  HashingTextProvider h;
  CHECK(h.embed({"key", &text}) == hash_embed("hello world"));
  std::optional<std::string> none;
  CHECK(h.embed({"key", &none}) == hash_embed("key"));

  EmbeddingTable t({"k1"}, 2, {0.6f, 0.8f});
  TableTextProvider tp(t);
  CHECK(tp.embed({"k1", &none}) == std::vector<float>{0.6f, 0.8f});
  CHECK_THROWS_AS(tp.embed({"k2", &none}), Error);
}

TEST_CASE("text table loading") {
  auto dir = testing::temp_dir("text_io");
  EmbeddingTable t({"a", "b"}, 256, std::vector<float>(512, 0.1f));
  save_embedding_table(dir / "t.emb", t);
  CHECK(load_text_embeddings(dir / "t.emb").rows() == 2);
  EmbeddingTable wide({"a"}, 300, std::vector<float>(300, 0.1f));
  save_embedding_table(dir / "w.emb", wide);
  CHECK_THROWS_AS(load_text_embeddings(dir / "w.emb"), DimensionError);
  auto bytes = read_file(dir / "t.emb");
  bytes[bytes.size() / 2] ^= 1;
  write_file(dir / "t.emb", bytes);
  CHECK_THROWS_AS(load_text_embeddings(dir / "t.emb"), ChecksumError);
}

TEST_CASE("corpus texts are order independent") {
  auto s1 = testing::sample("p1", "a", {{"c1", "b", "p1"}});
  auto s2 = testing::sample("p2", "b", {{"c2", "a", "p2"}});
  HashingTextProvider h;
  auto fwd = embed_corpus_texts({s1, s2}, h);
  auto rev = embed_corpus_texts({s2, s1}, h);
  CHECK(fwd.rows() == 4);
  for (const auto& id : fwd.ids()) {
    auto x = fwd.at(id), y = rev.at(id);
    CHECK(std::equal(x.begin(), x.end(), y.begin()));
  }
  auto clash = s2;
  clash.text_key = "p1";
  CHECK_THROWS_AS(embed_corpus_texts({s1, clash}, h), FormatError);
}
