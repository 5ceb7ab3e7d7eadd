#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uen/corpus.hpp"
#include "uen/embedding_table.hpp"

namespace uen {

struct TextEmbedConfig {
  std::size_t dim = 256;
  std::uint64_t hash_seed = 0x7e57;
  std::size_t min_ngram = 1;
  std::size_t max_ngram = 2;
  /// Buckets each n-gram is spread over. Several probes per token keep
  /// distinct tokens from producing identical vectors at small `dim`.
  std::size_t probes = 4;
};

/// Lowercased word tokens. Bytes >= 0x80 count as word characters so UTF-8
/// sequences stay inside their token.
std::vector<std::string> tokenize(std::string_view text);

/// Signed feature hashing of word n-grams, L2-normalized. The empty string
/// maps to the zero vector.
std::vector<float> hash_embed(std::string_view text, const TextEmbedConfig& cfg = {});

/// A post or comment's text as seen by a provider.
struct TextRef {
  std::string_view key;
  const std::optional<std::string>* text = nullptr;
};

inline TextRef text_ref(const Sample& s) { return {s.text_key, &s.text}; }
inline TextRef text_ref(const Comment& c) { return {c.text_key, &c.text}; }

class TextProvider {
 public:
  virtual ~TextProvider() = default;
  virtual std::size_t dim() const = 0;
  /// Throws Error when the text cannot be resolved.
  virtual std::vector<float> embed(const TextRef& ref) const = 0;
};

/// Hashes the raw text when the record carries one, the key otherwise.
class HashingTextProvider final : public TextProvider {
 public:
  explicit HashingTextProvider(TextEmbedConfig cfg = {}) : cfg_(cfg) {}
  std::size_t dim() const override { return cfg_.dim; }
  std::vector<float> embed(const TextRef& ref) const override;

 private:
  TextEmbedConfig cfg_;
};

/// Looks vectors up by text key in a precomputed table.
class TableTextProvider final : public TextProvider {
 public:
  explicit TableTextProvider(EmbeddingTable table) : table_(std::move(table)) {}
  std::size_t dim() const override { return table_.dim(); }
  std::vector<float> embed(const TextRef& ref) const override;
  const EmbeddingTable& table() const { return table_; }

 private:
  EmbeddingTable table_;
};

/// Loads a UENEMB1 table of text vectors; the dimension must equal `dim`.
EmbeddingTable load_text_embeddings(const std::filesystem::path& path, std::size_t dim = 256);

/// Every post and comment text of `samples` through `provider`, keyed by
/// text_key. Repeated keys must resolve to the same vector.
EmbeddingTable embed_corpus_texts(const std::vector<Sample>& samples, const TextProvider& provider);

}  // namespace uen
