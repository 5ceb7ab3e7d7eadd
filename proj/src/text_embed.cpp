#include "uen/text_embed.hpp"

#include <cmath>

namespace uen {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
    if (word) {
      cur.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<float> hash_embed(std::string_view text, const TextEmbedConfig& cfg) {
  if (cfg.dim == 0) throw Error("hash_embed: dim must be positive");
  if (cfg.min_ngram < 1 || cfg.max_ngram < cfg.min_ngram) throw Error("hash_embed: bad n-gram range");
  std::vector<double> acc(cfg.dim, 0.0);
  const auto tokens = tokenize(text);
  std::string gram;
  for (std::size_t n = cfg.min_ngram; n <= cfg.max_ngram; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      gram = tokens[i];
      for (std::size_t k = 1; k < n; ++k) {
        gram.push_back(' ');
        gram += tokens[i + k];
      }
      const std::uint64_t base = fnv1a64(gram, cfg.hash_seed);
      for (std::size_t probe = 0; probe < std::max<std::size_t>(1, cfg.probes); ++probe) {
        const std::uint64_t h = splitmix64(base + probe * 0x9E3779B97F4A7C15ULL);
        const std::size_t bucket = static_cast<std::size_t>((h >> 1) % cfg.dim);
        acc[bucket] += (h & 1) ? 1.0 : -1.0;
      }
    }
  }
  double norm = 0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<float> out(cfg.dim, 0.0f);
  if (norm > 0) {
    for (std::size_t k = 0; k < cfg.dim; ++k) out[k] = static_cast<float>(acc[k] / norm);
  }
  return out;
}

std::vector<float> HashingTextProvider::embed(const TextRef& ref) const {
  if (ref.text && ref.text->has_value()) return hash_embed(**ref.text, cfg_);
  return hash_embed(ref.key, cfg_);
}

std::vector<float> TableTextProvider::embed(const TextRef& ref) const {
  auto idx = table_.index_of(std::string(ref.key));
  if (!idx) throw Error("text embedding missing for text_key " + std::string(ref.key));
  auto row = table_.row(*idx);
  return {row.begin(), row.end()};
}

EmbeddingTable load_text_embeddings(const std::filesystem::path& path, std::size_t dim) {
  return load_embedding_table(path, dim);
}

EmbeddingTable embed_corpus_texts(const std::vector<Sample>& samples, const TextProvider& provider) {
  EmbeddingTable table(provider.dim());
  auto add = [&](const TextRef& ref) {
    const std::string key(ref.key);
    auto v = provider.embed(ref);
    if (auto idx = table.index_of(key)) {
      auto existing = table.row(*idx);
      if (!std::equal(existing.begin(), existing.end(), v.begin())) {
        throw FormatError("text_key " + key + " maps to two different texts");
      }
      return;
    }
    table.add(key, v);
  };
  for (const auto& s : samples) {
    add(text_ref(s));
    for (const auto& c : s.comments) add(text_ref(c));
  }
  return table;
}

}  // namespace uen
