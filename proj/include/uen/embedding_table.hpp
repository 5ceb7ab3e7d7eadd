#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "uen/util.hpp"

namespace uen {

/// Dense row-major float matrix with an id -> row index.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}
  EmbeddingTable(std::vector<std::string> ids, std::size_t dim, std::vector<float> data);

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& data() const { return data_; }

  bool contains(const std::string& id) const { return index_.contains(id); }
  std::optional<std::size_t> index_of(const std::string& id) const;

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  /// Throws Error when `id` is unknown.
  std::span<const float> at(const std::string& id) const;

  /// Appends a row; duplicate ids are rejected.
  void add(const std::string& id, std::span<const float> values);

  bool operator==(const EmbeddingTable& o) const { return dim_ == o.dim_ && ids_ == o.ids_ && data_ == o.data_; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Column mean with double accumulation. Throws on an empty table.
std::vector<float> mean_embedding(const EmbeddingTable& t);

/// UENEMB1: "UENEMB1", u32 rows, u32 dim, length-prefixed ids, rows*dim f32.
std::string encode_embedding_table(const EmbeddingTable& t);
EmbeddingTable decode_embedding_table(std::string_view bytes, const std::string& what);

/// Writes the binary file plus `<path>.json` = {rows, dim, sha256}.
void save_embedding_table(const std::filesystem::path& path, const EmbeddingTable& t);
/// Verifies the checksum; `expected_dim` (when set) must match.
EmbeddingTable load_embedding_table(const std::filesystem::path& path, std::optional<std::size_t> expected_dim = {});

}  // namespace uen
