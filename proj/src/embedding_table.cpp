#include "uen/embedding_table.hpp"

#include <cmath>

#include "json.hpp"

namespace uen {

namespace {
constexpr std::string_view kMagic = "UENEMB1";
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> ids, std::size_t dim, std::vector<float> data)
    : dim_(dim), ids_(std::move(ids)), data_(std::move(data)) {
  if (data_.size() != ids_.size() * dim_) throw DimensionError("embedding table: data size does not match rows*dim");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw FormatError("embedding table: duplicate id " + ids_[i]);
  }
}

std::optional<std::size_t> EmbeddingTable::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> EmbeddingTable::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error("embedding table: unknown id " + id);
  return row(it->second);
}

void EmbeddingTable::add(const std::string& id, std::span<const float> values) {
  if (values.size() != dim_) throw DimensionError("embedding table: row has dim " + std::to_string(values.size()) +
                                                  ", table dim is " + std::to_string(dim_));
  if (!index_.emplace(id, ids_.size()).second) throw FormatError("embedding table: duplicate id " + id);
  ids_.push_back(id);
  data_.insert(data_.end(), values.begin(), values.end());
}

std::vector<float> mean_embedding(const EmbeddingTable& t) {
  if (t.empty()) throw Error("mean of an empty embedding table");
  std::vector<double> acc(t.dim(), 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    for (std::size_t k = 0; k < t.dim(); ++k) acc[k] += row[k];
  }
  std::vector<float> out(t.dim());
  for (std::size_t k = 0; k < t.dim(); ++k) out[k] = static_cast<float>(acc[k] / static_cast<double>(t.rows()));
  return out;
}

std::string encode_embedding_table(const EmbeddingTable& t) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(static_cast<std::uint32_t>(t.rows()));
  w.u32(static_cast<std::uint32_t>(t.dim()));
  for (const auto& id : t.ids()) w.str(id);
  w.f32s(t.data());
  return w.buffer();
}

EmbeddingTable decode_embedding_table(std::string_view bytes, const std::string& what) {
  ByteReader r(bytes, what);
  if (r.bytes(kMagic.size()) != kMagic) throw FormatError(what + ": not a UENEMB1 file");
  const auto rows = r.u32();
  const auto dim = r.u32();
  std::vector<std::string> ids;
  ids.reserve(rows);
  for (std::uint32_t i = 0; i < rows; ++i) ids.push_back(r.str());
  std::vector<float> data(static_cast<std::size_t>(rows) * dim);
  r.f32s(data);
  if (!r.at_end()) throw FormatError(what + ": trailing bytes after payload");
  for (float v : data) {
    if (!std::isfinite(v)) throw FormatError(what + ": non-finite value in embedding payload");
  }
  return EmbeddingTable(std::move(ids), dim, std::move(data));
}

void save_embedding_table(const std::filesystem::path& path, const EmbeddingTable& t) {
  nlohmann::ordered_json meta;
  meta["format"] = "UENEMB1";
  meta["rows"] = t.rows();
  meta["dim"] = t.dim();
  write_with_sidecar(path, encode_embedding_table(t), meta.dump());
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  auto table = decode_embedding_table(read_verified(path), path.string());
  if (expected_dim && table.dim() != *expected_dim) {
    throw DimensionError(path.string() + ": dimension mismatch, file has " + std::to_string(table.dim()) +
                         ", expected " + std::to_string(*expected_dim));
  }
  return table;
}

}  // namespace uen
