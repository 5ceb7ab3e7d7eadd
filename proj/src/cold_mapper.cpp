#include "uen/cold_mapper.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace uen {

SimIndex::SimIndex(std::vector<IndexEntry> entries) {
  if (entries.empty()) return;
  dim_ = entries.front().vector.size();
  keys_.reserve(entries.size());
  owners_.reserve(entries.size());
  rows_.reserve(entries.size() * dim_);
  for (auto& e : entries) {
    if (e.vector.size() != dim_) {
      throw DimensionError("build_index: entry " + e.key + " has dim " + std::to_string(e.vector.size()) +
                           ", expected " + std::to_string(dim_));
    }
    double norm = 0;
    for (float v : e.vector) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    for (float v : e.vector) rows_.push_back(norm > 0 ? static_cast<float>(v / norm) : 0.0f);
    keys_.push_back(std::move(e.key));
    owners_.push_back(std::move(e.owner));
  }
}

SimIndex::SimIndex(std::vector<std::string> keys, std::vector<UserId> owners, std::size_t dim,
                   std::vector<float> normalized)
    : dim_(dim), keys_(std::move(keys)), owners_(std::move(owners)), rows_(std::move(normalized)) {
  if (owners_.size() != keys_.size() || rows_.size() != keys_.size() * dim_) {
    throw DimensionError("SimIndex: inconsistent snapshot sizes");
  }
}

std::vector<SearchHit> SimIndex::topk(std::span<const float> query, std::size_t k) const {
  if (empty()) throw Error("topk on an empty index");
  if (query.size() != dim_) {
    throw DimensionError("topk: query dim " + std::to_string(query.size()) + ", index dim " + std::to_string(dim_));
  }
  double qnorm = 0;
  for (float v : query) qnorm += static_cast<double>(v) * v;
  qnorm = std::sqrt(qnorm);
  std::vector<double> q(dim_, 0.0);
  if (qnorm > 0) {
    for (std::size_t j = 0; j < dim_; ++j) q[j] = query[j] / qnorm;
  }
  const std::size_t n = size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* r = rows_.data() + i * dim_;
    double s = 0;
    for (std::size_t j = 0; j < dim_; ++j) s += q[j] * r[j];
    scores[i] = s;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t take = std::min(k, n);
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return keys_[a] < keys_[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
  std::vector<SearchHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) hits.push_back({keys_[order[i]], owners_[order[i]], scores[order[i]]});
  return hits;
}

SimIndex build_index(std::vector<IndexEntry> entries) { return SimIndex(std::move(entries)); }

namespace {
constexpr std::string_view kIndexMagic = "UENIDX1";
}

void save_index(const std::filesystem::path& path, const SimIndex& index) {
  ByteWriter w;
  w.bytes(kIndexMagic);
  w.u32(static_cast<std::uint32_t>(index.size()));
  w.u32(static_cast<std::uint32_t>(index.dim()));
  for (const auto& k : index.keys()) w.str(k);
  for (const auto& o : index.owners()) w.str(o);
  w.f32s(index.matrix());
  nlohmann::ordered_json meta;
  meta["format"] = "UENIDX1";
  meta["rows"] = index.size();
  meta["dim"] = index.dim();
  write_with_sidecar(path, w.buffer(), meta.dump());
}

SimIndex load_index(const std::filesystem::path& path) {
  const auto bytes = read_verified(path);
  ByteReader r(bytes, path.string());
  if (r.bytes(kIndexMagic.size()) != kIndexMagic) throw FormatError(path.string() + ": not a UENIDX1 file");
  const auto n = r.u32();
  const auto dim = r.u32();
  std::vector<std::string> keys, owners;
  for (std::uint32_t i = 0; i < n; ++i) keys.push_back(r.str());
  for (std::uint32_t i = 0; i < n; ++i) owners.push_back(r.str());
  std::vector<float> rows(static_cast<std::size_t>(n) * dim);
  r.f32s(rows);
  if (!r.at_end()) throw FormatError(path.string() + ": trailing bytes after payload");
  return SimIndex(std::move(keys), std::move(owners), dim, std::move(rows));
}

HeuristicSet HeuristicSet::parse(std::string_view csv) {
  HeuristicSet h{false, false, false};
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto end = csv.find(',', start);
    if (end == std::string_view::npos) end = csv.size();
    auto tok = csv.substr(start, end - start);
    if (tok == "h1" || tok == "H1") {
      h.post_similarity = true;
    } else if (tok == "h2" || tok == "H2") {
      h.reaction_similarity = true;
    } else if (tok == "h3" || tok == "H3") {
      h.chain_history = true;
    } else if (!tok.empty() && tok != "none") {
      throw Error("unknown heuristic '" + std::string(tok) + "' (expected h1, h2, h3)");
    }
    start = end + 1;
  }
  return h;
}

std::string HeuristicSet::to_string() const {
  std::string out;
  auto add = [&](const char* s) {
    if (!out.empty()) out += ',';
    out += s;
  };
  if (post_similarity) add("h1");
  if (reaction_similarity) add("h2");
  if (chain_history) add("h3");
  return out.empty() ? "none" : out;
}

void ColdMapConfig::validate() const {
  if (k1 < 1) throw Error("cold mapper: k1 must be >= 1");
  if (heuristics.reaction_similarity && k2 < 1) throw Error("cold mapper: k2 must be >= 1 when H2 is enabled");
}

std::vector<float> mean_of_owners(const std::vector<SearchHit>& hits, const EmbeddingTable& users) {
  if (hits.empty()) throw Error("mean_of_owners: no hits");
  std::vector<double> acc(users.dim(), 0.0);
  for (const auto& h : hits) {
    auto row = users.at(h.owner);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += row[k];
  }
  std::vector<float> out(users.dim());
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<float>(acc[k] / static_cast<double>(hits.size()));
  return out;
}

std::vector<float> map_cold_author(std::span<const float> post_vec, const SimIndex& post_index,
                                   const EmbeddingTable& users, std::size_t k1) {
  if (post_index.empty()) {
    log_warn("cold mapper: empty post index, using the mean user vector");
    return mean_embedding(users);
  }
  return mean_of_owners(post_index.topk(post_vec, k1), users);
}

ColdMapper::ColdMapper(const std::vector<Sample>& train, const EmbeddingTable& users, const TextProvider& texts,
                       ColdMapConfig cfg)
    : users_(&users), texts_(&texts), cfg_(cfg) {
  cfg_.validate();
  if (!users.empty()) global_mean_ = mean_embedding(users);
  std::vector<IndexEntry> posts;
  posts.reserve(train.size());
  for (const auto& s : train) {
    posts.push_back({s.post_id, texts.embed(text_ref(s)), s.author});
    std::vector<std::vector<float>> reps;
    if (cfg_.heuristics.chain_history) {
      reps = chain_prefix_all(s, texts);
    } else {
      for (const auto& c : s.comments) reps.push_back(texts.embed(text_ref(c)));
    }
    auto& bucket = comments_by_post_[s.post_id];
    for (std::size_t i = 0; i < s.comments.size(); ++i) {
      bucket.push_back({s.comments[i].id, s.comments[i].author, std::move(reps[i])});
    }
    post_order_.push_back(s.post_id);
  }
  post_index_ = SimIndex(std::move(posts));
}

std::vector<float> ColdMapper::comment_representation(const Sample& sample, std::size_t comment) const {
  if (cfg_.heuristics.chain_history) {
    return chain_prefix_representation(sample, sample.comments.at(comment).id, *texts_);
  }
  return texts_->embed(text_ref(sample.comments.at(comment)));
}

std::vector<IndexEntry> ColdMapper::collect_comments(const std::vector<std::string>& post_keys) const {
  std::vector<IndexEntry> out;
  for (const auto& key : post_keys) {
    auto it = comments_by_post_.find(key);
    if (it == comments_by_post_.end()) continue;
    for (const auto& c : it->second) out.push_back({c.key, c.vec, c.author});
  }
  return out;
}

std::vector<IndexEntry> ColdMapper::all_comments() const { return collect_comments(post_order_); }

std::vector<float> ColdMapper::map_author(const Sample& sample) const {
  if (!cfg_.heuristics.post_similarity) {
    if (global_mean_.empty()) throw Error("cold mapper: no user vectors available");
    return global_mean_;
  }
  return map_cold_author(texts_->embed(text_ref(sample)), post_index_, *users_, cfg_.k1);
}

std::vector<float> ColdMapper::map_commenter(const Sample& sample, std::size_t comment) const {
  if (!cfg_.heuristics.reaction_similarity) return map_author(sample);
  if (post_index_.empty()) {
    log_warn("cold mapper: empty post index, using the mean user vector");
    return mean_embedding(*users_);
  }
  std::vector<IndexEntry> pool;
  if (cfg_.heuristics.post_similarity) {
    const auto hits = post_index_.topk(texts_->embed(text_ref(sample)), cfg_.k1);
    std::vector<std::string> keys;
    keys.reserve(hits.size());
    for (const auto& h : hits) keys.push_back(h.key);
    pool = collect_comments(keys);
  } else {
    pool = all_comments();
  }
  if (pool.empty()) return map_author(sample);
  const SimIndex reactions(std::move(pool));
  return mean_of_owners(reactions.topk(comment_representation(sample, comment), cfg_.k2), *users_);
}

std::vector<float> map_cold_commenter(const Sample& sample, const CommentId& comment_id, const ColdMapper& mapper) {
  const auto idx = sample.find_comment(comment_id);
  if (!idx) throw Error("comment " + comment_id + " not found in post " + sample.post_id);
  return mapper.map_commenter(sample, *idx);
}

std::vector<float> ColdMapperResolver::resolve(const UserId& user, const Occurrence& where) const {
  const auto& users = mapper_->users();
  if (auto idx = users.index_of(user)) {
    auto row = users.row(*idx);
    return {row.begin(), row.end()};
  }
  if (!where.sample) throw Error("cold mapper resolver needs the occurrence context");
  if (where.comment) return mapper_->map_commenter(*where.sample, *where.comment);
  return mapper_->map_author(*where.sample);
}

ResolverMode parse_resolver_mode(std::string_view s) {
  if (s == "train-lookup" || s == "lookup") return ResolverMode::TrainLookup;
  if (s == "mean-fallback" || s == "mean") return ResolverMode::MeanFallback;
  if (s == "cold-mapper" || s == "mapper") return ResolverMode::ColdMapper;
  throw Error("unknown resolver mode: " + std::string(s));
}

std::unique_ptr<UserResolver> make_resolver(ResolverMode mode, const ResolverInputs& in) {
  if (!in.users) throw Error("make_resolver: user table required");
  switch (mode) {
    case ResolverMode::TrainLookup: return std::make_unique<LookupResolver>(*in.users);
    case ResolverMode::MeanFallback: return std::make_unique<MeanFallbackResolver>(*in.users);
    case ResolverMode::ColdMapper: {
      if (!in.train || !in.texts) throw Error("make_resolver: cold-mapper mode needs train samples and texts");
      auto mapper = std::make_shared<const ColdMapper>(*in.train, *in.users, *in.texts, in.cold);
      return std::make_unique<ColdMapperResolver>(std::move(mapper));
    }
  }
  throw Error("make_resolver: bad mode");
}

}  // namespace uen
