#include "uen/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace uen {

using nlohmann::json;

std::vector<UserId> Sample::users() const {
  std::vector<UserId> out;
  std::unordered_set<UserId> seen;
  auto add = [&](const UserId& u) {
    if (seen.insert(u).second) out.push_back(u);
  };
  add(author);
  for (const auto& c : comments) add(c.author);
  return out;
}

std::optional<std::size_t> Sample::find_comment(const CommentId& id) const {
  for (std::size_t i = 0; i < comments.size(); ++i) {
    if (comments[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<int> Sample::parent_indices() const {
  std::unordered_map<std::string_view, int> pos;
  for (std::size_t i = 0; i < comments.size(); ++i) pos.emplace(comments[i].id, static_cast<int>(i));
  std::vector<int> out(comments.size(), -1);
  for (std::size_t i = 0; i < comments.size(); ++i) {
    if (comments[i].parent == post_id) continue;
    auto it = pos.find(comments[i].parent);
    if (it == pos.end()) throw FormatError("comment " + comments[i].id + ": dangling parent " + comments[i].parent);
    out[i] = it->second;
  }
  return out;
}

const UserId& Sample::parent_author(std::size_t i) const {
  const auto& parent = comments.at(i).parent;
  if (parent == post_id) return author;
  auto idx = find_comment(parent);
  if (!idx) throw FormatError("comment " + comments[i].id + ": dangling parent " + parent);
  return comments[*idx].author;
}

void validate_sample(const Sample& s) {
  if (s.post_id.empty()) throw FormatError("sample with empty post_id");
  if (s.author.empty()) throw FormatError("post " + s.post_id + ": empty author");
  if (s.comments.empty()) throw FormatError("post " + s.post_id + ": no comments");
  std::unordered_map<std::string_view, std::size_t> pos;
  for (std::size_t i = 0; i < s.comments.size(); ++i) {
    const auto& c = s.comments[i];
    if (c.id.empty()) throw FormatError("post " + s.post_id + ": comment with empty id");
    if (c.author.empty()) throw FormatError("comment " + c.id + ": empty author");
    if (c.id == s.post_id) throw FormatError("comment " + c.id + ": id collides with its post id");
    if (!pos.emplace(c.id, i).second) throw FormatError("duplicate comment id " + c.id);
  }
  for (const auto& c : s.comments) {
    if (c.parent != s.post_id && !pos.contains(c.parent)) {
      throw FormatError("comment " + c.id + ": dangling parent reference " + c.parent);
    }
  }
  // Every parent chain must reach the post; a chain longer than the
  // comment count implies a cycle.
  for (const auto& c : s.comments) {
    std::string_view cur = c.parent;
    std::size_t steps = 0;
    while (cur != s.post_id) {
      if (++steps > s.comments.size()) throw FormatError("comment " + c.id + ": reply cycle");
      cur = s.comments[pos.at(cur)].parent;
    }
  }
}

namespace {

std::string require_string(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw FormatError(ctx + ": missing field '" + key + "'");
  if (!j[key].is_string()) throw FormatError(ctx + ": field '" + key + "' must be a string");
  return j[key].get<std::string>();
}

std::int64_t require_int(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw FormatError(ctx + ": missing field '" + key + "'");
  if (!j[key].is_number_integer()) throw FormatError(ctx + ": field '" + key + "' must be an integer");
  return j[key].get<std::int64_t>();
}

std::optional<std::string> optional_string(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw FormatError(ctx + ": field '" + key + "' must be a string");
  return j[key].get<std::string>();
}

Sample parse_sample(const json& j, const LoadOptions& opts, const std::string& ctx) {
  if (!j.is_object()) throw FormatError(ctx + ": record is not a JSON object");
  Sample s;
  s.post_id = require_string(j, "post_id", ctx);
  auto author = optional_string(j, "author", ctx);
  if (author) {
    if (author->empty()) throw FormatError(ctx + ": post " + s.post_id + " has an empty (deleted) author");
    s.author = *author;
  } else if (opts.mode == CorpusMode::TweetStyle) {
    s.author = opts.common_author;
    s.author_inherited = true;
  } else {
    throw FormatError(ctx + ": post " + s.post_id + " has no author (required in reddit-style mode)");
  }
  s.text_key = require_string(j, "text_key", ctx);
  s.text = optional_string(j, "text", ctx);
  s.timestamp = require_int(j, "timestamp", ctx);
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_number_integer()) throw FormatError(ctx + ": label must be 0 or 1");
    const auto l = j["label"].get<std::int64_t>();
    if (l != 0 && l != 1) throw FormatError(ctx + ": label must be 0 or 1, got " + std::to_string(l));
    s.label = static_cast<Label>(l);
  }
  if (!j.contains("comments") || !j["comments"].is_array()) throw FormatError(ctx + ": missing comments array");
  for (const auto& cj : j["comments"]) {
    if (!cj.is_object()) throw FormatError(ctx + ": comment is not an object");
    Comment c;
    c.id = require_string(cj, "id", ctx);
    const std::string cctx = ctx + ": comment " + c.id;
    c.author = require_string(cj, "author", cctx);
    if (c.author.empty()) throw FormatError(cctx + " has an empty (deleted) author");
    c.parent = require_string(cj, "parent", cctx);
    c.text_key = require_string(cj, "text_key", cctx);
    c.text = optional_string(cj, "text", cctx);
    c.timestamp = require_int(cj, "timestamp", cctx);
    s.comments.push_back(std::move(c));
  }
  return s;
}

json sample_to_json(const Sample& s) {
  json j = json::object();
  j["post_id"] = s.post_id;
  if (!s.author_inherited) j["author"] = s.author;
  j["text_key"] = s.text_key;
  if (s.text) j["text"] = *s.text;
  j["timestamp"] = s.timestamp;
  if (s.label) j["label"] = static_cast<int>(*s.label);
  json cs = json::array();
  for (const auto& c : s.comments) {
    json cj = json::object();
    cj["id"] = c.id;
    cj["author"] = c.author;
    cj["parent"] = c.parent;
    cj["text_key"] = c.text_key;
    if (c.text) cj["text"] = *c.text;
    cj["timestamp"] = c.timestamp;
    cs.push_back(std::move(cj));
  }
  j["comments"] = std::move(cs);
  return j;
}

}  // namespace

std::string LoadReport::to_json() const {
  nlohmann::ordered_json j;
  j["loaded"] = loaded;
  j["dropped_zero_comment"] = dropped_zero_comment;
  j["errors"] = errors;
  return j.dump();
}

LoadResult parse_corpus(std::string_view jsonl, const LoadOptions& opts, const std::string& source) {
  LoadResult result;
  if (opts.mode == CorpusMode::TweetStyle) result.corpus.common_author = opts.common_author;
  std::unordered_set<std::string> post_ids;
  std::unordered_set<std::string> comment_ids;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == jsonl.size()) break;
      continue;
    }
    const std::string ctx = source + ":" + std::to_string(line_no);
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw FormatError(ctx + ": malformed record: " + e.what());
      }
      Sample s = parse_sample(j, opts, ctx);
      if (s.comments.empty()) {
        ++result.report.dropped_zero_comment;
        continue;
      }
      try {
        validate_sample(s);
      } catch (const FormatError& e) {
        throw FormatError(ctx + ": " + e.what());
      }
      if (post_ids.contains(s.post_id)) throw FormatError(ctx + ": duplicate post id " + s.post_id);
      for (const auto& c : s.comments) {
        if (comment_ids.contains(c.id)) throw FormatError(ctx + ": duplicate comment id " + c.id);
      }
      post_ids.insert(s.post_id);
      for (const auto& c : s.comments) comment_ids.insert(c.id);
      result.corpus.samples.push_back(std::move(s));
      ++result.report.loaded;
    } catch (const FormatError& e) {
      if (opts.strict) throw;
      ++result.report.errors;
      result.report.messages.emplace_back(e.what());
    }
    if (end == jsonl.size()) break;
  }
  return result;
}

LoadResult load_corpus(const std::filesystem::path& path, const LoadOptions& opts) {
  if (!std::filesystem::exists(path)) throw Error("corpus file not found: " + path.string());
  return parse_corpus(read_file(path), opts, path.string());
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus.samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) { write_file(path, serialize_corpus(corpus)); }

SplitSizes split_sizes(std::size_t n, const SplitRatios& ratios) {
  if (n < 10) throw Error("temporal_split needs at least 10 samples, got " + std::to_string(n));
  const double total = ratios.train + ratios.val + ratios.test;
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0 || std::abs(total - 1.0) > 1e-9) {
    throw Error("split ratios must be positive and sum to 1");
  }
  auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.train));
  auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.val));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
  n_val = std::clamp<std::size_t>(n_val, 1, n - n_train - 1);
  return {n_train, n_val, n - n_train - n_val};
}

Split temporal_split(const Corpus& corpus, const SplitRatios& ratios) {
  const std::size_t n = corpus.samples.size();
  const auto sizes = split_sizes(n, ratios);
  for (const auto& s : corpus.samples) {
    if (!s.label) throw Error("temporal_split: sample " + s.post_id + " is unlabeled");
  }
  std::vector<const Sample*> order;
  order.reserve(n);
  for (const auto& s : corpus.samples) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const Sample* a, const Sample* b) {
    if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
    return a->post_id < b->post_id;
  });
  const std::size_t n_train = sizes.train, n_val = sizes.val;

  Split split;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? split.train : (i < n_train + n_val ? split.val : split.test);
    dst.push_back(*order[i]);
  }
  return split;
}

std::unordered_set<UserId> user_set(const std::vector<Sample>& samples) {
  std::unordered_set<UserId> out;
  for (const auto& s : samples) {
    out.insert(s.author);
    for (const auto& c : s.comments) out.insert(c.author);
  }
  return out;
}

double overlap_ratio(const Sample& sample, const std::unordered_set<UserId>& known_users) {
  const auto users = sample.users();
  std::size_t known = 0;
  for (const auto& u : users) known += known_users.contains(u) ? 1 : 0;
  return static_cast<double>(known) / static_cast<double>(users.size());
}

Bucket bucket_of(double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error("overlap ratio outside [0,1]: " + std::to_string(ratio));
  if (ratio == 0.0) return Bucket::Zero;
  if (ratio <= 0.5) return Bucket::Low;
  return Bucket::High;
}

const char* bucket_name(Bucket b) {
  switch (b) {
    case Bucket::Zero: return "0";
    case Bucket::Low: return "(0,0.5]";
    case Bucket::High: return "(0.5,1]";
  }
  return "?";
}

}  // namespace uen
