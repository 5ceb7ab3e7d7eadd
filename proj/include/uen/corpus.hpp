#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "uen/util.hpp"

namespace uen {

using UserId = std::string;
using PostId = std::string;
using CommentId = std::string;

enum class Label : int { Fake = 0, True = 1 };

struct Comment {
  CommentId id;
  UserId author;
  std::string parent;  // a PostId or a CommentId in the same sample
  std::string text_key;
  std::int64_t timestamp = 0;
  /// Raw text, when the corpus carries it. Used by the hashing embedder.
  std::optional<std::string> text;

  bool operator==(const Comment&) const = default;
};

struct Sample {
  PostId post_id;
  /// Resolved post author. When the record had no author this holds the
  /// corpus common author and `author_inherited` is set.
  UserId author;
  bool author_inherited = false;
  std::string text_key;
  std::optional<std::string> text;
  std::int64_t timestamp = 0;
  std::vector<Comment> comments;
  std::optional<Label> label;

  bool operator==(const Sample&) const = default;

  /// Uᵢ: post author plus every commenter, deduplicated, first-seen order.
  std::vector<UserId> users() const;

  /// Index of comment `id`, or nullopt.
  std::optional<std::size_t> find_comment(const CommentId& id) const;

  /// Parent position for each comment: -1 for the post, otherwise the index
  /// of the parent comment. Requires a validated sample.
  std::vector<int> parent_indices() const;

  /// Author of whatever `comments[i]` replies to.
  const UserId& parent_author(std::size_t i) const;
};

struct Corpus {
  std::vector<Sample> samples;
  std::optional<UserId> common_author;

  bool operator==(const Corpus&) const = default;
};

enum class CorpusMode { RedditStyle, TweetStyle };

struct LoadOptions {
  CorpusMode mode = CorpusMode::RedditStyle;
  /// Common author assigned to author-less posts in tweet-style mode.
  UserId common_author = "common_author";
  /// Strict loads throw on the first bad record; lenient loads skip and count.
  bool strict = true;
};

struct LoadReport {
  std::size_t loaded = 0;
  std::size_t dropped_zero_comment = 0;
  std::size_t errors = 0;
  std::vector<std::string> messages;

  std::string to_json() const;
};

struct LoadResult {
  Corpus corpus;
  LoadReport report;
};

LoadResult parse_corpus(std::string_view jsonl, const LoadOptions& opts = {}, const std::string& source = "<memory>");
LoadResult load_corpus(const std::filesystem::path& path, const LoadOptions& opts = {});

/// JSONL serialization; parse_corpus(serialize_corpus(c)) == c.
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Structural validation of a single sample. Throws FormatError.
void validate_sample(const Sample& s);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

struct SplitRatios {
  double train = 0.70;
  double val = 0.10;
  double test = 0.20;
};

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};

/// Contiguous range sizes used by temporal_split for `n` samples.
SplitSizes split_sizes(std::size_t n, const SplitRatios& ratios = {});

/// Sort by post timestamp (ties by post_id) and cut into contiguous
/// train/val/test ranges.
Split temporal_split(const Corpus& corpus, const SplitRatios& ratios = {});

/// Users appearing anywhere in the given samples.
std::unordered_set<UserId> user_set(const std::vector<Sample>& samples);

double overlap_ratio(const Sample& sample, const std::unordered_set<UserId>& known_users);

enum class Bucket { Zero = 0, Low = 1, High = 2 };

Bucket bucket_of(double ratio);
const char* bucket_name(Bucket b);

}  // namespace uen
