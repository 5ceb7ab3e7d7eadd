#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "uen/corpus.hpp"

namespace testing {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("uen_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Comment as (id, author, parent). An empty parent replies to the post.
struct C {
  std::string id, author, parent;
};

inline uen::Sample sample(const std::string& post, const std::string& author, std::vector<C> comments,
                          std::int64_t ts = 0, std::optional<uen::Label> label = uen::Label::True) {
  uen::Sample s;
  s.post_id = post;
  s.author = author;
  s.text_key = post;
  s.text = "post " + post;
  s.timestamp = ts;
  s.label = label;
  for (auto& c : comments) {
    uen::Comment x;
    x.id = c.id;
    x.author = c.author;
    x.parent = c.parent.empty() ? post : c.parent;
    x.text_key = c.id;
    x.text = "comment " + c.id;
    x.timestamp = ts + 1;
    s.comments.push_back(x);
  }
  return s;
}

inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  if (aa == 0 || bb == 0) return 0;
  return ab / std::sqrt(aa * bb);
}

}  // namespace testing
