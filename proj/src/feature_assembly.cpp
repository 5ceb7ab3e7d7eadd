#include "uen/feature_assembly.hpp"

#include <algorithm>

namespace uen {

std::vector<float> LookupResolver::resolve(const UserId& user, const Occurrence&) const {
  auto row = users_->at(user);
  return {row.begin(), row.end()};
}

std::vector<float> MeanFallbackResolver::resolve(const UserId& user, const Occurrence&) const {
  if (auto idx = users_->index_of(user)) {
    auto row = users_->row(*idx);
    return {row.begin(), row.end()};
  }
  return mean_;
}

SampleGraph assemble(const Sample& sample, const TextProvider& texts, const UserResolver* resolver) {
  const std::size_t d_text = texts.dim();
  const std::size_t d_user = resolver ? resolver->dim() : 0;
  SampleGraph g;
  g.post_id = sample.post_id;
  g.label = sample.label;
  g.features = Matrix<float>(sample.comments.size() + 1, d_text + d_user);

  auto fill_row = [&](std::size_t r, const TextRef& ref, const UserId& user, const Occurrence& where) {
    auto row = g.features.row(r);
    const auto t = texts.embed(ref);
    if (t.size() != d_text) throw DimensionError("text vector has wrong dimension");
    std::copy(t.begin(), t.end(), row.begin());
    if (resolver) {
      const auto u = resolver->resolve(user, where);
      if (u.size() != d_user) throw DimensionError("user vector has wrong dimension");
      std::copy(u.begin(), u.end(), row.begin() + static_cast<std::ptrdiff_t>(d_text));
    }
  };

  fill_row(0, text_ref(sample), sample.author, {&sample, std::nullopt});
  for (std::size_t i = 0; i < sample.comments.size(); ++i) {
    fill_row(i + 1, text_ref(sample.comments[i]), sample.comments[i].author, {&sample, i});
  }
  const auto parents = sample.parent_indices();
  g.edges.reserve(parents.size());
  for (std::size_t i = 0; i < parents.size(); ++i) {
    g.edges.emplace_back(static_cast<std::uint32_t>(parents[i] + 1), static_cast<std::uint32_t>(i + 1));
  }
  return g;
}

std::vector<std::vector<float>> chain_prefix_all(const Sample& sample, const TextProvider& texts) {
  const auto parents = sample.parent_indices();
  const std::size_t n = sample.comments.size();
  std::vector<std::vector<float>> out(n);
  std::vector<char> done(n, 0);
  // Resolve each chain iteratively, parent before child.
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> stack;
    for (std::size_t cur = i; !done[cur];) {
      stack.push_back(cur);
      if (parents[cur] < 0) break;
      cur = static_cast<std::size_t>(parents[cur]);
    }
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      if (done[c]) continue;
      auto v = texts.embed(text_ref(sample.comments[c]));
      if (parents[c] >= 0) {
        const auto& base = out[static_cast<std::size_t>(parents[c])];
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += base[k];
      }
      out[c] = std::move(v);
      done[c] = 1;
    }
  }
  return out;
}

std::vector<float> chain_prefix_representation(const Sample& sample, const CommentId& comment_id,
                                               const TextProvider& texts) {
  const auto idx = sample.find_comment(comment_id);
  if (!idx) throw Error("comment " + comment_id + " not found in post " + sample.post_id);
  const auto parents = sample.parent_indices();
  std::vector<float> sum(texts.dim(), 0.0f);
  // Sum from the first-level comment downward so float rounding matches chain_prefix_all.
  std::vector<std::size_t> chain;
  for (int cur = static_cast<int>(*idx); cur >= 0; cur = parents[static_cast<std::size_t>(cur)]) {
    chain.push_back(static_cast<std::size_t>(cur));
  }
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const auto v = texts.embed(text_ref(sample.comments[*it]));
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = v[k] + sum[k];
  }
  return sum;
}

}  // namespace uen
