#pragma once

#include <algorithm>
#include <cmath>

#include "uen/gnn_model.hpp"

namespace testing {

/// Random tree-shaped sample graph with `n` nodes and `d` features.
inline uen::SampleGraph random_graph(uen::Rng& rng, std::size_t n, std::size_t d, uen::Label label) {
  uen::SampleGraph g;
  g.post_id = "g";
  g.label = label;
  g.features = uen::Matrix<float>(n, d);
  for (auto& v : g.features.data()) v = static_cast<float>(rng.uniform(-1, 1));
  for (std::size_t i = 1; i < n; ++i) {
    g.edges.emplace_back(static_cast<std::uint32_t>(rng.below(i)), static_cast<std::uint32_t>(i));
  }
  return g;
}

/// Adds uniform noise to every parameter. Zero-initialized biases put
/// pre-activations of dead rows exactly on the ReLU kink, where central
/// differences and the analytic gradient legitimately disagree.
template <typename T>
void jitter(uen::ModelParams<T>& params, uen::Rng& rng, double scale = 0.1) {
  for (auto& t : params.tensors)
    for (auto& v : t.data()) v += static_cast<T>(rng.uniform(-scale, scale));
}

struct GradCheckTally {
  std::size_t checked = 0;
  std::size_t passed = 0;
  double worst = 0;
};

/// Central differences on every parameter of `params` against the
/// analytic gradient of the single-sample loss, in double precision.
inline void grad_check(const uen::ModelParams<double>& params, const uen::SampleGraph& g, double tol,
                       GradCheckTally& tally, double h = 1e-4) {
  auto analytic = uen::loss_and_grads(params, {g}).grads;
  auto p = params;
  for (std::size_t t = 0; t < p.tensors.size(); ++t) {
    auto& data = p.tensors[t].data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = uen::loss_and_grads(p, {g}).loss;
      data[i] = keep - h;
      const double down = uen::loss_and_grads(p, {g}).loss;
      data[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double an = analytic.tensors[t].data()[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      const double err = std::abs(fd - an) / denom;
      // Both sides numerically zero counts as agreement.
      const bool ok = err <= tol || std::abs(fd - an) < 1e-9;
      ++tally.checked;
      if (ok) ++tally.passed;
      else tally.worst = std::max(tally.worst, err);
    }
  }
}

}  // namespace testing
