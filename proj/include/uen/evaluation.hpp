#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uen/corpus.hpp"

namespace uen {

double accuracy(std::span<const Label> preds, std::span<const Label> labels);

/// Unweighted mean of per-class F1 over {fake, true}. A class absent from
/// both predictions and labels contributes 0.
double macro_f1(std::span<const Label> preds, std::span<const Label> labels);

/// counts[label][pred]
struct Confusion {
  std::array<std::array<std::size_t, 2>, 2> counts{};
  std::size_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
};

struct GroupMetrics {
  std::size_t n = 0;
  std::size_t n_true = 0;
  std::size_t n_fake = 0;
  std::optional<double> accuracy;  // empty group: none
  std::optional<double> macro_f1;
  Confusion confusion;
};

GroupMetrics group_metrics(std::span<const Label> preds, std::span<const Label> labels);

struct EvalReport {
  GroupMetrics overall;
  std::array<GroupMetrics, 3> buckets;  // indexed by Bucket (Zero, Low, High)
  std::string arch;
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t user_dim = 0;
  std::size_t text_dim = 0;

  const GroupMetrics& bucket(Bucket b) const { return buckets[static_cast<std::size_t>(b)]; }
  std::string to_json() const;
  /// bucket,n,n_true,n_fake,accuracy,macro_f1
  std::string to_csv() const;
};

EvalReport bucketed_report(std::span<const Label> preds, std::span<const Label> labels,
                           std::span<const double> ratios);

struct MannWhitneyResult {
  double u = 0;  // statistic of the first sample
  double p = 1;  // two-sided
  bool exact = false;
};

enum class MwuMethod { Auto, Exact, Normal };

/// Rank-sum test with midranks for ties. Auto uses the exact permutation
/// law when |x|·|y| <= 400, the tie-corrected normal approximation with
/// continuity correction otherwise.
MannWhitneyResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                                 MwuMethod method = MwuMethod::Auto);

// ---------------------------------------------------------------------------
// Hyperparameter search
// ---------------------------------------------------------------------------

struct TrialParams {
  double lambda = 0.5;
  std::size_t k1 = 1;
  std::size_t k2 = 1;
};

struct SearchSpace {
  double lambda_lo = 0.0, lambda_hi = 1.0;
  std::size_t k1_lo = 1, k1_hi = 100;
  std::size_t k2_lo = 1, k2_hi = 200;
  std::size_t budget = 20;
  std::uint64_t seed = 1;
};

struct Trial {
  std::size_t index = 0;
  TrialParams params;
  std::optional<double> val_loss;
  std::string error;
};

struct TuneResult {
  TrialParams best;
  double best_loss = 0;
  std::size_t best_index = 0;
  std::vector<Trial> trials;

  /// trial,lambda,k1,k2,val_loss,status
  std::string log_csv() const;
};

/// Trial parameters for the whole budget, drawn before any evaluation:
/// λ uniform, k1/k2 log-uniform integers.
std::vector<TrialParams> trial_schedule(const SearchSpace& space);

/// Seeded random search minimizing the objective (a validation loss).
/// Throwing or non-finite trials are recorded as failed.
TuneResult tune(const std::function<double(const TrialParams&)>& objective, const SearchSpace& space);

}  // namespace uen
