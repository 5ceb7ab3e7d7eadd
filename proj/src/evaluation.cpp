#include "uen/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace uen {

namespace {

void check_aligned(std::span<const Label> preds, std::span<const Label> labels) {
  if (preds.size() != labels.size()) throw Error("metrics: predictions and labels differ in length");
  if (preds.empty()) throw Error("metrics: empty input");
}

Confusion confusion_of(std::span<const Label> preds, std::span<const Label> labels) {
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ++c.counts[static_cast<int>(labels[i])][static_cast<int>(preds[i])];
  }
  return c;
}

double macro_f1_of(const Confusion& c) {
  double sum = 0;
  for (int cls = 0; cls < 2; ++cls) {
    const double tp = static_cast<double>(c.counts[cls][cls]);
    const double fp = static_cast<double>(c.counts[1 - cls][cls]);
    const double fn = static_cast<double>(c.counts[cls][1 - cls]);
    const double denom = 2 * tp + fp + fn;
    if (denom == 0) {
      log(LogLevel::Debug, std::string("macro_f1: class ") + std::to_string(cls) +
                               " absent from predictions and labels, counted as F1 = 0");
      continue;
    }
    sum += 2 * tp / denom;
  }
  return sum / 2.0;
}

}  // namespace

double accuracy(std::span<const Label> preds, std::span<const Label> labels) {
  check_aligned(preds, labels);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) ok += preds[i] == labels[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(preds.size());
}

double macro_f1(std::span<const Label> preds, std::span<const Label> labels) {
  check_aligned(preds, labels);
  return macro_f1_of(confusion_of(preds, labels));
}

GroupMetrics group_metrics(std::span<const Label> preds, std::span<const Label> labels) {
  if (preds.size() != labels.size()) throw Error("metrics: predictions and labels differ in length");
  GroupMetrics g;
  g.n = preds.size();
  for (auto l : labels) (l == Label::True ? g.n_true : g.n_fake)++;
  if (g.n == 0) return g;
  g.confusion = confusion_of(preds, labels);
  g.accuracy = static_cast<double>(g.confusion.counts[0][0] + g.confusion.counts[1][1]) / static_cast<double>(g.n);
  g.macro_f1 = macro_f1_of(g.confusion);
  return g;
}

EvalReport bucketed_report(std::span<const Label> preds, std::span<const Label> labels,
                           std::span<const double> ratios) {
  if (preds.size() != labels.size() || preds.size() != ratios.size()) {
    throw Error("bucketed_report: predictions, labels and ratios differ in length");
  }
  EvalReport r;
  r.overall = group_metrics(preds, labels);
  std::array<std::vector<Label>, 3> bp, bl;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto b = static_cast<std::size_t>(bucket_of(ratios[i]));
    bp[b].push_back(preds[i]);
    bl[b].push_back(labels[i]);
  }
  for (std::size_t b = 0; b < 3; ++b) r.buckets[b] = group_metrics(bp[b], bl[b]);
  return r;
}

namespace {

nlohmann::ordered_json group_json(const GroupMetrics& g) {
  nlohmann::ordered_json j;
  j["n"] = g.n;
  j["n_true"] = g.n_true;
  j["n_fake"] = g.n_fake;
  j["accuracy"] = g.accuracy ? nlohmann::ordered_json(*g.accuracy) : nlohmann::ordered_json(nullptr);
  j["macro_f1"] = g.macro_f1 ? nlohmann::ordered_json(*g.macro_f1) : nlohmann::ordered_json(nullptr);
  j["confusion"] = {{"fake_as_fake", g.confusion.counts[0][0]},
                    {"fake_as_true", g.confusion.counts[0][1]},
                    {"true_as_fake", g.confusion.counts[1][0]},
                    {"true_as_true", g.confusion.counts[1][1]}};
  return j;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << *v;
  return s.str();
}

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["metadata"] = {{"arch", arch}, {"variant", variant}, {"seed", seed}, {"user_dim", user_dim}, {"text_dim", text_dim},
                   {"feature_dim", user_dim + text_dim}};
  j["overall"] = group_json(overall);
  nlohmann::ordered_json b;
  for (auto bk : {Bucket::High, Bucket::Low, Bucket::Zero}) b[bucket_name(bk)] = group_json(bucket(bk));
  j["buckets"] = b;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "bucket,n,n_true,n_fake,accuracy,macro_f1\n";
  auto row = [&](const std::string& name, const GroupMetrics& g) {
    out << name << ',' << g.n << ',' << g.n_true << ',' << g.n_fake << ',' << fmt_opt(g.accuracy) << ','
        << fmt_opt(g.macro_f1) << '\n';
  };
  row("overall", overall);
  for (auto bk : {Bucket::High, Bucket::Low, Bucket::Zero}) row(std::string("\"") + bucket_name(bk) + "\"", bucket(bk));
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

struct Ranked {
  std::vector<long long> doubled_ranks;  // 2 * midrank, aligned with pooled order
  std::vector<char> from_x;
  double tie_term = 0;  // Σ (t³ - t)
};

Ranked rank_pooled(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size() + y.size();
  std::vector<std::pair<double, char>> pooled;
  pooled.reserve(n);
  for (double v : x) pooled.emplace_back(v, 1);
  for (double v : y) pooled.emplace_back(v, 0);
  std::stable_sort(pooled.begin(), pooled.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  Ranked r;
  r.doubled_ranks.resize(n);
  r.from_x.resize(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    // positions i..j-1 share the midrank ((i+1) + j) / 2
    const long long doubled = static_cast<long long>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      r.doubled_ranks[k] = doubled;
      r.from_x[k] = pooled[k].second;
    }
    const double t = static_cast<double>(j - i);
    r.tie_term += t * t * t - t;
    i = j;
  }
  return r;
}

double exact_two_sided(const Ranked& r, std::size_t nx, std::size_t ny, long long doubled_u) {
  const std::size_t n = nx + ny;
  long long max_sum = 0;
  for (auto v : r.doubled_ranks) max_sum += v;
  // ways[k][s]: subsets of size k with doubled rank sum s.
  std::vector<std::vector<double>> ways(nx + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::size_t>(r.doubled_ranks[i]);
    for (std::size_t k = std::min(nx, i + 1); k >= 1; --k) {
      auto& dst = ways[k];
      const auto& src = ways[k - 1];
      for (std::size_t s = static_cast<std::size_t>(max_sum); s >= v; --s) {
        if (src[s - v] != 0) dst[s] += src[s - v];
        if (s == v) break;
      }
    }
  }
  const long long nxny = static_cast<long long>(nx * ny);
  const long long offset = static_cast<long long>(nx * (nx + 1));
  const long long observed = std::llabs(doubled_u - nxny);
  double total = 0, extreme = 0;
  for (std::size_t s = 0; s < ways[nx].size(); ++s) {
    const double w = ways[nx][s];
    if (w == 0) continue;
    total += w;
    const long long du = static_cast<long long>(s) - offset;
    if (std::llabs(du - nxny) >= observed) extreme += w;
  }
  return std::min(1.0, extreme / total);
}

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> x, std::span<const double> y, MwuMethod method) {
  if (x.empty() || y.empty()) throw Error("mann_whitney_u: both samples must be non-empty");
  for (auto* s : {&x, &y}) {
    for (double v : *s) {
      if (!std::isfinite(v)) throw Error("mann_whitney_u: non-finite observation");
    }
  }
  const std::size_t nx = x.size(), ny = y.size(), n = nx + ny;
  const auto ranked = rank_pooled(x, y);
  long long doubled_rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked.from_x[i]) doubled_rank_sum += ranked.doubled_ranks[i];
  }
  const long long doubled_u = doubled_rank_sum - static_cast<long long>(nx * (nx + 1));
  MannWhitneyResult res;
  res.u = static_cast<double>(doubled_u) / 2.0;

  const double nn = static_cast<double>(n);
  const double variance = static_cast<double>(nx) * static_cast<double>(ny) / 12.0 *
                          ((nn + 1.0) - ranked.tie_term / (nn * (nn - 1.0)));
  if (!(variance > 0)) {
    res.p = 1.0;
    return res;
  }
  const bool exact = method == MwuMethod::Exact || (method == MwuMethod::Auto && nx * ny <= 400);
  if (exact) {
    res.exact = true;
    res.p = exact_two_sided(ranked, nx, ny, doubled_u);
    return res;
  }
  const double mean = static_cast<double>(nx) * static_cast<double>(ny) / 2.0;
  const double z = std::max(0.0, std::abs(res.u - mean) - 0.5) / std::sqrt(variance);
  res.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

// ---------------------------------------------------------------------------

std::vector<TrialParams> trial_schedule(const SearchSpace& space) {
  if (space.budget < 1) throw Error("tune: budget must be >= 1");
  if (!(space.lambda_lo >= 0 && space.lambda_hi <= 1 && space.lambda_lo <= space.lambda_hi)) {
    throw Error("tune: lambda range must lie within [0,1]");
  }
  if (space.k1_lo < 1 || space.k1_lo > space.k1_hi || space.k2_lo < 1 || space.k2_lo > space.k2_hi) {
    throw Error("tune: bad k1/k2 ranges");
  }
  Rng rng(mix_seed(space.seed, 0x7E11E));
  auto log_int = [&](std::size_t lo, std::size_t hi) {
    const double a = std::log(static_cast<double>(lo));
    const double b = std::log(static_cast<double>(hi) + 1.0);
    const auto k = static_cast<std::size_t>(std::floor(std::exp(rng.uniform(a, b))));
    return std::clamp(k, lo, hi);
  };
  std::vector<TrialParams> out;
  out.reserve(space.budget);
  for (std::size_t i = 0; i < space.budget; ++i) {
    TrialParams t;
    t.lambda = rng.uniform(space.lambda_lo, space.lambda_hi);
    t.k1 = log_int(space.k1_lo, space.k1_hi);
    t.k2 = log_int(space.k2_lo, space.k2_hi);
    out.push_back(t);
  }
  return out;
}

TuneResult tune(const std::function<double(const TrialParams&)>& objective, const SearchSpace& space) {
  const auto schedule = trial_schedule(space);
  TuneResult res;
  bool found = false;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    Trial t;
    t.index = i;
    t.params = schedule[i];
    try {
      const double loss = objective(t.params);
      if (std::isfinite(loss)) {
        t.val_loss = loss;
      } else {
        t.error = "non-finite objective";
      }
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    if (t.val_loss && (!found || *t.val_loss < res.best_loss)) {
      found = true;
      res.best = t.params;
      res.best_loss = *t.val_loss;
      res.best_index = i;
    }
    if (!t.error.empty()) log_warn("tune: trial " + std::to_string(i) + " failed: " + t.error);
    res.trials.push_back(std::move(t));
  }
  if (!found) throw Error("tune: every trial failed");
  return res;
}

std::string TuneResult::log_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "trial,lambda,k1,k2,val_loss,status\n";
  for (const auto& t : trials) {
    out << t.index << ',' << t.params.lambda << ',' << t.params.k1 << ',' << t.params.k2 << ',';
    if (t.val_loss) out << *t.val_loss;
    out << ',' << (t.val_loss ? "ok" : "failed") << '\n';
  }
  return out.str();
}

}  // namespace uen
