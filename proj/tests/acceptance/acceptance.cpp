// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "../unit/gradcheck.hpp"
#include "uen/cold_mapper.hpp"
#include "uen/evaluation.hpp"
#include "uen/pipeline.hpp"
#include "uen/synth_bench.hpp"
#include "uen/user_embed.hpp"

using namespace uen;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  if (aa == 0 || bb == 0) return 0;
  return ab / std::sqrt(aa * bb);
}

struct Ranked {
  double score;
  std::string key;
  UserId owner;
};

std::vector<Ranked> scan(const std::vector<IndexEntry>& entries, std::span<const float> q, std::size_t k) {
  std::vector<Ranked> all;
  all.reserve(entries.size());
  for (const auto& e : entries) all.push_back({cosine(e.vector, q), e.key, e.owner});
  std::sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) {
    return a.score != b.score ? a.score > b.score : a.key < b.key;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// ---------------------------------------------------------------------------

void similarity_search() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::size_t mismatches = 0;
  double worst = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = 1 + rng.below(2000), d = 256, k = 1 + rng.below(50);
    std::vector<IndexEntry> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<float> v(d);
      for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
      entries.push_back({"k" + std::to_string(i), std::move(v), "u" + std::to_string(i % 13)});
    }
    const auto index = build_index(entries);
    std::vector<float> q(d);
    for (auto& x : q) x = static_cast<float>(rng.uniform(-1, 1));
    const auto got = index.topk(q, k);
    const auto want = scan(entries, q, k);
    if (got.size() != want.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      worst = std::max(worst, std::abs(got[i].score - want[i].score));
      if (got[i].key != want[i].key || got[i].owner != want[i].owner) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  verdict(1, mismatches == 0 && worst <= 1e-6 && secs < 10,
          "50 top-k instances, " + std::to_string(mismatches) + " rank mismatches, max score diff " +
              fmt("%.2e", worst) + ", " + fmt("%.1f", secs) + " s");
}

// ---------------------------------------------------------------------------

// Sum of comment text vectors from the first-level comment down to `i`, in
// float32 and in that order, which is the representation's defined form.
std::vector<float> chain_sum(const Sample& s, std::size_t i, const TextProvider& texts) {
  std::vector<const Comment*> chain;
  for (std::string cur = s.comments[i].id; cur != s.post_id;) {
    const auto it = std::find_if(s.comments.begin(), s.comments.end(), [&](const Comment& c) { return c.id == cur; });
    chain.push_back(&*it);
    cur = it->parent;
  }
  std::vector<float> acc(texts.dim(), 0.0f);
  for (auto c = chain.rbegin(); c != chain.rend(); ++c) {
    const auto v = texts.embed(text_ref(**c));
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] = v[k] + acc[k];
  }
  return acc;
}

// Cosine against the stored form of a row: normalized, then rounded to
// float32. Hashed texts produce many exact mathematical ties, and only the
// stored form orders them reproducibly.
double stored_cosine(std::span<const float> row, std::span<const float> q) {
  double rn = 0, qn = 0;
  for (float v : row) rn += double(v) * v;
  for (float v : q) qn += double(v) * v;
  rn = std::sqrt(rn);
  qn = std::sqrt(qn);
  if (rn == 0 || qn == 0) return 0;
  double s = 0;
  for (std::size_t k = 0; k < row.size(); ++k) s += (q[k] / qn) * static_cast<float>(row[k] / rn);
  return s;
}

std::vector<Ranked> stored_scan(const std::vector<IndexEntry>& entries, std::span<const float> q, std::size_t k) {
  std::vector<Ranked> all;
  for (const auto& e : entries) all.push_back({stored_cosine(e.vector, q), e.key, e.owner});
  std::sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) {
    return a.score != b.score ? a.score > b.score : a.key < b.key;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

std::vector<double> oracle_commenter(const Sample& s, std::size_t ci, const std::vector<Sample>& train,
                                     const EmbeddingTable& users, const TextProvider& texts, std::size_t k1,
                                     std::size_t k2) {
  std::vector<IndexEntry> posts;
  for (const auto& t : train) posts.push_back({t.post_id, texts.embed(text_ref(t)), t.author});
  const auto top = stored_scan(posts, texts.embed(text_ref(s)), k1);
  std::vector<IndexEntry> pool;
  for (const auto& hit : top) {
    const auto& tp = *std::find_if(train.begin(), train.end(), [&](const Sample& x) { return x.post_id == hit.key; });
    for (std::size_t j = 0; j < tp.comments.size(); ++j)
      pool.push_back({tp.comments[j].id, chain_sum(tp, j, texts), tp.comments[j].author});
  }
  const auto reactions = stored_scan(pool, chain_sum(s, ci, texts), k2);
  std::vector<double> mean(users.dim(), 0.0);
  for (const auto& r : reactions) {
    const auto row = users.at(r.owner);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += row[k];
  }
  for (auto& v : mean) v /= static_cast<double>(reactions.size());
  return mean;
}

void cold_mapper_oracle() {
  const auto t0 = Clock::now();
  const auto cfg = PipelineConfig::defaults(Arch::GCN, 1);
  const auto prep = prepare(generate(SynthConfig{}), cfg);
  ColdMapper mapper(prep.split.train, prep.users, *prep.texts, cfg.cold);

  std::vector<std::pair<const Sample*, std::size_t>> candidates;
  for (const auto& s : prep.split.test) {
    std::vector<std::size_t> cold;
    for (std::size_t i = 0; i < s.comments.size(); ++i)
      if (!prep.users.contains(s.comments[i].author)) cold.push_back(i);
    if (!cold.empty()) candidates.push_back({&s, cold.front()});
  }
  Rng rng(202);
  rng.shuffle(candidates);
  const std::size_t n = std::min<std::size_t>(20, candidates.size());
  double worst = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [s, ci] = candidates[i];
    const auto got = map_cold_commenter(*s, s->comments[ci].id, mapper);
    const auto want = oracle_commenter(*s, ci, prep.split.train, prep.users, *prep.texts, cfg.cold.k1, cfg.cold.k2);
    for (std::size_t k = 0; k < got.size(); ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
  }
  const double secs = seconds_since(t0);
  verdict(2, n == 20 && worst <= 1e-5 && secs < 30,
          std::to_string(n) + " cold commenters (k1=" + std::to_string(cfg.cold.k1) + ", k2=" +
              std::to_string(cfg.cold.k2) + "), max component diff " + fmt("%.2e", worst) + ", " +
              fmt("%.1f", secs) + " s");
}

// ---------------------------------------------------------------------------

void gradients() {
  const auto t0 = Clock::now();
  Rng rng(303);
  bool ok = true;
  std::string detail;
  for (Arch arch : {Arch::GCN, Arch::SAGE, Arch::GAT}) {
    testing::GradCheckTally tally;
    for (int rep = 0; rep < 10; ++rep) {
      GnnConfig cfg;
      cfg.arch = arch;
      cfg.hidden = 16;
      cfg.heads = arch == Arch::GAT ? 2 : 1;
      cfg.lambda = rng.uniform();
      cfg.seed = 1000 + rep;
      const std::size_t nodes = 5 + rng.below(6);
      const auto g = testing::random_graph(rng, nodes, 12, rep % 2 ? Label::True : Label::Fake);
      auto p = init_params(cfg, 12).cast<double>();
      testing::jitter(p, rng);
      testing::grad_check(p, g, 1e-3, tally);
    }
    const double share = static_cast<double>(tally.passed) / static_cast<double>(tally.checked);
    ok = ok && share >= 0.99;
    detail += std::string(arch_name(arch)) + " " + std::to_string(tally.passed) + "/" +
              std::to_string(tally.checked) + "; ";
  }
  const double secs = seconds_since(t0);
  verdict(3, ok && secs < 120, detail + fmt("%.1f", secs) + " s");
}

// ---------------------------------------------------------------------------

void readout_boundaries() {
  Rng rng(404);
  double drift_embed = 0, drift_far = 0, mean_gap = 0;
  for (Arch arch : {Arch::GCN, Arch::SAGE, Arch::GAT}) {
    GnnConfig cfg;
    cfg.arch = arch;
    cfg.lambda = 1.0;
    const auto p = init_params(cfg, 16);
    const auto g = testing::random_graph(rng, 8, 16, Label::Fake);
    const auto base = forward(p, g);
    auto h = base.node_embeddings;
    for (std::size_t i = 1; i < h.rows(); ++i)
      for (std::size_t k = 0; k < h.cols(); ++k) h(i, k) += static_cast<float>(rng.uniform(-5, 5));
    const auto pooled = readout(h, 1.0);
    const auto logits = classify(p, std::span<const float>(pooled));
    for (int c = 0; c < 2; ++c) drift_embed = std::max(drift_embed, double(std::abs(logits[c] - base.logits[c])));

    // Comment feature row outside the post's receptive field.
    SampleGraph chain;
    chain.features = Matrix<float>(cfg.layers + 2, 16);
    for (auto& v : chain.features.data()) v = static_cast<float>(rng.uniform(-1, 1));
    for (std::uint32_t i = 0; i + 1 < chain.features.rows(); ++i) chain.edges.push_back({i, i + 1});
    const auto before = forward(p, chain).logits;
    for (std::size_t k = 0; k < 16; ++k) chain.features(chain.features.rows() - 1, k) += 3.0f;
    const auto after = forward(p, chain).logits;
    for (int c = 0; c < 2; ++c) drift_far = std::max(drift_far, double(std::abs(after[c] - before[c])));

    GnnConfig zero = cfg;
    zero.lambda = 0.0;
    const auto p0 = init_params(zero, 16);
    SampleGraph twin;
    twin.features = Matrix<float>(3, 16);
    for (std::size_t k = 0; k < 16; ++k) {
      twin.features(0, k) = static_cast<float>(rng.uniform(-1, 1));
      twin.features(1, k) = twin.features(2, k) = static_cast<float>(rng.uniform(-1, 1));
    }
    twin.edges = {{0, 1}, {0, 2}};
    const auto out = forward(p0, twin);
    for (std::size_t k = 0; k < out.pooled.size(); ++k) {
      mean_gap = std::max(mean_gap, double(std::abs(out.pooled[k] - out.node_embeddings(1, k))));
      mean_gap = std::max(mean_gap, double(std::abs(out.node_embeddings(2, k) - out.node_embeddings(1, k))));
    }
  }
  verdict(4, drift_embed <= 1e-6 && drift_far <= 1e-6 && mean_gap == 0,
          "lambda=1 drift " + fmt("%.2e", drift_embed) + " (comment embeddings), " + fmt("%.2e", drift_far) +
              " (comment features beyond the receptive field); lambda=0 pooled minus e " + fmt("%.2e", mean_gap));
}

// ---------------------------------------------------------------------------

InteractionGraph graph_of(std::size_t n, const std::vector<std::tuple<int, int, double>>& edges) {
  InteractionGraph g;
  for (std::size_t i = 0; i < n; ++i) g.add_node("n" + std::to_string(i));
  for (auto [a, b, w] : edges) g.add_event(a, b, w);
  g.finalize();
  return g;
}

void walk_law() {
  const auto t0 = Clock::now();
  const auto g = graph_of(4, {{0, 1, 3}, {1, 2, 1}, {1, 3, 2}, {0, 3, 1}, {2, 3, 4}});
  Node2VecConfig cfg;
  cfg.p = 2.0;
  cfg.q = 0.5;
  cfg.walk_length = 3;
  cfg.walks_per_node = 300000;
  const auto walks = sample_walks(g, cfg);

  // First steps out of node 0 and second-order steps out of 1 after 0.
  std::map<NodeIndex, double> first, second;
  std::size_t n_first = 0, n_second = 0;
  for (const auto& w : walks) {
    if (w.size() < 3 || w[0] != 0) continue;
    if (n_first < 100000) {
      first[w[1]] += 1;
      ++n_first;
    }
    if (w[1] == 1 && n_second < 100000) {
      second[w[2]] += 1;
      ++n_second;
    }
  }
  double worst = 0;
  for (const auto& t : next_step_distribution(g, std::nullopt, 0, cfg.p, cfg.q))
    worst = std::max(worst, std::abs(first[t.node] / n_first - t.probability));
  for (const auto& t : next_step_distribution(g, 0, 1, cfg.p, cfg.q))
    worst = std::max(worst, std::abs(second[t.node] / n_second - t.probability));

  std::vector<std::tuple<int, int, double>> edges;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 10; ++i)
      for (int j = i + 1; j < 10; ++j) edges.emplace_back(c * 10 + i, c * 10 + j, 1.0);
  edges.emplace_back(9, 10, 1.0);
  const auto cliques = graph_of(20, edges);
  int separated = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    Node2VecConfig nc;
    nc.dim = 32;
    nc.seed = seed;
    const auto t = embed_users(cliques, nc);
    double intra = 0, inter = 0;
    int ni = 0, nx = 0;
    for (std::size_t a = 0; a < 20; ++a)
      for (std::size_t b = a + 1; b < 20; ++b) {
        const double c = cosine(t.row(a), t.row(b));
        if ((a < 10) == (b < 10)) {
          intra += c;
          ++ni;
        } else {
          inter += c;
          ++nx;
        }
      }
    separated += intra / ni > inter / nx;
  }
  const double secs = seconds_since(t0);
  verdict(5, n_first == 100000 && n_second == 100000 && worst <= 0.01 && separated == 3 && secs < 60,
          "max transition frequency error " + fmt("%.4f", worst) + " over 1e5 steps per state, cliques separated " +
              std::to_string(separated) + "/3, " + fmt("%.1f", secs) + " s");
}

// ---------------------------------------------------------------------------

struct SeedRun {
  double acc[3];
  double zero_f1[3];
};

std::vector<SeedRun> run_seeds(const SynthConfig& base) {
  std::vector<SeedRun> out;
  for (std::uint64_t seed : {1, 2, 3}) {
    SynthConfig sc = base;
    sc.seed = seed;
    const auto cfg = PipelineConfig::defaults(Arch::GCN, seed);
    const auto prep = prepare(generate(sc), cfg);
    SeedRun r{};
    int i = 0;
    for (Variant v : {Variant::NoUser, Variant::NoMapper, Variant::Uen}) {
      const auto run = run_variant(prep, cfg, v);
      r.acc[i] = run.report.overall.accuracy.value();
      r.zero_f1[i] = run.report.bucket(Bucket::Zero).macro_f1.value_or(0.0);
      ++i;
    }
    std::printf("  seed %llu: accuracy no-user %.4f, no-mapper %.4f, uen %.4f; zero-bucket macro-F1 no-mapper %.4f, uen %.4f\n",
                static_cast<unsigned long long>(seed), r.acc[0], r.acc[1], r.acc[2], r.zero_f1[1], r.zero_f1[2]);
    std::fflush(stdout);
    out.push_back(r);
  }
  return out;
}

void ablation() {
  const auto t0 = Clock::now();
  SynthConfig sc;  // 2000 samples, user 0.8, text 0.3, cold 0.3
  const auto runs = run_seeds(sc);
  double acc[3] = {0, 0, 0}, f1[3] = {0, 0, 0};
  for (const auto& r : runs)
    for (int i = 0; i < 3; ++i) {
      acc[i] += r.acc[i] / runs.size();
      f1[i] += r.zero_f1[i] / runs.size();
    }
  const double secs = seconds_since(t0);
  const bool order = acc[0] < acc[1] && acc[1] <= acc[2] + 0.01;
  const double gap = acc[1] - acc[0];
  verdict(6, order && gap >= 0.03 && secs < 900,
          "mean accuracy no-user " + fmt("%.4f", acc[0]) + " < no-mapper " + fmt("%.4f", acc[1]) + " <= uen " +
              fmt("%.4f", acc[2]) + " + 0.01, user gain " + fmt("%.4f", gap) + ", " + fmt("%.0f", secs) + " s");
  const double gain = f1[2] - f1[1];
  verdict(7, gain >= 0.02,
          "mean zero-bucket macro-F1 uen " + fmt("%.4f", f1[2]) + " vs no-mapper " + fmt("%.4f", f1[1]) + ", gain " +
              fmt("%.4f", gain));
}

// ---------------------------------------------------------------------------

void statistics() {
  const std::vector<double> x{1, 2, 3}, y{4, 5, 6};
  const auto r = mann_whitney_u(x, y);
  const auto same = mann_whitney_u(x, x);

  const std::size_t counts[3] = {31327, 63915, 21397};
  Rng rng(808);
  std::vector<double> ratios;
  for (std::size_t i = 0; i < counts[0]; ++i) ratios.push_back(0.0);
  for (std::size_t i = 0; i < counts[1]; ++i) ratios.push_back(0.01 + 0.49 * rng.uniform());
  for (std::size_t i = 0; i < counts[2]; ++i) ratios.push_back(0.51 + 0.49 * rng.uniform());
  rng.shuffle(ratios);
  std::vector<Label> labels(ratios.size()), preds(ratios.size());
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    labels[i] = rng.bernoulli(0.5) ? Label::Fake : Label::True;
    preds[i] = rng.bernoulli(0.5) ? Label::Fake : Label::True;
  }
  const auto rep = bucketed_report(preds, labels, ratios);
  const bool buckets = rep.bucket(Bucket::Zero).n == counts[0] && rep.bucket(Bucket::Low).n == counts[1] &&
                       rep.bucket(Bucket::High).n == counts[2];
  verdict(8, r.exact && std::abs(r.p - 0.1) < 1e-12 && same.p == 1.0 && buckets,
          "MWU p " + fmt("%.6f", r.p) + " (exact), identical groups p " + fmt("%.1f", same.p) + ", buckets " +
              std::to_string(rep.bucket(Bucket::Zero).n) + "/" + std::to_string(rep.bucket(Bucket::Low).n) + "/" +
              std::to_string(rep.bucket(Bucket::High).n));
}

// ---------------------------------------------------------------------------

struct Artifacts {
  std::string corpus, users, model, report_json, report_csv, index;
};

Artifacts pipeline_bytes(const SynthConfig& sc, const PipelineConfig& cfg) {
  const auto corpus = generate(sc);
  const auto prep = prepare(corpus, cfg);
  const auto run = run_variant(prep, cfg, Variant::Uen);
  ColdMapper mapper(prep.split.train, prep.users, *prep.texts, cfg.cold);
  const auto dir = std::filesystem::temp_directory_path() / "uen_acceptance_idx";
  std::filesystem::create_directories(dir);
  save_index(dir / "posts.idx", mapper.post_index());
  return {serialize_corpus(corpus),
          encode_embedding_table(prep.users),
          encode_model(run.training.params),
          run.report.to_json(),
          run.report.to_csv(),
          read_file(dir / "posts.idx")};
}

template <typename Load>
bool rejects_tampering(const std::filesystem::path& path, Load load) {
  auto bytes = read_file(path);
  bytes[bytes.size() / 2] ^= 0x01;
  write_file(path, bytes);
  try {
    load(path);
  } catch (const ChecksumError&) {
    return true;
  }
  return false;
}

void determinism() {
  SynthConfig sc;
  sc.n_samples = 600;
  sc.n_users = 300;
  auto cfg = PipelineConfig::defaults(Arch::GCN, 7);
  cfg.gnn.epochs = 4;
  const auto a = pipeline_bytes(sc, cfg), b = pipeline_bytes(sc, cfg);
  const bool identical = a.corpus == b.corpus && a.users == b.users && a.model == b.model &&
                         a.report_json == b.report_json && a.report_csv == b.report_csv && a.index == b.index;

  const auto dir = std::filesystem::temp_directory_path() / "uen_acceptance_io";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto users = decode_embedding_table(a.users, "users");
  const auto model = decode_model(a.model, "model");
  save_embedding_table(dir / "users.emb", users);
  save_model(dir / "model.bin", model);
  save_corpus(dir / "corpus.jsonl", parse_corpus(a.corpus).corpus);
  const auto idx_src = std::filesystem::temp_directory_path() / "uen_acceptance_idx" / "posts.idx";
  const auto index = load_index(idx_src);
  save_index(dir / "posts.idx", index);

  const bool round_trip = load_embedding_table(dir / "users.emb") == users && load_model(dir / "model.bin") == model &&
                          load_index(dir / "posts.idx") == index &&
                          serialize_corpus(load_corpus(dir / "corpus.jsonl").corpus) == a.corpus;
  const bool checksums = rejects_tampering(dir / "users.emb", [](auto& p) { load_embedding_table(p); }) &&
                         rejects_tampering(dir / "model.bin", [](auto& p) { load_model(p); }) &&
                         rejects_tampering(dir / "posts.idx", [](auto& p) { load_index(p); });
  verdict(9, identical && round_trip && checksums,
          std::string("rerun ") + (identical ? "byte-identical" : "differs") + " (corpus, user table, checkpoint, report, index); round trips " +
              (round_trip ? "ok" : "broken") + "; tampered files " + (checksums ? "rejected" : "accepted"));
}

// ---------------------------------------------------------------------------

void null_signal() {
  SynthConfig sc;
  sc.user_signal_strength = 0;
  sc.text_signal_strength = 0;
  const auto runs = run_seeds(sc);
  double lo = 1, hi = 0;
  for (const auto& r : runs)
    for (double a : r.acc) {
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  verdict(10, lo >= 0.42 && hi <= 0.58,
          "accuracy over 3 seeds and all variants in [" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]");
}

}  // namespace

int main() {
  set_log_level(LogLevel::Warn);
  const auto t0 = Clock::now();
  similarity_search();
  cold_mapper_oracle();
  gradients();
  readout_boundaries();
  walk_law();
  ablation();
  statistics();
  determinism();
  null_signal();
  std::printf("%d of 10 criteria failed, %.0f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
