// uen: command-line driver for the UEN pipeline.
//
//   uen synth --work w
//   uen split --work w
//   uen graph --work w
//   uen embed-users --work w
//   uen train --work w --variant uen
//   uen eval --work w --variant uen
//   uen report --work w
//
// Every stage reads and writes well-known files inside the work directory
// and leaves run_<stage>.json with the resolved config and the checksums of
// what it read and wrote.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "uen/cold_mapper.hpp"
#include "uen/corpus.hpp"
#include "uen/evaluation.hpp"
#include "uen/gnn_model.hpp"
#include "uen/interaction_graph.hpp"
#include "uen/pipeline.hpp"
#include "uen/synth_bench.hpp"
#include "uen/text_embed.hpp"
#include "uen/user_embed.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace uen;

namespace {

class ConfigConflict : public Error {
 public:
  using Error::Error;
};

class MissingInput : public Error {
 public:
  using Error::Error;
};

// Records what a stage consumed and produced.
class Stage {
 public:
  Stage(std::string name, fs::path work) : name_(std::move(name)), work_(std::move(work)) {}

  fs::path path(const std::string& file) const { return work_ / file; }

  /// Checksum-verified read of a work-directory artifact.
  std::string read(const std::string& file) {
    const fs::path p = path(file);
    if (!fs::exists(p)) throw MissingInput("missing input artifact " + p.string() + " (run the producing stage first)");
    std::string bytes = read_verified(p);
    inputs_[file] = sha256_hex(bytes);
    return bytes;
  }

  /// Read of a file outside the artifact chain (raw input, external table).
  std::string read_external(const fs::path& p) {
    if (!fs::exists(p)) throw MissingInput("missing input " + p.string());
    std::string bytes = read_file(p);
    inputs_[p.string()] = sha256_hex(bytes);
    return bytes;
  }

  void note_input(const std::string& file) { inputs_[file] = sha256_file(path(file)); }

  void write(const std::string& file, std::string_view payload, ojson meta = ojson::object()) {
    write_with_sidecar(path(file), payload, meta.dump());
    outputs_[file] = sha256_hex(payload);
  }

  void write_plain(const std::string& file, std::string_view payload) {
    write_file(path(file), payload);
    outputs_[file] = sha256_hex(payload);
  }

  void note_output(const std::string& file) { outputs_[file] = sha256_file(path(file)); }

  void finish(const ojson& config) const {
    ojson run;
    run["stage"] = name_;
    run["config"] = config;
    run["inputs"] = ojson(inputs_);
    run["outputs"] = ojson(outputs_);
    write_file(path("run_" + name_ + ".json"), run.dump(2) + "\n");
  }

 private:
  std::string name_;
  fs::path work_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
};

// ---------------------------------------------------------------------------
// Pipeline options shared by the modelling stages
// ---------------------------------------------------------------------------

struct PipelineFlags {
  std::string config_file;
  std::string arch = "gcn";
  std::uint64_t seed = 1;
  std::optional<double> lambda;
  std::optional<std::size_t> k1, k2;
  std::optional<std::string> heuristics;
  std::optional<std::size_t> epochs, hidden, layers, heads, threads, user_dim, walk_length, walks_per_node;
  std::optional<double> p, q;
  bool unweighted = false;
  bool use_tuned = false;

  CLI::Option* arch_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "Resolved config JSON to start from");
    arch_opt = app->add_option("--arch", arch, "gcn | sage | gat")->check(CLI::IsMember({"gcn", "sage", "gat"}));
    seed_opt = app->add_option("--seed", seed, "Seed for every stochastic stage");
    app->add_option("--lambda", lambda, "Readout weight of the post node")->check(CLI::Range(0.0, 1.0));
    app->add_option("--k1", k1, "Similar posts per cold author")->check(CLI::PositiveNumber);
    app->add_option("--k2", k2, "Similar comments per cold commenter")->check(CLI::PositiveNumber);
    app->add_option("--heuristics", heuristics, "Cold mapper heuristics, e.g. h1,h2,h3");
    app->add_option("--epochs", epochs, "Classifier epochs")->check(CLI::PositiveNumber);
    app->add_option("--hidden", hidden, "GNN hidden width")->check(CLI::PositiveNumber);
    app->add_option("--layers", layers, "GNN layers")->check(CLI::PositiveNumber);
    app->add_option("--heads", heads, "GAT heads")->check(CLI::PositiveNumber);
    app->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app->add_option("--user-dim", user_dim, "User embedding width")->check(CLI::PositiveNumber);
    app->add_option("--walk-length", walk_length, "node2vec walk length")->check(CLI::PositiveNumber);
    app->add_option("--walks-per-node", walks_per_node, "node2vec walks per node")->check(CLI::PositiveNumber);
    app->add_option("--p", p, "node2vec return parameter")->check(CLI::PositiveNumber);
    app->add_option("--q", q, "node2vec in-out parameter")->check(CLI::PositiveNumber);
    app->add_flag("--unweighted", unweighted, "Collapse repeated interactions to weight 1");
    app->add_flag("--use-tuned", use_tuned, "Take lambda, k1 and k2 from tune_best.json");
  }

  bool mapper_flags_given() const { return k1 || k2 || heuristics; }

  PipelineConfig resolve(Stage* stage) const {
    PipelineConfig cfg;
    if (!config_file.empty()) {
      const std::string text = stage ? stage->read_external(config_file) : read_file(config_file);
      cfg = PipelineConfig::from_json(text);
      if (arch_opt->count() > 0) {
        const Arch a = parse_arch(arch);
        if (a != cfg.gnn.arch) {
          const ArchDefaults d = arch_defaults(a);
          cfg.gnn.arch = a;
          cfg.gnn.lambda = d.lambda;
          cfg.cold.k1 = d.k1;
          cfg.cold.k2 = d.k2;
        }
      }
      if (seed_opt->count() > 0) {
        cfg.gnn.seed = seed;
        cfg.user.seed = seed;
      }
    } else {
      cfg = PipelineConfig::defaults(parse_arch(arch), seed);
    }
    if (use_tuned) {
      if (!stage) throw Error("--use-tuned needs a work directory");
      const auto best = ojson::parse(stage->read("tune_best.json"));
      cfg.gnn.lambda = best.at("lambda").get<double>();
      cfg.cold.k1 = best.at("k1").get<std::size_t>();
      cfg.cold.k2 = best.at("k2").get<std::size_t>();
    }
    if (lambda) cfg.gnn.lambda = *lambda;
    if (k1) cfg.cold.k1 = *k1;
    if (k2) cfg.cold.k2 = *k2;
    if (heuristics) cfg.cold.heuristics = HeuristicSet::parse(*heuristics);
    if (epochs) cfg.gnn.epochs = *epochs;
    if (hidden) cfg.gnn.hidden = *hidden;
    if (layers) cfg.gnn.layers = *layers;
    if (heads) cfg.gnn.heads = *heads;
    if (threads) cfg.gnn.threads = cfg.user.threads = *threads;
    if (user_dim) cfg.user.dim = *user_dim;
    if (walk_length) cfg.user.walk_length = *walk_length;
    if (walks_per_node) cfg.user.walks_per_node = *walks_per_node;
    if (p) cfg.user.p = *p;
    if (q) cfg.user.q = *q;
    if (unweighted) cfg.graph.unweighted = true;
    cfg.validate();
    return cfg;
  }
};

ojson config_json(const PipelineConfig& cfg) { return ojson::parse(cfg.to_json()); }

// ---------------------------------------------------------------------------
// Loading artifacts
// ---------------------------------------------------------------------------

LoadOptions corpus_options(Stage& st) {
  const auto meta = ojson::parse(st.read("corpus_meta.json"));
  LoadOptions opts;
  opts.mode = meta.at("mode").get<std::string>() == "tweet" ? CorpusMode::TweetStyle : CorpusMode::RedditStyle;
  opts.common_author = meta.at("common_author").get<std::string>();
  return opts;
}

std::vector<Sample> read_split_part(Stage& st, const std::string& file, const LoadOptions& opts) {
  const std::string bytes = st.read(file);
  return parse_corpus(bytes, opts, st.path(file).string()).corpus.samples;
}

Split read_split(Stage& st) {
  const LoadOptions opts = corpus_options(st);
  Split s;
  s.train = read_split_part(st, "train.jsonl", opts);
  s.val = read_split_part(st, "val.jsonl", opts);
  s.test = read_split_part(st, "test.jsonl", opts);
  return s;
}

InteractionGraph read_graph(Stage& st) {
  st.read("graph_edges.txt");
  st.read("graph_nodes.txt");
  return import_graph(st.path("graph_edges.txt"), st.path("graph_nodes.txt"));
}

EmbeddingTable read_users(Stage& st, std::size_t dim) {
  st.read("users.emb");
  return load_embedding_table(st.path("users.emb"), dim);
}

std::shared_ptr<const TextProvider> text_provider(Stage& st, const PipelineConfig& cfg, const std::string& table) {
  if (table.empty()) return std::make_shared<HashingTextProvider>(cfg.text);
  st.read_external(table);
  return std::make_shared<TableTextProvider>(load_text_embeddings(table, cfg.text.dim));
}

Prepared read_prepared(Stage& st, const PipelineConfig& cfg, const std::string& text_table, bool need_users) {
  Prepared prep;
  prep.split = read_split(st);
  prep.graph = read_graph(st);
  if (need_users) prep.users = read_users(st, cfg.user.dim);
  prep.texts = text_provider(st, cfg, text_table);
  return prep;
}

std::string predictions_csv(const std::vector<Sample>& test, const VariantRun& run) {
  std::ostringstream out;
  out << "post_id,label,pred,overlap_ratio,bucket,correct\n";
  char buf[32];
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f", run.ratios[i]);
    out << test[i].post_id << ',' << static_cast<int>(run.labels[i]) << ',' << static_cast<int>(run.predictions[i])
        << ',' << buf << ',' << bucket_name(bucket_of(run.ratios[i])) << ','
        << (run.labels[i] == run.predictions[i] ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string fmt_p(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", p);
  return buf;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct Common {
  std::string work = "work";
  std::string log_level = "info";
};

void cmd_synth(const Common& c, const std::string& config_file, SynthConfig flags, const CLI::App& app) {
  Stage st("synth", c.work);
  SynthConfig cfg;
  if (!config_file.empty()) cfg = SynthConfig::from_json(st.read_external(config_file));
  // Explicit flags override the file.
  auto given = [&](const char* name) { return app.get_option(name)->count() > 0; };
  if (given("--n-samples")) cfg.n_samples = flags.n_samples;
  if (given("--n-users")) cfg.n_users = flags.n_users;
  if (given("--n-communities")) cfg.n_communities = flags.n_communities;
  if (given("--comments-min")) cfg.comments_min = flags.comments_min;
  if (given("--comments-max")) cfg.comments_max = flags.comments_max;
  if (given("--max-chain-depth")) cfg.max_chain_depth = flags.max_chain_depth;
  if (given("--fake-fraction")) cfg.fake_fraction = flags.fake_fraction;
  if (given("--text-signal")) cfg.text_signal_strength = flags.text_signal_strength;
  if (given("--user-signal")) cfg.user_signal_strength = flags.user_signal_strength;
  if (given("--cold-rate")) cfg.cold_user_rate_test = flags.cold_user_rate_test;
  if (given("--seed")) cfg.seed = flags.seed;

  const Corpus corpus = generate(cfg);
  st.write("corpus.jsonl", serialize_corpus(corpus), {{"format", "jsonl"}, {"samples", corpus.samples.size()}});
  st.write("corpus_meta.json", ojson{{"mode", "reddit"}, {"common_author", "common_author"}}.dump(2) + "\n");
  st.write_plain("synth_config.json", cfg.to_json() + "\n");
  st.write_plain("corpus_stats.json", describe(corpus).to_json() + "\n");
  st.finish(ojson::parse(cfg.to_json()));
  log_info("synth: wrote " + std::to_string(corpus.samples.size()) + " samples");
}

void cmd_ingest(const Common& c, const std::string& input, const std::string& mode, const std::string& common_author,
                bool lenient) {
  Stage st("ingest", c.work);
  LoadOptions opts;
  opts.mode = mode == "tweet" ? CorpusMode::TweetStyle : CorpusMode::RedditStyle;
  opts.common_author = common_author;
  opts.strict = !lenient;
  const std::string bytes = st.read_external(input);
  const LoadResult res = parse_corpus(bytes, opts, input);
  st.write("corpus.jsonl", serialize_corpus(res.corpus),
           {{"format", "jsonl"}, {"samples", res.corpus.samples.size()}});
  st.write("corpus_meta.json", ojson{{"mode", mode}, {"common_author", common_author}}.dump(2) + "\n");
  st.write_plain("ingest_report.json", res.report.to_json() + "\n");
  std::cout << res.report.to_json() << "\n";
  st.write_plain("corpus_stats.json", describe(res.corpus).to_json() + "\n");
  st.finish({{"input", input}, {"mode", mode}, {"common_author", common_author}, {"lenient", lenient}});
  log_info("ingest: loaded " + std::to_string(res.report.loaded) + " samples, dropped " +
           std::to_string(res.report.dropped_zero_comment) + " without comments");
}

void cmd_split(const Common& c, const PipelineFlags& pf) {
  Stage st("split", c.work);
  const PipelineConfig cfg = pf.resolve(&st);
  const LoadOptions opts = corpus_options(st);
  const Corpus corpus = parse_corpus(st.read("corpus.jsonl"), opts, st.path("corpus.jsonl").string()).corpus;
  const Split split = temporal_split(corpus, cfg.ratios);
  for (auto [name, part] : {std::pair{"train.jsonl", &split.train}, {"val.jsonl", &split.val}, {"test.jsonl", &split.test}}) {
    Corpus sub{*part, corpus.common_author};
    st.write(name, serialize_corpus(sub), {{"format", "jsonl"}, {"samples", part->size()}});
  }
  st.finish(config_json(cfg));
}

void cmd_graph(const Common& c, const PipelineFlags& pf) {
  Stage st("graph", c.work);
  const PipelineConfig cfg = pf.resolve(&st);
  const LoadOptions opts = corpus_options(st);
  const auto train = read_split_part(st, "train.jsonl", opts);
  const InteractionGraph g = build_interaction_graph(train, cfg.graph);
  export_graph(g, st.path("graph_edges.txt"), st.path("graph_nodes.txt"));
  for (const char* f : {"graph_edges.txt", "graph_nodes.txt"}) st.write(f, read_file(st.path(f)), {{"format", "text"}});
  st.write_plain("graph_stats.json", graph_stats(g).to_json() + "\n");
  st.finish(config_json(cfg));
}

void cmd_embed_users(const Common& c, const PipelineFlags& pf) {
  Stage st("embed-users", c.work);
  const PipelineConfig cfg = pf.resolve(&st);
  const InteractionGraph g = read_graph(st);
  const EmbeddingTable t = embed_users(g, cfg.user);
  save_embedding_table(st.path("users.emb"), t);
  st.note_output("users.emb");
  st.finish(config_json(cfg));
}

void cmd_embed_text(const Common& c, const PipelineFlags& pf) {
  Stage st("embed-text", c.work);
  const PipelineConfig cfg = pf.resolve(&st);
  const Split split = read_split(st);
  std::vector<Sample> all = split.train;
  all.insert(all.end(), split.val.begin(), split.val.end());
  all.insert(all.end(), split.test.begin(), split.test.end());
  const EmbeddingTable t = embed_corpus_texts(all, HashingTextProvider(cfg.text));
  save_embedding_table(st.path("texts.emb"), t);
  st.note_output("texts.emb");
  st.finish(config_json(cfg));
}

void check_variant_conflict(Variant v, const PipelineFlags& pf) {
  if (v == Variant::NoUser && pf.mapper_flags_given()) {
    throw ConfigConflict("--variant no-user has no user features, so --k1/--k2/--heuristics do not apply");
  }
}

std::string model_file(Variant v) { return std::string("model_") + variant_name(v) + ".bin"; }

void cmd_train(const Common& c, const PipelineFlags& pf, const std::string& variant_s, const std::string& text_table) {
  const Variant v = parse_variant(variant_s);
  check_variant_conflict(v, pf);
  Stage st("train-" + variant_s, c.work);
  const PipelineConfig cfg = pf.resolve(&st);
  const Prepared prep = read_prepared(st, cfg, text_table, v != Variant::NoUser);
  const TrainResult res = train_variant(prep, cfg, v);
  save_model(st.path(model_file(v)), res.params);
  st.note_output(model_file(v));
  st.write_plain(std::string("history_") + variant_s + ".csv", history_csv(res.history));
  auto conf = config_json(cfg);
  conf["variant"] = variant_s;
  conf["text_table"] = text_table;
  conf["best_epoch"] = res.best_epoch;
  st.finish(conf);
}

void cmd_tune(const Common& c, const PipelineFlags& pf, SearchSpace space, const std::string& text_table) {
  Stage st("tune", c.work);
  const PipelineConfig base = pf.resolve(&st);
  space.seed = base.gnn.seed;
  const Prepared prep = read_prepared(st, base, text_table, true);
  auto objective = [&](const TrialParams& t) {
    PipelineConfig cfg = base;
    cfg.gnn.lambda = t.lambda;
    cfg.cold.k1 = t.k1;
    cfg.cold.k2 = t.k2;
    const TrainResult res = train_variant(prep, cfg, Variant::Uen);
    return res.history.at(res.best_epoch - 1).val_loss;
  };
  const TuneResult res = tune(objective, space);
  st.write_plain("tune_log.csv", res.log_csv());
  st.write("tune_best.json", ojson{{"lambda", res.best.lambda},
                                   {"k1", res.best.k1},
                                   {"k2", res.best.k2},
                                   {"val_loss", res.best_loss},
                                   {"trial", res.best_index}}
                                 .dump(2) + "\n");
  auto conf = config_json(base);
  conf["search"] = {{"lambda", {space.lambda_lo, space.lambda_hi}},
                    {"k1", {space.k1_lo, space.k1_hi}},
                    {"k2", {space.k2_lo, space.k2_hi}},
                    {"budget", space.budget},
                    {"seed", space.seed}};
  st.finish(conf);
}

void cmd_map_cold(const Common& c, const PipelineFlags& pf, const std::string& text_table, const std::string& mode) {
  Stage st("map-cold", c.work);
  const PipelineConfig cfg = pf.resolve(&st);
  const Prepared prep = read_prepared(st, cfg, text_table, true);
  std::unique_ptr<UserResolver> resolver;
  if (mode == "mapper") {
    auto mapper = std::make_shared<const ColdMapper>(prep.split.train, prep.users, *prep.texts, cfg.cold);
    save_index(st.path("posts.idx"), mapper->post_index());
    st.note_output("posts.idx");
    resolver = std::make_unique<ColdMapperResolver>(std::move(mapper));
  } else {
    resolver = std::make_unique<MeanFallbackResolver>(prep.users);
  }

  // One row per cold occurrence: "<post>/author" or "<post>/<comment>".
  EmbeddingTable mapped(prep.users.dim());
  for (const auto* part : {&prep.split.val, &prep.split.test}) {
    for (const auto& s : *part) {
      if (!prep.users.contains(s.author)) mapped.add(s.post_id + "/author", resolver->resolve(s.author, {&s, {}}));
      for (std::size_t i = 0; i < s.comments.size(); ++i) {
        const auto& who = s.comments[i].author;
        if (!prep.users.contains(who)) mapped.add(s.post_id + "/" + s.comments[i].id, resolver->resolve(who, {&s, i}));
      }
    }
  }
  save_embedding_table(st.path("cold_map.emb"), mapped);
  st.note_output("cold_map.emb");
  auto conf = config_json(cfg);
  conf["cold_mode"] = mode;
  st.finish(conf);
  log_info("map-cold: mapped " + std::to_string(mapped.rows()) + " cold occurrences");
}

void cmd_eval(const Common& c, const PipelineFlags& pf, const std::string& variant_s, const std::string& text_table) {
  const Variant v = parse_variant(variant_s);
  check_variant_conflict(v, pf);
  Stage st("eval-" + variant_s, c.work);
  const PipelineConfig cfg = pf.resolve(&st);
  const Prepared prep = read_prepared(st, cfg, text_table, v != Variant::NoUser);
  st.read(model_file(v));
  const ModelParams<float> params = load_model(st.path(model_file(v)));
  const VariantRun run = evaluate_variant(prep, cfg, v, params);
  st.write_plain("eval_" + variant_s + ".json", run.report.to_json());
  st.write_plain("eval_" + variant_s + ".csv", run.report.to_csv());
  st.write("predictions_" + variant_s + ".csv", predictions_csv(prep.split.test, run), {{"format", "csv"}});
  auto conf = config_json(cfg);
  conf["variant"] = variant_s;
  conf["text_table"] = text_table;
  st.finish(conf);
  log_info(std::string("eval ") + variant_s + ": accuracy " + fmt(run.report.overall.accuracy) + ", macro-F1 " +
           fmt(run.report.overall.macro_f1));
}

std::vector<double> correctness(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(line.back() == '1' ? 1.0 : 0.0);
  }
  return out;
}

void cmd_report(const Common& c) {
  Stage st("report", c.work);
  std::vector<std::string> present;
  std::map<std::string, ojson> reports;
  std::map<std::string, std::vector<double>> correct;
  for (const char* v : {"uen", "no-mapper", "no-user"}) {
    const std::string f = std::string("eval_") + v + ".json";
    if (!fs::exists(st.path(f))) continue;
    st.note_input(f);
    reports[v] = ojson::parse(read_file(st.path(f)));
    correct[v] = correctness(st.read(std::string("predictions_") + v + ".csv"));
    present.push_back(v);
  }
  if (present.empty()) throw MissingInput("report: no eval_<variant>.json in " + c.work + " (run eval first)");

  auto metric = [](const ojson& g, const char* key) -> std::optional<double> {
    if (g.at(key).is_null()) return std::nullopt;
    return g.at(key).get<double>();
  };
  std::ostringstream md;
  md << "# UEN evaluation summary\n\n";
  md << "## Overall\n\n| Variant | Accuracy | Macro-F1 | n |\n|---|---|---|---|\n";
  for (const auto& v : present) {
    const auto& o = reports[v].at("overall");
    md << "| " << v << " | " << fmt(metric(o, "accuracy")) << " | " << fmt(metric(o, "macro_f1")) << " | "
       << o.at("n").get<std::size_t>() << " |\n";
  }
  md << "\n## By overlap bucket\n\n| Variant | Bucket | n | Accuracy | Macro-F1 |\n|---|---|---|---|---|\n";
  for (const auto& v : present) {
    for (const char* b : {"0", "(0,0.5]", "(0.5,1]"}) {
      const auto& g = reports[v].at("buckets").at(b);
      md << "| " << v << " | " << b << " | " << g.at("n").get<std::size_t>() << " | " << fmt(metric(g, "accuracy"))
         << " | " << fmt(metric(g, "macro_f1")) << " |\n";
    }
  }
  if (correct.contains("uen") && present.size() > 1) {
    md << "\n## Significance (Mann-Whitney U on per-sample correctness)\n\n| Comparison | U | p | method |\n"
          "|---|---|---|---|\n";
    for (const auto& v : present) {
      if (v == "uen") continue;
      const auto r = mann_whitney_u(correct["uen"], correct[v]);
      md << "| uen vs " << v << " | " << r.u << " | " << fmt_p(r.p) << " | " << (r.exact ? "exact" : "normal")
         << " |\n";
    }
  }
  st.write_plain("report.md", md.str());
  st.finish({{"variants", present}});
}

int fail(const char* kind, const std::string& message, int code) {
  std::cerr << ojson{{"error", kind}, {"message", message}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UEN pipeline: synthetic data, user embeddings, GNN training, cold-user mapping, evaluation"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--work", common.work, "Work directory holding every artifact")->capture_default_str();
  app.add_option("--log-level", common.log_level, "debug | info | warn | error | silent")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "silent"}));

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  SynthConfig sflags;
  std::string synth_config;
  synth->add_option("--config", synth_config, "SynthConfig JSON");
  synth->add_option("--n-samples", sflags.n_samples);
  synth->add_option("--n-users", sflags.n_users);
  synth->add_option("--n-communities", sflags.n_communities);
  synth->add_option("--comments-min", sflags.comments_min);
  synth->add_option("--comments-max", sflags.comments_max);
  synth->add_option("--max-chain-depth", sflags.max_chain_depth);
  synth->add_option("--fake-fraction", sflags.fake_fraction);
  synth->add_option("--text-signal", sflags.text_signal_strength);
  synth->add_option("--user-signal", sflags.user_signal_strength);
  synth->add_option("--cold-rate", sflags.cold_user_rate_test);
  synth->add_option("--seed", sflags.seed);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate and normalize a JSONL corpus");
  std::string ingest_input, ingest_mode = "reddit", common_author = "common_author";
  bool lenient = false;
  ingest->add_option("--input", ingest_input, "Corpus JSONL")->required();
  ingest->add_option("--mode", ingest_mode, "reddit | tweet")->check(CLI::IsMember({"reddit", "tweet"}));
  ingest->add_option("--common-author", common_author, "Author assigned to author-less posts in tweet mode");
  ingest->add_flag("--lenient", lenient, "Skip bad records instead of failing");

  std::map<std::string, PipelineFlags> flags;
  std::map<std::string, std::string> variant, text_table;
  auto modelling = [&](const char* name, const char* help, bool with_variant, bool with_texts) {
    auto* sub = app.add_subcommand(name, help);
    flags[name].attach(sub);
    if (with_variant) {
      variant[name] = "uen";
      sub->add_option("--variant", variant[name], "uen | no-mapper | no-user")
          ->check(CLI::IsMember({"uen", "no-mapper", "no-user"}));
    }
    if (with_texts) sub->add_option("--text-table", text_table[name], "Precomputed text embeddings (UENEMB1)");
    return sub;
  };
  auto* split = modelling("split", "Temporal 70/10/20 split", false, false);
  auto* graph = modelling("graph", "Build the global interaction graph", false, false);
  auto* embed_u = modelling("embed-users", "node2vec user embeddings", false, false);
  auto* embed_t = modelling("embed-text", "Hashed text embeddings for every post and comment", false, false);
  auto* train_c = modelling("train", "Train a GNN classifier", true, true);
  auto* tune_c = modelling("tune", "Random search over lambda, k1, k2", false, true);
  auto* map_c = modelling("map-cold", "Map cold users of the validation and test splits", false, true);
  auto* eval_c = modelling("eval", "Evaluate a trained variant on the test split", true, true);
  auto* report = app.add_subcommand("report", "Markdown summary of every evaluated variant");

  SearchSpace space;
  tune_c->add_option("--budget", space.budget, "Number of trials")->check(CLI::PositiveNumber);
  tune_c->add_option("--k1-max", space.k1_hi, "Upper bound for k1")->check(CLI::PositiveNumber);
  std::string cold_mode = "mapper";
  map_c->add_option("--cold-mode", cold_mode, "mapper | mean")->check(CLI::IsMember({"mapper", "mean"}));
  tune_c->add_option("--k2-max", space.k2_hi, "Upper bound for k2")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  static const std::map<std::string, LogLevel> levels{{"debug", LogLevel::Debug},
                                                      {"info", LogLevel::Info},
                                                      {"warn", LogLevel::Warn},
                                                      {"error", LogLevel::Error},
                                                      {"silent", LogLevel::Silent}};
  set_log_level(levels.at(common.log_level));

  try {
    fs::create_directories(common.work);
    if (*synth) cmd_synth(common, synth_config, sflags, *synth);
    if (*ingest) cmd_ingest(common, ingest_input, ingest_mode, common_author, lenient);
    if (*split) cmd_split(common, flags["split"]);
    if (*graph) cmd_graph(common, flags["graph"]);
    if (*embed_u) cmd_embed_users(common, flags["embed-users"]);
    if (*embed_t) cmd_embed_text(common, flags["embed-text"]);
    if (*train_c) cmd_train(common, flags["train"], variant["train"], text_table["train"]);
    if (*tune_c) cmd_tune(common, flags["tune"], space, text_table["tune"]);
    if (*map_c) cmd_map_cold(common, flags["map-cold"], text_table["map-cold"], cold_mode);
    if (*eval_c) cmd_eval(common, flags["eval"], variant["eval"], text_table["eval"]);
    if (*report) cmd_report(common);
  } catch (const ConfigConflict& e) {
    return fail("config_conflict", e.what(), 2);
  } catch (const MissingInput& e) {
    return fail("missing_input", e.what(), 3);
  } catch (const ChecksumError& e) {
    return fail("checksum", e.what(), 4);
  } catch (const FormatError& e) {
    return fail("format", e.what(), 5);
  } catch (const DimensionError& e) {
    return fail("dimension", e.what(), 6);
  } catch (const std::exception& e) {
    return fail("error", e.what(), 1);
  }
  return 0;
}
