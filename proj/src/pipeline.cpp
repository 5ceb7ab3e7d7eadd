#include "uen/pipeline.hpp"

#include <unordered_set>

#include "json.hpp"

namespace uen {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Uen: return "uen";
    case Variant::NoMapper: return "no-mapper";
    case Variant::NoUser: return "no-user";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "uen") return Variant::Uen;
  if (s == "no-mapper") return Variant::NoMapper;
  if (s == "no-user") return Variant::NoUser;
  throw Error("unknown variant: " + std::string(s));
}

ArchDefaults arch_defaults(Arch arch) {
  switch (arch) {
    case Arch::GCN: return {0.62, 19, 72};
    case Arch::SAGE: return {0.89, 28, 96};
    case Arch::GAT: return {0.87, 11, 51};
  }
  throw Error("arch_defaults: bad arch");
}

PipelineConfig PipelineConfig::defaults(Arch arch, std::uint64_t seed) {
  PipelineConfig cfg;
  const ArchDefaults d = arch_defaults(arch);
  cfg.gnn.arch = arch;
  cfg.gnn.lambda = d.lambda;
  cfg.gnn.seed = seed;
  cfg.cold.k1 = d.k1;
  cfg.cold.k2 = d.k2;
  cfg.user.seed = seed;
  return cfg;
}

Prepared prepare(const Corpus& corpus, const PipelineConfig& cfg) {
  Prepared prep;
  prep.split = temporal_split(corpus, cfg.ratios);
  prep.graph = build_interaction_graph(prep.split.train, cfg.graph);
  prep.users = embed_users(prep.graph, cfg.user);
  prep.texts = std::make_shared<HashingTextProvider>(cfg.text);
  return prep;
}

std::unique_ptr<UserResolver> variant_resolver(const Prepared& prep, const PipelineConfig& cfg, Variant variant) {
  ResolverInputs in{&prep.users, &prep.split.train, prep.texts.get(), cfg.cold};
  switch (variant) {
    case Variant::Uen: return make_resolver(ResolverMode::ColdMapper, in);
    case Variant::NoMapper: return make_resolver(ResolverMode::MeanFallback, in);
    case Variant::NoUser: return nullptr;
  }
  throw Error("variant_resolver: bad variant");
}

std::vector<SampleGraph> assemble_set(const std::vector<Sample>& samples, const TextProvider& texts,
                                      const UserResolver* resolver) {
  std::vector<SampleGraph> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(assemble(s, texts, resolver));
  return out;
}

std::vector<double> overlap_ratios(const std::vector<Sample>& samples, const InteractionGraph& graph) {
  const std::unordered_set<UserId> known(graph.users().begin(), graph.users().end());
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(overlap_ratio(s, known));
  return out;
}

TrainResult train_variant(const Prepared& prep, const PipelineConfig& cfg, Variant variant) {
  const auto infer = variant_resolver(prep, cfg, variant);
  std::unique_ptr<UserResolver> lookup;
  if (variant != Variant::NoUser) lookup = std::make_unique<LookupResolver>(prep.users);
  const auto train_set = assemble_set(prep.split.train, *prep.texts, lookup.get());
  const auto val_set = assemble_set(prep.split.val, *prep.texts, infer.get());
  return train(train_set, val_set, cfg.gnn);
}

VariantRun evaluate_variant(const Prepared& prep, const PipelineConfig& cfg, Variant variant,
                            const ModelParams<float>& params) {
  const std::size_t user_dim = variant == Variant::NoUser ? 0 : prep.users.dim();
  if (params.in_dim != prep.texts->dim() + user_dim) {
    throw DimensionError("model input width " + std::to_string(params.in_dim) + " does not fit variant " +
                         variant_name(variant));
  }
  const auto infer = variant_resolver(prep, cfg, variant);
  VariantRun run;
  for (const auto& s : prep.split.test) {
    const auto g = assemble(s, *prep.texts, infer.get());
    run.predictions.push_back(predict(params, g).label);
    run.labels.push_back(*g.label);
  }
  run.ratios = overlap_ratios(prep.split.test, prep.graph);
  run.report = bucketed_report(run.predictions, run.labels, run.ratios);
  run.report.arch = arch_name(params.arch);
  run.report.variant = variant_name(variant);
  run.report.seed = cfg.gnn.seed;
  run.report.user_dim = user_dim;
  run.report.text_dim = prep.texts->dim();
  return run;
}

VariantRun run_variant(const Prepared& prep, const PipelineConfig& cfg, Variant variant) {
  auto trained = train_variant(prep, cfg, variant);
  VariantRun run = evaluate_variant(prep, cfg, variant, trained.params);
  run.training = std::move(trained);
  return run;
}

void PipelineConfig::validate() const {
  split_sizes(10, ratios);
  user.validate();
  gnn.validate();
  cold.validate();
  if (text.dim == 0 || text.probes == 0 || text.min_ngram == 0 || text.max_ngram < text.min_ngram) {
    throw Error("text embedding config is invalid");
  }
}

namespace {

using ojson = nlohmann::ordered_json;

// Reads every key of `j` into the matching field, rejecting unknown keys.
class FieldReader {
 public:
  FieldReader(const ojson& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw FormatError("config: " + section_ + " must be an object");
  }
  template <typename T>
  FieldReader& operator()(const char* key, T& field) {
    seen_.insert(key);
    if (j_.contains(key)) {
      try {
        j_.at(key).get_to(field);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError("config: " + section_ + "." + key + ": " + e.what());
      }
    }
    return *this;
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw FormatError("config: unknown field " + section_ + "." + k);
    }
  }

 private:
  const ojson& j_;
  std::string section_;
  std::unordered_set<std::string> seen_;
};

}  // namespace

std::string PipelineConfig::to_json() const {
  ojson j;
  j["split"] = {{"train", ratios.train}, {"val", ratios.val}, {"test", ratios.test}};
  j["graph"] = {{"unweighted", graph.unweighted}};
  j["user"] = {{"dim", user.dim},
               {"p", user.p},
               {"q", user.q},
               {"walk_length", user.walk_length},
               {"walks_per_node", user.walks_per_node},
               {"window", user.window},
               {"negatives", user.negatives},
               {"epochs", user.epochs},
               {"learning_rate", user.learning_rate},
               {"seed", user.seed},
               {"threads", user.threads}};
  j["text"] = {{"dim", text.dim},
               {"hash_seed", text.hash_seed},
               {"min_ngram", text.min_ngram},
               {"max_ngram", text.max_ngram},
               {"probes", text.probes}};
  j["gnn"] = {{"arch", arch_name(gnn.arch)},
              {"layers", gnn.layers},
              {"hidden", gnn.hidden},
              {"heads", gnn.heads},
              {"lambda", gnn.lambda},
              {"learning_rate", gnn.learning_rate},
              {"epochs", gnn.epochs},
              {"batch_size", gnn.batch_size},
              {"seed", gnn.seed},
              {"threads", gnn.threads}};
  j["cold"] = {{"k1", cold.k1}, {"k2", cold.k2}, {"heuristics", cold.heuristics.to_string()}};
  return j.dump(2);
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  PipelineConfig c;
  FieldReader root(j, "config");
  for (const auto& [k, v] : j.items()) {
    if (k == "split") {
      FieldReader(v, k)("train", c.ratios.train)("val", c.ratios.val)("test", c.ratios.test).finish();
    } else if (k == "graph") {
      FieldReader(v, k)("unweighted", c.graph.unweighted).finish();
    } else if (k == "user") {
      FieldReader(v, k)("dim", c.user.dim)("p", c.user.p)("q", c.user.q)("walk_length", c.user.walk_length)(
          "walks_per_node", c.user.walks_per_node)("window", c.user.window)("negatives", c.user.negatives)(
          "epochs", c.user.epochs)("learning_rate", c.user.learning_rate)("seed", c.user.seed)(
          "threads", c.user.threads)
          .finish();
    } else if (k == "text") {
      FieldReader(v, k)("dim", c.text.dim)("hash_seed", c.text.hash_seed)("min_ngram", c.text.min_ngram)(
          "max_ngram", c.text.max_ngram)("probes", c.text.probes)
          .finish();
    } else if (k == "gnn") {
      std::string arch = arch_name(c.gnn.arch);
      FieldReader(v, k)("arch", arch)("layers", c.gnn.layers)("hidden", c.gnn.hidden)("heads", c.gnn.heads)(
          "lambda", c.gnn.lambda)("learning_rate", c.gnn.learning_rate)("epochs", c.gnn.epochs)(
          "batch_size", c.gnn.batch_size)("seed", c.gnn.seed)("threads", c.gnn.threads)
          .finish();
      c.gnn.arch = parse_arch(arch);
    } else if (k == "cold") {
      std::string h = c.cold.heuristics.to_string();
      FieldReader(v, k)("k1", c.cold.k1)("k2", c.cold.k2)("heuristics", h).finish();
      c.cold.heuristics = HeuristicSet::parse(h);
    } else {
      throw FormatError("config: unknown section " + k);
    }
  }
  return c;
}

}  // namespace uen
