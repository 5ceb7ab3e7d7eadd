#pragma once

#include <memory>
#include <string>
#include <vector>

#include "uen/cold_mapper.hpp"
#include "uen/corpus.hpp"
#include "uen/evaluation.hpp"
#include "uen/gnn_model.hpp"
#include "uen/interaction_graph.hpp"
#include "uen/text_embed.hpp"
#include "uen/user_embed.hpp"

namespace uen {

/// The three evaluated configurations: full UEN, cold users mapped to the
/// global mean, and text-only node features.
enum class Variant { Uen, NoMapper, NoUser };

const char* variant_name(Variant v);
Variant parse_variant(std::string_view s);

/// Tuned readout weight and neighborhood sizes per architecture.
struct ArchDefaults {
  double lambda;
  std::size_t k1;
  std::size_t k2;
};

ArchDefaults arch_defaults(Arch arch);

struct PipelineConfig {
  SplitRatios ratios;
  GraphBuildOptions graph;
  Node2VecConfig user;
  TextEmbedConfig text;
  GnnConfig gnn;
  ColdMapConfig cold;

  /// Defaults for `arch`, with every stage seeded from `seed`.
  static PipelineConfig defaults(Arch arch, std::uint64_t seed);

  void validate() const;
  /// Every field, nested by stage. from_json(to_json()) reproduces the config.
  std::string to_json() const;
  /// Fields absent from `json` keep their defaults; unknown fields are an error.
  static PipelineConfig from_json(const std::string& json);
};

/// Everything upstream of the classifier, shared by all variants.
struct Prepared {
  Split split;
  InteractionGraph graph;
  EmbeddingTable users;
  std::shared_ptr<const TextProvider> texts;
};

Prepared prepare(const Corpus& corpus, const PipelineConfig& cfg);

/// Resolver used for validation and test samples under `variant`; null for NoUser.
std::unique_ptr<UserResolver> variant_resolver(const Prepared& prep, const PipelineConfig& cfg, Variant variant);

std::vector<SampleGraph> assemble_set(const std::vector<Sample>& samples, const TextProvider& texts,
                                      const UserResolver* resolver);

/// Overlap ratio of every sample against the training users.
std::vector<double> overlap_ratios(const std::vector<Sample>& samples, const InteractionGraph& graph);

struct VariantRun {
  TrainResult training;
  std::vector<Label> predictions;
  std::vector<Label> labels;
  std::vector<double> ratios;
  EvalReport report;
};

/// Train on the training split with known-user features, selecting the
/// epoch on validation samples resolved under `variant`.
TrainResult train_variant(const Prepared& prep, const PipelineConfig& cfg, Variant variant);

/// Predict the test split and build the bucketed report.
VariantRun evaluate_variant(const Prepared& prep, const PipelineConfig& cfg, Variant variant,
                            const ModelParams<float>& params);

/// train_variant followed by evaluate_variant.
VariantRun run_variant(const Prepared& prep, const PipelineConfig& cfg, Variant variant);

}  // namespace uen
