#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uen/feature_assembly.hpp"
#include "uen/matrix.hpp"

namespace uen {

enum class Arch : std::uint32_t { GCN = 0, SAGE = 1, GAT = 2 };

const char* arch_name(Arch a);
Arch parse_arch(std::string_view s);

struct GnnConfig {
  Arch arch = Arch::GCN;
  std::size_t layers = 3;
  std::size_t hidden = 64;
  std::size_t heads = 1;  // GAT only; head outputs are averaged
  double lambda = 0.62;   // readout weight of the post node
  double learning_rate = 0.01;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

/// Flat list of named parameter tensors. Per layer:
///   GCN  W, b
///   SAGE W_self, W_neigh, b
///   GAT  (W, a_src, a_dst) per head, then b
/// followed by the classifier W_cls (hidden x 2) and b_cls (1 x 2).
template <typename T>
struct ModelParams {
  Arch arch = Arch::GCN;
  std::size_t in_dim = 0;
  std::size_t hidden = 0;
  std::size_t layers = 0;
  std::size_t heads = 1;
  double lambda = 0.5;
  std::vector<std::string> names;
  std::vector<Matrix<T>> tensors;

  std::size_t tensors_per_layer() const;
  std::size_t layer_offset(std::size_t l) const { return l * tensors_per_layer(); }
  std::size_t classifier_offset() const { return layers * tensors_per_layer(); }
  std::size_t parameter_count() const;

  /// Same layout, all zeros.
  ModelParams zeros_like() const;

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.arch = arch;
    out.in_dim = in_dim;
    out.hidden = hidden;
    out.layers = layers;
    out.heads = heads;
    out.lambda = lambda;
    out.names = names;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }

  bool operator==(const ModelParams&) const = default;
};

/// Glorot-uniform weights, zero biases.
ModelParams<float> init_params(const GnnConfig& cfg, std::size_t in_dim);

/// Everything the backward pass needs from one forward evaluation.
template <typename T>
struct ForwardTrace {
  struct Layer {
    Matrix<T> input;
    Matrix<T> pre;         // before ReLU
    Matrix<T> neigh_mean;  // SAGE
    std::vector<Matrix<T>> z;  // per head (GCN uses z[0])
    /// GAT: per head, per node, attention over [self, neighbors...].
    std::vector<std::vector<std::vector<T>>> alpha;
    std::vector<std::vector<std::vector<T>>> score;  // pre-LeakyReLU
  };
  std::vector<Layer> layers;
  Matrix<T> output;  // final node embeddings (n x hidden)
  std::vector<T> pooled;
  std::array<T, 2> logits{};
};

struct NumericError : Error {
  using Error::Error;
};

/// λ·(post row) + (1−λ)·(mean of comment rows).
template <typename T>
std::vector<T> readout(const Matrix<T>& node_embeddings, double lambda);

/// W_cls·pooled + b_cls.
template <typename T>
std::array<T, 2> classify(const ModelParams<T>& params, std::span<const T> pooled);

template <typename T>
ForwardTrace<T> forward_trace(const ModelParams<T>& params, const SampleGraph& g);

struct ForwardOutput {
  Matrix<float> node_embeddings;
  std::vector<float> pooled;
  std::array<float, 2> logits{};
};

ForwardOutput forward(const ModelParams<float>& params, const SampleGraph& g);

/// Cross-entropy of one labeled sample; gradients are added into `grads`
/// scaled by `scale`.
template <typename T>
double loss_and_accumulate(const ModelParams<T>& params, const SampleGraph& g, T scale, ModelParams<T>& grads);

template <typename T>
struct LossAndGrads {
  double loss = 0;
  ModelParams<T> grads;
};

/// Mean cross-entropy over `batch` and its gradient.
template <typename T>
LossAndGrads<T> loss_and_grads(const ModelParams<T>& params, const std::vector<SampleGraph>& batch);

/// -log softmax(logits)[label], evaluated stably.
double cross_entropy(std::array<double, 2> logits, Label label);

struct Prediction {
  Label label = Label::True;
  double prob = 0.5;
};

/// Argmax of the softmax; exact ties go to True.
Prediction predict_from_logits(std::array<double, 2> logits);
Prediction predict(const ModelParams<float>& params, const SampleGraph& g);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_acc = 0;
};

struct TrainResult {
  ModelParams<float> params;  // from the epoch with minimum validation loss
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::vector<EpochRecord> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<EpochRecord>& history() const { return history_; }

 private:
  std::vector<EpochRecord> history_;
};

/// Adam on mini-batches with a seeded per-epoch shuffle.
TrainResult train(const std::vector<SampleGraph>& train_set, const std::vector<SampleGraph>& val_set,
                  const GnnConfig& cfg);

struct SetMetrics {
  double loss = 0;
  double accuracy = 0;
};
SetMetrics evaluate_set(const ModelParams<float>& params, const std::vector<SampleGraph>& set);

std::string history_csv(const std::vector<EpochRecord>& history);

/// UENMDL1 checkpoint with sha256 sidecar.
std::string encode_model(const ModelParams<float>& params);
ModelParams<float> decode_model(std::string_view bytes, const std::string& what);
void save_model(const std::filesystem::path& path, const ModelParams<float>& params);
ModelParams<float> load_model(const std::filesystem::path& path);

}  // namespace uen
