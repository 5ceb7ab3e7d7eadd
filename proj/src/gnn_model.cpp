#include "uen/gnn_model.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace uen {

const char* arch_name(Arch a) {
  switch (a) {
    case Arch::GCN: return "gcn";
    case Arch::SAGE: return "sage";
    case Arch::GAT: return "gat";
  }
  return "?";
}

Arch parse_arch(std::string_view s) {
  if (s == "gcn" || s == "GCN") return Arch::GCN;
  if (s == "sage" || s == "SAGE" || s == "graphsage") return Arch::SAGE;
  if (s == "gat" || s == "GAT") return Arch::GAT;
  throw Error("unknown architecture: " + std::string(s));
}

void GnnConfig::validate() const {
  if (layers < 1) throw Error("gnn: layers must be >= 1");
  if (hidden < 1) throw Error("gnn: hidden must be >= 1");
  if (heads < 1) throw Error("gnn: heads must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("gnn: lambda must lie in [0,1]");
  if (!(learning_rate > 0)) throw Error("gnn: learning rate must be positive");
  if (epochs < 1 || batch_size < 1) throw Error("gnn: epochs and batch size must be >= 1");
}

template <typename T>
std::size_t ModelParams<T>::tensors_per_layer() const {
  switch (arch) {
    case Arch::GCN: return 2;
    case Arch::SAGE: return 3;
    case Arch::GAT: return 3 * heads + 1;
  }
  return 0;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like() const {
  ModelParams out;
  out.arch = arch;
  out.in_dim = in_dim;
  out.hidden = hidden;
  out.layers = layers;
  out.heads = heads;
  out.lambda = lambda;
  out.names = names;
  for (const auto& t : tensors) out.tensors.emplace_back(t.rows(), t.cols());
  return out;
}

ModelParams<float> init_params(const GnnConfig& cfg, std::size_t in_dim) {
  cfg.validate();
  if (in_dim == 0) throw Error("gnn: input dimension must be positive");
  ModelParams<float> p;
  p.arch = cfg.arch;
  p.in_dim = in_dim;
  p.hidden = cfg.hidden;
  p.layers = cfg.layers;
  p.heads = cfg.arch == Arch::GAT ? cfg.heads : 1;
  p.lambda = cfg.lambda;
  Rng rng(mix_seed(cfg.seed, 0x1417));

  auto glorot = [&](std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out) {
    Matrix<float> m(rows, cols);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : m.data()) v = static_cast<float>(rng.uniform(-limit, limit));
    return m;
  };
  auto add = [&](std::string name, Matrix<float> m) {
    p.names.push_back(std::move(name));
    p.tensors.push_back(std::move(m));
  };

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::size_t in = l == 0 ? in_dim : cfg.hidden;
    const std::size_t out = cfg.hidden;
    const std::string pre = "layer" + std::to_string(l) + ".";
    switch (cfg.arch) {
      case Arch::GCN:
        add(pre + "W", glorot(in, out, in, out));
        break;
      case Arch::SAGE:
        add(pre + "W_self", glorot(in, out, in, out));
        add(pre + "W_neigh", glorot(in, out, in, out));
        break;
      case Arch::GAT:
        for (std::size_t h = 0; h < p.heads; ++h) {
          const std::string hp = pre + "head" + std::to_string(h) + ".";
          add(hp + "W", glorot(in, out, in, out));
          add(hp + "a_src", glorot(1, out, out, 1));
          add(hp + "a_dst", glorot(1, out, out, 1));
        }
        break;
    }
    add(pre + "b", Matrix<float>(1, out));
  }
  add("classifier.W", glorot(cfg.hidden, 2, cfg.hidden, 2));
  add("classifier.b", Matrix<float>(1, 2));
  return p;
}

namespace {

using Adjacency = std::vector<std::vector<std::uint32_t>>;

Adjacency make_adjacency(const SampleGraph& g) {
  const std::size_t n = g.node_count();
  Adjacency adj(n);
  for (const auto& [a, b] : g.edges) {
    if (a >= n || b >= n) throw DimensionError("sample graph edge refers to a missing node");
    if (a == b) continue;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

template <typename T>
void check_finite(const Matrix<T>& m, std::size_t layer) {
  for (T v : m.data()) {
    if (!std::isfinite(v)) throw NumericError("non-finite activation at layer " + std::to_string(layer));
  }
}

template <typename T>
T leaky(T x) {
  return x > T{0} ? x : static_cast<T>(0.2) * x;
}

template <typename T>
void relu_inplace(Matrix<T>& m) {
  for (auto& v : m.data()) v = v > T{0} ? v : T{0};
}

template <typename T>
void add_bias(Matrix<T>& m, const Matrix<T>& b) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t k = 0; k < m.cols(); ++k) r[k] += b(0, k);
  }
}

template <typename T>
typename ForwardTrace<T>::Layer layer_forward(const ModelParams<T>& p, std::size_t l, const Matrix<T>& h,
                                              const Adjacency& adj) {
  typename ForwardTrace<T>::Layer L;
  L.input = h;
  const std::size_t n = h.rows();
  const std::size_t off = p.layer_offset(l);
  const std::size_t out = p.hidden;

  switch (p.arch) {
    case Arch::GCN: {
      const auto& W = p.tensors[off];
      const auto& b = p.tensors[off + 1];
      L.z.push_back(matmul(h, W));
      const auto& z = L.z[0];
      L.pre = Matrix<T>(n, out);
      for (std::size_t i = 0; i < n; ++i) {
        const double di = 1.0 + static_cast<double>(adj[i].size());
        auto dst = L.pre.row(i);
        auto accumulate = [&](std::size_t j) {
          const double dj = 1.0 + static_cast<double>(adj[j].size());
          const T c = static_cast<T>(1.0 / std::sqrt(di * dj));
          auto src = z.row(j);
          for (std::size_t k = 0; k < out; ++k) dst[k] += c * src[k];
        };
        accumulate(i);
        for (auto j : adj[i]) accumulate(j);
      }
      add_bias(L.pre, b);
      break;
    }
    case Arch::SAGE: {
      const auto& Ws = p.tensors[off];
      const auto& Wn = p.tensors[off + 1];
      const auto& b = p.tensors[off + 2];
      L.neigh_mean = Matrix<T>(n, h.cols());
      for (std::size_t i = 0; i < n; ++i) {
        if (adj[i].empty()) continue;
        const T inv = static_cast<T>(1.0 / static_cast<double>(adj[i].size()));
        auto dst = L.neigh_mean.row(i);
        for (auto j : adj[i]) {
          auto src = h.row(j);
          for (std::size_t k = 0; k < h.cols(); ++k) dst[k] += src[k];
        }
        for (auto& v : dst) v *= inv;
      }
      L.pre = matmul(h, Ws);
      const auto nb = matmul(L.neigh_mean, Wn);
      for (std::size_t i = 0; i < L.pre.size(); ++i) L.pre.data()[i] += nb.data()[i];
      add_bias(L.pre, b);
      break;
    }
    case Arch::GAT: {
      L.pre = Matrix<T>(n, out);
      const T head_scale = static_cast<T>(1.0 / static_cast<double>(p.heads));
      for (std::size_t hd = 0; hd < p.heads; ++hd) {
        const auto& W = p.tensors[off + 3 * hd];
        const auto& a_src = p.tensors[off + 3 * hd + 1];
        const auto& a_dst = p.tensors[off + 3 * hd + 2];
        L.z.push_back(matmul(h, W));
        const auto& z = L.z.back();
        std::vector<T> s(n), t(n);
        for (std::size_t i = 0; i < n; ++i) {
          double si = 0, ti = 0;
          auto zi = z.row(i);
          for (std::size_t k = 0; k < out; ++k) {
            si += static_cast<double>(a_dst(0, k)) * zi[k];
            ti += static_cast<double>(a_src(0, k)) * zi[k];
          }
          s[i] = static_cast<T>(si);
          t[i] = static_cast<T>(ti);
        }
        std::vector<std::vector<T>> alpha(n), score(n);
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t m = adj[i].size() + 1;
          score[i].resize(m);
          alpha[i].resize(m);
          score[i][0] = s[i] + t[i];
          for (std::size_t q = 0; q < adj[i].size(); ++q) score[i][q + 1] = s[i] + t[adj[i][q]];
          double mx = -std::numeric_limits<double>::infinity();
          for (auto sc : score[i]) mx = std::max(mx, static_cast<double>(leaky(sc)));
          double total = 0;
          std::vector<double> ex(m);
          for (std::size_t q = 0; q < m; ++q) {
            ex[q] = std::exp(static_cast<double>(leaky(score[i][q])) - mx);
            total += ex[q];
          }
          for (std::size_t q = 0; q < m; ++q) alpha[i][q] = static_cast<T>(ex[q] / total);
          auto dst = L.pre.row(i);
          auto mix = [&](std::size_t j, T a) {
            auto src = z.row(j);
            const T w = a * head_scale;
            for (std::size_t k = 0; k < out; ++k) dst[k] += w * src[k];
          };
          mix(i, alpha[i][0]);
          for (std::size_t q = 0; q < adj[i].size(); ++q) mix(adj[i][q], alpha[i][q + 1]);
        }
        L.alpha.push_back(std::move(alpha));
        L.score.push_back(std::move(score));
      }
      add_bias(L.pre, p.tensors[off + 3 * p.heads]);
      break;
    }
  }
  return L;
}

// Returns dL/d(input) when `need_input_grad`.
template <typename T>
Matrix<T> layer_backward(const ModelParams<T>& p, std::size_t l, const typename ForwardTrace<T>::Layer& L,
                         const Matrix<T>& d_out, const Adjacency& adj, ModelParams<T>& grads, bool need_input_grad) {
  const std::size_t n = L.input.rows();
  const std::size_t out = p.hidden;
  const std::size_t off = p.layer_offset(l);

  Matrix<T> dM(n, out);
  for (std::size_t i = 0; i < dM.size(); ++i) dM.data()[i] = L.pre.data()[i] > T{0} ? d_out.data()[i] : T{0};

  const std::size_t bias_idx = p.arch == Arch::GAT ? off + 3 * p.heads : off + p.tensors_per_layer() - 1;
  {
    auto& db = grads.tensors[bias_idx];
    for (std::size_t k = 0; k < out; ++k) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += dM(i, k);
      db(0, k) += static_cast<T>(s);
    }
  }

  Matrix<T> dH;
  switch (p.arch) {
    case Arch::GCN: {
      Matrix<T> dZ(n, out);
      for (std::size_t i = 0; i < n; ++i) {
        const double di = 1.0 + static_cast<double>(adj[i].size());
        auto dst = dZ.row(i);
        auto accumulate = [&](std::size_t j) {
          const double dj = 1.0 + static_cast<double>(adj[j].size());
          const T c = static_cast<T>(1.0 / std::sqrt(di * dj));
          auto src = dM.row(j);
          for (std::size_t k = 0; k < out; ++k) dst[k] += c * src[k];
        };
        accumulate(i);
        for (auto j : adj[i]) accumulate(j);
      }
      add_matmul_tn(L.input, dZ, grads.tensors[off]);
      if (need_input_grad) dH = matmul_nt(dZ, p.tensors[off]);
      break;
    }
    case Arch::SAGE: {
      add_matmul_tn(L.input, dM, grads.tensors[off]);
      add_matmul_tn(L.neigh_mean, dM, grads.tensors[off + 1]);
      if (need_input_grad) {
        dH = matmul_nt(dM, p.tensors[off]);
        const auto dMean = matmul_nt(dM, p.tensors[off + 1]);
        for (std::size_t i = 0; i < n; ++i) {
          if (adj[i].empty()) continue;
          const T inv = static_cast<T>(1.0 / static_cast<double>(adj[i].size()));
          auto src = dMean.row(i);
          for (auto j : adj[i]) {
            auto dst = dH.row(j);
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += inv * src[k];
          }
        }
      }
      break;
    }
    case Arch::GAT: {
      const T head_scale = static_cast<T>(1.0 / static_cast<double>(p.heads));
      if (need_input_grad) dH = Matrix<T>(n, L.input.cols());
      for (std::size_t hd = 0; hd < p.heads; ++hd) {
        const auto& W = p.tensors[off + 3 * hd];
        const auto& a_src = p.tensors[off + 3 * hd + 1];
        const auto& a_dst = p.tensors[off + 3 * hd + 2];
        const auto& z = L.z[hd];
        const auto& alpha = L.alpha[hd];
        const auto& score = L.score[hd];
        Matrix<T> dZ(n, out);
        std::vector<double> ds(n, 0.0), dt(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t m = adj[i].size() + 1;
          auto node = [&](std::size_t q) -> std::size_t { return q == 0 ? i : adj[i][q - 1]; };
          auto dOi = dM.row(i);
          std::vector<double> dalpha(m);
          double weighted = 0;
          for (std::size_t q = 0; q < m; ++q) {
            const std::size_t j = node(q);
            auto zj = z.row(j);
            double d = 0;
            for (std::size_t k = 0; k < out; ++k) d += static_cast<double>(dOi[k]) * zj[k];
            dalpha[q] = d * head_scale;
            weighted += static_cast<double>(alpha[i][q]) * dalpha[q];
            auto dzj = dZ.row(j);
            const T w = alpha[i][q] * head_scale;
            for (std::size_t k = 0; k < out; ++k) dzj[k] += w * dOi[k];
          }
          for (std::size_t q = 0; q < m; ++q) {
            const double de = static_cast<double>(alpha[i][q]) * (dalpha[q] - weighted);
            const double dscore = de * (score[i][q] > T{0} ? 1.0 : 0.2);
            ds[i] += dscore;
            dt[node(q)] += dscore;
          }
        }
        auto& ga_src = grads.tensors[off + 3 * hd + 1];
        auto& ga_dst = grads.tensors[off + 3 * hd + 2];
        for (std::size_t k = 0; k < out; ++k) {
          double gs = 0, gd = 0;
          for (std::size_t i = 0; i < n; ++i) {
            gd += ds[i] * z(i, k);
            gs += dt[i] * z(i, k);
          }
          ga_dst(0, k) += static_cast<T>(gd);
          ga_src(0, k) += static_cast<T>(gs);
        }
        for (std::size_t i = 0; i < n; ++i) {
          auto dzi = dZ.row(i);
          for (std::size_t k = 0; k < out; ++k) {
            dzi[k] += static_cast<T>(ds[i] * a_dst(0, k) + dt[i] * a_src(0, k));
          }
        }
        add_matmul_tn(L.input, dZ, grads.tensors[off + 3 * hd]);
        if (need_input_grad) {
          const auto part = matmul_nt(dZ, W);
          for (std::size_t i = 0; i < dH.size(); ++i) dH.data()[i] += part.data()[i];
        }
      }
      break;
    }
  }
  return dH;
}

void check_layout(const ModelParams<float>& p) {
  if (p.tensors.size() != p.layers * p.tensors_per_layer() + 2 || p.names.size() != p.tensors.size()) {
    throw DimensionError("model parameters do not match their declared layout");
  }
}

}  // namespace

template <typename T>
std::vector<T> readout(const Matrix<T>& node_embeddings, double lambda) {
  const std::size_t n = node_embeddings.rows();
  const std::size_t d = node_embeddings.cols();
  if (n < 2) throw DimensionError("readout needs a post and at least one comment");
  std::vector<T> pooled(d, T{});
  for (std::size_t k = 0; k < d; ++k) {
    double comments = 0;
    for (std::size_t i = 1; i < n; ++i) comments += node_embeddings(i, k);
    comments /= static_cast<double>(n - 1);
    pooled[k] = static_cast<T>(lambda * static_cast<double>(node_embeddings(0, k)) + (1.0 - lambda) * comments);
  }
  return pooled;
}

template <typename T>
std::array<T, 2> classify(const ModelParams<T>& params, std::span<const T> pooled) {
  const auto& Wc = params.tensors[params.classifier_offset()];
  const auto& bc = params.tensors[params.classifier_offset() + 1];
  if (pooled.size() != Wc.rows()) throw DimensionError("classify: pooled width does not match the classifier");
  std::array<T, 2> logits{};
  for (std::size_t c = 0; c < 2; ++c) {
    double z = bc(0, c);
    for (std::size_t k = 0; k < pooled.size(); ++k) z += static_cast<double>(pooled[k]) * Wc(k, c);
    logits[c] = static_cast<T>(z);
  }
  return logits;
}

template std::vector<float> readout(const Matrix<float>&, double);
template std::vector<double> readout(const Matrix<double>&, double);
template std::array<float, 2> classify(const ModelParams<float>&, std::span<const float>);
template std::array<double, 2> classify(const ModelParams<double>&, std::span<const double>);

template <typename T>
ForwardTrace<T> forward_trace(const ModelParams<T>& params, const SampleGraph& g) {
  if (g.features.cols() != params.in_dim) {
    throw DimensionError("feature width " + std::to_string(g.features.cols()) + " does not match model input " +
                         std::to_string(params.in_dim));
  }
  if (g.node_count() < 2) throw DimensionError("sample graph needs a post and at least one comment");
  const auto adj = make_adjacency(g);
  ForwardTrace<T> tr;
  Matrix<T> h = g.features.template cast<T>();
  for (std::size_t l = 0; l < params.layers; ++l) {
    auto L = layer_forward(params, l, h, adj);
    check_finite(L.pre, l);
    h = L.pre;
    relu_inplace(h);
    tr.layers.push_back(std::move(L));
  }
  tr.output = std::move(h);

  tr.pooled = readout(tr.output, params.lambda);
  tr.logits = classify(params, std::span<const T>(tr.pooled));
  if (!std::isfinite(tr.logits[0]) || !std::isfinite(tr.logits[1])) {
    throw NumericError("non-finite logits at layer " + std::to_string(params.layers));
  }
  return tr;
}

ForwardOutput forward(const ModelParams<float>& params, const SampleGraph& g) {
  auto tr = forward_trace(params, g);
  return {std::move(tr.output), std::move(tr.pooled), tr.logits};
}

double cross_entropy(std::array<double, 2> z, Label label) {
  const double mx = std::max(z[0], z[1]);
  const double lse = mx + std::log(std::exp(z[0] - mx) + std::exp(z[1] - mx));
  return lse - z[static_cast<int>(label)];
}

template <typename T>
double loss_and_accumulate(const ModelParams<T>& params, const SampleGraph& g, T scale, ModelParams<T>& grads) {
  if (!g.label) throw Error("loss requested for unlabeled sample " + g.post_id);
  const auto adj = make_adjacency(g);
  const auto tr = forward_trace(params, g);
  const std::array<double, 2> z{static_cast<double>(tr.logits[0]), static_cast<double>(tr.logits[1])};
  const double loss = cross_entropy(z, *g.label);

  const double mx = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - mx), e1 = std::exp(z[1] - mx);
  std::array<double, 2> dz{e0 / (e0 + e1), e1 / (e0 + e1)};
  dz[static_cast<int>(*g.label)] -= 1.0;
  for (auto& v : dz) v *= static_cast<double>(scale);

  const std::size_t d = params.hidden;
  const std::size_t n = tr.output.rows();
  const auto& Wc = params.tensors[params.classifier_offset()];
  auto& gW = grads.tensors[params.classifier_offset()];
  auto& gb = grads.tensors[params.classifier_offset() + 1];
  std::vector<double> dpool(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t c = 0; c < 2; ++c) {
      gW(k, c) += static_cast<T>(static_cast<double>(tr.pooled[k]) * dz[c]);
      dpool[k] += static_cast<double>(Wc(k, c)) * dz[c];
    }
  }
  gb(0, 0) += static_cast<T>(dz[0]);
  gb(0, 1) += static_cast<T>(dz[1]);

  Matrix<T> dH(n, d);
  const double comment_share = (1.0 - params.lambda) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < d; ++k) {
    dH(0, k) = static_cast<T>(params.lambda * dpool[k]);
    for (std::size_t i = 1; i < n; ++i) dH(i, k) = static_cast<T>(comment_share * dpool[k]);
  }
  for (std::size_t l = params.layers; l-- > 0;) {
    dH = layer_backward(params, l, tr.layers[l], dH, adj, grads, l > 0);
  }
  return loss;
}

template <typename T>
LossAndGrads<T> loss_and_grads(const ModelParams<T>& params, const std::vector<SampleGraph>& batch) {
  if (batch.empty()) throw Error("loss_and_grads: empty batch");
  LossAndGrads<T> out;
  out.grads = params.zeros_like();
  const T scale = static_cast<T>(1.0 / static_cast<double>(batch.size()));
  double total = 0;
  for (const auto& g : batch) total += loss_and_accumulate(params, g, scale, out.grads);
  out.loss = total / static_cast<double>(batch.size());
  return out;
}

Prediction predict_from_logits(std::array<double, 2> z) {
  const double mx = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - mx), e1 = std::exp(z[1] - mx);
  const double p1 = e1 / (e0 + e1);
  if (z[0] > z[1]) return {Label::Fake, 1.0 - p1};
  return {Label::True, p1};
}

Prediction predict(const ModelParams<float>& params, const SampleGraph& g) {
  const auto tr = forward_trace(params, g);
  return predict_from_logits({static_cast<double>(tr.logits[0]), static_cast<double>(tr.logits[1])});
}

SetMetrics evaluate_set(const ModelParams<float>& params, const std::vector<SampleGraph>& set) {
  if (set.empty()) throw Error("evaluate_set: empty set");
  double loss = 0;
  std::size_t correct = 0;
  for (const auto& g : set) {
    if (!g.label) throw Error("evaluate_set: unlabeled sample " + g.post_id);
    const auto tr = forward_trace(params, g);
    const std::array<double, 2> z{static_cast<double>(tr.logits[0]), static_cast<double>(tr.logits[1])};
    loss += cross_entropy(z, *g.label);
    correct += predict_from_logits(z).label == *g.label ? 1 : 0;
  }
  return {loss / static_cast<double>(set.size()), static_cast<double>(correct) / static_cast<double>(set.size())};
}

namespace {

struct AdamState {
  std::vector<std::vector<float>> m, v;
  std::size_t step = 0;
};

void adam_step(ModelParams<float>& params, const std::vector<std::vector<double>>& grad, AdamState& st, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++st.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    auto& w = params.tensors[t].data();
    auto& m = st.m[t];
    auto& v = st.v[t];
    const auto& g = grad[t];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double mi = beta1 * m[i] + (1.0 - beta1) * g[i];
      const double vi = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      w[i] = static_cast<float>(w[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
    }
  }
}

}  // namespace

TrainResult train(const std::vector<SampleGraph>& train_set, const std::vector<SampleGraph>& val_set,
                  const GnnConfig& cfg) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw Error("train: train and validation sets must be non-empty");
  const std::size_t in_dim = train_set.front().features.cols();
  for (const auto* set : {&train_set, &val_set}) {
    for (const auto& g : *set) {
      if (!g.label) throw Error("train: unlabeled sample " + g.post_id);
      if (g.features.cols() != in_dim) throw DimensionError("train: inconsistent feature widths");
    }
  }

  TrainResult result;
  auto params = init_params(cfg, in_dim);
  check_layout(params);
  result.params = params;

  AdamState adam;
  for (const auto& t : params.tensors) {
    adam.m.emplace_back(t.size(), 0.0f);
    adam.v.emplace_back(t.size(), 0.0f);
  }

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<ModelParams<float>> per_sample;
  std::vector<double> per_sample_loss;
  std::vector<std::vector<double>> grad_sum(params.tensors.size());
  double best_val = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, 0xE90C, epoch));
    rng.shuffle(order);
    double epoch_loss = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t bn = end - start;
      if (per_sample.size() < bn) per_sample.resize(bn, params.zeros_like());
      per_sample_loss.assign(bn, 0.0);
      for (std::size_t b = 0; b < bn; ++b) {
        for (auto& t : per_sample[b].tensors) t.fill(0.0f);
      }
      auto work = [&](std::size_t b0, std::size_t b1, std::exception_ptr& slot) {
        try {
          for (std::size_t b = b0; b < b1; ++b) {
            per_sample_loss[b] = loss_and_accumulate(params, train_set[order[start + b]], 1.0f, per_sample[b]);
          }
        } catch (...) {
          slot = std::current_exception();
        }
      };
      const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.threads, bn));
      std::vector<std::exception_ptr> errors(threads);
      if (threads == 1) {
        work(0, bn, errors[0]);
      } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (bn + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
          const std::size_t b0 = t * chunk, b1 = std::min(bn, b0 + chunk);
          if (b0 < b1) pool.emplace_back(work, b0, b1, std::ref(errors[t]));
        }
      }
      std::exception_ptr failure;
      for (auto& e : errors) {
        if (e && !failure) failure = e;
      }
      if (failure) {
        try {
          std::rethrow_exception(failure);
        } catch (const NumericError& e) {
          throw TrainingDiverged(std::string("training diverged: ") + e.what(), result.history);
        }
      }
      // Fixed-order reduction keeps the update independent of thread count.
      for (std::size_t t = 0; t < params.tensors.size(); ++t) grad_sum[t].assign(params.tensors[t].size(), 0.0);
      double batch_loss = 0;
      for (std::size_t b = 0; b < bn; ++b) {
        batch_loss += per_sample_loss[b];
        for (std::size_t t = 0; t < params.tensors.size(); ++t) {
          const auto& src = per_sample[b].tensors[t].data();
          auto& dst = grad_sum[t];
          for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
        }
      }
      if (!std::isfinite(batch_loss)) throw TrainingDiverged("training diverged: non-finite loss", result.history);
      const double inv = 1.0 / static_cast<double>(bn);
      for (auto& g : grad_sum) {
        for (auto& v : g) v *= inv;
      }
      adam_step(params, grad_sum, adam, cfg.learning_rate);
      epoch_loss += batch_loss;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(train_set.size());
    SetMetrics val;
    try {
      val = evaluate_set(params, val_set);
    } catch (const NumericError& e) {
      throw TrainingDiverged(std::string("training diverged: ") + e.what(), result.history);
    }
    rec.val_loss = val.loss;
    rec.val_acc = val.accuracy;
    result.history.push_back(rec);
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch), result.history);
    }
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,train_loss,val_loss,val_acc\n";
  for (const auto& r : history) out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_acc << '\n';
  return out.str();
}

namespace {
constexpr std::string_view kModelMagic = "UENMDL1";
}

std::string encode_model(const ModelParams<float>& p) {
  check_layout(p);
  ByteWriter w;
  w.bytes(kModelMagic);
  w.u32(static_cast<std::uint32_t>(p.arch));
  w.u32(static_cast<std::uint32_t>(p.in_dim));
  w.u32(static_cast<std::uint32_t>(p.hidden));
  w.u32(static_cast<std::uint32_t>(p.layers));
  w.u32(static_cast<std::uint32_t>(p.heads));
  w.f64(p.lambda);
  w.u32(static_cast<std::uint32_t>(p.tensors.size()));
  for (std::size_t t = 0; t < p.tensors.size(); ++t) {
    w.str(p.names[t]);
    w.u32(static_cast<std::uint32_t>(p.tensors[t].rows()));
    w.u32(static_cast<std::uint32_t>(p.tensors[t].cols()));
  }
  for (const auto& t : p.tensors) w.f32s(t.data());
  return w.buffer();
}

ModelParams<float> decode_model(std::string_view bytes, const std::string& what) {
  ByteReader r(bytes, what);
  if (r.bytes(kModelMagic.size()) != kModelMagic) throw FormatError(what + ": not a UENMDL1 file");
  ModelParams<float> p;
  const auto tag = r.u32();
  if (tag > 2) throw FormatError(what + ": unknown architecture tag " + std::to_string(tag));
  p.arch = static_cast<Arch>(tag);
  p.in_dim = r.u32();
  p.hidden = r.u32();
  p.layers = r.u32();
  p.heads = r.u32();
  p.lambda = r.f64();
  const auto count = r.u32();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  for (std::uint32_t t = 0; t < count; ++t) {
    p.names.push_back(r.str());
    const auto rows = r.u32();
    const auto cols = r.u32();
    shapes.emplace_back(rows, cols);
  }
  for (const auto& [rows, cols] : shapes) {
    Matrix<float> m(rows, cols);
    r.f32s(m.data());
    p.tensors.push_back(std::move(m));
  }
  if (!r.at_end()) throw FormatError(what + ": trailing bytes after payload");
  check_layout(p);
  return p;
}

void save_model(const std::filesystem::path& path, const ModelParams<float>& params) {
  nlohmann::ordered_json meta;
  meta["format"] = "UENMDL1";
  meta["arch"] = arch_name(params.arch);
  meta["in_dim"] = params.in_dim;
  meta["hidden"] = params.hidden;
  meta["layers"] = params.layers;
  meta["heads"] = params.heads;
  meta["lambda"] = params.lambda;
  write_with_sidecar(path, encode_model(params), meta.dump());
}

ModelParams<float> load_model(const std::filesystem::path& path) {
  return decode_model(read_verified(path), path.string());
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ForwardTrace<float> forward_trace(const ModelParams<float>&, const SampleGraph&);
template ForwardTrace<double> forward_trace(const ModelParams<double>&, const SampleGraph&);
template double loss_and_accumulate(const ModelParams<float>&, const SampleGraph&, float, ModelParams<float>&);
template double loss_and_accumulate(const ModelParams<double>&, const SampleGraph&, double, ModelParams<double>&);
template LossAndGrads<float> loss_and_grads(const ModelParams<float>&, const std::vector<SampleGraph>&);
template LossAndGrads<double> loss_and_grads(const ModelParams<double>&, const std::vector<SampleGraph>&);

}  // namespace uen
