#pragma once

#include <string>
#include <vector>

#include "addes/label_graph.hpp"
#include "addes/nn.hpp"

namespace addes {

struct ClassifierConfig {
  std::vector<std::size_t> extractor_hidden{128, 128};
  std::size_t feature_dim = 64;  // F
  /// Hidden widths of the GCN; the layer count is gcn_hidden.size() + 1.
  std::vector<std::size_t> gcn_hidden{64};
  Activation extractor_activation = Activation::kLeakyRelu;
};

struct Prediction {
  Tensor y_s_hat;  // B x |S|
  Tensor y_t_hat;  // B x |T|
};

/// q_C(y_s, y_t | x, G): a feature extractor h_f = f(x) and a GCN that turns
/// the class graph into one linear classifier per class, scored as
/// sigmoid(W h_f).
class GcnClassifier {
 public:
  static GcnClassifier create(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                              const LabelGraph& graph, const ClassifierConfig& config, Rng& rng);

  /// Swap the class graph (adjacency and node embeddings) used to synthesize
  /// classifier weights. Dimensions must match the existing parameters.
  void set_graph(const LabelGraph& graph);

  Var extract_features(Tape& tape, ParamStore& store, Var x, bool track) const;
  /// H^0 = V; H^{l+1} = f(norm(A) H^l W^l), linear last layer. |W| x F.
  Var synthesize_classifiers(Tape& tape, ParamStore& store, bool track) const;
  /// B x |W| logits h_f W^T.
  Var logits(Tape& tape, ParamStore& store, Var x, bool track) const;
  /// B x |W| sigmoid probabilities, S columns first.
  Var classify(Tape& tape, ParamStore& store, Var x, bool track) const;

  Prediction predict(ParamStore& store, const Tensor& x) const;

  std::size_t num_inexact() const { return num_inexact_; }
  std::size_t num_target() const { return num_target_; }
  std::size_t num_classes() const { return num_inexact_ + num_target_; }
  std::size_t input_dim() const { return extractor_.in_dim(); }
  const Mlp& extractor() const { return extractor_; }
  const std::vector<std::size_t>& gcn_weights() const { return gcn_weights_; }
  const Tensor& normalized_adjacency() const { return norm_adj_; }

 private:
  Mlp extractor_;
  std::vector<std::size_t> gcn_weights_;
  Tensor norm_adj_;
  Tensor embeddings_;
  std::size_t num_inexact_ = 0, num_target_ = 0;
};

/// Mean over the batch of multi-label cross-entropy on the S columns only.
Var loss_supervised(Var probs, const Tensor& y_s);

}  // namespace addes
