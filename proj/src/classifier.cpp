#include "addes/classifier.hpp"

#include "addes/probability.hpp"

namespace addes {

GcnClassifier GcnClassifier::create(ParamStore& store, const std::string& prefix,
                                    std::size_t input_dim, const LabelGraph& graph,
                                    const ClassifierConfig& config, Rng& rng) {
  GcnClassifier c;
  c.extractor_ = Mlp::create(store, prefix + "/extractor", input_dim, config.extractor_hidden,
                             config.feature_dim, config.extractor_activation, rng);
  std::size_t prev = graph.embeddings.cols();
  std::vector<std::size_t> dims(config.gcn_hidden);
  dims.push_back(config.feature_dim);
  for (std::size_t l = 0; l < dims.size(); ++l) {
    c.gcn_weights_.push_back(
        add_weight(store, prefix + "/gcn/layer" + std::to_string(l) + "/weight", prev, dims[l], rng));
    prev = dims[l];
  }
  c.num_inexact_ = graph.space.num_inexact();
  c.num_target_ = graph.space.num_target();
  c.set_graph(graph);
  return c;
}

void GcnClassifier::set_graph(const LabelGraph& graph) {
  const std::size_t w = graph.space.num_classes();
  if (graph.adjacency.rows() != w || graph.embeddings.rows() != w) {
    throw DimensionError("classifier graph: adjacency/embeddings do not match |W| = " +
                         std::to_string(w));
  }
  if (!embeddings_.values().empty() && graph.embeddings.cols() != embeddings_.cols()) {
    throw DimensionError("classifier graph: embedding width changed");
  }
  norm_adj_ = normalize_adjacency(graph.adjacency);
  embeddings_ = graph.embeddings;
  num_inexact_ = graph.space.num_inexact();
  num_target_ = graph.space.num_target();
}

Var GcnClassifier::extract_features(Tape& tape, ParamStore& store, Var x, bool track) const {
  return extractor_.forward(tape, store, x, track);
}

Var GcnClassifier::synthesize_classifiers(Tape& tape, ParamStore& store, bool track) const {
  Var adj = tape.constant(norm_adj_);
  Var h = tape.constant(embeddings_);
  for (std::size_t l = 0; l < gcn_weights_.size(); ++l) {
    Var w = tape.param(store[gcn_weights_[l]], track);
    if (h.cols() != w.rows()) {
      throw DimensionError("GCN layer " + std::to_string(l) + ": node features " +
                           shape_string(h.value().shape()) + " vs weight " +
                           shape_string(w.value().shape()));
    }
    h = matmul(matmul(adj, h), w);
    if (l + 1 < gcn_weights_.size()) h = leaky_relu(h, kLeakySlope);
  }
  return h;
}

Var GcnClassifier::logits(Tape& tape, ParamStore& store, Var x, bool track) const {
  Var hf = extract_features(tape, store, x, track);
  Var weights = synthesize_classifiers(tape, store, track);
  return matmul(hf, transpose(weights));
}

Var GcnClassifier::classify(Tape& tape, ParamStore& store, Var x, bool track) const {
  return sigmoid(logits(tape, store, x, track));
}

Prediction GcnClassifier::predict(ParamStore& store, const Tensor& x) const {
  Tape tape;
  Var p = classify(tape, store, tape.constant(Tensor({x.rows(), x.cols()}, x.values())), false);
  const Tensor& pv = p.value();
  const std::size_t b = pv.rows(), s = num_inexact_, t = num_target_;
  Prediction out;
  out.y_s_hat = Tensor(b, std::max<std::size_t>(s, 1));
  if (t > 0) out.y_t_hat = Tensor(b, t);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < s; ++j) out.y_s_hat(i, j) = pv(i, j);
    for (std::size_t j = 0; j < t; ++j) out.y_t_hat(i, j) = pv(i, s + j);
  }
  return out;
}

Var loss_supervised(Var probs, const Tensor& y_s) {
  const std::size_t s = y_s.cols();
  if (probs.rows() != y_s.rows() || probs.cols() < s) {
    throw DimensionError("loss_supervised: predictions " + shape_string(probs.value().shape()) +
                         " vs labels " + shape_string(y_s.shape()));
  }
  Var ps = slice_cols(probs, 0, s);
  Var target = probs.tape->constant(Tensor({y_s.rows(), s}, y_s.values()));
  return mean(binary_cross_entropy(ps, target));
}

}  // namespace addes
