#pragma once

#include <optional>
#include <string>
#include <vector>

#include "addes/classifier.hpp"
#include "addes/label_graph.hpp"
#include "addes/nn.hpp"

namespace addes {

enum class ConstraintLabelSource { kPrior, kPosterior, kMixed };

ConstraintLabelSource label_source_from_string(const std::string& s);
std::string to_string(ConstraintLabelSource s);

struct GenConfig {
  double alpha = 0.1;
  double beta = 0.1;
  double prior_clamp_eps = 1e-3;
  ConstraintLabelSource constraint_label_source = ConstraintLabelSource::kMixed;
  bool constraint_stop_grad_classifier = true;
  bool fixed_decoder_sigma = false;
};

struct ModelConfig {
  std::size_t latent_dim = 8;
  std::vector<std::size_t> encoder_hidden{128};
  std::vector<std::size_t> decoder_hidden{128};
  Activation activation = Activation::kLeakyRelu;
  ClassifierConfig classifier;
};

/// Encoder q_E(z|x), decoder p_D(x|y_s,y_t,z) and classifier q_C(y_s,y_t|x,G)
/// over one parameter store. Parameter names are prefixed "encoder/",
/// "decoder/" and "classifier/".
struct AddesModel {
  ParamStore params;
  ModelConfig config;
  bool fixed_decoder_sigma = false;
  std::size_t data_dim = 0;
  std::size_t num_inexact = 0, num_target = 0;
  Mlp encoder;  // x -> [mu_z, half-log-var_z]
  Mlp decoder;  // [z, y_s, y_t] -> [mu_x, half-log-var_x] (mu_x only when sigma is fixed)
  GcnClassifier classifier;

  static AddesModel create(std::size_t data_dim, const LabelGraph& classifier_graph,
                           const ModelConfig& config, bool fixed_decoder_sigma, Rng& init_rng);
};

/// Which parameter groups receive gradients in a forward pass.
struct Trainable {
  bool encoder = true;
  bool decoder = true;
  bool classifier = true;

  static Trainable all() { return {}; }
  static Trainable none() { return {false, false, false}; }
};

/// Label-side priors derived from D_l and the relation graph: the empirical
/// y_s pool for prior-mode sampling, the deterministic p(y_t|y_s,G), and the
/// factorized Bernoulli marginals standing in for p(y_s,y_t|G).
class LabelPrior {
 public:
  LabelPrior() = default;
  LabelPrior(const std::vector<LabelVector>& labeled_y_s, const LabelGraph& relation_graph,
             double clamp_eps);

  const LabelGraph& graph() const { return graph_; }
  const std::vector<LabelVector>& pool() const { return pool_; }
  double clamp_eps() const { return eps_; }
  /// Clamped per-class marginals over W, 1 x |W|.
  const Tensor& marginals() const { return marginals_; }

  LabelVector target_prior(const LabelVector& y_s) const {
    return estimate_target_prior(y_s, graph_);
  }
  /// Rows of p(y_t|y_s,G) clamped to [eps, 1 - eps], B x |T|.
  Tensor clamped_target_prior(const Tensor& y_s) const;

 private:
  LabelGraph graph_;
  std::vector<LabelVector> pool_;
  Tensor marginals_;
  double eps_ = 1e-3;
};

struct EncoderOutput {
  Var mu_z;
  Var sigma_z;
};

struct DecoderOutput {
  Var mu_x;
  Var sigma_x;
};

struct LossBreakdown {
  double recon = 0;
  double kl_z = 0;
  double kl_y = 0;
  double l_cons = 0;
  double l_c_s = 0;
  double total = 0;
};

/// Everything a loss evaluation needs besides the data.
struct LossContext {
  Tape& tape;
  AddesModel& model;
  const LabelPrior& prior;
  const GenConfig& config;
  Rng& rng;
  Trainable trainable = Trainable::all();
};

EncoderOutput encode(LossContext& ctx, Var x);
DecoderOutput decode(LossContext& ctx, Var z, Var y_s, Var y_t);

/// Per-instance ELBO pieces (each B x 1) plus the latent and soft labels they
/// used, so later terms can reuse them.
struct ElboTerms {
  Var elbo;
  Var recon;
  Var kl_z;
  Var kl_y;
  Var z;
  Var y_s;  // decoder label input (given labels for D_l, soft for D_u)
  Var y_t;  // soft target labels
  Var probs;  // classifier output on x, B x |W|
};

ElboTerms elbo_labeled(LossContext& ctx, const Tensor& x, const Tensor& y_s);
ElboTerms elbo_unlabeled(LossContext& ctx, const Tensor& x);

/// Posterior label/latent sources for the constraint, one row per item.
struct ConstraintPool {
  Var z;
  Var y_s;
  Var y_t;
};

/// Disentanglement constraint: decode x_hat = mu_x(z, y_s, y_t) from assigned
/// labels and score it with the classifier against those labels. `n` items are
/// drawn; posterior items take row i of `posterior`.
Var loss_constraint(LossContext& ctx, std::size_t n, const std::optional<ConstraintPool>& posterior);

struct LossEval {
  LossBreakdown values;
  Var total;
};

LossEval total_loss(LossContext& ctx, const Tensor& labeled_x, const Tensor& labeled_y_s,
                    const Tensor& unlabeled_x);

struct SyntheticSet {
  Tensor x;
  std::vector<LabelVector> y_s;
  std::vector<LabelVector> y_t;
  std::size_t size() const { return y_s.size(); }
};

/// Draw n labeled instances: y_s from the empirical pool (or `labels` when
/// given, cycled), y_t from the relation rule, z ~ N(0, I), x = decoder mean.
SyntheticSet sample_labeled(std::size_t n, AddesModel& model, const LabelPrior& prior, Rng& rng,
                            const std::vector<LabelVector>* labels = nullptr);

/// Posterior mean of z for a batch, used by representation probes.
Tensor encode_mean(AddesModel& model, const Tensor& x);

Tensor labels_to_tensor(const std::vector<LabelVector>& labels, std::size_t width);

}  // namespace addes
