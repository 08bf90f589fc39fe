#include "addes/generative.hpp"

#include <algorithm>

#include "addes/probability.hpp"

namespace addes {

ConstraintLabelSource label_source_from_string(const std::string& s) {
  if (s == "prior") return ConstraintLabelSource::kPrior;
  if (s == "posterior") return ConstraintLabelSource::kPosterior;
  if (s == "mixed") return ConstraintLabelSource::kMixed;
  throw ConfigError("unknown constraint_label_source: " + s);
}

std::string to_string(ConstraintLabelSource s) {
  switch (s) {
    case ConstraintLabelSource::kPrior: return "prior";
    case ConstraintLabelSource::kPosterior: return "posterior";
    case ConstraintLabelSource::kMixed: return "mixed";
  }
  return "mixed";
}

AddesModel AddesModel::create(std::size_t data_dim, const LabelGraph& classifier_graph,
                              const ModelConfig& config, bool fixed_decoder_sigma, Rng& init_rng) {
  if (data_dim == 0) throw ConfigError("model: data dimension must be positive");
  if (config.latent_dim == 0) throw ConfigError("model: latent_dim must be positive");
  AddesModel m;
  m.config = config;
  m.fixed_decoder_sigma = fixed_decoder_sigma;
  m.data_dim = data_dim;
  m.num_inexact = classifier_graph.space.num_inexact();
  m.num_target = classifier_graph.space.num_target();
  const std::size_t d = config.latent_dim;
  m.encoder = Mlp::create(m.params, "encoder", data_dim, config.encoder_hidden, 2 * d,
                          config.activation, init_rng);
  const std::size_t dec_in = d + m.num_inexact + m.num_target;
  m.decoder = Mlp::create(m.params, "decoder", dec_in, config.decoder_hidden,
                          fixed_decoder_sigma ? data_dim : 2 * data_dim, config.activation,
                          init_rng);
  m.classifier = GcnClassifier::create(m.params, "classifier", data_dim, classifier_graph,
                                       config.classifier, init_rng);
  return m;
}

Tensor labels_to_tensor(const std::vector<LabelVector>& labels, std::size_t width) {
  if (labels.empty()) throw DimensionError("labels_to_tensor: no rows");
  Tensor t(labels.size(), width);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].size() != width) throw DimensionError("labels_to_tensor: ragged label vectors");
    for (std::size_t j = 0; j < width; ++j) t(i, j) = labels[i][j];
  }
  return t;
}

LabelPrior::LabelPrior(const std::vector<LabelVector>& labeled_y_s,
                       const LabelGraph& relation_graph, double clamp_eps)
    : graph_(relation_graph), pool_(labeled_y_s), eps_(clamp_eps) {
  if (!(clamp_eps > 0 && clamp_eps < 0.5)) throw ConfigError("prior_clamp_eps must be in (0, 0.5)");
  const std::size_t s = graph_.space.num_inexact(), t = graph_.space.num_target();
  marginals_ = Tensor(1, s + t);
  if (!pool_.empty()) {
    for (const auto& ys : pool_) {
      if (ys.size() != s) throw DimensionError("LabelPrior: y_s has wrong length");
      for (std::size_t j = 0; j < s; ++j) marginals_[j] += ys[j];
      const auto yt = estimate_target_prior(ys, graph_);
      for (std::size_t j = 0; j < t; ++j) marginals_[s + j] += yt[j];
    }
    for (auto& v : marginals_.values()) v /= static_cast<double>(pool_.size());
  }
  for (auto& v : marginals_.values()) v = std::clamp(v, eps_, 1.0 - eps_);
}

Tensor LabelPrior::clamped_target_prior(const Tensor& y_s) const {
  const std::size_t s = graph_.space.num_inexact(), t = graph_.space.num_target();
  if (y_s.cols() != s) throw DimensionError("target prior: y_s has wrong width");
  Tensor out(y_s.rows(), t);
  LabelVector row(s);
  for (std::size_t i = 0; i < y_s.rows(); ++i) {
    for (std::size_t j = 0; j < s; ++j) row[j] = y_s(i, j) > 0.5 ? 1 : 0;
    const auto yt = estimate_target_prior(row, graph_);
    for (std::size_t j = 0; j < t; ++j) out(i, j) = yt[j] ? 1.0 - eps_ : eps_;
  }
  return out;
}

EncoderOutput encode(LossContext& ctx, Var x) {
  const std::size_t d = ctx.model.config.latent_dim;
  Var out = ctx.model.encoder.forward(ctx.tape, ctx.model.params, x, ctx.trainable.encoder);
  return {slice_cols(out, 0, d), sigma_from_half_log_var(slice_cols(out, d, d))};
}

DecoderOutput decode(LossContext& ctx, Var z, Var y_s, Var y_t) {
  std::vector<Var> parts{z};
  if (ctx.model.num_inexact > 0) parts.push_back(y_s);
  if (ctx.model.num_target > 0) parts.push_back(y_t);
  Var in = concat_cols(parts);
  Var out = ctx.model.decoder.forward(ctx.tape, ctx.model.params, in, ctx.trainable.decoder);
  const std::size_t dx = ctx.model.data_dim;
  if (ctx.model.fixed_decoder_sigma) {
    return {out, ctx.tape.constant(Tensor(out.rows(), dx, 1.0))};
  }
  return {slice_cols(out, 0, dx), sigma_from_half_log_var(slice_cols(out, dx, dx))};
}

namespace {

Var zeros_col(Tape& tape, std::size_t rows) { return tape.constant(Tensor(rows, 1)); }

Var constant_of(Tape& tape, const Tensor& t) { return tape.constant(Tensor({t.rows(), t.cols()}, t.values())); }

Var clamp_prob(Var p) { return clamp(p, kProbClamp, 1.0 - kProbClamp); }

// Sample z, decode, and score the reconstruction.
void reconstruct(LossContext& ctx, Var x, ElboTerms& terms) {
  EncoderOutput enc = encode(ctx, x);
  Tensor eps = ctx.rng.normal_tensor(enc.mu_z.rows(), enc.mu_z.cols());
  terms.z = reparam_sample(enc.mu_z, enc.sigma_z, eps);
  terms.kl_z = kl_diag_gaussian_vs_std_normal(enc.mu_z, enc.sigma_z);
  DecoderOutput dec = decode(ctx, terms.z, terms.y_s, terms.y_t);
  terms.recon = gaussian_log_likelihood(x, dec.mu_x, dec.sigma_x);
}

}  // namespace

ElboTerms elbo_labeled(LossContext& ctx, const Tensor& x, const Tensor& y_s) {
  Tape& tape = ctx.tape;
  const std::size_t s = ctx.model.num_inexact, t = ctx.model.num_target;
  if (y_s.rows() != x.rows() || y_s.cols() != s) {
    throw DimensionError("elbo_labeled: y_s " + shape_string(y_s.shape()) + " vs x " +
                         shape_string(x.shape()));
  }
  Var xv = constant_of(tape, x);
  ElboTerms terms;
  terms.probs = ctx.model.classifier.classify(tape, ctx.model.params, xv, ctx.trainable.classifier);
  terms.y_s = constant_of(tape, y_s);
  if (t > 0) {
    terms.y_t = slice_cols(terms.probs, s, t);
    Var prior = tape.constant(ctx.prior.clamped_target_prior(y_s));
    terms.kl_y = kl_bernoulli_vec(clamp_prob(terms.y_t), prior);
  } else {
    terms.kl_y = zeros_col(tape, x.rows());
  }
  reconstruct(ctx, xv, terms);
  terms.elbo = sub(sub(terms.recon, terms.kl_z), terms.kl_y);
  return terms;
}

ElboTerms elbo_unlabeled(LossContext& ctx, const Tensor& x) {
  Tape& tape = ctx.tape;
  const std::size_t s = ctx.model.num_inexact, t = ctx.model.num_target;
  Var xv = constant_of(tape, x);
  ElboTerms terms;
  terms.probs = ctx.model.classifier.classify(tape, ctx.model.params, xv, ctx.trainable.classifier);
  if (s > 0) terms.y_s = slice_cols(terms.probs, 0, s);
  if (t > 0) terms.y_t = slice_cols(terms.probs, s, t);
  Tensor marg(x.rows(), s + t);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < s + t; ++j) marg(i, j) = ctx.prior.marginals()[j];
  terms.kl_y = kl_bernoulli_vec(clamp_prob(terms.probs), tape.constant(std::move(marg)));
  reconstruct(ctx, xv, terms);
  terms.elbo = sub(sub(terms.recon, terms.kl_z), terms.kl_y);
  return terms;
}

Var loss_constraint(LossContext& ctx, std::size_t n,
                    const std::optional<ConstraintPool>& posterior) {
  Tape& tape = ctx.tape;
  AddesModel& model = ctx.model;
  const std::size_t s = model.num_inexact, t = model.num_target, w = s + t;
  const std::size_t d = model.config.latent_dim;
  if (n == 0) throw ContractError("loss_constraint: empty batch");
  const bool stop = ctx.config.constraint_stop_grad_classifier;
  const auto mode = ctx.config.constraint_label_source;

  std::vector<bool> use_prior(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (mode) {
      case ConstraintLabelSource::kPrior: use_prior[i] = true; break;
      case ConstraintLabelSource::kPosterior: use_prior[i] = false; break;
      case ConstraintLabelSource::kMixed: use_prior[i] = ctx.rng.bernoulli(0.5); break;
    }
  }
  const bool any_prior = std::find(use_prior.begin(), use_prior.end(), true) != use_prior.end();
  const bool any_post = std::find(use_prior.begin(), use_prior.end(), false) != use_prior.end();
  if (any_prior && ctx.prior.pool().empty()) {
    throw ContractError("loss_constraint: empty D_l label pool in prior mode");
  }
  if (any_post && (!posterior || posterior->z.rows() < n)) {
    throw ContractError("loss_constraint: posterior mode needs " + std::to_string(n) + " pooled items");
  }

  // Prior-mode rows: labels from the empirical pool and the relation rule,
  // z from N(0, I). Unused rows stay zero.
  Tensor prior_z(n, d), prior_y(n, std::max<std::size_t>(w, 1));
  for (std::size_t i = 0; i < n; ++i) {
    if (!use_prior[i]) continue;
    const LabelVector& ys = ctx.prior.pool()[ctx.rng.index(ctx.prior.pool().size())];
    const LabelVector yt = ctx.prior.target_prior(ys);
    for (std::size_t j = 0; j < s; ++j) prior_y(i, j) = ys[j];
    for (std::size_t j = 0; j < t; ++j) prior_y(i, s + j) = yt[j];
    for (std::size_t j = 0; j < d; ++j) prior_z(i, j) = ctx.rng.normal();
  }

  Var z = tape.constant(prior_z);
  Var labels = tape.constant(prior_y);
  if (any_post) {
    std::vector<std::size_t> take(n);
    for (std::size_t i = 0; i < n; ++i) take[i] = i;
    std::vector<Var> parts;
    if (s > 0) parts.push_back(select_rows(posterior->y_s, take));
    if (t > 0) parts.push_back(select_rows(posterior->y_t, take));
    Var post_labels = concat_cols(parts);
    if (stop) post_labels = detach(post_labels);
    Var post_z = select_rows(posterior->z, take);
    // rows [0, n) come from the prior block, [n, 2n) from the posterior block
    std::vector<std::size_t> pick(n);
    for (std::size_t i = 0; i < n; ++i) pick[i] = use_prior[i] ? i : n + i;
    z = select_rows(concat_rows(z, post_z), pick);
    labels = select_rows(concat_rows(labels, post_labels), pick);
  }

  Var ys = s > 0 ? slice_cols(labels, 0, s) : Var{};
  Var yt = t > 0 ? slice_cols(labels, s, t) : Var{};
  Var x_hat = decode(ctx, z, ys, yt).mu_x;
  const bool track_classifier = ctx.trainable.classifier && !stop;
  Var probs = model.classifier.classify(tape, model.params, x_hat, track_classifier);
  return mean(binary_cross_entropy(probs, labels));
}

LossEval total_loss(LossContext& ctx, const Tensor& labeled_x, const Tensor& labeled_y_s,
                    const Tensor& unlabeled_x) {
  if (labeled_x.rows() == 0 || unlabeled_x.rows() == 0) {
    throw ContractError("total_loss: both batches must be non-empty");
  }
  ElboTerms lab = elbo_labeled(ctx, labeled_x, labeled_y_s);
  ElboTerms unl = elbo_unlabeled(ctx, unlabeled_x);

  const std::size_t n = labeled_x.rows() + unlabeled_x.rows();
  ConstraintPool pool;
  pool.z = concat_rows(lab.z, unl.z);
  if (ctx.model.num_inexact > 0) pool.y_s = concat_rows(lab.y_s, unl.y_s);
  if (ctx.model.num_target > 0) pool.y_t = concat_rows(lab.y_t, unl.y_t);
  Var cons = loss_constraint(ctx, n, pool);
  Var lcs = loss_supervised(lab.probs, labeled_y_s);

  const double alpha = ctx.config.alpha, beta = ctx.config.beta;
  Var neg_elbo = scale(add(mean(lab.elbo), mean(unl.elbo)), -1.0);
  Var total = add(add(neg_elbo, scale(cons, alpha)), scale(lcs, beta));

  LossEval out;
  out.total = total;
  out.values.recon = mean(lab.recon).value().item() + mean(unl.recon).value().item();
  out.values.kl_z = mean(lab.kl_z).value().item() + mean(unl.kl_z).value().item();
  out.values.kl_y = mean(lab.kl_y).value().item() + mean(unl.kl_y).value().item();
  out.values.l_cons = cons.value().item();
  out.values.l_c_s = lcs.value().item();
  out.values.total = total.value().item();
  return out;
}

SyntheticSet sample_labeled(std::size_t n, AddesModel& model, const LabelPrior& prior, Rng& rng,
                            const std::vector<LabelVector>* labels) {
  if (n == 0) throw std::invalid_argument("sample_labeled: n_s must be positive");
  const std::vector<LabelVector>& source = labels ? *labels : prior.pool();
  if (source.empty()) throw ContractError("sample_labeled: no labels to sample from");
  const std::size_t s = model.num_inexact, t = model.num_target, d = model.config.latent_dim;

  SyntheticSet out;
  Tensor z(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const LabelVector& ys = labels ? source[i % source.size()] : source[rng.index(source.size())];
    out.y_s.push_back(ys);
    out.y_t.push_back(prior.target_prior(ys));
    for (std::size_t j = 0; j < d; ++j) z(i, j) = rng.normal();
  }

  out.x = Tensor(n, model.data_dim);
  GenConfig cfg;
  constexpr std::size_t kChunk = 512;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t m = std::min(kChunk, n - begin);
    Tape tape;
    Rng unused(0);
    LabelPrior const& pr = prior;
    LossContext ctx{tape, model, pr, cfg, unused, Trainable::none()};
    Tensor zc(m, d), ysc(m, std::max<std::size_t>(s, 1)), ytc(m, std::max<std::size_t>(t, 1));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < d; ++j) zc(i, j) = z(begin + i, j);
      for (std::size_t j = 0; j < s; ++j) ysc(i, j) = out.y_s[begin + i][j];
      for (std::size_t j = 0; j < t; ++j) ytc(i, j) = out.y_t[begin + i][j];
    }
    Var mu = decode(ctx, tape.constant(zc), tape.constant(ysc), tape.constant(ytc)).mu_x;
    const Tensor& mv = mu.value();
    std::copy(mv.values().begin(), mv.values().end(),
              out.x.values().begin() + static_cast<std::ptrdiff_t>(begin * model.data_dim));
  }
  return out;
}

Tensor encode_mean(AddesModel& model, const Tensor& x) {
  Tape tape;
  Rng unused(0);
  GenConfig cfg;
  LabelPrior prior;
  LossContext ctx{tape, model, prior, cfg, unused, Trainable::none()};
  Var mu = encode(ctx, tape.constant(x)).mu_z;
  return mu.value();
}

}  // namespace addes
