// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. `acceptance --only 3,4` runs a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "addes/config.hpp"
#include "addes/probability.hpp"
#include "test_util.hpp"

using namespace addes;
using addes::testing::TinyModel;
using addes::testing::param_gradcheck;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

Outcome gradients() {
  const auto all = [](const std::string&) { return true; };
  const auto no_classifier = [](const std::string& n) { return n.rfind("classifier/", 0) != 0; };
  std::map<std::string, double> worst;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TinyModel m(seed);
    GenConfig stop;  // stop-gradient on the constraint's classifier path
    GenConfig full = stop;
    full.constraint_stop_grad_classifier = false;
    auto check = [&](const std::string& term, const addes::testing::ModelFn& f,
                     const std::function<bool(const std::string&)>& include) {
      worst[term] = std::max(worst[term], param_gradcheck(m.model.params, f, 1000 + seed, include));
    };
    auto ctx_fn = [&](const GenConfig& cfg, auto body) {
      return [&m, &cfg, body](Tape& tape, Rng& rng) {
        LossContext ctx{tape, m.model, m.prior, cfg, rng};
        return body(ctx);
      };
    };
    check("L_G^l", ctx_fn(stop, [&](LossContext& c) { return mean(elbo_labeled(c, m.l_x, m.l_y_s).elbo); }), all);
    check("L_G^u", ctx_fn(stop, [&](LossContext& c) { return mean(elbo_unlabeled(c, m.u_x).elbo); }), all);
    auto cons = [&](LossContext& c) {
      ElboTerms lab = elbo_labeled(c, m.l_x, m.l_y_s);
      return loss_constraint(c, m.l_x.rows(), ConstraintPool{lab.z, lab.y_s, lab.y_t});
    };
    check("L_cons", ctx_fn(full, cons), all);
    check("L_cons (stop-grad)", ctx_fn(stop, cons), no_classifier);
    check("L_C^s",
          ctx_fn(stop,
                 [&](LossContext& c) {
                   Var x = c.tape.constant(m.l_x);
                   return loss_supervised(m.model.classifier.classify(c.tape, m.model.params, x, true), m.l_y_s);
                 }),
          all);
    auto total = [&](LossContext& c) { return total_loss(c, m.l_x, m.l_y_s, m.u_x).total; };
    check("total", ctx_fn(full, total), all);
    check("total (stop-grad)", ctx_fn(stop, total), no_classifier);
  }
  Outcome o{true, ""};
  for (const auto& [term, err] : worst) {
    o.pass = o.pass && err < 1e-4;
    o.detail += term + " " + fmt("%.1e", err) + "; ";
  }
  return o;
}

// ---------------------------------------------------------------- criterion 2

double log_normal_pdf(double z, double mu, double sigma) {
  const double r = (z - mu) / sigma;
  return -0.5 * r * r - std::log(sigma) - 0.5 * std::log(2 * std::numbers::pi);
}

// Trapezoid rule over mu +- 14 sigma.
double kl_by_quadrature(double mu, double sigma) {
  constexpr int n = 40000;
  const double lo = mu - 14 * sigma, hi = mu + 14 * sigma, h = (hi - lo) / n;
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    const double z = lo + h * i;
    const double lq = log_normal_pdf(z, mu, sigma);
    const double f = std::exp(lq) * (lq - log_normal_pdf(z, 0, 1));
    acc += (i == 0 || i == n) ? 0.5 * f : f;
  }
  return acc * h;
}

Outcome kl_oracles() {
  Rng rng(2024);
  double worst_gauss = 0;
  for (int i = 0; i < 100; ++i) {
    const double mu = -3 + 6 * rng.uniform(), sigma = 0.1 + 2.9 * rng.uniform();
    Tape tape;
    const double kl = kl_diag_gaussian_vs_std_normal(tape.constant(Tensor::from_rows({{mu}})),
                                                     tape.constant(Tensor::from_rows({{sigma}})))
                          .value()
                          .item();
    worst_gauss = std::max(worst_gauss, std::fabs(kl - kl_by_quadrature(mu, sigma)));
  }
  bool bern_ok = true;
  double min_distinct = 1e9;
  for (int i = 0; i < 1000; ++i) {
    Tensor q(1, 3), p(1, 3);
    for (std::size_t j = 0; j < 3; ++j) {
      q[j] = 0.001 + 0.998 * rng.uniform();
      p[j] = 0.001 + 0.998 * rng.uniform();
    }
    Tape tape;
    const double kl = kl_bernoulli_vec(tape.constant(q), tape.constant(p)).value().item();
    const double self = kl_bernoulli_vec(tape.constant(q), tape.constant(q)).value().item();
    bern_ok = bern_ok && kl > 0 && self == 0;
    min_distinct = std::min(min_distinct, kl);
  }
  return {worst_gauss < 1e-6 && bern_ok,
          "gaussian max |err| " + fmt("%.1e", worst_gauss) + "; bernoulli >= 0 and zero iff equal: " +
              (bern_ok ? "yes" : "no") + " (min distinct " + fmt("%.1e", min_distinct) + ")"};
}

// ---------------------------------------------------------------- criterion 3

Outcome graph_oracles() {
  bool ok = true;
  std::string detail;
  // hand-counted fixture
  {
    LabelSpace space({"a", "b", "c"}, {});
    const Tensor a = conditional_adjacency(
        count_cooccurrence({{1, 1, 0}, {1, 1, 0}, {1, 0, 0}, {0, 1, 1}}, space));
    const bool fixture = a(0, 1) == 2.0 / 3.0 && a(1, 2) == 1.0 && a(2, 1) == 1.0 / 3.0 && a(0, 2) == 0.0;
    ok = ok && fixture;
    detail += std::string("fixture ") + (fixture ? "exact" : "MISMATCH");
  }
  Rng rng(77);
  int corpora_bad = 0;
  for (int c = 0; c < 50; ++c) {
    const std::size_t k = 1 + rng.index(6), n = 1 + rng.index(30);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) names.push_back("c" + std::to_string(i));
    std::vector<LabelVector> labels(n, LabelVector(k));
    for (auto& y : labels)
      for (auto& b : y) b = rng.bernoulli(0.4);
    const Tensor a = conditional_adjacency(count_cooccurrence(labels, LabelSpace(names, {})));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        int both = 0, nj = 0;
        for (const auto& y : labels) {
          both += y[i] && y[j];
          nj += y[j];
        }
        const double expect = nj == 0 ? 0.0 : double(both) / double(nj);
        corpora_bad += a(i, j) != expect;
      }
  }
  ok = ok && corpora_bad == 0;
  detail += "; 50 random corpora mismatches " + std::to_string(corpora_bad);

  int prior_bad = 0;
  for (std::size_t s = 1; s <= 6; ++s) {
    const std::size_t t = 1 + rng.index(3);
    std::vector<std::string> sn, tn;
    for (std::size_t i = 0; i < s; ++i) sn.push_back("s" + std::to_string(i));
    for (std::size_t i = 0; i < t; ++i) tn.push_back("t" + std::to_string(i));
    RelatedClassSets rel;
    std::vector<std::vector<bool>> related(t, std::vector<bool>(s));
    for (std::size_t ti = 0; ti < t; ++ti)
      for (std::size_t si = 0; si < s; ++si)
        if (rng.bernoulli(0.4)) {
          rel[tn[ti]].insert(sn[si]);
          related[ti][si] = true;
        }
    const LabelGraph g = link_targets(Tensor(s, s), LabelSpace(sn, tn), rel);
    for (std::size_t mask = 0; mask < (std::size_t{1} << s); ++mask) {
      LabelVector ys(s);
      for (std::size_t i = 0; i < s; ++i) ys[i] = (mask >> i) & 1;
      const LabelVector yt = estimate_target_prior(ys, g);
      for (std::size_t ti = 0; ti < t; ++ti) {
        bool any = false;
        for (std::size_t si = 0; si < s; ++si) any = any || (related[ti][si] && ys[si]);
        prior_bad += yt[ti] != static_cast<std::uint8_t>(any);
      }
    }
  }
  ok = ok && prior_bad == 0;
  detail += "; exhaustive target prior mismatches " + std::to_string(prior_bad);

  double worst_row = 0;
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = 1 + rng.index(12);
    Tensor a(n, n);
    for (auto& v : a.values()) v = rng.bernoulli(0.5) ? rng.uniform() : 0.0;
    const Tensor na = normalize_adjacency(a);
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0;
      for (double v : na.row_span(r)) s += v;
      worst_row = std::max(worst_row, std::fabs(s - 1));
    }
  }
  ok = ok && worst_row <= 1e-12;
  detail += "; max |row sum - 1| " + fmt("%.1e", worst_row);
  return {ok, detail};
}

// ---------------------------------------------------------------- criterion 4

Outcome metric_oracles() {
  Rng rng(404);
  int bad = 0, cases = 0;
  while (cases < 100) {
    const std::size_t n = 2 + rng.index(15);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng.index(5)) / 4.0;
      y[i] = rng.bernoulli(0.5);
    }
    int pos = 0;
    for (auto b : y) pos += b;
    if (pos == 0 || pos == int(n)) continue;
    ++cases;
    // AP: precision at each positive's rank (ties broken by input order)
    double ap = 0;
    double wins = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!y[i]) continue;
      int rank = 1, hits = 1;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i && (s[j] > s[i] || (s[j] == s[i] && j < i))) {
          ++rank;
          hits += y[j];
        }
        if (!y[j]) wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
      ap += double(hits) / rank;
    }
    ap /= pos;
    const double auc = wins / (double(pos) * double(n - pos));
    bad += std::fabs(average_precision(s, y) - ap) > 1e-12;
    bad += std::fabs(roc_auc(s, y) - auc) > 1e-12;
  }
  const std::vector<double> sep{0.9, 0.8, 0.2, 0.1}, flat(4, 0.3);
  const std::vector<std::uint8_t> lab{1, 1, 0, 0};
  const bool fixtures = average_precision(sep, lab) == 1.0 && roc_auc(flat, lab) == 0.5 &&
                        roc_auc(sep, lab) == 1.0;
  return {bad == 0 && fixtures, "brute-force mismatches " + std::to_string(bad) + " over 100 cases; fixtures " +
                                    (fixtures ? "exact" : "WRONG")};
}

// ---------------------------------------------------------------- criterion 5

std::vector<double> group_values(const ParamStore& store, const std::string& prefix) {
  std::vector<double> out;
  for (std::size_t i : store.with_prefix(prefix)) {
    const auto& v = store[i].tensor.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

Outcome algorithm_contracts() {
  const RunConfig rc = run_config_from(Json::object());
  const PlantedDraw draw = generate_planted(rc.data);
  PipelineConfig pc = rc.pipeline();
  pc.train.pretrain_classifier_epochs = 1;
  pc.train.pretrain_autoencoder_epochs = 1;
  pc.train.joint_epochs = 2;

  const TrainData td = TrainData::from_instances(draw.bundle.d_l, draw.bundle.d_u, pc.train.val_fraction);
  Rng init = Rng::stream(rc.seed, "init");
  AddesModel model = AddesModel::create(draw.bundle.dim(), draw.graph, pc.model, pc.gen.fixed_decoder_sigma, init);
  const LabelPrior prior(y_s_of(split_tail(draw.bundle.d_l, pc.train.val_fraction).train), draw.graph,
                         pc.gen.prior_clamp_eps);
  Trainer trainer(model, prior, pc.gen, pc.train, td);
  const auto enc0 = group_values(model.params, "encoder/"), dec0 = group_values(model.params, "decoder/");
  trainer.pretrain_classifier();
  const bool freeze_c = enc0 == group_values(model.params, "encoder/") && dec0 == group_values(model.params, "decoder/");
  const auto cls1 = group_values(model.params, "classifier/");
  trainer.pretrain_autoencoder();
  const bool freeze_ae = cls1 == group_values(model.params, "classifier/") &&
                         enc0 != group_values(model.params, "encoder/");

  trainer.run_joint_epoch();
  trainer.sync_state_out();
  const auto ckpt = std::filesystem::temp_directory_path() / "addes_acceptance_ckpt.json";
  save_checkpoint(ckpt, model, draw.graph, &trainer.state());
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  Trainer resumed(loaded.model, prior, pc.gen, pc.train, td);
  resumed.restore(*loaded.state);
  const EpochLog a = trainer.run_joint_epoch(), b = resumed.run_joint_epoch();
  const bool roundtrip = a.train.total == b.train.total && a.val_total == b.val_total &&
                         params_digest(model.params) == params_digest(loaded.model.params);
  std::filesystem::remove(ckpt);

  std::string digests[2];
  for (auto& d : digests) {
    GeneratorRun run = train_generator(draw.bundle, draw.graph, Variant::kFull, pc, rc.seed);
    d = params_digest(run.model.params);
  }
  const bool reproducible = digests[0] == digests[1];
  return {freeze_c && freeze_ae && roundtrip && reproducible,
          std::string("classifier-stage freeze ") + (freeze_c ? "exact" : "BROKEN") + "; autoencoder-stage freeze " +
              (freeze_ae ? "exact" : "BROKEN") + "; checkpoint round trip " + (roundtrip ? "bit-identical" : "DIFFERS") +
              "; digest " + digests[0] + (reproducible ? " reproduced" : " NOT reproduced")};
}

// ------------------------------------------------------ criteria 6, 7 and 8

struct SeedRun {
  std::uint64_t seed;
  PlantedDraw draw;
  GeneratorRun full;
  AugmentationResult aug;
};

std::vector<SeedRun> g_runs;  // shared by criteria 6 to 8

std::vector<SeedRun>& full_runs() {
  if (!g_runs.empty()) return g_runs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RunConfig rc = run_config_from(Json{{"seed", seed}});
    const PipelineConfig pc = rc.pipeline();
    SeedRun r{seed, generate_planted(rc.data), {}, {}};
    r.full = train_generator(r.draw.bundle, r.draw.graph, Variant::kFull, pc, seed);
    r.aug = evaluate_augmentation(r.full, r.draw.bundle, pc, seed, pc.ds_grid);
    std::printf("    seed %llu: baseline %.4f, augmented %.4f at |D_s| = %zu\n",
                static_cast<unsigned long long>(seed), r.aug.baseline.map, r.aug.augmented.map, r.aug.chosen_ds);
    std::fflush(stdout);
    g_runs.push_back(std::move(r));
  }
  return g_runs;
}

Outcome augmentation_benefit() {
  double gain = 0;
  for (const auto& r : full_runs()) gain += r.aug.augmented.map - r.aug.baseline.map;
  gain /= 5;
  return {gain >= 0.02, "mean target mAP gain " + fmt("%.4f", gain) + " (threshold 0.02)"};
}

Outcome ablation_direction() {
  double full = 0, cnn = 0, w = 0;
  for (const auto& r : full_runs()) {
    const PipelineConfig pc = run_config_from(Json{{"seed", r.seed}}).pipeline();
    const double c = run_ablation(Variant::kAddesCnn, r.draw.bundle, r.draw.graph, pc, r.seed).map;
    const double ww = run_ablation(Variant::kAddesW, r.draw.bundle, r.draw.graph, pc, r.seed).map;
    std::printf("    seed %llu: full %.4f, addes-cnn %.4f, addes-w %.4f\n", static_cast<unsigned long long>(r.seed),
                r.aug.augmented.map, c, ww);
    std::fflush(stdout);
    full += r.aug.augmented.map / 5;
    cnn += c / 5;
    w += ww / 5;
  }
  const bool ok = full >= cnn && std::fabs(full - w) < 0.03;
  return {ok, "5-seed mean mAP full " + fmt("%.4f", full) + ", addes-cnn " + fmt("%.4f", cnn) + ", addes-w " +
                  fmt("%.4f", w) + "; |full - addes-w| " + fmt("%.4f", std::fabs(full - w)) + " (< 0.03)"};
}

Outcome disentanglement() {
  double probe = 0, cls = 0;
  for (auto& r : full_runs()) {
    const LabeledSet train = LabeledSet::from_instances(r.draw.bundle.d_e);
    const LabeledSet test = LabeledSet::from_instances(r.draw.bundle.test);
    probe += latent_probe_auc(r.full.model, train, test, r.seed) / 5;
    cls += classifier_inexact_auc(r.full.model, test, r.draw.bundle.space) / 5;
  }
  return {cls - probe >= 0.1, "5-seed mean inexact macro-AUC: latent probe " + fmt("%.4f", probe) +
                                  ", classifier " + fmt("%.4f", cls) + ", gap " + fmt("%.4f", cls - probe) +
                                  " (>= 0.1)"};
}

// ---------------------------------------------------------------- criterion 9

Outcome sweep_harness() {
  RunConfig rc = run_config_from(Json{{"data", {{"n_labeled", 200}, {"n_unlabeled", 800}, {"n_test", 500}}},
                                      {"train",
                                       {{"pretrain_classifier_epochs", 5},
                                        {"pretrain_autoencoder_epochs", 5},
                                        {"joint_epochs", 15}}},
                                      {"downstream", {{"epochs", 15}}},
                                      {"ds_grid", {250, 500}}});
  const PipelineConfig pc = rc.pipeline();
  const auto dir = std::filesystem::temp_directory_path() / "addes_acceptance_sweep";
  std::filesystem::remove_all(dir);
  bool ok = true;
  std::string detail;
  for (const std::string var : {"alpha", "beta", "size_of_Ds"}) {
    SweepSpec spec = SweepSpec::defaults_for(var);
    if (var == "size_of_Ds") spec.grid = {0, 250, 500};
    spec.seeds = {1, 2};
    const auto rows = run_sweep(spec, rc.data, pc);
    const auto csv = dir / ("sweep_" + var + ".csv");
    write_metrics_csv(csv, rows);
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    std::size_t count = 0;
    bool in_range = true;
    while (std::getline(in, line)) {
      ++count;
      std::stringstream ss(line);
      std::string cell;
      for (int col = 0; std::getline(ss, cell, ','); ++col) {
        if (col < 4 || cell.empty() || cell.find_first_not_of("0123456789.e-") != std::string::npos) continue;
        const double v = std::stod(cell);
        in_range = in_range && v >= 0 && v <= 1;
      }
    }
    const bool this_ok = count == spec.grid.size() * spec.seeds.size() && in_range;
    ok = ok && this_ok;
    detail += var + ": " + std::to_string(count) + " rows" + (in_range ? "" : " OUT OF RANGE") + "; ";
  }
  std::filesystem::remove_all(dir);
  return {ok, detail + "one row per (value, seed), metrics in [0,1]"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 30, gradients},
      {2, "KL oracles", 10, kl_oracles},
      {3, "graph oracles", 10, graph_oracles},
      {4, "metric oracles", 10, metric_oracles},
      {5, "training contracts", 120, algorithm_contracts},
      {6, "augmentation benefit", 600, augmentation_benefit},
      {7, "ablation direction", 900, ablation_direction},
      {8, "disentanglement", 600, disentanglement},
      {9, "sweep harness", 1200, sweep_harness},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    std::printf("criterion %d: %s ...\n", c.id, c.name);
    std::fflush(stdout);
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    const bool in_budget = secs < c.budget_s;
    const bool pass = o.pass && in_budget;
    failures += !pass;
    std::printf("[%s] criterion %d (%s): %s [%.1f s of %.0f s budget%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s, in_budget ? "" : ", OVER BUDGET");
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
