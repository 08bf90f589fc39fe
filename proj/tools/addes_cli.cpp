#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "addes/config.hpp"

namespace fs = std::filesystem;
using namespace addes;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "run configuration (JSON)");
  cmd->add_option("--set", c.overrides, "override a config field, dotted.path=value")->allow_extra_args(false);
}

RunConfig resolve(const Common& c) { return load_run_config(c.config, c.overrides); }

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw ConfigError(std::string("missing ") + what + ": " + p.string());
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg) {
  fs::create_directories(dir);
  Json m = {{"command", command}, {"config", to_json(cfg)}, {"config_hash", config_hash(cfg)}};
  m["config"].erase("output_dir");
  std::ofstream(dir / ("manifest_" + command + ".json")) << m.dump(2) << '\n';
}

void save_relations(const RelatedClassSets& r, const fs::path& path) {
  Json j = Json::object();
  for (const auto& [t, rs] : r) j[t] = std::vector<std::string>(rs.begin(), rs.end());
  std::ofstream(path) << j.dump(2) << '\n';
}

DatasetBundle load_data(const std::string& dir) {
  require_file(fs::path(dir) / "meta.json", "dataset metadata");
  for (const char* f : {"dl.jsonl", "du.jsonl", "de.jsonl", "test.jsonl"}) require_file(fs::path(dir) / f, "dataset file");
  return load_bundle(dir);
}

LabelGraph load_graph_checked(const std::string& path, const LabelSpace& space) {
  require_file(path, "graph file");
  LabelGraph g = load_graph(path);
  if (!(g.space == space)) g = reorder(g, space);
  return g;
}

std::vector<std::uint64_t> seeds_or_default(const std::vector<std::uint64_t>& seeds, const RunConfig& cfg) {
  return seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : seeds;
}

SweepRow as_row(std::string variant, std::string variable, double value, std::uint64_t seed,
                MetricReport r, const std::string& hash) {
  r.seed = seed;
  r.config_hash = hash;
  return {std::move(variant), std::move(variable), value, seed, std::move(r)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Augmenting labeled data by disentangled generation under inexact supervision"};
  app.require_subcommand(1);

  // synth-data
  Common synth_c;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth-data", "generate a planted dataset bundle");
  add_common(synth, synth_c);
  synth->add_option("-o,--out", synth_out, "output directory (default: <output_dir>/data)");

  // build-graph
  Common graph_c;
  std::string graph_data, graph_rel, graph_out;
  std::optional<double> graph_threshold;
  auto* build = app.add_subcommand("build-graph", "co-occurrence graph plus target links");
  add_common(build, graph_c);
  build->add_option("-d,--data", graph_data, "dataset directory")->required();
  build->add_option("-r,--relations", graph_rel, "relations JSON {target: [inexact, ...]}")->required();
  build->add_option("-t,--threshold", graph_threshold, "binarize adjacency at this value");
  build->add_option("-o,--out", graph_out, "graph JSON path")->required();

  // train
  Common train_c;
  std::string train_data, train_graph, train_out, train_variant = "full";
  auto* train = app.add_subcommand("train", "pretrain and jointly train the generator");
  add_common(train, train_c);
  train->add_option("-d,--data", train_data, "dataset directory")->required();
  train->add_option("-g,--graph", train_graph, "relation graph JSON")->required();
  train->add_option("-o,--out", train_out, "output directory")->required();
  train->add_option("--variant", train_variant, "full | addes-cnn | addes-w");

  // generate
  Common gen_c;
  std::string gen_ckpt, gen_graph, gen_data, gen_out;
  long long gen_n = 0;
  auto* generate = app.add_subcommand("generate", "sample synthetic labeled instances");
  add_common(generate, gen_c);
  generate->add_option("-k,--checkpoint", gen_ckpt, "checkpoint JSON")->required();
  generate->add_option("-g,--graph", gen_graph, "relation graph JSON")->required();
  generate->add_option("-d,--data", gen_data, "dataset directory (D_l label pool)")->required();
  generate->add_option("-n,--n-s", gen_n, "number of instances")->required();
  generate->add_option("-o,--out", gen_out, "output JSON-lines path")->required();

  // evaluate
  Common eval_c;
  std::string eval_data, eval_graph, eval_syn, eval_out;
  std::size_t eval_n = 0;
  auto* evaluate = app.add_subcommand("evaluate", "downstream metrics with and without D_s");
  add_common(evaluate, eval_c);
  evaluate->add_option("-d,--data", eval_data, "dataset directory")->required();
  evaluate->add_option("-g,--graph", eval_graph, "relation graph JSON")->required();
  evaluate->add_option("-s,--synthetic", eval_syn, "synthetic JSON-lines");
  evaluate->add_option("-n,--n-s", eval_n, "synthetic rows to add (default: all)");
  evaluate->add_option("-o,--out", eval_out, "metrics CSV path")->required();

  // sweep
  Common sweep_c;
  std::string sweep_var, sweep_out;
  std::vector<double> sweep_grid;
  std::vector<std::uint64_t> sweep_seeds;
  auto* sweep = app.add_subcommand("sweep", "one pipeline run per (grid value, seed)");
  add_common(sweep, sweep_c);
  sweep->add_option("-v,--variable", sweep_var, "size_of_Ds | size_of_Dl | alpha | beta");
  sweep->add_option("--grid", sweep_grid, "grid values")->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "seeds")->delimiter(',');
  sweep->add_option("-o,--out", sweep_out, "output directory")->required();

  // ablate
  Common abl_c;
  std::string abl_data, abl_out;
  std::vector<std::uint64_t> abl_seeds;
  auto* ablate = app.add_subcommand("ablate", "full vs addes-cnn vs addes-w");
  add_common(ablate, abl_c);
  ablate->add_option("-d,--data", abl_data, "dataset directory (default: planted from config)");
  ablate->add_option("--seeds", abl_seeds, "seeds")->delimiter(',');
  ablate->add_option("-o,--out", abl_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (synth->parsed()) {
      RunConfig cfg = resolve(synth_c);
      const fs::path out = synth_out.empty() ? fs::path(cfg.output_dir) / "data" : fs::path(synth_out);
      PlantedDraw draw = generate_planted(cfg.data);
      save_bundle(draw.bundle, out);
      save_relations(draw.bundle.relations, out / "relations.json");
      save_graph(draw.graph, out / "graph.json");
      write_manifest(out, "synth-data", cfg);
      std::printf("D_l %zu  D_u %zu  D_e %zu  test %zu  |S| %zu  |T| %zu  d_x %zu -> %s\n",
                  draw.bundle.d_l.size(), draw.bundle.d_u.size(), draw.bundle.d_e.size(),
                  draw.bundle.test.size(), draw.bundle.space.num_inexact(),
                  draw.bundle.space.num_target(), draw.bundle.dim(), out.string().c_str());
    } else if (build->parsed()) {
      resolve(graph_c);
      DatasetBundle b = load_data(graph_data);
      require_file(graph_rel, "relations file");
      b.relations = load_relations(graph_rel);
      LabelGraph g = build_relation_graph(b, graph_threshold);
      save_graph(g, graph_out);
      std::printf("graph |S| %zu |T| %zu linked targets %zu -> %s\n", g.space.num_inexact(),
                  g.space.num_target(), g.relations.size(), graph_out.c_str());
    } else if (train->parsed()) {
      RunConfig cfg = resolve(train_c);
      DatasetBundle b = load_data(train_data);
      LabelGraph rel = load_graph_checked(train_graph, b.space);
      PipelineConfig pc = cfg.pipeline();
      GeneratorRun run = train_generator(b, rel, variant_from_string(train_variant), pc, cfg.seed);
      const fs::path out(train_out);
      fs::create_directories(out);
      save_checkpoint(out / "checkpoint.json", run.model, run.classifier_graph, &run.state);
      write_training_log(out / "train_log.csv", run.state.log);
      write_manifest(out, "train", cfg);
      std::printf("joint epochs %zu (best %zu, val %.6g) digest %s -> %s\n", run.state.epoch,
                  run.state.best_epoch, run.state.best_val, params_digest(run.model.params).c_str(),
                  (out / "checkpoint.json").string().c_str());
    } else if (generate->parsed()) {
      if (gen_n <= 0) throw std::invalid_argument("--n-s must be positive");
      RunConfig cfg = resolve(gen_c);
      require_file(gen_ckpt, "checkpoint");
      DatasetBundle b = load_data(gen_data);
      LabelGraph rel = load_graph_checked(gen_graph, b.space);
      LoadedCheckpoint ck = load_checkpoint(gen_ckpt);
      const Split l = split_tail(b.d_l, cfg.train.val_fraction);
      LabelPrior prior(y_s_of(l.train), rel, cfg.gen.prior_clamp_eps);
      Rng rng = Rng::stream(cfg.seed, "generation");
      SyntheticSet syn = sample_labeled(static_cast<std::size_t>(gen_n), ck.model, prior, rng);
      std::vector<Instance> items;
      for (std::size_t i = 0; i < syn.size(); ++i) {
        auto r = syn.x.row_span(i);
        items.push_back({std::vector<double>(r.begin(), r.end()), syn.y_s[i], syn.y_t[i]});
      }
      if (fs::path(gen_out).has_parent_path()) fs::create_directories(fs::path(gen_out).parent_path());
      save_instances(items, gen_out);
      std::printf("wrote %zu synthetic instances -> %s\n", items.size(), gen_out.c_str());
    } else if (evaluate->parsed()) {
      RunConfig cfg = resolve(eval_c);
      const std::string hash = config_hash(cfg);
      DatasetBundle b = load_data(eval_data);
      LabelGraph rel = load_graph_checked(eval_graph, b.space);
      const Split e = split_tail(b.d_e, cfg.train.val_fraction);
      const LabeledSet train_set = LabeledSet::from_instances(e.train);
      const LabeledSet test = LabeledSet::from_instances(b.test);
      SyntheticSet syn;
      std::size_t n_s = 0;
      if (!eval_syn.empty()) {
        require_file(eval_syn, "synthetic file");
        const auto items = load_instances(eval_syn);
        const LabeledSet s = LabeledSet::from_instances(items);
        syn.x = s.x;
        syn.y_s = s.y_s;
        syn.y_t = s.y_t;
        n_s = evaluate->count("--n-s") ? eval_n : syn.size();
        if (n_s > syn.size()) throw ConfigError("--n-s exceeds the synthetic file size");
      } else if (evaluate->count("--n-s") && eval_n > 0) {
        throw ConfigError("--n-s needs --synthetic");
      }
      const double v = static_cast<double>(n_s);
      const std::string arch = to_string(cfg.downstream.arch);
      std::vector<SweepRow> rows;
      rows.push_back(as_row("baseline-" + arch, "size_of_Ds", 0, cfg.seed,
                            train_downstream(train_set, test, rel, cfg.downstream, cfg.seed), hash));
      Tensor ux = x_of(b.d_u);
      rows.push_back(as_row("entropy-reg", "size_of_Ds", 0, cfg.seed,
                            baseline_entropy_reg(train_set, ux, test, rel, cfg.downstream, cfg.seed,
                                                 cfg.entropy_lambda),
                            hash));
      rows.push_back(as_row("augmented-" + arch, "size_of_Ds", v, cfg.seed,
                            train_downstream(train_set.with_synthetic(syn, n_s), test, rel,
                                             cfg.downstream, cfg.seed),
                            hash));
      write_metrics_csv(eval_out, rows);
      for (const auto& r : rows) {
        for (const auto& w : r.report.warnings) std::fprintf(stderr, "warning: %s: %s\n", r.variant.c_str(), w.c_str());
        std::printf("%-24s |D_s| %-6g mAP %.4f  AUC %.4f\n", r.variant.c_str(), r.value, r.report.map, r.report.auc);
      }
    } else if (sweep->parsed()) {
      RunConfig cfg = resolve(sweep_c);
      std::vector<SweepSpec> specs;
      if (!sweep_var.empty()) {
        SweepSpec s = SweepSpec::defaults_for(sweep_var);
        for (const auto& existing : cfg.sweeps)
          if (existing.variable == sweep_var) s = existing;
        if (!sweep_grid.empty()) s.grid = sweep_grid;
        s.seeds = sweep_seeds.empty() ? (s.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : s.seeds)
                                      : sweep_seeds;
        specs.push_back(s);
      } else {
        if (cfg.sweeps.empty()) throw ConfigError("sweep: give --variable or list sweeps in the config");
        specs = cfg.sweeps;
      }
      const fs::path out(sweep_out);
      fs::create_directories(out);
      write_manifest(out, "sweep", cfg);
      for (const auto& s : specs) {
        s.validate();
        auto rows = run_sweep(s, cfg.data, cfg.pipeline());
        write_metrics_csv(out / ("sweep_" + s.variable + ".csv"), rows);
        write_plot_data(out / ("plot_" + s.variable + "_map.txt"), rows);
        std::printf("sweep %s: %zu rows -> %s\n", s.variable.c_str(), rows.size(),
                    (out / ("sweep_" + s.variable + ".csv")).string().c_str());
      }
    } else if (ablate->parsed()) {
      RunConfig cfg = resolve(abl_c);
      const PipelineConfig pc = cfg.pipeline();
      std::vector<SweepRow> rows;
      for (auto seed : seeds_or_default(abl_seeds, cfg)) {
        DatasetBundle b;
        LabelGraph rel;
        if (abl_data.empty()) {
          PlantedConfig dc = cfg.data;
          dc.seed = seed;
          PlantedDraw draw = generate_planted(dc);
          b = std::move(draw.bundle);
          rel = std::move(draw.graph);
        } else {
          b = load_data(abl_data);
          rel = build_relation_graph(b);
        }
        for (Variant v : {Variant::kFull, Variant::kAddesCnn, Variant::kAddesW}) {
          rows.push_back(as_row(to_string(v), "variant", 0, seed, run_ablation(v, b, rel, pc, seed), pc.config_hash));
          std::printf("seed %llu %-10s mAP %.4f  AUC %.4f\n", static_cast<unsigned long long>(seed),
                      rows.back().variant.c_str(), rows.back().report.map, rows.back().report.auc);
        }
      }
      const fs::path out(abl_out);
      fs::create_directories(out);
      write_metrics_csv(out / "ablation.csv", rows);
      write_manifest(out, "ablate", cfg);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
