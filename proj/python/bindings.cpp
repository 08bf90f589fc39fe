#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "addes/config.hpp"
#include "addes/probability.hpp"

namespace py = pybind11;
using namespace addes;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() == 1) return Tensor(Shape{1, static_cast<std::size_t>(a.shape(0))}, {a.data(), a.data() + a.size()});
  if (a.ndim() != 2) throw DimensionError("expected a 1-D or 2-D array");
  return Tensor(Shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))},
                {a.data(), a.data() + a.size()});
}

Array to_array(const Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

std::vector<LabelVector> to_labels(const Array& a) {
  const Tensor t = to_tensor(a);
  std::vector<LabelVector> out(t.rows(), LabelVector(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) {
      if (t(i, j) != 0.0 && t(i, j) != 1.0) throw ParseError("labels must be 0 or 1");
      out[i][j] = static_cast<std::uint8_t>(t(i, j));
    }
  return out;
}

Array labels_array(const std::vector<LabelVector>& labels, std::size_t width) {
  return labels.empty() ? Array({std::size_t{0}, width}) : to_array(labels_to_tensor(labels, width));
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["map"] = r.map;
  d["auc"] = r.auc;
  d["per_class_ap"] = r.per_class_ap;
  d["per_class_auc"] = r.per_class_auc;
  d["warnings"] = r.warnings;
  return d;
}

py::dict split_dict(const std::vector<Instance>& items, const LabelSpace& space) {
  py::dict d;
  d["x"] = items.empty() ? Array({std::size_t{0}, std::size_t{0}}) : to_array(x_of(items));
  std::vector<LabelVector> ys, yt;
  for (const auto& i : items) {
    if (i.y_s) ys.push_back(*i.y_s);
    if (i.y_t) yt.push_back(*i.y_t);
  }
  if (ys.size() == items.size()) d["y_s"] = labels_array(ys, space.num_inexact());
  if (yt.size() == items.size()) d["y_t"] = labels_array(yt, space.num_target());
  return d;
}

RunConfig config_from(const py::object& cfg) {
  if (cfg.is_none()) return run_config_from(Json::object());
  return run_config_from(Json::parse(py::str(py::module_::import("json").attr("dumps")(cfg)).cast<std::string>()));
}

Var unary(Tape& tape, const Array& a) { return tape.constant(to_tensor(a)); }

}  // namespace

PYBIND11_MODULE(_addes, m) {
  m.doc() = "Graph-constrained generative augmentation for inexactly supervised multi-label data";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("average_precision", [](const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    return average_precision(s, y);
  }, py::arg("scores"), py::arg("labels"));
  m.def("roc_auc", [](const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    return roc_auc(s, y);
  }, py::arg("scores"), py::arg("labels"));

  m.def("kl_gaussian", [](const Array& mu, const Array& sigma) {
    Tape tape;
    return to_array(kl_diag_gaussian_vs_std_normal(unary(tape, mu), unary(tape, sigma)).value());
  }, py::arg("mu"), py::arg("sigma"), "Row-wise KL(N(mu, diag sigma^2) || N(0, I)).");
  m.def("kl_bernoulli", [](const Array& q, const Array& p) {
    Tape tape;
    return to_array(kl_bernoulli_vec(unary(tape, q), unary(tape, p)).value());
  }, py::arg("q"), py::arg("p"), "Row-wise KL between factorized Bernoullis.");

  m.def("conditional_adjacency", [](const Array& labels, std::optional<double> threshold) {
    const auto y = to_labels(labels);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < (y.empty() ? 0 : y[0].size()); ++i) names.push_back("c" + std::to_string(i));
    return to_array(conditional_adjacency(count_cooccurrence(y, LabelSpace(names, {})), threshold));
  }, py::arg("labels"), py::arg("threshold") = py::none(),
     "A[i, j] = P(i | j) from an n x k binary label matrix.");
  m.def("normalize_adjacency", [](const Array& a) { return to_array(normalize_adjacency(to_tensor(a))); });

  py::class_<LabelGraph>(m, "LabelGraph")
      .def_property_readonly("adjacency", [](const LabelGraph& g) { return to_array(g.adjacency); })
      .def_property_readonly("inexact_classes", [](const LabelGraph& g) { return g.space.inexact_classes(); })
      .def_property_readonly("target_classes", [](const LabelGraph& g) { return g.space.target_classes(); })
      .def_readonly("relations", &LabelGraph::relations)
      .def("target_prior", [](const LabelGraph& g, const std::vector<std::uint8_t>& y_s) {
        return estimate_target_prior(y_s, g);
      }, py::arg("y_s"))
      .def("to_json", &graph_to_json)
      .def_static("from_json", &graph_from_json);

  m.def("link_targets", [](const Array& block, const std::vector<std::string>& inexact,
                           const std::vector<std::string>& target, const RelatedClassSets& relations) {
    return link_targets(to_tensor(block), LabelSpace(inexact, target), relations);
  }, py::arg("inexact_block"), py::arg("inexact_classes"), py::arg("target_classes"), py::arg("relations"));

  m.def("default_config", []() {
    return py::module_::import("json").attr("loads")(to_json(run_config_from(Json::object())).dump());
  }, "The default run configuration as a dict.");
  m.def("config_hash", [](const py::object& cfg) { return config_hash(config_from(cfg)); },
        py::arg("config") = py::none());

  m.def("synth_data", [](const py::object& cfg) {
    const RunConfig rc = config_from(cfg);
    const PlantedDraw d = generate_planted(rc.data);
    py::dict out;
    out["inexact_classes"] = d.bundle.space.inexact_classes();
    out["target_classes"] = d.bundle.space.target_classes();
    out["d_l"] = split_dict(d.bundle.d_l, d.bundle.space);
    out["d_u"] = split_dict(d.bundle.d_u, d.bundle.space);
    out["d_e"] = split_dict(d.bundle.d_e, d.bundle.space);
    out["test"] = split_dict(d.bundle.test, d.bundle.space);
    out["graph"] = d.graph;
    return out;
  }, py::arg("config") = py::none(), "Draw the planted problem for a config.");

  m.def("save_synth_data", [](const py::object& cfg, const std::filesystem::path& dir) {
    const PlantedDraw d = generate_planted(config_from(cfg).data);
    save_bundle(d.bundle, dir);
    save_graph(d.graph, dir / "graph.json");
  }, py::arg("config"), py::arg("directory"));

  m.def("run_pipeline", [](const py::object& cfg, const std::string& variant, std::size_t n_synthetic) {
    const RunConfig rc = config_from(cfg);
    const PipelineConfig pc = rc.pipeline();
    PlantedDraw d;
    GeneratorRun run;
    AugmentationResult aug;
    SyntheticSet syn;
    {
      py::gil_scoped_release release;
      d = generate_planted(rc.data);
      run = train_generator(d.bundle, d.graph, variant_from_string(variant), pc, rc.seed);
      aug = evaluate_augmentation(run, d.bundle, pc, rc.seed, pc.ds_grid);
      if (n_synthetic > 0) {
        Rng rng = Rng::stream(rc.seed, "generation");
        syn = sample_labeled(n_synthetic, run.model, run.prior, rng);
      }
    }
    py::dict out;
    out["chosen_ds"] = aug.chosen_ds;
    out["validation_map"] = aug.validation_map;
    out["test_map"] = aug.test_map;
    out["augmented"] = report_dict(aug.augmented);
    out["baseline"] = report_dict(aug.baseline);
    out["joint_epochs"] = run.state.epoch;
    out["digest"] = params_digest(run.model.params);
    out["config_hash"] = pc.config_hash;
    if (n_synthetic > 0) {
      py::dict s;
      s["x"] = to_array(syn.x);
      s["y_s"] = labels_array(syn.y_s, d.bundle.space.num_inexact());
      s["y_t"] = labels_array(syn.y_t, d.bundle.space.num_target());
      out["synthetic"] = s;
    }
    return out;
  }, py::arg("config") = py::none(), py::arg("variant") = "full", py::arg("n_synthetic") = 0,
     "Synthesize data, train the generator, select |D_s| and report test metrics.");
}
