#include "addes/label_graph.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace addes {

using nlohmann::json;

LabelSpace::LabelSpace(std::vector<std::string> inexact, std::vector<std::string> target)
    : inexact_(std::move(inexact)), target_(std::move(target)) {
  std::size_t i = 0;
  for (const auto& n : inexact_) {
    if (!index_.emplace(n, i++).second) throw ConfigError("duplicate class name: " + n);
  }
  for (const auto& n : target_) {
    if (!index_.emplace(n, i++).second) {
      throw ConfigError("class '" + n + "' declared as both inexact and target (S and T must be disjoint)");
    }
  }
}

std::size_t LabelSpace::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown class: " + name);
  return it->second;
}

bool LabelSpace::is_inexact(const std::string& name) const {
  auto it = index_.find(name);
  return it != index_.end() && it->second < inexact_.size();
}

bool LabelSpace::is_target(const std::string& name) const {
  auto it = index_.find(name);
  return it != index_.end() && it->second >= inexact_.size();
}

std::string LabelSpace::name_at(std::size_t w) const {
  if (w < inexact_.size()) return inexact_[w];
  return target_.at(w - inexact_.size());
}

CooccurrenceCounts count_cooccurrence(const std::vector<LabelVector>& labels,
                                      const LabelSpace& space) {
  if (labels.empty()) throw ContractError("count_cooccurrence: no labeled instances");
  const std::size_t s = space.num_inexact();
  CooccurrenceCounts c;
  c.num_classes = s;
  c.pair_counts.assign(s * s, 0);
  c.class_counts.assign(s, 0);
  for (const auto& y : labels) {
    if (y.size() != s) {
      throw DimensionError("count_cooccurrence: label vector has " + std::to_string(y.size()) +
                           " entries, expected " + std::to_string(s));
    }
    for (std::size_t i = 0; i < s; ++i) {
      if (y[i] > 1) throw DomainError("count_cooccurrence: labels must be 0/1");
      if (!y[i]) continue;
      ++c.class_counts[i];
      for (std::size_t j = 0; j < s; ++j)
        if (y[j]) ++c.pair_counts[i * s + j];
    }
  }
  return c;
}

Tensor conditional_adjacency(const CooccurrenceCounts& counts, std::optional<double> threshold) {
  const std::size_t s = counts.num_classes;
  if (s == 0) throw DimensionError("conditional_adjacency: no classes");
  Tensor a(s, s);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      const auto nj = counts.class_counts[j];
      double v = nj > 0 ? static_cast<double>(counts.pair(i, j)) / static_cast<double>(nj) : 0.0;
      if (threshold) v = v >= *threshold ? 1.0 : 0.0;
      a(i, j) = v;
    }
  }
  return a;
}

void validate_relations(const RelatedClassSets& relations, const LabelSpace& space) {
  for (const auto& [target, related] : relations) {
    if (!space.is_target(target)) throw ConfigError("unknown target class in relations: " + target);
    for (const auto& s : related) {
      if (!space.is_inexact(s)) {
        throw ConfigError("unknown inexact class in relations of '" + target + "': " + s);
      }
    }
  }
}

namespace {

Tensor identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

}  // namespace

LabelGraph link_targets(const Tensor& inexact_block, const LabelSpace& space,
                        const RelatedClassSets& relations) {
  const std::size_t s = space.num_inexact(), w = space.num_classes();
  if (inexact_block.rows() != s || inexact_block.cols() != s) {
    throw DimensionError("link_targets: inexact block " + shape_string(inexact_block.shape()) +
                         " does not match |S| = " + std::to_string(s));
  }
  validate_relations(relations, space);
  LabelGraph g;
  g.space = space;
  g.adjacency = Tensor(w, w);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) g.adjacency(i, j) = inexact_block(i, j);
  for (const auto& [target, related] : relations) {
    const std::size_t t = space.index_of(target);
    for (const auto& name : related) {
      const std::size_t j = space.index_of(name);
      g.adjacency(t, j) = 1.0;
      g.adjacency(j, t) = 1.0;
    }
  }
  g.embeddings = identity(w);
  g.one_hot_embeddings = true;
  g.relations = relations;
  return g;
}

LabelVector estimate_target_prior(const LabelVector& y_s, const LabelGraph& graph) {
  const std::size_t s = graph.space.num_inexact(), t = graph.space.num_target();
  if (y_s.size() != s) throw DimensionError("estimate_target_prior: y_s has wrong length");
  LabelVector y_t(t, 0);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      if (y_s[j] == 1 && graph.adjacency(s + i, j) == 1.0) {
        y_t[i] = 1;
        break;
      }
    }
  }
  return y_t;
}

Tensor normalize_adjacency(const Tensor& adjacency) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) throw DimensionError("normalize_adjacency: adjacency must be square");
  Tensor out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 1.0;
    for (std::size_t j = 0; j < n; ++j) row += adjacency(i, j);
    for (std::size_t j = 0; j < n; ++j) out(i, j) = (adjacency(i, j) + (i == j ? 1.0 : 0.0)) / row;
  }
  return out;
}

LabelGraph weighted_full_graph(const std::vector<std::pair<LabelVector, LabelVector>>& labels,
                               const LabelSpace& space) {
  if (labels.empty()) throw ContractError("weighted_full_graph: no labeled instances");
  const std::size_t s = space.num_inexact(), t = space.num_target(), w = s + t;
  std::vector<LabelVector> joined;
  joined.reserve(labels.size());
  for (const auto& [ys, yt] : labels) {
    if (yt.size() != t) throw ContractError("weighted_full_graph: ground-truth y_t missing");
    if (ys.size() != s) throw DimensionError("weighted_full_graph: y_s has wrong length");
    LabelVector y(ys);
    y.insert(y.end(), yt.begin(), yt.end());
    joined.push_back(std::move(y));
  }
  // The whole class set is treated as one inexact space for counting.
  std::vector<std::string> all(space.inexact_classes());
  all.insert(all.end(), space.target_classes().begin(), space.target_classes().end());
  const LabelSpace flat(all, {});
  LabelGraph g;
  g.space = space;
  g.adjacency = conditional_adjacency(count_cooccurrence(joined, flat));
  g.embeddings = identity(w);
  g.one_hot_embeddings = true;
  return g;
}

LabelGraph edgeless(const LabelGraph& graph) {
  LabelGraph g = graph;
  g.adjacency = Tensor(graph.adjacency.rows(), graph.adjacency.cols());
  return g;
}

LabelGraph reorder(const LabelGraph& graph, const LabelSpace& space) {
  if (graph.space.num_inexact() != space.num_inexact() ||
      graph.space.num_target() != space.num_target()) {
    throw ContractError("reorder: label spaces differ in size");
  }
  const std::size_t w = space.num_classes();
  std::vector<std::size_t> from(w);
  for (std::size_t i = 0; i < w; ++i) {
    const std::string name = space.name_at(i);
    if (space.is_inexact(name) != graph.space.is_inexact(name)) {
      throw ContractError("reorder: class '" + name + "' changes role between label spaces");
    }
    from[i] = graph.space.index_of(name);
  }
  LabelGraph g;
  g.space = space;
  g.adjacency = Tensor(w, w);
  for (std::size_t i = 0; i < w; ++i)
    for (std::size_t j = 0; j < w; ++j) g.adjacency(i, j) = graph.adjacency(from[i], from[j]);
  const std::size_t m = graph.embeddings.cols();
  g.embeddings = Tensor(w, m);
  for (std::size_t i = 0; i < w; ++i)
    for (std::size_t j = 0; j < m; ++j) g.embeddings(i, j) = graph.embeddings(from[i], j);
  if (graph.one_hot_embeddings) g.embeddings = identity(w);
  g.one_hot_embeddings = graph.one_hot_embeddings;
  g.relations = graph.relations;
  return g;
}

namespace {

json matrix_json(const Tensor& t) {
  json rows = json::array();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    auto r = t.row_span(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

Tensor matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* field) {
  std::vector<double> flat;
  if (!j.is_array()) throw ParseError(std::string("graph: '") + field + "' must be an array");
  for (const auto& e : j) {
    if (e.is_array()) {
      for (const auto& v : e) flat.push_back(v.get<double>());
    } else {
      flat.push_back(e.get<double>());
    }
  }
  if (cols == 0 && rows > 0) cols = flat.size() / rows;
  if (rows == 0 || cols == 0 || flat.size() != rows * cols) {
    throw ParseError(std::string("graph: '") + field + "' has " + std::to_string(flat.size()) +
                     " values, expected " + std::to_string(rows) + " rows");
  }
  return Tensor({rows, cols}, std::move(flat));
}

}  // namespace

std::string graph_to_json(const LabelGraph& graph) {
  json j;
  j["inexact_classes"] = graph.space.inexact_classes();
  j["target_classes"] = graph.space.target_classes();
  j["adjacency"] = matrix_json(graph.adjacency);
  if (graph.one_hot_embeddings) {
    j["embeddings"] = "one-hot";
  } else {
    j["embeddings"] = matrix_json(graph.embeddings);
  }
  json rel = json::object();
  for (const auto& [t, rs] : graph.relations) rel[t] = std::vector<std::string>(rs.begin(), rs.end());
  j["relations"] = rel;
  return j.dump(2);
}

LabelGraph graph_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("graph: invalid JSON: ") + e.what());
  }
  try {
    LabelGraph g;
    g.space = LabelSpace(j.at("inexact_classes").get<std::vector<std::string>>(),
                         j.at("target_classes").get<std::vector<std::string>>());
    const std::size_t w = g.space.num_classes();
    g.adjacency = matrix_from_json(j.at("adjacency"), w, w, "adjacency");
    const auto& emb = j.at("embeddings");
    if (emb.is_string()) {
      if (emb.get<std::string>() != "one-hot") throw ParseError("graph: unknown embeddings kind");
      g.embeddings = identity(w);
      g.one_hot_embeddings = true;
    } else {
      g.embeddings = matrix_from_json(emb, w, 0, "embeddings");
      g.one_hot_embeddings = false;
    }
    if (j.contains("relations")) {
      for (const auto& [t, rs] : j["relations"].items()) {
        auto names = rs.get<std::vector<std::string>>();
        g.relations[t] = std::set<std::string>(names.begin(), names.end());
      }
      validate_relations(g.relations, g.space);
    }
    return g;
  } catch (const json::exception& e) {
    throw ParseError(std::string("graph: ") + e.what());
  }
}

void save_graph(const LabelGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << graph_to_json(graph) << '\n';
}

LabelGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read graph file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return graph_from_json(ss.str());
}

RelatedClassSets load_relations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read relations file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("relations: invalid JSON: ") + e.what());
  }
  RelatedClassSets r;
  for (const auto& [t, rs] : j.items()) {
    auto names = rs.get<std::vector<std::string>>();
    r[t] = std::set<std::string>(names.begin(), names.end());
  }
  return r;
}

}  // namespace addes
