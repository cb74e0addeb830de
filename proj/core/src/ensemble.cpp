#include "cfmaps/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "cfmaps/error.hpp"
#include "json.hpp"

namespace cfmaps {

using nlohmann::json;

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kContinuous:
      return "continuous";
    case FeatureKind::kBinary:
      return "binary";
    case FeatureKind::kOrdinal:
      break;
  }
  return "ordinal";
}

FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "continuous") return FeatureKind::kContinuous;
  if (text == "binary") return FeatureKind::kBinary;
  if (text == "ordinal" || text == "categorical") return FeatureKind::kOrdinal;
  throw SchemaError("unknown feature kind '" + std::string(text) + "'");
}

void FeatureSchema::validate() const {
  if (features.empty()) throw InvariantError("schema has no features");
  std::set<std::string> names;
  for (const Feature& f : features) {
    if (!names.insert(f.name).second) {
      throw InvariantError("duplicate feature name '" + f.name + "'");
    }
    if (!(f.lo < f.hi) || !std::isfinite(f.lo) || !std::isfinite(f.hi)) {
      throw InvariantError("feature '" + f.name + "' needs a finite domain with lo < hi");
    }
  }
}

void FeatureSchema::check_point(std::span<const double> x) const {
  if (x.size() != features.size()) {
    throw SchemaError("point has " + std::to_string(x.size()) +
                      " coordinates, schema has " + std::to_string(features.size()));
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] >= features[k].lo && x[k] <= features[k].hi)) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "coordinate %zu (%s) = %.17g outside [%.17g, %.17g]",
                    k, features[k].name.c_str(), x[k], features[k].lo, features[k].hi);
      throw DomainError(buf);
    }
  }
}

Box FeatureSchema::domain() const {
  Box box;
  for (const Feature& f : features) {
    box.lo.push_back(f.lo);
    box.hi.push_back(f.hi);
  }
  return box;
}

Hyperrectangle FeatureSchema::domain_rect() const {
  Hyperrectangle rect;
  for (const Feature& f : features) {
    rect.bounds.push_back(Interval{f.lo, f.hi, true, true});
  }
  return rect;
}

int Tree::leaf_for(std::span<const double> x) const {
  int node = 0;
  while (!nodes[node].is_leaf()) {
    const TreeNode& n = nodes[node];
    node = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return node;
}

ClassIndex Tree::leaf_class(int node) const {
  const std::vector<double>& v = nodes[node].votes;
  return static_cast<ClassIndex>(std::max_element(v.begin(), v.end()) - v.begin());
}

int Tree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[nodes[i].left] = level[i] + 1;
      level[nodes[i].right] = level[i] + 1;
    }
  }
  return deepest;
}

ClassIndex majority(std::span<const int> counts) {
  return static_cast<ClassIndex>(std::max_element(counts.begin(), counts.end()) -
                                 counts.begin());
}

Ensemble::Ensemble(FeatureSchema schema, std::vector<std::string> classes,
                   std::vector<Tree> trees)
    : schema_(std::move(schema)), classes_(std::move(classes)), trees_(std::move(trees)) {
  validate();
}

void Ensemble::validate() const {
  schema_.validate();
  if (classes_.empty()) throw InvariantError("ensemble needs at least one class");
  if (trees_.empty()) throw InvariantError("ensemble needs at least one tree");
  const std::size_t c = classes_.size();
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const auto& nodes = trees_[t].nodes;
    if (nodes.empty()) throw InvariantError("tree " + std::to_string(t) + " is empty");
    // Children must point forward so the structure is a tree without cycles.
    std::vector<int> parents(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const TreeNode& n = nodes[i];
      const std::string where = "tree " + std::to_string(t) + " node " + std::to_string(i);
      if (n.is_leaf()) {
        if (n.votes.size() != c) {
          throw InvariantError(where + ": votes length " + std::to_string(n.votes.size()) +
                               " != class count " + std::to_string(c));
        }
        bool positive = false;
        for (double v : n.votes) {
          if (!(v >= 0.0) || !std::isfinite(v)) throw InvariantError(where + ": negative vote");
          positive = positive || v > 0.0;
        }
        if (!positive) throw InvariantError(where + ": leaf without a positive vote");
        continue;
      }
      if (static_cast<std::size_t>(n.feature) >= schema_.size()) {
        throw SchemaError(where + ": feature index " + std::to_string(n.feature) +
                          " out of range");
      }
      const Feature& f = schema_.features[n.feature];
      if (!(n.threshold > f.lo && n.threshold < f.hi)) {
        throw InvariantError(where + ": threshold not strictly inside the domain of '" +
                             f.name + "'");
      }
      for (int child : {n.left, n.right}) {
        if (child <= static_cast<int>(i) || child >= static_cast<int>(nodes.size())) {
          throw InvariantError(where + ": invalid child reference");
        }
        if (++parents[child] > 1) throw InvariantError(where + ": node shared by two parents");
      }
    }
  }
}

std::vector<int> Ensemble::vote_counts(std::span<const double> x) const {
  std::vector<int> counts(classes_.size(), 0);
  for (const Tree& tree : trees_) ++counts[tree.leaf_class(tree.leaf_for(x))];
  return counts;
}

ClassIndex Ensemble::predict_unchecked(std::span<const double> x) const {
  const std::vector<int> counts = vote_counts(x);
  return majority(counts);
}

ClassIndex Ensemble::predict(std::span<const double> x) const {
  schema_.check_point(x);
  return predict_unchecked(x);
}

namespace {

json node_to_json(const Tree& tree, int index) {
  const TreeNode& n = tree.nodes[index];
  if (n.is_leaf()) return json{{"votes", n.votes}};
  return json{{"feature", n.feature},
              {"threshold", n.threshold},
              {"left", node_to_json(tree, n.left)},
              {"right", node_to_json(tree, n.right)}};
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw SchemaError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

double require_number(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw SchemaError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

int node_from_json(const json& j, Tree& tree, const std::string& where, int depth) {
  if (depth > 4096) throw FormatError(where + ": tree too deep");
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.is_object() && j.contains("votes")) {
    const json& votes = j.at("votes");
    if (!votes.is_array()) throw SchemaError(where + ": 'votes' must be an array");
    std::vector<double> v;
    for (const json& e : votes) {
      if (!e.is_number()) throw SchemaError(where + ": votes must be numbers");
      v.push_back(e.get<double>());
    }
    tree.nodes[index].votes = std::move(v);
    return index;
  }
  const json& feature = require(j, "feature", where);
  if (!feature.is_number_integer()) throw SchemaError(where + ": 'feature' must be an integer");
  TreeNode node;
  node.feature = feature.get<int>();
  if (node.feature < 0) throw SchemaError(where + ": negative feature index");
  node.threshold = require_number(j, "threshold", where);
  tree.nodes[index] = node;
  const int left = node_from_json(require(j, "left", where), tree, where, depth + 1);
  const int right = node_from_json(require(j, "right", where), tree, where, depth + 1);
  tree.nodes[index].left = left;
  tree.nodes[index].right = right;
  return index;
}

json to_json(const Ensemble& e) {
  json features = json::array();
  for (const Feature& f : e.schema().features) {
    features.push_back({{"name", f.name}, {"kind", to_string(f.kind)}, {"lo", f.lo}, {"hi", f.hi}});
  }
  json trees = json::array();
  for (const Tree& t : e.trees()) trees.push_back(node_to_json(t, 0));
  return json{{"version", 1},
              {"schema", {{"features", features}}},
              {"classes", e.classes()},
              {"trees", trees}};
}

}  // namespace

std::string save_model(const Ensemble& e) { return to_json(e).dump(); }

Ensemble load_model(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& err) {
    throw FormatError(std::string("malformed model document: ") + err.what());
  }
  const std::string where = "model document";
  if (!doc.is_object()) throw FormatError("malformed model document: not a JSON object");
  const json& version = require(doc, "version", where);
  if (!version.is_number_integer() || version.get<int>() != 1) {
    throw VersionError("unsupported model document version " + version.dump());
  }
  FeatureSchema schema;
  const json& features = require(require(doc, "schema", where), "features", where + ".schema");
  if (!features.is_array()) throw SchemaError(where + ": 'schema.features' must be an array");
  for (std::size_t k = 0; k < features.size(); ++k) {
    const std::string fw = where + ".schema.features[" + std::to_string(k) + "]";
    const json& f = features[k];
    const json& name = require(f, "name", fw);
    if (!name.is_string()) throw SchemaError(fw + ": 'name' must be a string");
    Feature feat;
    feat.name = name.get<std::string>();
    const json& kind = require(f, "kind", fw);
    if (!kind.is_string()) throw SchemaError(fw + ": 'kind' must be a string");
    feat.kind = parse_feature_kind(kind.get<std::string>());
    feat.lo = require_number(f, "lo", fw);
    feat.hi = require_number(f, "hi", fw);
    schema.features.push_back(std::move(feat));
  }
  std::vector<std::string> classes;
  const json& cls = require(doc, "classes", where);
  if (!cls.is_array()) throw SchemaError(where + ": 'classes' must be an array");
  for (const json& c : cls) classes.push_back(c.is_string() ? c.get<std::string>() : c.dump());
  std::vector<Tree> trees;
  const json& tj = require(doc, "trees", where);
  if (!tj.is_array()) throw SchemaError(where + ": 'trees' must be an array");
  for (std::size_t t = 0; t < tj.size(); ++t) {
    Tree tree;
    node_from_json(tj[t], tree, where + ".trees[" + std::to_string(t) + "]", 0);
    trees.push_back(std::move(tree));
  }
  return Ensemble(std::move(schema), std::move(classes), std::move(trees));
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string model_hash(const Ensemble& e) { return fnv1a_hex(save_model(e)); }

}  // namespace cfmaps
