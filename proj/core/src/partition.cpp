#include "cfmaps/partition.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "cfmaps/cfindex.hpp"
#include "cfmaps/error.hpp"
#include "json.hpp"

namespace cfmaps {

using nlohmann::json;

namespace {

// Can the interval hold a value <= t?
bool meets_left(const Interval& iv, double t) {
  return iv.lo < t || (iv.lo == t && iv.lo_closed);
}

// Can the interval hold a value > t?
bool meets_right(const Interval& iv, double t) { return iv.hi > t; }

struct ActiveSplit {
  int feature;
  double threshold;
};

// Per-tree reachable classes plus the thresholds that actually separate
// reachable leaves inside the box.
struct BoxAnalysis {
  std::vector<int> min_votes;  // trees whose reachable leaves all vote c
  std::vector<int> max_votes;  // trees with at least one reachable leaf voting c
  bool all_single_leaf = true;
  std::vector<ActiveSplit> active;
};

// Depth-first walk over the leaves of `tree` reachable inside `box`. The box
// is narrowed along the path so contradictory paths are cut off. `on_split`
// sees every node whose both children stay reachable.
template <typename Leaf, typename Split>
void walk_reachable(const Tree& tree, std::vector<Interval>& box, int node, Leaf&& on_leaf,
                    Split&& on_split) {
  const TreeNode& n = tree.nodes[node];
  if (n.is_leaf()) {
    on_leaf(node);
    return;
  }
  Interval& iv = box[n.feature];
  const bool l = meets_left(iv, n.threshold);
  const bool r = meets_right(iv, n.threshold);
  if (l && r) on_split(n);
  const Interval saved = iv;
  if (l) {
    if (n.threshold < iv.hi) {
      iv.hi = n.threshold;
      iv.hi_closed = true;
    }
    walk_reachable(tree, box, n.left, on_leaf, on_split);
    iv = saved;
  }
  if (r) {
    if (n.threshold >= iv.lo) {
      iv.lo = n.threshold;
      iv.lo_closed = false;
    }
    walk_reachable(tree, box, n.right, on_leaf, on_split);
    iv = saved;
  }
}

BoxAnalysis analyze(const Ensemble& e, std::span<const Interval> box, bool want_active) {
  const int c = e.n_classes();
  BoxAnalysis a;
  a.min_votes.assign(c, 0);
  a.max_votes.assign(c, 0);
  std::vector<Interval> scratch(box.begin(), box.end());
  std::vector<char> seen(c);
  for (const Tree& tree : e.trees()) {
    std::fill(seen.begin(), seen.end(), 0);
    int leaves = 0;
    int distinct = 0;
    ClassIndex last = -1;
    walk_reachable(
        tree, scratch, 0,
        [&](int leaf) {
          ++leaves;
          last = tree.leaf_class(leaf);
          if (!seen[last]) {
            seen[last] = 1;
            ++distinct;
          }
        },
        [&](const TreeNode& n) {
          if (want_active) a.active.push_back(ActiveSplit{n.feature, n.threshold});
        });
    if (leaves != 1) a.all_single_leaf = false;
    if (distinct == 1) ++a.min_votes[last];
    for (int k = 0; k < c; ++k) a.max_votes[k] += seen[k];
  }
  return a;
}

Constancy decide(const BoxAnalysis& a) {
  const int c = static_cast<int>(a.min_votes.size());
  if (a.all_single_leaf) return Constancy{true, majority(a.min_votes)};
  for (int winner = 0; winner < c; ++winner) {
    bool beats_all = true;
    for (int other = 0; other < c && beats_all; ++other) {
      if (other == winner) continue;
      // Lower indices win ties, so a lower competitor must be strictly beaten.
      beats_all = other < winner ? a.min_votes[winner] > a.max_votes[other]
                                 : a.min_votes[winner] >= a.max_votes[other];
    }
    if (beats_all) return Constancy{true, winner};
  }
  return Constancy{};
}

std::vector<std::vector<double>> thresholds_per_feature(const Ensemble& e) {
  std::vector<std::vector<double>> out(e.n_features());
  for (const Tree& tree : e.trees()) {
    for (const TreeNode& n : tree.nodes) {
      if (!n.is_leaf()) out[n.feature].push_back(n.threshold);
    }
  }
  for (auto& v : out) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return out;
}

}  // namespace

void Partition::reindex(int n_classes) {
  int classes = n_classes;
  for (const Hyperrectangle& r : rects) classes = std::max(classes, r.label + 1);
  per_class.assign(static_cast<std::size_t>(std::max(classes, 0)), {});
  for (std::size_t i = 0; i < rects.size(); ++i) {
    rects[i].id = static_cast<RectId>(i);
    per_class[static_cast<std::size_t>(rects[i].label)].push_back(rects[i].id);
  }
}

std::vector<int> reachable_leaves(const Tree& tree, std::span<const Interval> box) {
  std::vector<int> leaves;
  std::vector<Interval> scratch(box.begin(), box.end());
  walk_reachable(
      tree, scratch, 0, [&](int leaf) { leaves.push_back(leaf); }, [](const TreeNode&) {});
  std::sort(leaves.begin(), leaves.end());
  return leaves;
}

Constancy constancy_check(const Ensemble& e, std::span<const Interval> box) {
  if (box.size() != e.n_features()) throw SchemaError("box dimension does not match the schema");
  return decide(analyze(e, box, false));
}

Partition extract_partition(const Ensemble& e) {
  Partition p;
  p.model_hash = model_hash(e);
  std::vector<std::vector<Interval>> stack{e.schema().domain_rect().bounds};
  std::vector<double> candidates;
  while (!stack.empty()) {
    std::vector<Interval> box = std::move(stack.back());
    stack.pop_back();
    const BoxAnalysis a = analyze(e, box, true);
    const Constancy verdict = decide(a);
    if (verdict.constant) {
      p.rects.push_back(Hyperrectangle{0, std::move(box), verdict.label});
      continue;
    }
    // Unknown implies some tree still has two reachable leaves, hence at least
    // one active split.
    std::map<int, std::vector<double>> by_feature;
    for (const ActiveSplit& s : a.active) by_feature[s.feature].push_back(s.threshold);
    int best_feature = -1;
    std::size_t best_count = 0;
    for (auto& [f, ts] : by_feature) {
      std::sort(ts.begin(), ts.end());
      ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
      if (ts.size() > best_count) {
        best_count = ts.size();
        best_feature = f;
      }
    }
    const std::vector<double>& ts = by_feature.at(best_feature);
    const double t = ts[(ts.size() - 1) / 2];
    std::vector<Interval> upper = box;
    box[best_feature].hi = t;
    box[best_feature].hi_closed = true;
    upper[best_feature].lo = t;
    upper[best_feature].lo_closed = false;
    stack.push_back(std::move(upper));
    stack.push_back(std::move(box));
  }
  p.reindex(e.n_classes());
  return p;
}

Partition extract_exact_grid(const Ensemble& e, std::uint64_t cell_cap) {
  const auto thresholds = thresholds_per_feature(e);
  const std::size_t m = e.n_features();
  double cells = 1.0;
  for (const auto& ts : thresholds) cells *= static_cast<double>(ts.size() + 1);
  if (cells > static_cast<double>(cell_cap)) {
    throw CapacityError("exact grid would have " + std::to_string(static_cast<long double>(cells)) +
                        " cells, above the cap of " + std::to_string(cell_cap));
  }
  // Per-feature interval lists.
  std::vector<std::vector<Interval>> axis(m);
  for (std::size_t k = 0; k < m; ++k) {
    const Feature& f = e.schema().features[k];
    double lo = f.lo;
    bool lo_closed = true;
    for (double t : thresholds[k]) {
      axis[k].push_back(Interval{lo, t, lo_closed, true});
      lo = t;
      lo_closed = false;
    }
    axis[k].push_back(Interval{lo, f.hi, lo_closed, true});
  }
  Partition p;
  p.model_hash = model_hash(e);
  std::vector<std::size_t> digit(m, 0);
  std::vector<double> mid(m);
  while (true) {
    Hyperrectangle r;
    for (std::size_t k = 0; k < m; ++k) {
      const Interval& iv = axis[k][digit[k]];
      r.bounds.push_back(iv);
      mid[k] = iv.lo + (iv.hi - iv.lo) / 2.0;
    }
    r.label = e.predict_unchecked(mid);
    p.rects.push_back(std::move(r));
    std::size_t k = 0;
    while (k < m && ++digit[k] == axis[k].size()) digit[k++] = 0;
    if (k == m) break;
  }
  p.reindex(e.n_classes());
  return p;
}

PartitionReport verify_points(const Partition& p, const Ensemble& e,
                              std::span<const std::vector<double>> points) {
  PartitionReport report;
  std::vector<RectId> all(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) all[i] = static_cast<RectId>(i);
  const KdTree locator = KdTree::build(p, all, -1, IndexConfig{8});
  for (const std::vector<double>& x : points) {
    ++report.samples;
    std::size_t members = 0;
    ClassIndex label = -1;
    for (RectId id : locator.containing(x)) {
      const Hyperrectangle& r = p.rects[static_cast<std::size_t>(id)];
      if (r.contains(x)) {
        ++members;
        label = r.label;
      }
    }
    if (members == 0) {
      ++report.cover_violations;
    } else if (members > 1) {
      ++report.overlap_violations;
    } else if (label != e.predict_unchecked(x)) {
      ++report.faithfulness_violations;
    }
  }
  return report;
}

PartitionReport verify_partition(const Partition& p, const Ensemble& e, std::size_t n_samples,
                                 std::uint64_t seed) {
  const auto thresholds = thresholds_per_feature(e);
  const FeatureSchema& schema = e.schema();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> points(n_samples, std::vector<double>(schema.size()));
  for (auto& x : points) {
    for (std::size_t k = 0; k < schema.size(); ++k) {
      const Feature& f = schema.features[k];
      const double roll = unit(rng);
      if (roll < 0.3 && !thresholds[k].empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, thresholds[k].size() - 1);
        x[k] = thresholds[k][pick(rng)];
      } else if (roll < 0.33) {
        x[k] = roll < 0.315 ? f.lo : f.hi;
      } else {
        x[k] = f.lo + unit(rng) * (f.hi - f.lo);
      }
    }
  }
  return verify_points(p, e, points);
}

std::string save_partition(const Partition& p) {
  json rects = json::array();
  for (const Hyperrectangle& r : p.rects) {
    json bounds = json::array();
    for (const Interval& iv : r.bounds) {
      bounds.push_back({{"lo", iv.lo}, {"hi", iv.hi}, {"hi_closed", iv.hi_closed},
                        {"lo_closed", iv.lo_closed}});
    }
    rects.push_back({{"id", r.id}, {"label", r.label}, {"bounds", std::move(bounds)}});
  }
  return json{{"version", 1}, {"model_hash", p.model_hash}, {"rects", std::move(rects)}}.dump();
}

Partition load_partition(std::string_view bytes, int n_classes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& err) {
    throw FormatError(std::string("malformed partition document: ") + err.what());
  }
  for (const char* key : {"version", "model_hash", "rects"}) {
    if (!doc.is_object() || !doc.contains(key)) {
      throw SchemaError(std::string("partition document: missing field '") + key + "'");
    }
  }
  if (doc["version"] != 1) {
    throw VersionError("unsupported partition document version " + doc["version"].dump());
  }
  Partition p;
  p.model_hash = doc["model_hash"].get<std::string>();
  try {
    for (const json& rj : doc["rects"]) {
      Hyperrectangle r;
      r.id = rj.at("id").get<RectId>();
      r.label = rj.at("label").get<ClassIndex>();
      for (const json& bj : rj.at("bounds")) {
        Interval iv;
        iv.lo = bj.at("lo").get<double>();
        iv.hi = bj.at("hi").get<double>();
        iv.hi_closed = bj.at("hi_closed").get<bool>();
        iv.lo_closed = bj.value("lo_closed", false);
        r.bounds.push_back(iv);
      }
      p.rects.push_back(std::move(r));
    }
  } catch (const json::exception& err) {
    throw SchemaError(std::string("partition document: ") + err.what());
  }
  for (std::size_t i = 0; i < p.rects.size(); ++i) {
    const Hyperrectangle& r = p.rects[i];
    if (r.id != static_cast<RectId>(i)) throw InvariantError("partition document: ids must be 0..n-1 in order");
    if (r.label < 0) throw InvariantError("partition document: negative label");
    if (r.dims() != p.rects.front().dims()) throw InvariantError("partition document: ragged bounds");
    for (const Interval& iv : r.bounds) {
      if (iv.empty()) throw InvariantError("partition document: empty interval in rect " + std::to_string(i));
    }
  }
  p.reindex(n_classes);
  return p;
}

}  // namespace cfmaps
