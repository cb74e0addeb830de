#include "cfmaps/cfindex.hpp"

#include <algorithm>
#include <limits>

#include "cfmaps/error.hpp"
#include "json.hpp"

namespace cfmaps {

using nlohmann::json;

Box KdTree::node_box(int i) const {
  Box box;
  box.lo.assign(node_lo(i), node_lo(i) + dims_);
  box.hi.assign(node_hi(i), node_hi(i) + dims_);
  return box;
}

void KdTree::load_items(const Partition& p) {
  const std::size_t n = item_ids_.size();
  item_lo_.resize(n * dims_);
  item_hi_.resize(n * dims_);
  item_sides_.resize(n * dims_);
  for (std::size_t i = 0; i < n; ++i) {
    const Hyperrectangle& r = p.rects[static_cast<std::size_t>(item_ids_[i])];
    for (std::size_t k = 0; k < dims_; ++k) {
      const Interval& iv = r.bounds[k];
      item_lo_[i * dims_ + k] = iv.lo;
      item_hi_[i * dims_ + k] = iv.hi;
      item_sides_[i * dims_ + k] =
          static_cast<unsigned char>((iv.lo_closed ? kLoClosed : 0) | (iv.hi_closed ? kHiClosed : 0));
    }
  }
}

int KdTree::build_node(const std::vector<double>& centre_table, std::vector<RectId>& ids,
                       int begin, int end) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{-1, begin, end, 0});
  if (end - begin <= leaf_capacity_) return index;
  auto centre = [&](RectId id, std::size_t k) {
    return centre_table[static_cast<std::size_t>(id) * dims_ + k];
  };
  std::size_t best_dim = 0;
  double best_spread = -1.0;
  for (std::size_t k = 0; k < dims_; ++k) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int i = begin; i < end; ++i) {
      const double c = centre(ids[i], k);
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = k;
    }
  }
  const int mid = begin + (end - begin) / 2;
  std::nth_element(ids.begin() + begin, ids.begin() + mid, ids.begin() + end,
                   [&](RectId a, RectId b) {
                     const double ca = centre(a, best_dim);
                     const double cb = centre(b, best_dim);
                     return ca < cb || (ca == cb && a < b);
                   });
  build_node(centre_table, ids, begin, mid);
  const int right = build_node(centre_table, ids, mid, end);
  nodes_[index].right = right;
  return index;
}

void KdTree::finish_node(int index) {
  Node& n = nodes_[index];
  double* lo = node_lo_.data() + static_cast<std::size_t>(index) * dims_;
  double* hi = node_hi_.data() + static_cast<std::size_t>(index) * dims_;
  if (n.is_leaf()) {
    std::fill(lo, lo + dims_, std::numeric_limits<double>::infinity());
    std::fill(hi, hi + dims_, -std::numeric_limits<double>::infinity());
    n.min_id = std::numeric_limits<RectId>::max();
    for (int i = n.begin; i < n.end; ++i) {
      for (std::size_t k = 0; k < dims_; ++k) {
        lo[k] = std::min(lo[k], item_lo(i)[k]);
        hi[k] = std::max(hi[k], item_hi(i)[k]);
      }
      n.min_id = std::min(n.min_id, item_ids_[i]);
    }
    return;
  }
  const int l = n.left(index);
  const int r = n.right;
  for (std::size_t k = 0; k < dims_; ++k) {
    lo[k] = std::min(node_lo(l)[k], node_lo(r)[k]);
    hi[k] = std::max(node_hi(l)[k], node_hi(r)[k]);
  }
  n.min_id = std::min(nodes_[l].min_id, nodes_[r].min_id);
}

KdTree KdTree::build(const Partition& p, std::span<const RectId> ids, ClassIndex label,
                     const IndexConfig& config) {
  if (config.leaf_capacity < 1) throw ConfigError("leaf_capacity must be >= 1");
  KdTree t;
  t.label_ = label;
  t.leaf_capacity_ = config.leaf_capacity;
  t.dims_ = p.dims();
  if (ids.empty()) return t;

  std::vector<double> centres(p.size() * t.dims_);
  for (RectId id : ids) {
    const Hyperrectangle& r = p.rects.at(static_cast<std::size_t>(id));
    for (std::size_t k = 0; k < t.dims_; ++k) {
      centres[static_cast<std::size_t>(id) * t.dims_ + k] =
          r.bounds[k].lo + (r.bounds[k].hi - r.bounds[k].lo) / 2.0;
    }
  }
  std::vector<RectId> order(ids.begin(), ids.end());
  t.build_node(centres, order, 0, static_cast<int>(order.size()));

  t.item_ids_ = std::move(order);
  t.load_items(p);
  t.node_lo_.resize(t.nodes_.size() * t.dims_);
  t.node_hi_.resize(t.nodes_.size() * t.dims_);
  for (int i = static_cast<int>(t.nodes_.size()) - 1; i >= 0; --i) t.finish_node(i);
  return t;
}

KdTree KdTree::from_preorder(const Partition& p, ClassIndex label, int leaf_capacity,
                             const std::vector<SerialNode>& nodes) {
  KdTree t;
  t.label_ = label;
  t.leaf_capacity_ = leaf_capacity;
  t.dims_ = p.dims();
  if (nodes.empty()) return t;
  // Rebuild the node table with a stack of open internal nodes.
  struct Open {
    int index;
    int children_seen;
  };
  std::vector<Open> open;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const SerialNode& s = nodes[i];
    const int index = static_cast<int>(t.nodes_.size());
    if (!open.empty()) {
      Open& parent = open.back();
      if (parent.children_seen == 1) t.nodes_[parent.index].right = index;
      ++parent.children_seen;
    } else if (index != 0) {
      throw InvariantError("index document: node list has more than one root");
    }
    const int begin = static_cast<int>(t.item_ids_.size());
    t.nodes_.push_back(Node{s.leaf ? -1 : 0, begin, begin, 0});
    if (s.leaf) {
      if (s.rects.empty()) throw InvariantError("index document: empty leaf");
      for (RectId id : s.rects) {
        if (id < 0 || static_cast<std::size_t>(id) >= p.size()) {
          throw InvariantError("index document: unknown rect id " + std::to_string(id));
        }
        if (p.rects[static_cast<std::size_t>(id)].label != label) {
          throw InvariantError("index document: rect " + std::to_string(id) +
                               " has a different label");
        }
        t.item_ids_.push_back(id);
      }
      // Close every finished ancestor.
      t.nodes_.back().end = static_cast<int>(t.item_ids_.size());
      while (!open.empty() && open.back().children_seen == 2) {
        t.nodes_[open.back().index].end = static_cast<int>(t.item_ids_.size());
        open.pop_back();
      }
    } else {
      open.push_back(Open{index, 0});
    }
  }
  if (!open.empty()) throw InvariantError("index document: truncated node list");
  t.load_items(p);
  t.node_lo_.resize(t.nodes_.size() * t.dims_);
  t.node_hi_.resize(t.nodes_.size() * t.dims_);
  for (int i = static_cast<int>(t.nodes_.size()) - 1; i >= 0; --i) t.finish_node(i);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!(t.node_box(static_cast<int>(i)) == nodes[i].box)) {
      throw InvariantError("index document: node " + std::to_string(i) +
                           " box is not the tight enclosure of its rectangles");
    }
  }
  return t;
}

std::vector<RectId> KdTree::containing(std::span<const double> x) const {
  std::vector<RectId> out;
  if (nodes_.empty()) return out;
  std::vector<int> stack{0};
  auto inside = [&](const double* lo, const double* hi) {
    for (std::size_t k = 0; k < dims_; ++k) {
      if (x[k] < lo[k] || x[k] > hi[k]) return false;
    }
    return true;
  };
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    if (!inside(node_lo(i), node_hi(i))) continue;
    const Node& n = nodes_[i];
    if (n.is_leaf()) {
      for (int it = n.begin; it < n.end; ++it) {
        if (inside(item_lo(it), item_hi(it))) out.push_back(item_ids_[it]);
      }
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left(i));
    }
  }
  return out;
}

KdTree build_index(const Partition& p, ClassIndex label, const IndexConfig& config) {
  if (label < 0 || static_cast<std::size_t>(label) >= p.per_class.size() ||
      p.per_class[static_cast<std::size_t>(label)].empty()) {
    throw InfeasibleError("class " + std::to_string(label) + " has no regions");
  }
  return KdTree::build(p, p.per_class[static_cast<std::size_t>(label)], label, config);
}

IndexStats index_stats(const KdTree& t) {
  IndexStats s;
  s.n_nodes = t.n_nodes();
  if (t.empty()) return s;
  std::vector<int> level(t.n_nodes(), 0);
  std::size_t leaves = 0;
  std::size_t filled = 0;
  for (int i = 0; i < static_cast<int>(t.n_nodes()); ++i) {
    const KdTree::Node& n = t.node(i);
    s.depth = std::max(s.depth, level[i]);
    if (n.is_leaf()) {
      ++leaves;
      filled += static_cast<std::size_t>(n.size());
    } else {
      level[n.left(i)] = level[i] + 1;
      level[n.right] = level[i] + 1;
    }
  }
  s.mean_leaf_fill = static_cast<double>(filled) / static_cast<double>(leaves);
  return s;
}

std::string save_index(const KdTree& t) {
  json nodes = json::array();
  for (int i = 0; i < static_cast<int>(t.n_nodes()); ++i) {
    const KdTree::Node& n = t.node(i);
    const Box box = t.node_box(i);
    json node{{"lo", box.lo}, {"hi", box.hi}};
    if (n.is_leaf()) {
      std::vector<RectId> ids;
      for (int it = n.begin; it < n.end; ++it) ids.push_back(t.item_id(it));
      node["rects"] = ids;
    }
    nodes.push_back(std::move(node));
  }
  return json{{"version", 1},
              {"class_label", t.class_label()},
              {"leaf_capacity", t.leaf_capacity()},
              {"n_rects", t.n_rects()},
              {"nodes", nodes}}
      .dump();
}

KdTree load_index(std::string_view bytes, const Partition& p) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& err) {
    throw FormatError(std::string("malformed index document: ") + err.what());
  }
  for (const char* key : {"version", "class_label", "leaf_capacity", "n_rects", "nodes"}) {
    if (!doc.is_object() || !doc.contains(key)) {
      throw SchemaError(std::string("index document: missing field '") + key + "'");
    }
  }
  if (doc["version"] != 1) throw VersionError("unsupported index document version " + doc["version"].dump());
  std::vector<KdTree::SerialNode> nodes;
  try {
    for (const json& n : doc["nodes"]) {
      KdTree::SerialNode s;
      s.box.lo = n.at("lo").get<std::vector<double>>();
      s.box.hi = n.at("hi").get<std::vector<double>>();
      if (s.box.lo.size() != p.dims() || s.box.hi.size() != p.dims()) {
        throw SchemaError("index document: node box dimension mismatch");
      }
      s.leaf = n.contains("rects");
      if (s.leaf) s.rects = n.at("rects").get<std::vector<RectId>>();
      nodes.push_back(std::move(s));
    }
  } catch (const json::exception& err) {
    throw SchemaError(std::string("index document: ") + err.what());
  }
  KdTree t = KdTree::from_preorder(p, doc["class_label"].get<ClassIndex>(),
                                   doc["leaf_capacity"].get<int>(), nodes);
  if (t.n_rects() != doc["n_rects"].get<std::size_t>()) {
    throw InvariantError("index document: n_rects does not match the node list");
  }
  return t;
}

}  // namespace cfmaps
