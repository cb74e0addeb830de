#include "cfmaps/query.hpp"

#include <algorithm>
#include <string>

#include "cfmaps/error.hpp"

namespace cfmaps {

namespace {

struct QueueEntry {
  double bound;
  RectId min_id;
  int node;
};

// Min-heap order on (bound, min_id).
struct LaterFirst {
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    return a.bound > b.bound || (a.bound == b.bound && a.min_id > b.min_id);
  }
};

void check_frozen(std::span<const int> frozen, std::size_t dims) {
  for (int k : frozen) {
    if (k < 0 || static_cast<std::size_t>(k) >= dims) {
      throw SchemaError("frozen feature index " + std::to_string(k) + " out of range");
    }
  }
}

template <Norm P>
NearestResult search(const KdTree& tree, std::span<const double> x, const double* w,
                     std::span<const int> frozen, SearchAudit* audit) {
  const std::size_t m = tree.dims();
  NearestResult best;
  best.rect_id = std::numeric_limits<RectId>::max();
  Certificate& cert = best.certificate;

  // Could a subtree with this key still improve (distance, id)?
  auto may_improve = [&](double bound, RectId min_id) {
    return bound < best.distance || (bound == best.distance && min_id < best.rect_id);
  };
  auto node_bound = [&](int node) {
    return detail::box_distance<P>(x.data(), tree.node_lo(node), tree.node_hi(node), w, m);
  };

  std::vector<QueueEntry> queue;
  std::vector<QueueEntry> discarded;  // audit only
  std::vector<char> visited;          // audit only
  if (audit != nullptr) visited.assign(tree.n_rects(), 0);

  queue.push_back(QueueEntry{node_bound(0), tree.node(0).min_id, 0});
  while (!queue.empty()) {
    std::pop_heap(queue.begin(), queue.end(), LaterFirst{});
    const QueueEntry top = queue.back();
    queue.pop_back();
    ++cert.nodes_popped;
    if (audit != nullptr) audit->popped_bounds.push_back(top.bound);
    if (!may_improve(top.bound, top.min_id)) {
      cert.final_popped_bound = top.bound;
      cert.nodes_pruned += 1 + queue.size();
      break;
    }
    const KdTree::Node& node = tree.node(top.node);
    if (node.is_leaf()) {
      for (int item = node.begin; item < node.end; ++item) {
        if (audit != nullptr) visited[item] = 1;
        bool admissible = true;
        for (int k : frozen) {
          if (!tree.item_admits(item, static_cast<std::size_t>(k), x[k])) {
            admissible = false;
            break;
          }
        }
        if (!admissible) continue;
        ++cert.rects_evaluated;
        const double d = detail::box_distance<P>(x.data(), tree.item_lo(item), tree.item_hi(item), w, m);
        const RectId id = tree.item_id(item);
        if (d < best.distance || (d == best.distance && id < best.rect_id)) {
          best.distance = d;
          best.rect_id = id;
        }
      }
    } else {
      for (int child : {node.left(top.node), node.right}) {
        const QueueEntry entry{node_bound(child), tree.node(child).min_id, child};
        if (may_improve(entry.bound, entry.min_id)) {
          queue.push_back(entry);
          std::push_heap(queue.begin(), queue.end(), LaterFirst{});
        } else {
          ++cert.nodes_pruned;
          if (audit != nullptr) discarded.push_back(entry);
        }
      }
    }
    if (audit != nullptr) {
      ++audit->iterations;
      std::vector<char> covered = visited;
      auto cover = [&](int n) {
        const KdTree::Node& c = tree.node(n);
        std::fill(covered.begin() + c.begin, covered.begin() + c.end, 1);
      };
      for (const QueueEntry& e : queue) cover(e.node);
      for (const QueueEntry& e : discarded) {
        if (e.bound >= best.distance) cover(e.node);
      }
      audit->coverage_violations +=
          static_cast<std::size_t>(std::count(covered.begin(), covered.end(), 0));
    }
  }
  if (best.rect_id == std::numeric_limits<RectId>::max()) {
    throw InfeasibleError("no region of class " + std::to_string(tree.class_label()) +
                          " admits the frozen features");
  }
  return best;
}

bool admits(const Hyperrectangle& r, std::span<const double> x, std::span<const int> frozen) {
  for (int k : frozen) {
    if (!r.bounds[static_cast<std::size_t>(k)].contains(x[k])) return false;
  }
  return true;
}

template <Norm P>
OracleResult scan(const Partition& p, ClassIndex target, std::span<const double> x,
                  const double* w, std::span<const int> frozen) {
  const std::size_t m = p.dims();
  OracleResult best;
  std::vector<double> lo(m);
  std::vector<double> hi(m);
  for (RectId id : p.per_class[static_cast<std::size_t>(target)]) {
    const Hyperrectangle& r = p.rects[static_cast<std::size_t>(id)];
    if (!admits(r, x, frozen)) continue;
    for (std::size_t k = 0; k < m; ++k) {
      lo[k] = r.bounds[k].lo;
      hi[k] = r.bounds[k].hi;
    }
    const double d = detail::box_distance<P>(x.data(), lo.data(), hi.data(), w, m);
    if (best.rect_id < 0 || d < best.distance || (d == best.distance && id < best.rect_id)) {
      best.distance = d;
      best.rect_id = id;
    }
  }
  return best;
}

std::vector<double> strict_steps(const CounterfactualMaps& maps, const Hyperrectangle& rect,
                                 double eps) {
  std::vector<double> steps(rect.dims());
  const FeatureSchema& schema = maps.ensemble.schema();
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const double width = schema.features[k].hi - schema.features[k].lo;
    steps[k] = std::min(eps * width, rect.bounds[k].width() / 2.0);
  }
  return steps;
}

}  // namespace

NearestResult nearest_region(const KdTree& tree, std::span<const double> x, const NormSpec& norm,
                             std::span<const int> frozen, SearchAudit* audit) {
  if (tree.empty()) throw InfeasibleError("index for class " + std::to_string(tree.class_label()) + " is empty");
  if (x.size() != tree.dims()) throw SchemaError("query dimension does not match the index");
  norm.validate(tree.dims());
  check_frozen(frozen, tree.dims());
  const double* w = norm.weights.empty() ? nullptr : norm.weights.data();
  switch (norm.p) {
    case Norm::kL1:
      return search<Norm::kL1>(tree, x, w, frozen, audit);
    case Norm::kL2:
      return search<Norm::kL2>(tree, x, w, frozen, audit);
    case Norm::kLinf:
      break;
  }
  return search<Norm::kLinf>(tree, x, w, frozen, audit);
}

OracleResult linear_scan_oracle(const Partition& p, ClassIndex target, std::span<const double> x,
                                const NormSpec& norm, std::span<const int> frozen) {
  if (x.size() != p.dims()) throw SchemaError("query dimension does not match the partition");
  norm.validate(p.dims());
  check_frozen(frozen, p.dims());
  if (target < 0 || static_cast<std::size_t>(target) >= p.per_class.size()) {
    throw InfeasibleError("class " + std::to_string(target) + " has no regions");
  }
  const double* w = norm.weights.empty() ? nullptr : norm.weights.data();
  OracleResult r;
  switch (norm.p) {
    case Norm::kL1:
      r = scan<Norm::kL1>(p, target, x, w, frozen);
      break;
    case Norm::kL2:
      r = scan<Norm::kL2>(p, target, x, w, frozen);
      break;
    case Norm::kLinf:
      r = scan<Norm::kLinf>(p, target, x, w, frozen);
      break;
  }
  if (r.rect_id < 0) throw InfeasibleError("no admissible region of class " + std::to_string(target));
  return r;
}

CounterfactualMaps assemble_maps(Ensemble e, Partition p, const IndexConfig& config) {
  CounterfactualMaps maps{std::move(e), std::move(p), {}};
  const int c = maps.ensemble.n_classes();
  maps.partition.reindex(c);
  maps.trees.resize(static_cast<std::size_t>(c));
  for (int label = 0; label < c; ++label) {
    if (!maps.partition.per_class[label].empty()) {
      maps.trees[label] = build_index(maps.partition, label, config);
    }
  }
  return maps;
}

CounterfactualMaps build_maps(Ensemble e, const IndexConfig& config) {
  Partition p = extract_partition(e);
  return assemble_maps(std::move(e), std::move(p), config);
}

namespace {

CounterfactualResult finish(const CounterfactualMaps& maps, std::span<const double> x,
                            ClassIndex original, ClassIndex target, const NearestResult& hit,
                            double eps) {
  const Hyperrectangle& rect = maps.partition.rects[static_cast<std::size_t>(hit.rect_id)];
  CounterfactualResult out;
  out.original = original;
  out.target = target;
  out.rect_id = hit.rect_id;
  out.distance = hit.distance;
  out.certificate = hit.certificate;
  out.x_cf = project_strict(x, rect, strict_steps(maps, rect, eps));
  if (maps.ensemble.predict_unchecked(out.x_cf) != target) {
    throw InvariantError("counterfactual does not re-predict to class " + std::to_string(target));
  }
  return out;
}

void check_request(const CounterfactualMaps& maps, std::span<const double> x, const NormSpec& norm,
                   std::span<const int> frozen, double eps) {
  maps.ensemble.schema().check_point(x);
  norm.validate(x.size());
  check_frozen(frozen, x.size());
  if (!(eps > 0.0) || !(eps < 0.5)) throw ConfigError("eps must lie in (0, 0.5)");
}

}  // namespace

CounterfactualResult counterfactual(const CounterfactualMaps& maps, const QueryRequest& req) {
  if (!req.target) return counterfactual_any(maps, req.x, req.norm, req.frozen, req.eps);
  check_request(maps, req.x, req.norm, req.frozen, req.eps);
  const ClassIndex target = *req.target;
  if (target < 0 || target >= maps.ensemble.n_classes()) {
    throw ConfigError("target class " + std::to_string(target) + " out of range");
  }
  const ClassIndex y = maps.ensemble.predict_unchecked(req.x);
  if (y == target) {
    throw PreconditionError("input is already predicted as class " + std::to_string(target) +
                            "; choose a different target");
  }
  const KdTree* tree = maps.tree_for(target);
  if (tree == nullptr) throw InfeasibleError("class " + std::to_string(target) + " has no regions");
  const NearestResult hit = nearest_region(*tree, req.x, req.norm, req.frozen);
  return finish(maps, req.x, y, target, hit, req.eps);
}

CounterfactualResult counterfactual_any(const CounterfactualMaps& maps, std::span<const double> x,
                                        const NormSpec& norm, std::span<const int> frozen,
                                        double eps) {
  check_request(maps, x, norm, frozen, eps);
  if (maps.ensemble.n_classes() < 2) throw PreconditionError("model has a single class");
  const ClassIndex y = maps.ensemble.predict_unchecked(x);
  std::optional<NearestResult> best;
  ClassIndex best_class = -1;
  for (ClassIndex c = 0; c < maps.ensemble.n_classes(); ++c) {
    const KdTree* tree = maps.tree_for(c);
    if (c == y || tree == nullptr) continue;
    try {
      NearestResult hit = nearest_region(*tree, x, norm, frozen);
      if (!best || hit.distance < best->distance) {
        best = std::move(hit);
        best_class = c;
      }
    } catch (const InfeasibleError&) {
    }
  }
  if (!best) throw InfeasibleError("no other class is reachable under the frozen features");
  return finish(maps, x, y, best_class, *best, eps);
}

}  // namespace cfmaps
