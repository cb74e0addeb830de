#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cfmaps/cfindex.hpp"
#include "cfmaps/ensemble.hpp"
#include "cfmaps/geometry.hpp"
#include "cfmaps/partition.hpp"

namespace cfmaps {

// Search statistics. When the loop ends on the bound test, final_popped_bound
// holds the key of the node that stopped it; no unexplored rectangle can be
// closer than that.
struct Certificate {
  std::size_t nodes_popped = 0;
  std::size_t nodes_pruned = 0;
  std::size_t rects_evaluated = 0;
  std::optional<double> final_popped_bound;
};

struct NearestResult {
  RectId rect_id = -1;
  double distance = std::numeric_limits<double>::infinity();
  Certificate certificate;
};

// Instrumentation for tests: checks the coverage invariant after every loop
// iteration (every unvisited rectangle sits under a queued node or under a
// discarded node whose bound is >= the incumbent) and records popped keys.
struct SearchAudit {
  std::size_t iterations = 0;
  std::size_t coverage_violations = 0;
  std::vector<double> popped_bounds;
};

// Best-first branch and bound over the KD-tree. Rectangles whose frozen
// coordinates do not admit x's value are skipped at the leaves. Among
// equidistant rectangles the lowest id wins. Throws InfeasibleError when the
// tree is empty or no rectangle passes the frozen filter.
NearestResult nearest_region(const KdTree& tree, std::span<const double> x, const NormSpec& norm,
                             std::span<const int> frozen = {}, SearchAudit* audit = nullptr);

struct OracleResult {
  RectId rect_id = -1;
  double distance = std::numeric_limits<double>::infinity();
};

// Exhaustive scan over the class's rectangles with the same distance kernel,
// frozen filter and tie rule as nearest_region.
OracleResult linear_scan_oracle(const Partition& p, ClassIndex target, std::span<const double> x,
                                const NormSpec& norm, std::span<const int> frozen = {});

// One-time preprocessing output: the ensemble, its partition and one KD-tree
// per class (absent for classes without regions).
struct CounterfactualMaps {
  Ensemble ensemble;
  Partition partition;
  std::vector<std::optional<KdTree>> trees;

  const KdTree* tree_for(ClassIndex c) const {
    if (c < 0 || static_cast<std::size_t>(c) >= trees.size() || !trees[c]) return nullptr;
    return &*trees[c];
  }
};

CounterfactualMaps build_maps(Ensemble e, const IndexConfig& config = {});
CounterfactualMaps assemble_maps(Ensemble e, Partition p, const IndexConfig& config = {});

struct QueryRequest {
  std::vector<double> x;
  std::optional<ClassIndex> target;  // absent: nearest region of any other class
  NormSpec norm;
  std::vector<int> frozen;
  // Strict-projection step, relative to each feature's domain width.
  double eps = 1e-9;
};

struct CounterfactualResult {
  ClassIndex original = -1;
  ClassIndex target = -1;  // achieved class
  RectId rect_id = -1;
  std::vector<double> x_cf;
  double distance = 0.0;  // to the closure of the region; excludes the eps step
  Certificate certificate;
};

// Targeted (or, without a target, any-class) counterfactual. Throws
// PreconditionError when the target equals the current prediction and
// InfeasibleError when the target has no admissible region.
CounterfactualResult counterfactual(const CounterfactualMaps& maps, const QueryRequest& req);

// Minimum over all classes other than the prediction; ties go to the lower
// class, then the lower rect id.
CounterfactualResult counterfactual_any(const CounterfactualMaps& maps, std::span<const double> x,
                                        const NormSpec& norm, std::span<const int> frozen = {},
                                        double eps = 1e-9);

}  // namespace cfmaps
