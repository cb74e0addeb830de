#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfmaps/ensemble.hpp"
#include "cfmaps/rectangle.hpp"

namespace cfmaps {

// Disjoint labelled cover of the domain box. `per_class[c]` lists the ids of
// the rectangles labelled c; ids equal positions in `rects`.
struct Partition {
  std::vector<Hyperrectangle> rects;
  std::vector<std::vector<RectId>> per_class;
  std::string model_hash;

  std::size_t size() const { return rects.size(); }
  std::size_t dims() const { return rects.empty() ? 0 : rects.front().dims(); }
  // Rebuilds per_class from the labels; ids are reassigned to positions.
  void reindex(int n_classes);
};

// Leaves of `tree` whose root-to-leaf region meets `box` (side-aware).
std::vector<int> reachable_leaves(const Tree& tree, std::span<const Interval> box);

struct Constancy {
  bool constant = false;
  ClassIndex label = -1;
};

// Sound test for "the ensemble predicts one label everywhere on box". Returns
// constant=false when homogeneity cannot be proven from per-tree bounds.
Constancy constancy_check(const Ensemble& e, std::span<const Interval> box);

// Recursive constancy-guided extraction: split at the median active threshold
// of the feature with the most active thresholds until every piece is proven
// constant.
Partition extract_partition(const Ensemble& e);

// Full threshold grid, labelled at cell midpoints.
inline constexpr std::uint64_t kDefaultGridCap = 1'000'000;
Partition extract_exact_grid(const Ensemble& e, std::uint64_t cell_cap = kDefaultGridCap);

struct PartitionReport {
  std::size_t samples = 0;
  std::size_t cover_violations = 0;
  std::size_t overlap_violations = 0;
  std::size_t faithfulness_violations = 0;

  bool ok() const {
    return cover_violations == 0 && overlap_violations == 0 && faithfulness_violations == 0;
  }
};

// Seeded sampling audit. About a third of the coordinates are snapped onto
// ensemble thresholds so the side semantics get exercised.
PartitionReport verify_partition(const Partition& p, const Ensemble& e, std::size_t n_samples,
                                 std::uint64_t seed = 0);
// Same audit on caller-supplied points (e.g. training rows).
PartitionReport verify_points(const Partition& p, const Ensemble& e,
                              std::span<const std::vector<double>> points);

// Partition document, version 1.
std::string save_partition(const Partition& p);
Partition load_partition(std::string_view bytes, int n_classes = -1);

}  // namespace cfmaps
