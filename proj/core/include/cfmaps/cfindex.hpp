#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfmaps/partition.hpp"
#include "cfmaps/rectangle.hpp"

namespace cfmaps {

struct IndexConfig {
  int leaf_capacity = 8;
};

// Volumetric KD-tree over the closures of a set of rectangles. Nodes are stored
// in preorder (left child = index + 1) and every subtree owns a contiguous
// range of items, so a node's rectangle set is [begin, end).
//
// Each node's box is the smallest closed box enclosing the closures of its
// rectangles; child boxes are contained in the parent box.
class KdTree {
 public:
  struct Node {
    int right = -1;  // -1 marks a leaf; the left child is always index + 1
    int begin = 0;
    int end = 0;
    RectId min_id = 0;  // smallest rect id in the subtree

    bool is_leaf() const { return right < 0; }
    int left(int self) const { return self + 1; }
    int size() const { return end - begin; }
  };

  KdTree() = default;

  // Bulk-loads the rectangles `ids` of `p`. Split rule: dimension of greatest
  // spread of rectangle centres, median centre (ties by id).
  static KdTree build(const Partition& p, std::span<const RectId> ids, ClassIndex label,
                      const IndexConfig& config);

  ClassIndex class_label() const { return label_; }
  int leaf_capacity() const { return leaf_capacity_; }
  std::size_t dims() const { return dims_; }
  std::size_t n_rects() const { return item_ids_.size(); }
  std::size_t n_nodes() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  const Node& node(int i) const { return nodes_[i]; }
  const double* node_lo(int i) const { return node_lo_.data() + static_cast<std::size_t>(i) * dims_; }
  const double* node_hi(int i) const { return node_hi_.data() + static_cast<std::size_t>(i) * dims_; }
  Box node_box(int i) const;

  RectId item_id(int item) const { return item_ids_[item]; }
  const double* item_lo(int item) const { return item_lo_.data() + static_cast<std::size_t>(item) * dims_; }
  const double* item_hi(int item) const { return item_hi_.data() + static_cast<std::size_t>(item) * dims_; }
  // Side-aware membership of v in the item's k-th interval.
  bool item_admits(int item, std::size_t k, double v) const {
    const std::size_t at = static_cast<std::size_t>(item) * dims_ + k;
    const bool above = (item_sides_[at] & kLoClosed) ? v >= item_lo_[at] : v > item_lo_[at];
    const bool below = (item_sides_[at] & kHiClosed) ? v <= item_hi_[at] : v < item_hi_[at];
    return above && below;
  }

  // Ids whose closure contains x.
  std::vector<RectId> containing(std::span<const double> x) const;

  // Rebuilds from an explicit preorder layout (used by loading).
  struct SerialNode {
    Box box;
    bool leaf = true;
    std::vector<RectId> rects;
  };
  static KdTree from_preorder(const Partition& p, ClassIndex label, int leaf_capacity,
                              const std::vector<SerialNode>& nodes);

 private:
  static constexpr unsigned char kLoClosed = 1;
  static constexpr unsigned char kHiClosed = 2;

  void load_items(const Partition& p);
  int build_node(const std::vector<double>& centre_table, std::vector<RectId>& ids, int begin,
                 int end);
  void finish_node(int index);

  ClassIndex label_ = 0;
  int leaf_capacity_ = 8;
  std::size_t dims_ = 0;
  std::vector<Node> nodes_;
  std::vector<double> node_lo_;
  std::vector<double> node_hi_;
  std::vector<RectId> item_ids_;
  std::vector<double> item_lo_;
  std::vector<double> item_hi_;
  std::vector<unsigned char> item_sides_;
};

// Index over the rectangles of class `label`. Throws InfeasibleError when the
// class has no regions.
KdTree build_index(const Partition& p, ClassIndex label, const IndexConfig& config = {});

struct IndexStats {
  std::size_t n_nodes = 0;
  int depth = 0;
  double mean_leaf_fill = 0.0;  // mean rectangles per leaf
};
IndexStats index_stats(const KdTree& t);

// Index document, version 1: class label, capacity and a preorder node list.
std::string save_index(const KdTree& t);
KdTree load_index(std::string_view bytes, const Partition& p);

}  // namespace cfmaps
