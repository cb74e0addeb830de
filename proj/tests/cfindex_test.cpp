#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "cfmaps/bench.hpp"
#include "cfmaps/cfindex.hpp"
#include "cfmaps/error.hpp"
#include "cfmaps/geometry.hpp"
#include "cfmaps/query.hpp"

namespace cfmaps {
namespace {

Partition from_boxes(const std::vector<Box>& boxes, int label = 0) {
  Partition p;
  for (const Box& b : boxes) {
    Hyperrectangle r;
    r.label = label;
    for (std::size_t k = 0; k < b.dims(); ++k) r.bounds.push_back(Interval{b.lo[k], b.hi[k], false, true});
    p.rects.push_back(r);
  }
  p.reindex(label + 1);
  return p;
}

std::vector<Box> random_boxes(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Box> out;
  for (std::size_t i = 0; i < n; ++i) {
    Box b;
    for (std::size_t k = 0; k < m; ++k) {
      const double a = u(rng);
      b.lo.push_back(a);
      b.hi.push_back(a + 0.1 * u(rng));
    }
    out.push_back(b);
  }
  return out;
}

// Rect ids under node i, by walking the subtree explicitly.
std::vector<RectId> subtree_ids(const KdTree& t, int i) {
  const KdTree::Node& n = t.node(i);
  if (n.is_leaf()) {
    std::vector<RectId> ids;
    for (int it = n.begin; it < n.end; ++it) ids.push_back(t.item_id(it));
    return ids;
  }
  std::vector<RectId> ids = subtree_ids(t, n.left(i));
  const std::vector<RectId> r = subtree_ids(t, n.right);
  ids.insert(ids.end(), r.begin(), r.end());
  return ids;
}

Box enclosure(const Partition& p, const std::vector<RectId>& ids) {
  Box b = p.rects[ids.front()].closure();
  for (RectId id : ids) b.expand(p.rects[id].closure());
  return b;
}

TEST(BuildIndex, SingleRectIsLeafRoot) {
  const Partition p = from_boxes({Box{{0.2, 0.3}, {0.4, 0.9}}});
  const KdTree t = build_index(p, 0);
  ASSERT_EQ(t.n_nodes(), 1u);
  EXPECT_TRUE(t.node(0).is_leaf());
  EXPECT_EQ(t.node_box(0), p.rects[0].closure());
  const IndexStats s = index_stats(t);
  EXPECT_EQ(s.n_nodes, 1u);
  EXPECT_EQ(s.depth, 0);
  EXPECT_EQ(s.mean_leaf_fill, 1.0);
}

TEST(BuildIndex, TwoSquaresCapacityOne) {
  const Partition p = from_boxes({Box{{0, 0}, {1, 1}}, Box{{5, 5}, {6, 6}}});
  const KdTree t = build_index(p, 0, IndexConfig{1});
  ASSERT_EQ(t.n_nodes(), 3u);
  EXPECT_FALSE(t.node(0).is_leaf());
  EXPECT_EQ(t.node_box(0), (Box{{0, 0}, {6, 6}}));
  for (int c : {t.node(0).left(0), t.node(0).right}) {
    ASSERT_TRUE(t.node(c).is_leaf());
    ASSERT_EQ(t.node(c).size(), 1);
    EXPECT_EQ(t.node_box(c), p.rects[t.item_id(t.node(c).begin)].closure());
  }
  const IndexStats s = index_stats(t);
  EXPECT_EQ(s.n_nodes, 3u);
  EXPECT_EQ(s.depth, 1);
  EXPECT_EQ(s.mean_leaf_fill, 1.0);
}

TEST(BuildIndex, StructuralAudit) {
  std::mt19937_64 rng(5);
  const Partition p = from_boxes(random_boxes(rng, 100, 3));
  const KdTree t = build_index(p, 0);
  for (int i = 0; i < static_cast<int>(t.n_nodes()); ++i) {
    const KdTree::Node& n = t.node(i);
    const std::vector<RectId> ids = subtree_ids(t, i);
    ASSERT_EQ(static_cast<int>(ids.size()), n.size());
    // Tight enclosure of the subtree.
    ASSERT_EQ(t.node_box(i), enclosure(p, ids));
    ASSERT_EQ(n.min_id, *std::min_element(ids.begin(), ids.end()));
    if (n.is_leaf()) {
      ASSERT_LE(n.size(), t.leaf_capacity());
      continue;
    }
    for (int c : {n.left(i), n.right}) ASSERT_TRUE(t.node_box(i).contains(t.node_box(c)));
    const std::vector<RectId> l = subtree_ids(t, n.left(i));
    const std::vector<RectId> r = subtree_ids(t, n.right);
    std::set<RectId> joint(l.begin(), l.end());
    for (RectId id : r) ASSERT_TRUE(joint.insert(id).second);
  }
  std::vector<RectId> all = subtree_ids(t, 0);
  std::sort(all.begin(), all.end());
  std::vector<RectId> expected(100);
  for (int i = 0; i < 100; ++i) expected[i] = i;
  EXPECT_EQ(all, expected);
  EXPECT_GE(index_stats(t).depth, static_cast<int>(std::ceil(std::log2(100.0 / 8.0))));
}

TEST(BuildIndex, EmptyClassIsInfeasible) {
  Partition p = from_boxes({Box{{0, 0}, {1, 1}}});
  p.reindex(3);
  try {
    build_index(p, 2);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& err) {
    EXPECT_NE(std::string(err.what()).find("no regions"), std::string::npos);
  }
  EXPECT_THROW(build_index(p, 0, IndexConfig{0}), ConfigError);
}

TEST(BuildIndex, DegenerateRectsAllowed) {
  const Partition p = from_boxes({Box{{0.5, 0}, {0.5, 1}}, Box{{0, 0.2}, {1, 0.2}}, Box{{3, 3}, {3, 3}}});
  const KdTree t = build_index(p, 0, IndexConfig{1});
  EXPECT_EQ(t.node_box(0), (Box{{0, 0}, {3, 3}}));
}

TEST(IndexProperty, NodeBoxIsLowerBound) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  std::uniform_real_distribution<double> wd(0.1, 4.0);
  const Partition p = from_boxes(random_boxes(rng, 300, 3));
  const KdTree t = build_index(p, 0, IndexConfig{4});
  std::uniform_int_distribution<int> pick(0, static_cast<int>(t.n_nodes()) - 1);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> x{u(rng), u(rng), u(rng)};
    const int node = pick(rng);
    const std::vector<double> w{wd(rng), wd(rng), wd(rng)};
    for (Norm q : {Norm::kL1, Norm::kL2, Norm::kLinf}) {
      for (const NormSpec& norm : {NormSpec{q, {}}, NormSpec{q, w}}) {
        const double lb = distance(x, t.node_box(node), norm);
        for (RectId id : subtree_ids(t, node)) ASSERT_LE(lb, distance(x, p.rects[id], norm));
      }
    }
  }
}

TEST(IndexProperty, BoxesAreSmallest) {
  std::mt19937_64 rng(23);
  const Partition p = from_boxes(random_boxes(rng, 40, 2));
  const KdTree t = build_index(p, 0, IndexConfig{3});
  for (int i = 0; i < static_cast<int>(t.n_nodes()); ++i) {
    const Box b = t.node_box(i);
    const std::vector<RectId> ids = subtree_ids(t, i);
    for (std::size_t k = 0; k < b.dims(); ++k) {
      for (int side = 0; side < 2; ++side) {
        Box shrunk = b;
        const double delta = 1e-9;
        if (side == 0) shrunk.lo[k] += delta;
        else shrunk.hi[k] -= delta;
        bool excludes = false;
        for (RectId id : ids) excludes = excludes || !shrunk.contains(p.rects[id].closure());
        ASSERT_TRUE(excludes) << "node " << i << " dim " << k;
      }
    }
  }
}

TEST(IndexIo, RoundTripGivesIdenticalResults) {
  const Partition p = make_synthetic_partition(2000, 3, 2, 4);
  const KdTree t = build_index(p, 1);
  const KdTree back = load_index(save_index(t), p);
  EXPECT_EQ(save_index(back), save_index(t));
  EXPECT_EQ(back.class_label(), 1);
  EXPECT_EQ(back.leaf_capacity(), t.leaf_capacity());
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int i = 0; i < 300; ++i) {
    const std::vector<double> x{u(rng), u(rng), u(rng)};
    for (Norm q : {Norm::kL1, Norm::kL2, Norm::kLinf}) {
      const NearestResult a = nearest_region(t, x, NormSpec{q, {}});
      const NearestResult b = nearest_region(back, x, NormSpec{q, {}});
      ASSERT_EQ(a.rect_id, b.rect_id);
      ASSERT_EQ(a.distance, b.distance);
    }
  }
}

TEST(IndexIo, RejectsTamperedDocuments) {
  const Partition p = make_synthetic_partition(50, 2, 2, 1);
  const std::string doc = save_index(build_index(p, 0));
  EXPECT_THROW(load_index("{", p), FormatError);
  std::string future = doc;
  const auto at = future.find("\"version\":1");
  ASSERT_NE(at, std::string::npos);
  future.replace(at, 11, "\"version\":3");
  EXPECT_THROW(load_index(future, p), VersionError);
  // Loading against a partition with other rects must not succeed silently.
  const Partition other = make_synthetic_partition(50, 2, 2, 2);
  EXPECT_THROW(load_index(doc, other), InvariantError);
}

TEST(KdTree, ContainingFindsClosures) {
  const Partition p = from_boxes({Box{{0, 0}, {1, 1}}, Box{{1, 0}, {2, 1}}, Box{{5, 5}, {6, 6}}});
  const KdTree t = build_index(p, 0, IndexConfig{1});
  std::vector<RectId> at_edge = t.containing(std::vector<double>{1.0, 0.5});
  std::sort(at_edge.begin(), at_edge.end());
  EXPECT_EQ(at_edge, (std::vector<RectId>{0, 1}));
  EXPECT_TRUE(t.containing(std::vector<double>{3.0, 3.0}).empty());
}

}  // namespace
}  // namespace cfmaps
