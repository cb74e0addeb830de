#pragma once

// Small hand-built models shared by the unit tests.

#include <random>
#include <string>
#include <vector>

#include "cfmaps/ensemble.hpp"

namespace cfmaps::testing {

inline FeatureSchema unit_schema(std::size_t m) {
  FeatureSchema s;
  for (std::size_t k = 0; k < m; ++k) {
    s.features.push_back(Feature{"f" + std::to_string(k), FeatureKind::kContinuous, 0.0, 1.0});
  }
  return s;
}

inline std::vector<std::string> class_names(int c) {
  std::vector<std::string> out;
  for (int i = 0; i < c; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

inline std::vector<double> one_hot(int c, int n_classes) {
  std::vector<double> v(n_classes, 0.0);
  v[c] = 1.0;
  return v;
}

inline TreeNode leaf(int c, int n_classes) {
  TreeNode n;
  n.votes = one_hot(c, n_classes);
  return n;
}

// x[feature] <= t -> left_class, else right_class.
inline Tree stump(int feature, double t, int left_class, int right_class, int n_classes) {
  Tree tree;
  tree.nodes.push_back(TreeNode{feature, t, 1, 2, {}});
  tree.nodes.push_back(leaf(left_class, n_classes));
  tree.nodes.push_back(leaf(right_class, n_classes));
  return tree;
}

inline Tree constant_tree(int c, int n_classes) {
  Tree tree;
  tree.nodes.push_back(leaf(c, n_classes));
  return tree;
}

// Random complete tree of the given depth over [0,1]^m, thresholds on a 1/16
// lattice so several trees share cut points.
inline Tree random_tree(std::mt19937_64& rng, std::size_t m, int depth, int n_classes) {
  Tree tree;
  std::uniform_int_distribution<int> feat(0, static_cast<int>(m) - 1);
  std::uniform_int_distribution<int> cut(1, 15);
  std::uniform_int_distribution<int> cls(0, n_classes - 1);
  // Preorder construction.
  tree.nodes.emplace_back();
  auto grow = [&](auto&& self, int index, int d) -> void {
    if (d == depth) {
      tree.nodes[index] = leaf(cls(rng), n_classes);
      return;
    }
    TreeNode n;
    n.feature = feat(rng);
    n.threshold = cut(rng) / 16.0;
    tree.nodes[index] = n;
    const int l = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    self(self, l, d + 1);
    const int r = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    self(self, r, d + 1);
    tree.nodes[index].left = l;
    tree.nodes[index].right = r;
  };
  grow(grow, 0, 0);
  return tree;
}

inline Ensemble random_ensemble(std::uint64_t seed, std::size_t m, int n_trees, int depth,
                                int n_classes) {
  std::mt19937_64 rng(seed);
  std::vector<Tree> trees;
  for (int t = 0; t < n_trees; ++t) trees.push_back(random_tree(rng, m, depth, n_classes));
  return Ensemble(unit_schema(m), class_names(n_classes), std::move(trees));
}

inline std::vector<double> random_point(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(m);
  for (double& v : x) v = u(rng);
  return x;
}

}  // namespace cfmaps::testing
