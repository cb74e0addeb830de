#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfmaps/rectangle.hpp"

namespace cfmaps {

enum class FeatureKind { kContinuous, kBinary, kOrdinal };

std::string to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  double lo = 0.0;
  double hi = 1.0;
};

// Ordered feature list; the index order is the coordinate order of every vector
// and box in the library.
struct FeatureSchema {
  std::vector<Feature> features;

  std::size_t size() const { return features.size(); }
  // Throws InvariantError on duplicate names or an empty domain.
  void validate() const;
  // Throws SchemaError on a length mismatch, DomainError outside [lo, hi].
  void check_point(std::span<const double> x) const;
  Box domain() const;
  Hyperrectangle domain_rect() const;
};

// Flat binary tree; node 0 is the root. An internal node routes
// x[feature] <= threshold to `left`, everything else to `right`.
struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> votes;  // leaves only, one entry per class

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  int leaf_for(std::span<const double> x) const;
  // Argmax of the leaf votes, lowest index on ties.
  ClassIndex leaf_class(int node) const;
  int depth() const;
};

class Ensemble {
 public:
  Ensemble() = default;
  // Validates all invariants; throws InvariantError / SchemaError.
  Ensemble(FeatureSchema schema, std::vector<std::string> classes,
           std::vector<Tree> trees);

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::vector<Tree>& trees() const { return trees_; }
  std::size_t n_features() const { return schema_.size(); }
  int n_classes() const { return static_cast<int>(classes_.size()); }

  // Majority vote over per-tree argmax; ties go to the lowest class index.
  // Throws SchemaError / DomainError if x is not a point of the domain box.
  ClassIndex predict(std::span<const double> x) const;
  // Same vote without the domain check.
  ClassIndex predict_unchecked(std::span<const double> x) const;
  std::vector<int> vote_counts(std::span<const double> x) const;

 private:
  void validate() const;

  FeatureSchema schema_;
  std::vector<std::string> classes_;
  std::vector<Tree> trees_;
};

// Majority winner of a per-class vote count, lowest index on ties.
ClassIndex majority(std::span<const int> counts);

// JSON model document, version 1.
std::string save_model(const Ensemble& e);
Ensemble load_model(std::string_view bytes);

// FNV-1a over the canonical model document, as 16 hex digits.
std::string model_hash(const Ensemble& e);
std::string fnv1a_hex(std::string_view bytes);

}  // namespace cfmaps
