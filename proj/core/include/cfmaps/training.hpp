#pragma once

#include <cstdint>

#include "cfmaps/dataset.hpp"
#include "cfmaps/ensemble.hpp"

namespace cfmaps {

struct ForestConfig {
  int n_trees = 10;
  int max_depth = 5;
  std::uint64_t seed = 0;
  bool bootstrap = true;
  // Features examined per split; 0 means round(sqrt(m)).
  int max_features = 0;
};

// Random forest of CART trees (Gini impurity, midpoint thresholds between
// consecutive distinct values). Deterministic for a given seed.
Ensemble train_forest(const Dataset& data, const ForestConfig& config);

}  // namespace cfmaps
