#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfmaps/ensemble.hpp"

namespace cfmaps {

// Row-major labelled table. `labels[i]` indexes into `classes`.
struct Dataset {
  std::string name;
  FeatureSchema schema;
  std::vector<std::string> classes;
  std::vector<std::vector<double>> rows;
  std::vector<ClassIndex> labels;

  std::size_t size() const { return rows.size(); }
  // Dataset restricted to the given row indices (schema is kept).
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

// CSV with a header row: feature columns followed by a final label column.
// Feature domains are the observed [min, max] (widened when constant); a
// column holding only 0/1 is typed binary.
Dataset load_csv(const std::string& path);
Dataset parse_csv(const std::string& text, const std::string& name);

// Isotropic Gaussian clusters in 2-D, one per class, centres drawn uniformly
// in [-10, 10]^2, unit standard deviation.
Dataset make_blobs(std::size_t n_samples, int n_classes, std::uint64_t seed);

// Seeded shuffle split; returns (train, test).
std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction,
                                             std::uint64_t seed);

// Resolves "blobs" to the synthetic generator (300 points, 3 classes, seed 0),
// otherwise looks for `<data_dir>/<ref>.csv`, then treats `ref` as a path.
Dataset resolve_dataset(const std::string& ref, const std::string& data_dir);

}  // namespace cfmaps
