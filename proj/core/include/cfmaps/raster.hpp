#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cfmaps/geometry.hpp"
#include "cfmaps/query.hpp"

namespace cfmaps {

// A 2-D slice of a counterfactual map: the two displayed features sweep their
// domains, every other feature is held at `fixed_values[k]`.
struct RasterSpec {
  int feature_x = 0;
  int feature_y = 1;
  std::vector<double> fixed_values;  // full-length point; displayed entries ignored
  int nx = 100;
  int ny = 100;
  NormSpec norm;
  ClassIndex target = 0;
};

// Row-major grids, index iy * nx + ix. Cell (ix, iy) is evaluated at its centre.
struct RasterResult {
  int feature_x = 0;
  int feature_y = 1;
  int nx = 0;
  int ny = 0;
  std::vector<double> cx;  // centre coordinate per column
  std::vector<double> cy;  // centre coordinate per row
  std::vector<RectId> region_ids;
  std::vector<double> distances;
  std::map<RectId, ClassIndex> legend;

  RectId id_at(int ix, int iy) const { return region_ids[static_cast<std::size_t>(iy) * nx + ix]; }
  double distance_at(int ix, int iy) const { return distances[static_cast<std::size_t>(iy) * nx + ix]; }
};

RasterResult rasterize(const CounterfactualMaps& maps, const RasterSpec& spec);

enum class RasterFormat { kPpm, kCsv, kJson };
RasterFormat parse_raster_format(std::string_view text);

std::string export_raster(const RasterResult& r, RasterFormat format);
// Inverse of the CSV export (legend is not part of the CSV).
RasterResult import_raster_csv(std::string_view csv);

// Fixed colour for a region id; injective over non-negative ids below 2^24.
unsigned region_colour(RectId id);

}  // namespace cfmaps
