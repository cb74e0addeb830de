#include "cfmaps/raster.hpp"

#include <cstdio>
#include <sstream>

#include "cfmaps/error.hpp"
#include "json.hpp"

namespace cfmaps {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RasterResult rasterize(const CounterfactualMaps& maps, const RasterSpec& spec) {
  const FeatureSchema& schema = maps.ensemble.schema();
  const int m = static_cast<int>(schema.size());
  if (spec.feature_x < 0 || spec.feature_x >= m || spec.feature_y < 0 || spec.feature_y >= m ||
      spec.feature_x == spec.feature_y) {
    throw ConfigError("raster needs two distinct feature indices in [0, " + std::to_string(m) + ")");
  }
  if (spec.nx < 2 || spec.ny < 2) throw ConfigError("raster resolution must be at least 2x2");
  std::vector<double> x = spec.fixed_values;
  if (x.empty()) {
    for (const Feature& f : schema.features) x.push_back(f.lo + (f.hi - f.lo) / 2.0);
  } else if (x.size() != schema.size()) {
    throw SchemaError("fixed values have " + std::to_string(x.size()) + " entries, model has " +
                      std::to_string(m) + " features");
  }
  const Feature& fx = schema.features[spec.feature_x];
  const Feature& fy = schema.features[spec.feature_y];
  x[spec.feature_x] = fx.lo;
  x[spec.feature_y] = fy.lo;
  schema.check_point(x);
  spec.norm.validate(schema.size());
  const KdTree* tree = maps.tree_for(spec.target);
  if (tree == nullptr) throw InfeasibleError("class " + std::to_string(spec.target) + " has no regions");

  RasterResult r;
  r.feature_x = spec.feature_x;
  r.feature_y = spec.feature_y;
  r.nx = spec.nx;
  r.ny = spec.ny;
  for (int ix = 0; ix < spec.nx; ++ix) r.cx.push_back(fx.lo + (fx.hi - fx.lo) * (ix + 0.5) / spec.nx);
  for (int iy = 0; iy < spec.ny; ++iy) r.cy.push_back(fy.lo + (fy.hi - fy.lo) * (iy + 0.5) / spec.ny);
  r.region_ids.reserve(static_cast<std::size_t>(spec.nx) * spec.ny);
  r.distances.reserve(static_cast<std::size_t>(spec.nx) * spec.ny);
  for (int iy = 0; iy < spec.ny; ++iy) {
    x[spec.feature_y] = r.cy[iy];
    for (int ix = 0; ix < spec.nx; ++ix) {
      x[spec.feature_x] = r.cx[ix];
      const NearestResult hit = nearest_region(*tree, x, spec.norm);
      r.region_ids.push_back(hit.rect_id);
      r.distances.push_back(hit.distance);
      r.legend[hit.rect_id] = maps.partition.rects[static_cast<std::size_t>(hit.rect_id)].label;
    }
  }
  return r;
}

RasterFormat parse_raster_format(std::string_view text) {
  if (text == "csv") return RasterFormat::kCsv;
  if (text == "json") return RasterFormat::kJson;
  if (text == "ppm") return RasterFormat::kPpm;
  throw ConfigError("unsupported raster format '" + std::string(text) + "' (csv, json, ppm)");
}

unsigned region_colour(RectId id) {
  // Multiplication by an odd constant is a bijection modulo 2^24.
  return (static_cast<unsigned>(id) * 0x9E3779B1u + 0x3C6EF3u) & 0xFFFFFFu;
}

std::string export_raster(const RasterResult& r, RasterFormat format) {
  std::ostringstream out;
  switch (format) {
    case RasterFormat::kCsv:
      out << "ix,iy,cx,cy,rect_id,distance\n";
      for (int iy = 0; iy < r.ny; ++iy) {
        for (int ix = 0; ix < r.nx; ++ix) {
          out << ix << ',' << iy << ',' << fmt_double(r.cx[ix]) << ',' << fmt_double(r.cy[iy]) << ','
              << r.id_at(ix, iy) << ',' << fmt_double(r.distance_at(ix, iy)) << '\n';
        }
      }
      break;
    case RasterFormat::kJson: {
      nlohmann::json cells = nlohmann::json::array();
      for (int iy = 0; iy < r.ny; ++iy) {
        for (int ix = 0; ix < r.nx; ++ix) {
          cells.push_back({{"ix", ix}, {"iy", iy}, {"rect_id", r.id_at(ix, iy)},
                           {"distance", r.distance_at(ix, iy)}});
        }
      }
      nlohmann::json legend = nlohmann::json::array();
      for (const auto& [id, label] : r.legend) legend.push_back({{"rect_id", id}, {"label", label}});
      out << nlohmann::json{{"feature_x", r.feature_x}, {"feature_y", r.feature_y}, {"nx", r.nx},
                            {"ny", r.ny}, {"cx", r.cx}, {"cy", r.cy}, {"cells", cells},
                            {"legend", legend}}
                 .dump();
      break;
    }
    case RasterFormat::kPpm:
      // Top row of the image is the largest y.
      out << "P3\n" << r.nx << ' ' << r.ny << "\n255\n";
      for (int iy = r.ny - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < r.nx; ++ix) {
          const unsigned c = region_colour(r.id_at(ix, iy));
          out << ((c >> 16) & 0xFF) << ' ' << ((c >> 8) & 0xFF) << ' ' << (c & 0xFF)
              << (ix + 1 == r.nx ? '\n' : ' ');
        }
      }
      break;
  }
  return out.str();
}

RasterResult import_raster_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "ix,iy,cx,cy,rect_id,distance") {
    throw FormatError("raster csv: unexpected header");
  }
  struct Row {
    int ix, iy;
    double cx, cy;
    RectId id;
    double d;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Row row{};
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%d,%lf", &row.ix, &row.iy, &row.cx, &row.cy, &row.id,
                    &row.d) != 6) {
      throw FormatError("raster csv: malformed row '" + line + "'");
    }
    rows.push_back(row);
  }
  RasterResult r;
  for (const Row& row : rows) {
    r.nx = std::max(r.nx, row.ix + 1);
    r.ny = std::max(r.ny, row.iy + 1);
  }
  if (rows.size() != static_cast<std::size_t>(r.nx) * r.ny) throw FormatError("raster csv: incomplete grid");
  r.cx.assign(r.nx, 0.0);
  r.cy.assign(r.ny, 0.0);
  r.region_ids.assign(rows.size(), -1);
  r.distances.assign(rows.size(), 0.0);
  for (const Row& row : rows) {
    r.cx[row.ix] = row.cx;
    r.cy[row.iy] = row.cy;
    r.region_ids[static_cast<std::size_t>(row.iy) * r.nx + row.ix] = row.id;
    r.distances[static_cast<std::size_t>(row.iy) * r.nx + row.ix] = row.d;
  }
  return r;
}

}  // namespace cfmaps
