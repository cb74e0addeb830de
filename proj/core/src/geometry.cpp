#include <cmath>
#include "cfmaps/geometry.hpp"

#include <cctype>
#include <string>

#include "cfmaps/error.hpp"

namespace cfmaps {

namespace {

void check_dims(std::size_t got, std::size_t want) {
  if (got != want) {
    throw SchemaError("dimension mismatch: got " + std::to_string(got) +
                      ", expected " + std::to_string(want));
  }
}

}  // namespace

bool Box::contains(std::span<const double> x) const {
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (x[k] < lo[k] || x[k] > hi[k]) return false;
  }
  return true;
}

bool Box::contains(const Box& inner) const {
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (inner.lo[k] < lo[k] || inner.hi[k] > hi[k]) return false;
  }
  return true;
}

void Box::expand(const Box& other) {
  if (lo.empty()) {
    *this = other;
    return;
  }
  for (std::size_t k = 0; k < lo.size(); ++k) {
    lo[k] = std::min(lo[k], other.lo[k]);
    hi[k] = std::max(hi[k], other.hi[k]);
  }
}

bool Hyperrectangle::contains(std::span<const double> x) const {
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    if (!bounds[k].contains(x[k])) return false;
  }
  return true;
}

Box Hyperrectangle::closure() const {
  Box box;
  box.lo.reserve(bounds.size());
  box.hi.reserve(bounds.size());
  for (const Interval& iv : bounds) {
    box.lo.push_back(iv.lo);
    box.hi.push_back(iv.hi);
  }
  return box;
}

std::string to_string(Norm p) {
  switch (p) {
    case Norm::kL1:
      return "l1";
    case Norm::kL2:
      return "l2";
    case Norm::kLinf:
      break;
  }
  return "linf";
}

Norm parse_norm(std::string_view text) {
  std::string s(text);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "l1" || s == "1") return Norm::kL1;
  if (s == "l2" || s == "2") return Norm::kL2;
  if (s == "linf" || s == "inf" || s == "infinity" || s == "l_inf") return Norm::kLinf;
  throw ConfigError("unknown norm '" + std::string(text) + "' (expected l1, l2 or linf)");
}

void NormSpec::validate(std::size_t dims) const {
  if (weights.empty()) return;
  check_dims(weights.size(), dims);
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw ConfigError("norm weights must be positive and finite");
    }
  }
}

std::vector<double> gap_vector(std::span<const double> x, const Box& box) {
  check_dims(x.size(), box.dims());
  std::vector<double> gaps(x.size(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    gaps[k] = std::max({0.0, box.lo[k] - x[k], x[k] - box.hi[k]});
  }
  return gaps;
}

std::vector<double> gap_vector(std::span<const double> x,
                               const Hyperrectangle& rect) {
  return gap_vector(x, rect.closure());
}

double distance(std::span<const double> x, const Box& box, const NormSpec& norm) {
  check_dims(x.size(), box.dims());
  if (!norm.weights.empty()) check_dims(norm.weights.size(), x.size());
  return detail::box_distance(norm.p, x.data(), box.lo.data(), box.hi.data(),
                              norm.weights.empty() ? nullptr : norm.weights.data(),
                              x.size());
}

double distance(std::span<const double> x, const Hyperrectangle& rect,
                const NormSpec& norm) {
  return distance(x, rect.closure(), norm);
}

double norm_of(std::span<const double> u, const NormSpec& norm) {
  // Distance from u to the origin box.
  std::vector<double> zero(u.size(), 0.0);
  return detail::box_distance(norm.p, u.data(), zero.data(), zero.data(),
                              norm.weights.empty() ? nullptr : norm.weights.data(),
                              u.size());
}

std::vector<double> project(std::span<const double> x, const Box& box) {
  check_dims(x.size(), box.dims());
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::clamp(out[k], box.lo[k], box.hi[k]);
  }
  return out;
}

std::vector<double> project(std::span<const double> x,
                            const Hyperrectangle& rect) {
  return project(x, rect.closure());
}

std::vector<double> project_strict(std::span<const double> x,
                                   const Hyperrectangle& rect,
                                   std::span<const double> eps) {
  check_dims(x.size(), rect.dims());
  check_dims(eps.size(), rect.dims());
  std::vector<double> out = project(x, rect);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const Interval& iv = rect.bounds[k];
    if (!(eps[k] > 0.0) || !(eps[k] < iv.width())) {
      if (iv.lo_closed && iv.hi_closed) continue;  // nothing to nudge
      throw ConfigError("project_strict: eps " + std::to_string(eps[k]) +
                        " not in (0, width) on feature " + std::to_string(k));
    }
    // The step can vanish in rounding on very narrow intervals; fall back to
    // the adjacent double.
    if (!iv.lo_closed && out[k] <= iv.lo) {
      out[k] = iv.lo + eps[k];
      if (out[k] <= iv.lo) out[k] = std::nextafter(iv.lo, iv.hi);
    }
    if (!iv.hi_closed && out[k] >= iv.hi) {
      out[k] = iv.hi - eps[k];
      if (out[k] >= iv.hi) out[k] = std::nextafter(iv.hi, iv.lo);
    }
    if (!iv.contains(out[k])) {
      throw InfeasibleError("interval on feature " + std::to_string(k) + " holds no representable point");
    }
  }
  return out;
}

std::vector<double> project_strict(std::span<const double> x,
                                   const Hyperrectangle& rect, double eps) {
  std::vector<double> per(rect.dims(), eps);
  return project_strict(x, rect, per);
}

}  // namespace cfmaps
