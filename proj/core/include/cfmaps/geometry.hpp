#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfmaps/rectangle.hpp"

namespace cfmaps {

enum class Norm { kL1, kL2, kLinf };

std::string to_string(Norm p);
// Accepts "l1", "1", "l2", "2", "linf", "inf".
Norm parse_norm(std::string_view text);

// Weighted L_p norm ||diag(w) u||_p. Empty weights mean all-ones.
struct NormSpec {
  Norm p = Norm::kL2;
  std::vector<double> weights;

  // Throws ConfigError on a non-positive or non-finite weight, SchemaError on
  // a length mismatch against `dims` (when weights are present).
  void validate(std::size_t dims) const;
  double weight(std::size_t k) const { return weights.empty() ? 1.0 : weights[k]; }
};

namespace detail {

// Closed-form point-to-box distance. Every distance in the library (leaf
// rectangles, node bounds, the linear-scan oracle) goes through this one
// kernel, so bound comparisons are exact in machine arithmetic.
template <Norm P>
inline double box_distance(const double* x, const double* lo, const double* hi,
                           const double* w, std::size_t m) {
  double acc = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    double gap = 0.0;
    if (x[k] < lo[k]) {
      gap = lo[k] - x[k];
    } else if (x[k] > hi[k]) {
      gap = x[k] - hi[k];
    }
    if (w != nullptr) gap *= w[k];
    if constexpr (P == Norm::kL1) {
      acc += gap;
    } else if constexpr (P == Norm::kL2) {
      acc += gap * gap;
    } else {
      acc = std::max(acc, gap);
    }
  }
  if constexpr (P == Norm::kL2) return std::sqrt(acc);
  return acc;
}

inline double box_distance(Norm p, const double* x, const double* lo,
                           const double* hi, const double* w, std::size_t m) {
  switch (p) {
    case Norm::kL1:
      return box_distance<Norm::kL1>(x, lo, hi, w, m);
    case Norm::kL2:
      return box_distance<Norm::kL2>(x, lo, hi, w, m);
    case Norm::kLinf:
      break;
  }
  return box_distance<Norm::kLinf>(x, lo, hi, w, m);
}

}  // namespace detail

// delta_k = max(0, lo_k - x_k, x_k - hi_k), computed against the closure.
std::vector<double> gap_vector(std::span<const double> x, const Box& box);
std::vector<double> gap_vector(std::span<const double> x,
                               const Hyperrectangle& rect);

double distance(std::span<const double> x, const Box& box, const NormSpec& norm);
double distance(std::span<const double> x, const Hyperrectangle& rect,
                const NormSpec& norm);

// Weighted norm of a plain vector.
double norm_of(std::span<const double> u, const NormSpec& norm);

// Coordinate-wise clamp onto the closed box; optimal for every weighted L_p.
std::vector<double> project(std::span<const double> x, const Box& box);
std::vector<double> project(std::span<const double> x,
                            const Hyperrectangle& rect);

// Clamp, then move every coordinate sitting on an open side `eps` inside so the
// result is a member of `rect` under its side semantics. Throws ConfigError if
// eps is not positive or not smaller than some interval width.
std::vector<double> project_strict(std::span<const double> x,
                                   const Hyperrectangle& rect, double eps);
// Per-coordinate variant.
std::vector<double> project_strict(std::span<const double> x,
                                   const Hyperrectangle& rect,
                                   std::span<const double> eps);

}  // namespace cfmaps
