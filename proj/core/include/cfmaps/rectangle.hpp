#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cfmaps {

using ClassIndex = int;
using RectId = int;

// One side-aware interval of a decision region. Under the "x <= t goes left"
// routing rule a cut at t yields (.., t] and (t, ..], so extracted intervals
// are always closed on the right and open on the left, except at the domain
// minimum where the left side is closed as well.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_closed = true;
  bool hi_closed = true;

  bool contains(double v) const {
    const bool above = lo_closed ? v >= lo : v > lo;
    const bool below = hi_closed ? v <= hi : v < hi;
    return above && below;
  }
  bool empty() const {
    return lo > hi || (lo == hi && !(lo_closed && hi_closed));
  }
  double width() const { return hi - lo; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

// Closed axis-aligned box [lo, hi]; used for closures and KD-tree bounds.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dims() const { return lo.size(); }
  bool contains(std::span<const double> x) const;
  bool contains(const Box& inner) const;
  // Smallest box containing both.
  void expand(const Box& other);

  friend bool operator==(const Box&, const Box&) = default;
};

struct Hyperrectangle {
  RectId id = 0;
  std::vector<Interval> bounds;
  ClassIndex label = 0;

  std::size_t dims() const { return bounds.size(); }
  bool contains(std::span<const double> x) const;
  Box closure() const;
};

}  // namespace cfmaps
