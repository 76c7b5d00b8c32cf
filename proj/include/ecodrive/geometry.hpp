#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace ecodrive {

/// A point in (position [m], speed [m/s]) space.
using Point2 = Eigen::Vector2d;

/// Absolute tolerance for halfplane tightness.
inline constexpr double kTightTol = 1e-9;
/// Default tolerance for membership queries.
inline constexpr double kMemberTol = 1e-7;

/// a . x <= b, with a normalized to unit length on construction.
struct HalfPlane
{
  Eigen::Vector2d a{1.0, 0.0};
  double b{0.0};

  double eval(const Point2 & p) const { return a.dot(p) - b; }
};

/// Closed interval on the position axis, e.g. the localization noise support.
struct SInterval
{
  double lo{0.0};
  double hi{0.0};

  double width() const { return hi - lo; }
  double max_abs() const;
  SInterval scaled(double c) const;
};

/**
 * Convex subset of the (s, v) plane.
 *
 * Always carries a nonredundant halfplane description. Bounded regions also
 * carry their counter-clockwise vertex list; degenerate regions (a point or a
 * segment) are ordinary values with one or two vertices. Unbounded regions
 * (e.g. {s <= s_tl}) have no vertex list. An empty region is flagged rather
 * than reported as an error.
 */
class ConvexRegion2
{
public:
  ConvexRegion2() = default;

  static ConvexRegion2 empty_region();
  static ConvexRegion2 from_halfplanes(std::vector<HalfPlane> halfplanes);

  const std::vector<HalfPlane> & halfplanes() const { return halfplanes_; }
  const std::optional<std::vector<Point2>> & vertices() const { return vertices_; }

  bool empty() const { return empty_; }
  bool bounded() const { return vertices_.has_value(); }

  /// Largest / smallest position over the region; +-inf when unbounded that way.
  double max_s() const;
  double min_s() const;

private:
  friend ConvexRegion2 convex_hull(std::span<const Point2> points);

  std::vector<HalfPlane> halfplanes_;
  std::optional<std::vector<Point2>> vertices_;
  bool empty_{false};
};

HalfPlane make_halfplane(const Eigen::Vector2d & a, double b);

/// {s <= s_max}
ConvexRegion2 s_at_most(double s_max);
/// {s >= s_min}
ConvexRegion2 s_at_least(double s_min);
/// {v_lo <= v <= v_hi}
ConvexRegion2 speed_band(double v_lo, double v_hi);
/// Axis-aligned box.
ConvexRegion2 box_region(double s_lo, double s_hi, double v_lo, double v_hi);

ConvexRegion2 convex_hull(std::span<const Point2> points);

bool contains(const ConvexRegion2 & r, const Point2 & p, double tol = kMemberTol);

/// Pontryagin difference with the position segment {(delta, 0) : |delta| <= d}.
ConvexRegion2 erode_s(const ConvexRegion2 & r, double d);

/// Minkowski sum with the position segment {(delta, 0) : |delta| <= d}.
ConvexRegion2 dilate_s(const ConvexRegion2 & r, double d);

ConvexRegion2 intersect(std::span<const ConvexRegion2> regions);
ConvexRegion2 intersect(const ConvexRegion2 & a, const ConvexRegion2 & b);

/// Shift every point of the region by (ds, 0).
ConvexRegion2 translate_s(const ConvexRegion2 & r, double ds);

/// CCW strictly convex vertex list of the hull (monotone chain).
std::vector<Point2> hull_vertices(std::vector<Point2> points);

}  // namespace ecodrive
