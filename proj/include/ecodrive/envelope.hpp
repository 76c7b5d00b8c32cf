#pragma once

#include "ecodrive/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

namespace ecodrive {

struct ValuePoint
{
  Point2 x;
  double J{0};
};

/// Affine piece J = plane . (s, v, 1) of the envelope, valid over its triangle.
struct Facet
{
  Eigen::Vector3d plane;
  std::array<Point2, 3> tri;

  double eval(const Point2 & x) const { return plane(0) * x.x() + plane(1) * x.y() + plane(2); }
};

/**
 * Lower convex envelope of a finite point cloud with values:
 *   V(x) = min { sum_d lambda_d J_d : sum_d lambda_d x_d = x, lambda in simplex }.
 *
 * Built from the lower faces of the 3-D hull of the lifted points (s, v, J).
 * Every lower-face plane minorizes the data, so V is the pointwise max of the
 * planes on the domain hull; the triangle containing x attains it. Queries
 * use a bucket grid over triangle bounding boxes. Outside the domain V = +inf.
 * A domain that is a point or a segment has no facets and falls back to the LP.
 */
class ValueEnvelope
{
public:
  ValueEnvelope() = default;
  explicit ValueEnvelope(std::span<const ValuePoint> points);

  double operator()(const Point2 & x) const;

  bool empty() const { return support_.empty(); }
  bool degenerate() const { return facets_.empty(); }
  const ConvexRegion2 & domain() const { return domain_; }
  const std::vector<Facet> & facets() const { return facets_; }
  /// Lower-hull vertices plus domain-hull vertices, each at its minimal value.
  const std::vector<ValuePoint> & support() const { return support_; }

private:
  void build_grid();

  ConvexRegion2 domain_ = ConvexRegion2::empty_region();
  std::vector<Facet> facets_;
  std::vector<ValuePoint> support_;

  Eigen::Vector2d lo_{0, 0}, cell_{1, 1};
  int nx_{0}, ny_{0};
  std::vector<std::vector<int>> buckets_;
};

/// Reference evaluation of the same quantity by the simplex method.
double envelope_lp(std::span<const ValuePoint> points, const Point2 & x);

/// Keeps one point per state (the minimal value), dropping non-finite values.
std::vector<ValuePoint> dedupe_min(std::span<const ValuePoint> points);

}  // namespace ecodrive
