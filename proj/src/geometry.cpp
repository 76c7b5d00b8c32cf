#include "ecodrive/geometry.hpp"

#include "ecodrive/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ecodrive {

namespace {

// Half-width of the clipping box used to represent unbounded regions.
constexpr double kBox = 1e6;

double cross(const Point2 & o, const Point2 & a, const Point2 & b)
{
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

std::vector<Point2> clip(const std::vector<Point2> & poly, const HalfPlane & h, double tol)
{
  std::vector<Point2> out;
  const std::size_t n = poly.size();
  if (n == 0) { return out; }
  out.reserve(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 & p = poly[i];
    const Point2 & q = poly[(i + 1) % n];
    const double ep = h.eval(p);
    const double eq = h.eval(q);
    const bool pin = ep <= tol;
    const bool qin = eq <= tol;
    if (pin) { out.push_back(p); }
    if (pin != qin && n > 1) {
      const double t = ep / (ep - eq);
      out.push_back(p + t * (q - p));
    }
  }
  return out;
}

std::vector<HalfPlane> halfplanes_of(const std::vector<Point2> & v)
{
  std::vector<HalfPlane> hs;
  if (v.size() == 1) {
    const Point2 & p = v.front();
    hs.push_back({{1, 0}, p.x()});
    hs.push_back({{-1, 0}, -p.x()});
    hs.push_back({{0, 1}, p.y()});
    hs.push_back({{0, -1}, -p.y()});
  } else if (v.size() == 2) {
    const Eigen::Vector2d d = (v[1] - v[0]).normalized();
    const Eigen::Vector2d n(-d.y(), d.x());
    hs.push_back({n, n.dot(v[0])});
    hs.push_back({-n, -n.dot(v[0])});
    hs.push_back({d, d.dot(v[1])});
    hs.push_back({-d, -d.dot(v[0])});
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Eigen::Vector2d e = v[(i + 1) % v.size()] - v[i];
      const Eigen::Vector2d n = Eigen::Vector2d(e.y(), -e.x()).normalized();
      hs.push_back({n, n.dot(v[i])});
    }
  }
  return hs;
}

// Re-solve each vertex from its best-conditioned pair of tight halfplanes,
// removing the rounding picked up while clipping the large box.
void refine_vertices(std::vector<Point2> & v, const std::vector<HalfPlane> & hs)
{
  for (auto & p : v) {
    std::vector<const HalfPlane *> tight;
    for (const auto & h : hs) {
      if (std::abs(h.eval(p)) <= 1e-6) { tight.push_back(&h); }
    }
    double best = 1e-6;
    Point2 q = p;
    for (std::size_t i = 0; i < tight.size(); ++i) {
      for (std::size_t j = i + 1; j < tight.size(); ++j) {
        Eigen::Matrix2d M;
        M << tight[i]->a.transpose(), tight[j]->a.transpose();
        const double det = std::abs(M.determinant());
        if (det > best) {
          best = det;
          q = M.inverse() * Eigen::Vector2d(tight[i]->b, tight[j]->b);
        }
      }
    }
    p = q;
  }
}

bool touches_box(const std::vector<Point2> & v)
{
  return std::any_of(v.begin(), v.end(), [](const Point2 & p) {
    return p.cwiseAbs().maxCoeff() > 0.5 * kBox;
  });
}

}  // namespace

double SInterval::max_abs() const { return std::max(std::abs(lo), std::abs(hi)); }

SInterval SInterval::scaled(double c) const
{
  return c >= 0 ? SInterval{c * lo, c * hi} : SInterval{c * hi, c * lo};
}

HalfPlane make_halfplane(const Eigen::Vector2d & a, double b)
{
  const double n = a.norm();
  if (!(n > 0.0) || !std::isfinite(n)) { throw Error("halfplane normal must be nonzero and finite"); }
  return {a / n, b / n};
}

std::vector<Point2> hull_vertices(std::vector<Point2> pts)
{
  std::sort(pts.begin(), pts.end(), [](const Point2 & a, const Point2 & b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
              [](const Point2 & a, const Point2 & b) { return (a - b).cwiseAbs().maxCoeff() <= 1e-12; }),
    pts.end());
  const std::size_t n = pts.size();
  if (n <= 2) { return pts; }

  std::vector<Point2> h(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) { --k; }
    h[k++] = pts[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) { --k; }
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

ConvexRegion2 ConvexRegion2::empty_region()
{
  ConvexRegion2 r;
  r.empty_ = true;
  r.vertices_.reset();
  return r;
}

ConvexRegion2 ConvexRegion2::from_halfplanes(std::vector<HalfPlane> input)
{
  for (auto & h : input) { h = make_halfplane(h.a, h.b); }

  std::vector<Point2> poly{{-kBox, -kBox}, {kBox, -kBox}, {kBox, kBox}, {-kBox, kBox}};
  for (const auto & h : input) {
    poly = clip(poly, h, kTightTol);
    if (poly.empty()) { return empty_region(); }
  }
  std::vector<Point2> v = hull_vertices(poly);
  refine_vertices(v, input);

  // 2-D redundancy test: a halfplane of a full-dimensional region must support
  // an edge; for a point or segment it must be tight somewhere.
  const std::size_t need = v.size() >= 3 ? 2 : 1;
  std::vector<HalfPlane> kept;
  for (const auto & h : input) {
    std::size_t tight = 0;
    for (const auto & p : v) {
      if (std::abs(h.eval(p)) <= 1e-7) { ++tight; }
    }
    if (tight < need) { continue; }
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const HalfPlane & k) {
      return (k.a - h.a).cwiseAbs().maxCoeff() <= 1e-12 && std::abs(k.b - h.b) <= kTightTol;
    });
    if (!dup) { kept.push_back(h); }
  }

  ConvexRegion2 r;
  r.halfplanes_ = std::move(kept);
  if (!touches_box(v)) { r.vertices_ = v; }
  return r;
}

double ConvexRegion2::max_s() const
{
  if (empty_) { return -std::numeric_limits<double>::infinity(); }
  if (vertices_) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto & p : *vertices_) { m = std::max(m, p.x()); }
    return m;
  }
  double m = std::numeric_limits<double>::infinity();
  for (const auto & h : halfplanes_) {
    if (h.a.x() > 1.0 - 1e-12) { m = std::min(m, h.b); }
  }
  return m;
}

double ConvexRegion2::min_s() const
{
  if (empty_) { return std::numeric_limits<double>::infinity(); }
  if (vertices_) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto & p : *vertices_) { m = std::min(m, p.x()); }
    return m;
  }
  double m = -std::numeric_limits<double>::infinity();
  for (const auto & h : halfplanes_) {
    if (h.a.x() < -1.0 + 1e-12) { m = std::max(m, -h.b); }
  }
  return m;
}

ConvexRegion2 s_at_most(double s_max) { return ConvexRegion2::from_halfplanes({{{1, 0}, s_max}}); }

ConvexRegion2 s_at_least(double s_min) { return ConvexRegion2::from_halfplanes({{{-1, 0}, -s_min}}); }

ConvexRegion2 speed_band(double v_lo, double v_hi)
{
  return ConvexRegion2::from_halfplanes({{{0, 1}, v_hi}, {{0, -1}, -v_lo}});
}

ConvexRegion2 box_region(double s_lo, double s_hi, double v_lo, double v_hi)
{
  return ConvexRegion2::from_halfplanes({{{1, 0}, s_hi}, {{-1, 0}, -s_lo}, {{0, 1}, v_hi}, {{0, -1}, -v_lo}});
}

ConvexRegion2 convex_hull(std::span<const Point2> points)
{
  if (points.empty()) { throw Error("empty point set"); }
  for (const auto & p : points) {
    if (!p.allFinite()) { throw Error("non-finite point"); }
  }
  std::vector<Point2> v = hull_vertices({points.begin(), points.end()});
  ConvexRegion2 r;
  r.halfplanes_ = halfplanes_of(v);
  r.vertices_ = std::move(v);
  return r;
}

bool contains(const ConvexRegion2 & r, const Point2 & p, double tol)
{
  if (r.empty()) { return false; }
  return std::all_of(r.halfplanes().begin(), r.halfplanes().end(),
    [&](const HalfPlane & h) { return h.eval(p) <= tol; });
}

ConvexRegion2 erode_s(const ConvexRegion2 & r, double d)
{
  if (d < 0) { throw Error("erosion distance must be nonnegative"); }
  if (r.empty() || d == 0.0) { return r; }
  std::vector<HalfPlane> hs = r.halfplanes();
  for (auto & h : hs) { h.b -= d * std::abs(h.a.x()); }
  return ConvexRegion2::from_halfplanes(std::move(hs));
}

ConvexRegion2 dilate_s(const ConvexRegion2 & r, double d)
{
  if (d < 0) { throw Error("dilation distance must be nonnegative"); }
  if (r.empty() || d == 0.0) { return r; }
  if (r.bounded()) {
    std::vector<Point2> pts;
    for (const auto & p : *r.vertices()) {
      pts.emplace_back(p.x() - d, p.y());
      pts.emplace_back(p.x() + d, p.y());
    }
    return convex_hull(pts);
  }
  std::vector<HalfPlane> hs = r.halfplanes();
  for (auto & h : hs) { h.b += d * std::abs(h.a.x()); }
  return ConvexRegion2::from_halfplanes(std::move(hs));
}

ConvexRegion2 intersect(std::span<const ConvexRegion2> regions)
{
  if (regions.empty()) { throw Error("intersect needs at least one region"); }
  std::vector<HalfPlane> hs;
  for (const auto & r : regions) {
    if (r.empty()) { return ConvexRegion2::empty_region(); }
    hs.insert(hs.end(), r.halfplanes().begin(), r.halfplanes().end());
  }
  return ConvexRegion2::from_halfplanes(std::move(hs));
}

ConvexRegion2 intersect(const ConvexRegion2 & a, const ConvexRegion2 & b)
{
  const ConvexRegion2 rs[] = {a, b};
  return intersect(std::span<const ConvexRegion2>(rs));
}

ConvexRegion2 translate_s(const ConvexRegion2 & r, double ds)
{
  if (r.empty()) { return r; }
  std::vector<HalfPlane> hs = r.halfplanes();
  for (auto & h : hs) { h.b += h.a.x() * ds; }
  if (r.bounded()) {
    std::vector<Point2> v = *r.vertices();
    for (auto & p : v) { p.x() += ds; }
    return convex_hull(v);
  }
  return ConvexRegion2::from_halfplanes(std::move(hs));
}

}  // namespace ecodrive
