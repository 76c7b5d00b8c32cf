#include "ecodrive/geometry.hpp"
#include "ecodrive/error.hpp"
#include "ecodrive/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace ecodrive;

namespace {

double orient(const Point2 & a, const Point2 & b, const Point2 & c)
{
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

bool in_triangle(const Point2 & p, const Point2 & a, const Point2 & b, const Point2 & c)
{
  const double d1 = orient(a, b, p), d2 = orient(b, c, p), d3 = orient(c, a, p);
  const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
  const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
  return !(neg && pos);
}

// A point is a hull vertex iff no triangle of other points contains it.
std::vector<Point2> brute_force_hull(const std::vector<Point2> & pts)
{
  std::vector<Point2> out;
  const std::size_t n = pts.size();
  for (std::size_t p = 0; p < n; ++p) {
    bool inside = false;
    for (std::size_t i = 0; i < n && !inside; ++i) {
      for (std::size_t j = i + 1; j < n && !inside; ++j) {
        for (std::size_t k = j + 1; k < n && !inside; ++k) {
          if (i == p || j == p || k == p) { continue; }
          inside = in_triangle(pts[p], pts[i], pts[j], pts[k]);
        }
      }
    }
    if (!inside) { out.push_back(pts[p]); }
  }
  return out;
}

// Winding-number membership for a CCW polygon.
bool winding_inside(const std::vector<Point2> & poly, const Point2 & p)
{
  int wn = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2 & a = poly[i];
    const Point2 & b = poly[(i + 1) % poly.size()];
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && orient(a, b, p) > 0) { ++wn; }
    } else if (b.y() <= p.y() && orient(a, b, p) < 0) {
      --wn;
    }
  }
  return wn != 0;
}

void sort_points(std::vector<Point2> & v)
{
  std::sort(v.begin(), v.end(), [](const Point2 & a, const Point2 & b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
}

void expect_consistent(const ConvexRegion2 & r)
{
  ASSERT_FALSE(r.empty());
  ASSERT_TRUE(r.bounded());
  for (const auto & p : *r.vertices()) {
    for (const auto & h : r.halfplanes()) { EXPECT_LE(h.eval(p), 1e-9); }
  }
}

std::vector<Point2> random_points(Rng & rng, int n, double lo = 0.0, double hi = 1.0)
{
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) { pts.emplace_back(rng.uniform(lo, hi), rng.uniform(lo, hi)); }
  return pts;
}

}  // namespace

TEST(ConvexHull, DropsInteriorPoint)
{
  const std::vector<Point2> pts{{0, 0}, {1, 0}, {0, 1}, {0.2, 0.2}};
  const auto r = convex_hull(pts);
  expect_consistent(r);
  auto v = *r.vertices();
  sort_points(v);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0], Point2(0, 0));
  EXPECT_EQ(v[1], Point2(0, 1));
  EXPECT_EQ(v[2], Point2(1, 0));
  EXPECT_EQ(r.halfplanes().size(), 3u);
}

TEST(ConvexHull, SinglePointIsDegenerateRegion)
{
  const std::vector<Point2> pts{{0, 0}};
  const auto r = convex_hull(pts);
  expect_consistent(r);
  EXPECT_EQ(r.vertices()->size(), 1u);
  EXPECT_TRUE(contains(r, {0, 0}));
  EXPECT_FALSE(contains(r, {1e-3, 0}));
}

TEST(ConvexHull, CollinearPointsGiveSegment)
{
  const std::vector<Point2> pts{{0, 0}, {1, 1}, {2, 2}, {1, 1}};
  const auto r = convex_hull(pts);
  expect_consistent(r);
  EXPECT_EQ(r.vertices()->size(), 2u);
  EXPECT_TRUE(contains(r, {1.5, 1.5}));
  EXPECT_FALSE(contains(r, {1.5, 1.6}));
  EXPECT_FALSE(contains(r, {2.1, 2.1}));
}

TEST(ConvexHull, EmptyInputThrows)
{
  EXPECT_THROW(convex_hull(std::vector<Point2>{}), Error);
}

TEST(ConvexHull, MatchesBruteForceOracle)
{
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const auto pts = random_points(rng, 100);
    const auto r = convex_hull(pts);
    expect_consistent(r);
    auto got = *r.vertices();
    auto want = brute_force_hull(pts);
    sort_points(got);
    sort_points(want);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) { EXPECT_EQ(got[i], want[i]); }
  }
}

TEST(ConvexHull, PermutationInvariant)
{
  Rng rng(11);
  auto pts = random_points(rng, 60);
  auto a = *convex_hull(pts).vertices();
  std::shuffle(pts.begin(), pts.end(), rng.engine());
  auto b = *convex_hull(pts).vertices();
  sort_points(a);
  sort_points(b);
  EXPECT_EQ(a, b);
}

TEST(Contains, BeforeLightHalfplane)
{
  const auto ts = s_at_most(200);
  EXPECT_TRUE(contains(ts, {199, 5}));
  EXPECT_FALSE(contains(ts, {201, 5}));
  EXPECT_FALSE(ts.bounded());
}

TEST(Contains, BoundaryWithinTolerance)
{
  const std::vector<Point2> pts{{0, 0}, {2, 0}, {0, 2}};
  EXPECT_TRUE(contains(convex_hull(pts), {1, 1}));
}

TEST(Contains, AgreesWithWindingOracle)
{
  Rng rng(3);
  const auto r = convex_hull(random_points(rng, 30));
  const auto & poly = *r.vertices();
  int disagreements = 0;
  for (int i = 0; i < 10000; ++i) {
    const Point2 q(rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2));
    // Skip queries within tolerance of the boundary, where both answers are fine.
    double dist = 1e9;
    for (const auto & h : r.halfplanes()) { dist = std::min(dist, std::abs(h.eval(q))); }
    if (dist < 1e-6) { continue; }
    disagreements += contains(r, q) != winding_inside(poly, q);
  }
  EXPECT_EQ(disagreements, 0);
}

TEST(Erode, ShiftsHalfplane)
{
  const auto r = erode_s(s_at_most(200), 3);
  ASSERT_EQ(r.halfplanes().size(), 1u);
  EXPECT_NEAR(r.halfplanes()[0].b, 197, 1e-12);
  EXPECT_NEAR(r.max_s(), 197, 1e-12);
}

TEST(Erode, SquareByTerminalTightening)
{
  // (2 L N + 1) * 3 with L = 0.05, N = 5.
  const double d = (2 * 0.05 * 5 + 1) * 3;
  EXPECT_DOUBLE_EQ(d, 4.5);
  const auto r = erode_s(box_region(0, 10, 0, 5), d);
  expect_consistent(r);
  EXPECT_NEAR(r.min_s(), 4.5, 1e-9);
  EXPECT_NEAR(r.max_s(), 5.5, 1e-9);
  EXPECT_TRUE(contains(r, {5, 0}));
  EXPECT_TRUE(contains(r, {5, 5}));
  EXPECT_FALSE(contains(r, {5, 5.01}));
  EXPECT_FALSE(contains(r, {4.4, 2}));
}

TEST(Erode, ZeroIsIdentity)
{
  const std::vector<Point2> pts{{0, 0}, {3, 1}, {1, 4}};
  const auto r = convex_hull(pts);
  const auto e = erode_s(r, 0);
  EXPECT_EQ(*e.vertices(), *r.vertices());
}

TEST(Erode, CanEmpty)
{
  EXPECT_TRUE(erode_s(box_region(0, 2, 0, 1), 1.5).empty());
}

TEST(Dilate, ShiftsHalfplane)
{
  const auto r = dilate_s(s_at_most(197), 3);
  EXPECT_NEAR(r.max_s(), 200, 1e-12);
}

TEST(Dilate, PointBecomesSegment)
{
  const std::vector<Point2> pts{{5, 2}};
  const auto r = dilate_s(convex_hull(pts), 1);
  expect_consistent(r);
  auto v = *r.vertices();
  sort_points(v);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], Point2(4, 2));
  EXPECT_EQ(v[1], Point2(6, 2));
}

TEST(Dilate, ErodeDilateRoundTrips)
{
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = convex_hull(random_points(rng, 12, 0, 10));
    const double d = rng.uniform(0, 2);
    const auto opened = dilate_s(erode_s(r, d), d);
    if (!opened.empty()) {
      for (const auto & p : *opened.vertices()) { EXPECT_TRUE(contains(r, p, 1e-7)); }
    }
    const auto closed = erode_s(dilate_s(r, d), d);
    for (const auto & p : *r.vertices()) { EXPECT_TRUE(contains(closed, p, 1e-7)); }
  }
}

TEST(Intersect, TouchingHalfplanesGiveLine)
{
  const auto r = intersect(s_at_most(200), s_at_least(200));
  EXPECT_FALSE(r.empty());
  EXPECT_TRUE(contains(r, {200, 3}));
  EXPECT_FALSE(contains(r, {200.01, 3}));
  EXPECT_FALSE(contains(r, {199.99, 3}));
}

TEST(Intersect, DisjointIsEmpty)
{
  EXPECT_TRUE(intersect(s_at_most(197), s_at_least(203)).empty());
}

TEST(Intersect, RandomTrianglesMatchSampling)
{
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t1 = convex_hull(random_points(rng, 3));
    const auto t2 = convex_hull(random_points(rng, 3));
    const auto r = intersect(t1, t2);
    if (!r.empty() && r.bounded()) { expect_consistent(r); }
    int bad = 0;
    for (int i = 0; i < 10000; ++i) {
      const Point2 q(rng.uniform(0, 1), rng.uniform(0, 1));
      const bool want = contains(t1, q, 0) && contains(t2, q, 0);
      const bool loose = contains(t1, q, 1e-6) && contains(t2, q, 1e-6);
      const bool got = contains(r, q);
      if (got != want && got != loose) { ++bad; }
    }
    EXPECT_EQ(bad, 0);
  }
}

TEST(Intersect, RemovesRedundantHalfplanes)
{
  const auto r = intersect(box_region(0, 10, 0, 5), s_at_most(20));
  EXPECT_EQ(r.halfplanes().size(), 4u);
  expect_consistent(r);
}

TEST(Translate, ShiftsPosition)
{
  const auto r = translate_s(box_region(0, 1, 0, 1), 5);
  EXPECT_NEAR(r.min_s(), 5, 1e-12);
  EXPECT_NEAR(r.max_s(), 6, 1e-12);
  EXPECT_NEAR(translate_s(s_at_least(3), -1).min_s(), 2, 1e-12);
}

TEST(SInterval, Scaling)
{
  const SInterval w{-3, 3};
  EXPECT_DOUBLE_EQ(w.scaled(0.1).hi, 0.3);
  EXPECT_DOUBLE_EQ(w.scaled(-2).lo, -6);
  EXPECT_DOUBLE_EQ(w.max_abs(), 3);
}
