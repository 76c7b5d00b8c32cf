#include "ecodrive/envelope.hpp"

#include "ecodrive/lp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace ecodrive {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Lattice = std::array<std::int64_t, 3>;
using Wide = __int128;

// Lattice resolution for the exact hull predicates. Differences stay below
// 2^41, so an orientation determinant stays below 2^126.
constexpr double kLatticeScale = 1099511627776.0;  // 2^40

Wide orient(const Lattice & a, const Lattice & b, const Lattice & c, const Lattice & p)
{
  const Wide ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
  const Wide vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
  const Wide wx = p[0] - a[0], wy = p[1] - a[1], wz = p[2] - a[2];
  return wx * (uy * vz - uz * vy) + wy * (uz * vx - ux * vz) + wz * (ux * vy - uy * vx);
}

// z component of (b - a) x (c - a); negative for a downward-facing face.
Wide normal_z(const Lattice & a, const Lattice & b, const Lattice & c)
{
  return Wide(b[0] - a[0]) * (c[1] - a[1]) - Wide(b[1] - a[1]) * (c[0] - a[0]);
}

// Incremental 3-D convex hull with exact predicates on lattice points.
// Points coplanar with a face never see it, so no zero-area faces appear.
class Hull3
{
public:
  struct Face
  {
    int v[3];
    bool alive;
  };

  explicit Hull3(std::vector<Lattice> pts) : P_(std::move(pts)) {}

  // Returns false when the points do not span three dimensions.
  bool build()
  {
    const int n = static_cast<int>(P_.size());
    if (n < 4) { return false; }
    auto as_vec = [&](int i) { return Eigen::Vector3d(double(P_[i][0]), double(P_[i][1]), double(P_[i][2])); };
    int i0 = 0;
    for (int i = 1; i < n; ++i) {
      if (P_[i] < P_[i0]) { i0 = i; }
    }
    const int i1 = farthest([&](int i) { return (as_vec(i) - as_vec(i0)).squaredNorm(); });
    if (P_[i1] == P_[i0]) { return false; }
    int i2 = -1;
    double best = -1;
    for (int i = 0; i < n; ++i) {
      const Wide cx = Wide(P_[i1][1] - P_[i0][1]) * (P_[i][2] - P_[i0][2]) - Wide(P_[i1][2] - P_[i0][2]) * (P_[i][1] - P_[i0][1]);
      const Wide cy = Wide(P_[i1][2] - P_[i0][2]) * (P_[i][0] - P_[i0][0]) - Wide(P_[i1][0] - P_[i0][0]) * (P_[i][2] - P_[i0][2]);
      const Wide cz = Wide(P_[i1][0] - P_[i0][0]) * (P_[i][1] - P_[i0][1]) - Wide(P_[i1][1] - P_[i0][1]) * (P_[i][0] - P_[i0][0]);
      if (cx == 0 && cy == 0 && cz == 0) { continue; }
      const double m = std::abs(double(cx)) + std::abs(double(cy)) + std::abs(double(cz));
      if (m > best) {
        best = m;
        i2 = i;
      }
    }
    if (i2 < 0) { return false; }
    int i3 = -1;
    best = -1;
    for (int i = 0; i < n; ++i) {
      const Wide o = orient(P_[i0], P_[i1], P_[i2], P_[i]);
      if (o != 0 && std::abs(double(o)) > best) {
        best = std::abs(double(o));
        i3 = i;
      }
    }
    if (i3 < 0) { return false; }

    const int simplex[4] = {i0, i1, i2, i3};
    for (int k = 0; k < 4; ++k) {
      int a = simplex[(k + 1) % 4], b = simplex[(k + 2) % 4], c = simplex[(k + 3) % 4];
      if (orient(P_[a], P_[b], P_[c], P_[simplex[k]]) > 0) { std::swap(b, c); }
      F_.push_back({{a, b, c}, true});
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    // Fixed pseudo-random insertion order keeps the hull growth balanced.
    std::uint64_t st = 0x2545F4914F6CDD1DULL;
    for (int i = n - 1; i > 0; --i) {
      st ^= st << 13;
      st ^= st >> 7;
      st ^= st << 17;
      std::swap(order[static_cast<std::size_t>(i)], order[st % static_cast<std::uint64_t>(i + 1)]);
    }
    for (int p : order) {
      if (p == i0 || p == i1 || p == i2 || p == i3) { continue; }
      insert(p);
    }
    return true;
  }

  const std::vector<Face> & faces() const { return F_; }
  const Lattice & point(int i) const { return P_[static_cast<std::size_t>(i)]; }

private:
  template <typename Fn>
  int farthest(Fn dist) const
  {
    int best = 0;
    double bd = -1;
    for (int i = 0; i < static_cast<int>(P_.size()); ++i) {
      const double d = dist(i);
      if (d > bd) {
        bd = d;
        best = i;
      }
    }
    return best;
  }

  void insert(int p)
  {
    std::set<std::pair<int, int>> edges;
    std::vector<std::size_t> visible;
    for (std::size_t i = 0; i < F_.size(); ++i) {
      const Face & f = F_[i];
      if (f.alive && orient(P_[f.v[0]], P_[f.v[1]], P_[f.v[2]], P_[p]) > 0) { visible.push_back(i); }
    }
    if (visible.empty()) { return; }
    for (std::size_t i : visible) {
      F_[i].alive = false;
      const int * v = F_[i].v;
      for (int k = 0; k < 3; ++k) { edges.insert({v[k], v[(k + 1) % 3]}); }
    }
    dead_ += visible.size();
    for (const auto & [a, b] : edges) {
      if (!edges.count({b, a})) { F_.push_back({{a, b, p}, true}); }
    }
    if (dead_ > F_.size() / 2) {
      F_.erase(std::remove_if(F_.begin(), F_.end(), [](const Face & f) { return !f.alive; }), F_.end());
      dead_ = 0;
    }
  }

  std::vector<Lattice> P_;
  std::vector<Face> F_;
  std::size_t dead_{0};
};

bool covers(const Facet & f, const Point2 & x)
{
  Eigen::Matrix2d T;
  T.col(0) = f.tri[1] - f.tri[0];
  T.col(1) = f.tri[2] - f.tri[0];
  const Eigen::Vector2d w = T.partialPivLu().solve(x - f.tri[0]);
  constexpr double tol = 1e-9;
  return w.minCoeff() >= -tol && w.sum() <= 1.0 + tol;
}

}  // namespace

std::vector<ValuePoint> dedupe_min(std::span<const ValuePoint> points)
{
  std::map<std::pair<long long, long long>, ValuePoint> best;
  for (const auto & p : points) {
    if (!std::isfinite(p.J)) { continue; }
    const std::pair<long long, long long> key{std::llround(p.x.x() * 1e9), std::llround(p.x.y() * 1e9)};
    auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(key, p);
    } else if (p.J < it->second.J) {
      it->second = p;
    }
  }
  std::vector<ValuePoint> out;
  out.reserve(best.size());
  for (auto & kv : best) { out.push_back(kv.second); }
  return out;
}

double envelope_lp(std::span<const ValuePoint> points, const Point2 & x)
{
  const auto pts = dedupe_min(points);
  if (pts.empty()) { return kInf; }
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  LpProblem lp;
  lp.c.resize(n);
  lp.A_eq.resize(3, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto & p = pts[static_cast<std::size_t>(j)];
    lp.c(j) = p.J;
    lp.A_eq.col(j) << p.x.x(), p.x.y(), 1.0;
  }
  lp.b_eq = Eigen::Vector3d(x.x(), x.y(), 1.0);
  lp.A_ub.resize(0, n);
  lp.b_ub.resize(0);
  const auto r = solve_lp(lp);
  return r.status == LpStatus::Optimal ? r.objective : kInf;
}

ValueEnvelope::ValueEnvelope(std::span<const ValuePoint> points)
{
  const auto pts = dedupe_min(points);
  if (pts.empty()) { return; }

  std::vector<Point2> xs;
  xs.reserve(pts.size());
  for (const auto & p : pts) { xs.push_back(p.x); }
  domain_ = convex_hull(xs);
  const auto & dv = *domain_.vertices();

  if (dv.size() < 3) {
    support_ = pts;
    return;
  }

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(kInf), hi = Eigen::Vector3d::Constant(-kInf);
  for (const auto & p : pts) {
    const Eigen::Vector3d q(p.x.x(), p.x.y(), p.J);
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  Eigen::Vector3d range = hi - lo;
  for (int i = 0; i < 3; ++i) {
    if (range(i) <= 0) { range(i) = 1.0; }
  }
  std::vector<Lattice> lifted;
  lifted.reserve(pts.size());
  for (const auto & p : pts) {
    const Eigen::Vector3d q = (Eigen::Vector3d(p.x.x(), p.x.y(), p.J) - lo).cwiseQuotient(range) * kLatticeScale;
    lifted.push_back({std::llround(q.x()), std::llround(q.y()), std::llround(q.z())});
  }

  std::set<int> on_lower;
  Hull3 hull(lifted);
  if (hull.build()) {
    for (const auto & f : hull.faces()) {
      if (!f.alive || normal_z(hull.point(f.v[0]), hull.point(f.v[1]), hull.point(f.v[2])) >= 0) { continue; }
      Facet fc;
      Eigen::Matrix3d M;
      Eigen::Vector3d J;
      for (int k = 0; k < 3; ++k) {
        const auto & q = pts[static_cast<std::size_t>(f.v[k])];
        fc.tri[static_cast<std::size_t>(k)] = q.x;
        M.row(k) << q.x.x(), q.x.y(), 1.0;
        J(k) = q.J;
        on_lower.insert(f.v[k]);
      }
      fc.plane = M.partialPivLu().solve(J);
      facets_.push_back(fc);
    }
  } else {
    // All lifted points on one plane: a least-squares plane shifted down to
    // minorize every point, fanned over the domain polygon.
    Eigen::MatrixXd X(static_cast<Eigen::Index>(pts.size()), 3);
    Eigen::VectorXd J(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) << pts[i].x.x(), pts[i].x.y(), 1.0;
      J(static_cast<Eigen::Index>(i)) = pts[i].J;
    }
    Eigen::Vector3d plane = X.colPivHouseholderQr().solve(J);
    plane(2) += (J - X * plane).minCoeff();
    for (std::size_t i = 1; i + 1 < dv.size(); ++i) { facets_.push_back({plane, {dv[0], dv[i], dv[i + 1]}}); }
    for (std::size_t i = 0; i < pts.size(); ++i) { on_lower.insert(static_cast<int>(i)); }
  }

  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool keep = on_lower.count(static_cast<int>(i)) > 0;
    if (!keep) {
      keep = std::any_of(dv.begin(), dv.end(), [&](const Point2 & q) { return (q - pts[i].x).norm() <= 1e-12; });
    }
    if (keep) { support_.push_back(pts[i]); }
  }
  build_grid();
}

void ValueEnvelope::build_grid()
{
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(kInf), hi = Eigen::Vector2d::Constant(-kInf);
  for (const auto & p : *domain_.vertices()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const int g = std::clamp(static_cast<int>(std::ceil(std::sqrt(facets_.size() / 2.0))), 1, 512);
  nx_ = ny_ = g;
  lo_ = lo;
  cell_ = ((hi - lo) / g).cwiseMax(1e-12);
  buckets_.assign(static_cast<std::size_t>(nx_ * ny_), {});
  auto cell_of = [&](double v, double o, double c, int n) {
    return std::clamp(static_cast<int>(std::floor((v - o) / c)), 0, n - 1);
  };
  for (int f = 0; f < static_cast<int>(facets_.size()); ++f) {
    Eigen::Vector2d a = Eigen::Vector2d::Constant(kInf), b = Eigen::Vector2d::Constant(-kInf);
    for (const auto & p : facets_[static_cast<std::size_t>(f)].tri) {
      a = a.cwiseMin(p);
      b = b.cwiseMax(p);
    }
    const double pad = 1e-9;
    const int x0 = cell_of(a.x() - pad, lo_.x(), cell_.x(), nx_), x1 = cell_of(b.x() + pad, lo_.x(), cell_.x(), nx_);
    const int y0 = cell_of(a.y() - pad, lo_.y(), cell_.y(), ny_), y1 = cell_of(b.y() + pad, lo_.y(), cell_.y(), ny_);
    for (int i = x0; i <= x1; ++i) {
      for (int j = y0; j <= y1; ++j) { buckets_[static_cast<std::size_t>(i * ny_ + j)].push_back(f); }
    }
  }
}

double ValueEnvelope::operator()(const Point2 & x) const
{
  if (support_.empty() || !contains(domain_, x)) { return kInf; }
  if (facets_.empty()) { return envelope_lp(support_, x); }
  const int i = std::clamp(static_cast<int>(std::floor((x.x() - lo_.x()) / cell_.x())), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>(std::floor((x.y() - lo_.y()) / cell_.y())), 0, ny_ - 1);
  // Every facet plane minorizes the data, so the max over the facets covering
  // x is exact; when rounding leaves x in no triangle, the max over nearby
  // planes is the next best.
  const auto & bucket = buckets_[static_cast<std::size_t>(i * ny_ + j)];
  double v = -kInf;
  for (int f : bucket) {
    const Facet & fc = facets_[static_cast<std::size_t>(f)];
    if (covers(fc, x)) { v = std::max(v, fc.eval(x)); }
  }
  if (v > -kInf) { return v; }
  for (int f : bucket) { v = std::max(v, facets_[static_cast<std::size_t>(f)].eval(x)); }
  if (v == -kInf) {
    for (const auto & f : facets_) { v = std::max(v, f.eval(x)); }
  }
  return v;
}

}  // namespace ecodrive
