#include "ecodrive/learning.hpp"

#include "ecodrive/error.hpp"
#include "ecodrive/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

namespace ecodrive {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::tuple<long long, long long, long long> pair_key(const DataPair & p)
{
  return {std::llround(p.x.x() * 1e9), std::llround(p.x.y() * 1e9), std::llround(p.u * 1e9)};
}

Point2 successor(const RobustModel & m, const DataPair & p) { return step_true(m.sys, p.x, p.u); }

// Successor constraint of stage i: R_{i-1} within the speed box, eroded by the noise.
ConvexRegion2 successor_region(const ConvexRegion2 & prev, const RobustModel & m)
{
  if (prev.empty()) { return prev; }
  return erode_s(intersect(prev, speed_band(0.0, m.limits.v_max)), m.step_erosion());
}

}  // namespace

Dataset augment(const Dataset & d, std::span<const DataPair> traj, const Limits & lim)
{
  std::set<std::tuple<long long, long long, long long>> seen;
  for (const auto & p : d.pairs) { seen.insert(pair_key(p)); }
  Dataset out = d;
  for (const auto & p : traj) {
    if (!p.x.allFinite() || !std::isfinite(p.u) || !lim.admits(p.x, p.u)) {
      std::ostringstream os;
      os << "infeasible pair rejected: s=" << p.x.x() << " v=" << p.x.y() << " u=" << p.u;
      throw Error(os.str());
    }
    if (seen.insert(pair_key(p)).second) { out.pairs.push_back(p); }
  }
  if (out.pairs.size() != d.pairs.size()) { ++out.version; }
  return out;
}

const char * to_string(TargetKind k) { return k == TargetKind::BeforeLight ? "before-light" : "after-light"; }

ConvexRegion2 light_target(TargetKind kind, double s_tl)
{
  return kind == TargetKind::BeforeLight ? s_at_most(s_tl) : s_at_least(s_tl);
}

SetSequence::SetSequence(const Dataset & d, const ConvexRegion2 & target, const RobustModel & model, int t_max,
  bool absorbing)
  : absorbing_(absorbing), entry_(successor_region(target, model))
{
  if (t_max < 0) { throw Error("t must be nonnegative"); }
  std::vector<Point2> succ;
  succ.reserve(d.pairs.size());
  for (const auto & p : d.pairs) { succ.push_back(successor(model, p)); }

  R_.push_back(target);
  members_.emplace_back();
  for (int i = 1; i <= t_max; ++i) {
    if (i >= 3 && members_[static_cast<std::size_t>(i - 1)] == members_[static_cast<std::size_t>(i - 2)]) {
      R_.push_back(R_.back());
      members_.push_back(members_.back());
      continue;
    }
    const ConvexRegion2 region = successor_region(R_.back(), model);
    std::vector<int> mem;
    std::vector<Point2> states;
    if (!region.empty() || absorbing_) {
      for (std::size_t j = 0; j < succ.size(); ++j) {
        if ((!region.empty() && contains(region, succ[j])) || (absorbing_ && contains(entry_, succ[j]))) {
          mem.push_back(static_cast<int>(j));
          states.push_back(d.pairs[j].x);
        }
      }
    }
    R_.push_back(states.empty() ? ConvexRegion2::empty_region() : convex_hull(states));
    members_.push_back(std::move(mem));
  }
}

bool SetSequence::settled() const
{
  const std::size_t n = members_.size();
  return n >= 3 && members_[n - 1] == members_[n - 2];
}

const ConvexRegion2 & SetSequence::operator[](int t) const
{
  if (t < 0 || t > t_max()) { throw Error("set index out of range"); }
  return R_[static_cast<std::size_t>(t)];
}

const std::vector<int> & SetSequence::qualifying(int t) const
{
  if (t < 0 || t > t_max()) { throw Error("set index out of range"); }
  return members_[static_cast<std::size_t>(t)];
}

ControllableSet robust_controllable_set(const Dataset & d, int t, TargetKind kind, double s_tl, const RobustModel & model)
{
  const SetSequence seq(d, light_target(kind, s_tl), model, t, kind == TargetKind::AfterLight);
  return {t, seq[t], kind, s_tl};
}

bool certify_point(const SetSequence & seq, const Dataset & d, const RobustModel & model, int t, const Point2 & x0,
  Rng & rng)
{
  if (!contains(seq[t], x0)) { throw Error("point is not in R_t; nothing to certify"); }
  const double e = model.step_erosion();
  Point2 x = x0;
  for (int level = t; level >= 1; --level) {
    const auto & mem = seq.qualifying(level);
    const ConvexRegion2 region = successor_region(seq[level - 1], model);
    if (mem.empty() || region.empty()) { return false; }
    const auto & hs = region.halfplanes();
    const Eigen::Index n = static_cast<Eigen::Index>(mem.size());
    const Eigen::Index nh = static_cast<Eigen::Index>(hs.size());
    LpProblem lp;
    lp.c = Eigen::VectorXd::Zero(n);
    lp.A_eq.resize(3, n);
    lp.A_ub.resize(nh, n);
    std::vector<Point2> succ;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto & p = d.pairs[static_cast<std::size_t>(mem[static_cast<std::size_t>(j)])];
      succ.push_back(successor(model, p));
      lp.A_eq.col(j) << p.x.x(), p.x.y(), 1.0;
      for (Eigen::Index h = 0; h < nh; ++h) { lp.A_ub(h, j) = hs[static_cast<std::size_t>(h)].a.dot(succ.back()); }
    }
    lp.b_eq = Eigen::Vector3d(x.x(), x.y(), 1.0);
    lp.b_ub.resize(nh);
    for (Eigen::Index h = 0; h < nh; ++h) { lp.b_ub(h) = hs[static_cast<std::size_t>(h)].b; }
    const auto r = solve_lp(lp);
    if (r.status != LpStatus::Optimal) { return false; }
    Point2 y = Point2::Zero();
    for (Eigen::Index j = 0; j < n; ++j) { y += r.x(j) * succ[static_cast<std::size_t>(j)]; }
    if (!contains(region, y, 1e-6)) { return false; }
    // Any admissible noise keeps the next estimate inside R_{level-1}; follow one draw.
    const double draw = rng.uniform(0.0, 1.0);
    const double n_step = draw < 0.25 ? -e : draw < 0.5 ? e : rng.uniform(-e, e);
    x = y + Point2(n_step, 0.0);
    if (!contains(seq[level - 1], x, 1e-6)) { return false; }
  }
  return contains(seq[0], x, 1e-6);
}

VerifyReport verify_controllable(const SetSequence & seq, const Dataset & d, const RobustModel & model, int t,
  int samples, Rng & rng)
{
  VerifyReport rep;
  const auto & R = seq[t];
  if (R.empty() || samples <= 0) { return rep; }
  std::vector<Point2> pts;
  if (R.bounded()) {
    const auto & v = *R.vertices();
    pts.insert(pts.end(), v.begin(), v.end());
    while (static_cast<int>(pts.size()) < samples) {
      std::vector<double> w(v.size());
      double sum = 0;
      for (auto & wi : w) { sum += wi = -std::log(rng.uniform(1e-12, 1.0)); }
      Point2 x = Point2::Zero();
      for (std::size_t i = 0; i < v.size(); ++i) { x += (w[i] / sum) * v[i]; }
      pts.push_back(x);
    }
    pts.resize(static_cast<std::size_t>(samples));
  }
  for (const auto & x : pts) {
    ++rep.checked;
    bool ok = false;
    try {
      ok = certify_point(seq, d, model, t, x, rng);
    } catch (const Error &) {
      ok = false;
    }
    if (ok) {
      ++rep.passed;
    } else {
      rep.counterexamples.push_back(x);
    }
  }
  return rep;
}

double evaluate_V(const CostToGoTable & table, const Point2 & x)
{
  if (x.x() >= table.s_tl) { return 0.0; }
  return table.envelope(x);
}

double evaluate_V_lp(const CostToGoTable & table, const Point2 & x)
{
  if (x.x() >= table.s_tl) { return 0.0; }
  return envelope_lp(table.points, x);
}

void rebuild_envelope(CostToGoTable & table) { table.envelope = ValueEnvelope(table.points); }

CostToGoTable cost_to_go(const Dataset & d, double s_tl, const RobustModel & model, const EnergyModel<double> & energy,
  std::span<const double> noise, const CostToGoOptions & opt)
{
  if (d.pairs.empty()) { throw Error("dataset is empty"); }
  if (noise.empty()) { throw Error("need at least one noise sample"); }
  const std::size_t n = d.pairs.size();
  std::vector<Point2> succ(n);
  std::vector<double> stage(n);
  for (std::size_t j = 0; j < n; ++j) {
    succ[j] = successor(model, d.pairs[j]);
    stage[j] = stage_cost(energy, d.pairs[j].x.y(), d.pairs[j].u);
  }
  const SetSequence seq(d, light_target(TargetKind::AfterLight, s_tl), model, opt.max_iter + 1, true);

  CostToGoTable table;
  table.s_tl = s_tl;
  table.points.resize(n);
  for (std::size_t j = 0; j < n; ++j) { table.points[j] = {d.pairs[j].x, kInf}; }

  const double inv_m = 1.0 / static_cast<double>(noise.size());
  double last_change = kInf;
  for (int k = 0; k < opt.max_iter; ++k) {
    std::vector<double> J(n, kInf);
    for (int j : seq.qualifying(k + 1)) {
      double mean = 0.0;
      for (double nm : noise) { mean += evaluate_V(table, succ[static_cast<std::size_t>(j)] + Point2(nm, 0.0)); }
      J[static_cast<std::size_t>(j)] = stage[static_cast<std::size_t>(j)] + mean * inv_m;
    }
    bool same_pattern = true;
    double change = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double old = table.points[j].J;
      if (std::isinf(old) != std::isinf(J[j])) {
        same_pattern = false;
      } else if (!std::isinf(old)) {
        change = std::max(change, std::abs(old - J[j]));
      }
      table.points[j].J = J[j];
    }
    rebuild_envelope(table);
    table.iterations = k + 1;
    if (opt.on_iterate) { opt.on_iterate(k + 1, table); }
    last_change = same_pattern ? change : kInf;
    if (same_pattern && change <= opt.tol) { return table; }
  }
  std::ostringstream os;
  os << "cost-to-go did not converge in " << opt.max_iter << " iterations (last finite change " << last_change
     << "; the target may be unreachable from parts of the data)";
  throw Error(os.str());
}

CostToGoTable prune_value_points(const CostToGoTable & table)
{
  CostToGoTable out;
  out.s_tl = table.s_tl;
  out.iterations = table.iterations;
  out.points = table.envelope.support();
  rebuild_envelope(out);
  return out;
}

}  // namespace ecodrive
