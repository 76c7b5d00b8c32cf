#include "ecodrive/controller.hpp"

#include "ecodrive/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace ecodrive {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rows mapping the input sequence to s_i and v_i (plus the free response).
struct Prediction
{
  Eigen::MatrixXd Ss, Sv;
  Eigen::VectorXd s0, v0;
};

Prediction prediction_rows(const Point2 & x0, int N)
{
  const auto sys = SystemMatrices<double>::zoh();
  Prediction p;
  p.Ss = Eigen::MatrixXd::Zero(N + 1, N);
  p.Sv = Eigen::MatrixXd::Zero(N + 1, N);
  p.s0.resize(N + 1);
  p.v0.resize(N + 1);
  Eigen::Matrix2d Ai = Eigen::Matrix2d::Identity();
  for (int i = 0; i <= N; ++i) {
    const Eigen::Vector2d free = Ai * x0;
    p.s0(i) = free.x();
    p.v0(i) = free.y();
    // x_i depends on u_j (j < i) through A^(i-1-j) B.
    Eigen::Matrix2d Ap = Eigen::Matrix2d::Identity();
    for (int j = i - 1; j >= 0; --j) {
      const Eigen::Vector2d g = Ap * sys.B;
      p.Ss(i, j) = g.x();
      p.Sv(i, j) = g.y();
      Ap = Ap * sys.A;
    }
    Ai = sys.A * Ai;
  }
  return p;
}

void append_rows(Eigen::MatrixXd & G, Eigen::VectorXd & h, const Eigen::MatrixXd & Gn, const Eigen::VectorXd & hn)
{
  const Eigen::Index r = G.rows();
  G.conservativeResize(r + Gn.rows(), Gn.cols());
  h.conservativeResize(r + hn.size());
  G.bottomRows(Gn.rows()) = Gn;
  h.tail(hn.size()) = hn;
}

Signal next_signal(Signal s)
{
  switch (s) {
    case Signal::Green: return Signal::Yellow;
    case Signal::Yellow: return Signal::Red;
    case Signal::Red: return Signal::Green;
  }
  return s;
}

bool green_now_and_next(const SegmentContext & ctx)
{
  const Signal nxt = ctx.remaining > 1 ? ctx.signal : next_signal(ctx.signal);
  return ctx.signal == Signal::Green && nxt == Signal::Green;
}

// Envelope facets whose triangle meets the box [lo, hi] (table frame).
std::vector<int> facets_near(const ValueEnvelope & env, const Eigen::Vector2d & lo, const Eigen::Vector2d & hi)
{
  std::vector<int> out;
  const auto & F = env.facets();
  for (int f = 0; f < static_cast<int>(F.size()); ++f) {
    Eigen::Vector2d a = Eigen::Vector2d::Constant(kInf), b = Eigen::Vector2d::Constant(-kInf);
    for (const auto & p : F[static_cast<std::size_t>(f)].tri) {
      a = a.cwiseMin(p);
      b = b.cwiseMax(p);
    }
    if ((a.array() <= hi.array() + 1e-9).all() && (b.array() >= lo.array() - 1e-9).all()) { out.push_back(f); }
  }
  if (out.empty()) {
    out.resize(F.size());
    for (int f = 0; f < static_cast<int>(F.size()); ++f) { out[static_cast<std::size_t>(f)] = f; }
  }
  return out;
}

}  // namespace

void MpcConfig::validate() const
{
  if (N < 1) { throw Error("horizon N must be at least 1"); }
  if (M < 1) { throw Error("noise sample count M must be at least 1"); }
  if (!(L > 0 && L < 1)) { throw Error("observer gain L must lie in (0, 1)"); }
  if (W.lo > W.hi) { throw Error("noise bound lo > hi"); }
  if (!(limits.v_max > 0 && limits.a_min < 0 && limits.a_max > 0)) { throw Error("bad vehicle limits"); }
}

const char * to_string(MpcStatus s) { return s == MpcStatus::Optimal ? "optimal" : "infeasible"; }

const char * to_string(ControlMode m)
{
  switch (m) {
    case ControlMode::Mpc: return "mpc";
    case ControlMode::Fallback: return "fallback";
    case ControlMode::Tail: return "tail";
    case ControlMode::Cruise: return "cruise";
  }
  return "?";
}

std::vector<Point2> predict(const Point2 & x0, const Eigen::VectorXd & u)
{
  const auto sys = SystemMatrices<double>::zoh();
  std::vector<Point2> xs{x0};
  for (Eigen::Index i = 0; i < u.size(); ++i) { xs.push_back(step_true(sys, xs.back(), u(i))); }
  return xs;
}

MpcProblem assemble_mpc(const MpcSpec & spec, const MpcConfig & cfg)
{
  cfg.validate();
  if (spec.V && spec.sn.empty()) { throw Error("terminal cost needs at least one noise sample"); }
  const int N = cfg.N;
  const auto & lim = cfg.limits;
  const Prediction pr = prediction_rows(spec.x0, N);

  MpcProblem p;
  p.spec = spec;
  p.N = N;
  p.form = cfg.form;
  p.terminal = intersect(spec.terminal, speed_band(0.0, lim.v_max));

  // Stage costs: z_i = [v_i, u_i, 1] = E u + f.
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(N);
  const Eigen::Matrix3d & P = cfg.energy.P;
  for (int i = 0; i < N; ++i) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(3, N);
    E.row(0) = pr.Sv.row(i);
    E(1, i) = 1.0;
    const Eigen::Vector3d f(pr.v0(i), 0.0, 1.0);
    H += 2.0 * E.transpose() * P * E;
    c += 2.0 * E.transpose() * P * f;
    p.constant += f.dot(P * f);
  }

  Eigen::MatrixXd G(0, N);
  Eigen::VectorXd h(0);
  {
    Eigen::MatrixXd Gb(4 * N, N);
    Eigen::VectorXd hb(4 * N);
    Gb.setZero();
    for (int i = 0; i < N; ++i) {
      Gb(i, i) = 1.0;
      hb(i) = lim.a_max;
      Gb(N + i, i) = -1.0;
      hb(N + i) = -lim.a_min;
      Gb.row(2 * N + i) = pr.Sv.row(i + 1);
      hb(2 * N + i) = lim.v_max - pr.v0(i + 1);
      Gb.row(3 * N + i) = -pr.Sv.row(i + 1);
      hb(3 * N + i) = pr.v0(i + 1);
    }
    append_rows(G, h, Gb, hb);
  }
  if (spec.red_limit) {
    append_rows(G, h, pr.Ss.row(1), Eigen::VectorXd::Constant(1, *spec.red_limit - pr.s0(1)));
  }
  if (spec.deadline) {
    const int i = spec.deadline->first;
    if (i < 1 || i > N) { throw Error("deadline step outside the horizon"); }
    append_rows(G, h, -pr.Ss.row(i), Eigen::VectorXd::Constant(1, pr.s0(i) - spec.deadline->second));
  }
  if (p.terminal.empty()) {
    p.infeasible = true;
    return p;
  }
  for (const auto & hp : p.terminal.halfplanes()) {
    const Eigen::RowVectorXd row = hp.a.x() * pr.Ss.row(N) + hp.a.y() * pr.Sv.row(N);
    append_rows(G, h, row, Eigen::VectorXd::Constant(1, hp.b - hp.a.x() * pr.s0(N) - hp.a.y() * pr.v0(N)));
  }

  // Sampled terminal cost.
  const int M = static_cast<int>(spec.sn.size());
  bool with_cost = spec.V != nullptr;
  if (with_cost) {
    const auto [sn_lo, sn_hi] = std::minmax_element(spec.sn.begin(), spec.sn.end());
    if (p.terminal.min_s() - spec.shift + *sn_lo >= spec.V->s_tl) { with_cost = false; }
    if (with_cost && spec.V->envelope.empty()) {
      p.infeasible = true;
      return p;
    }
    if (with_cost) {
      const ValueEnvelope & env = spec.V->envelope;
      const bool weights = cfg.form == TerminalCostForm::Weights || env.degenerate();
      p.form = weights ? TerminalCostForm::Weights : TerminalCostForm::Epigraph;
      if (!weights) {
        p.extra = M;
        // Box of reachable terminal points, shifted into the table frame.
        const double s_free = pr.s0(N);
        double s_lo = s_free + pr.Ss.row(N).sum() * lim.a_min, s_hi = s_free + pr.Ss.row(N).sum() * lim.a_max;
        s_lo = std::max(s_lo, p.terminal.min_s());
        s_hi = std::min(s_hi, p.terminal.max_s());
        const double v_lo = std::max(0.0, pr.v0(N) + N * lim.a_min), v_hi = std::min(lim.v_max, pr.v0(N) + N * lim.a_max);
        const Eigen::Vector2d lo(s_lo - spec.shift + *sn_lo, v_lo), hi(s_hi - spec.shift + *sn_hi, v_hi);
        const std::vector<int> near = facets_near(env, lo, hi);
        const auto & dom = env.domain().halfplanes();
        const Eigen::Index rows = static_cast<Eigen::Index>(M * (near.size() + dom.size()));
        Eigen::MatrixXd Gt = Eigen::MatrixXd::Zero(rows, N + M);
        Eigen::VectorXd ht(rows);
        Eigen::Index r = 0;
        for (int m = 0; m < M; ++m) {
          const double off = spec.sn[static_cast<std::size_t>(m)] - spec.shift;
          for (int f : near) {
            const Eigen::Vector3d & pl = env.facets()[static_cast<std::size_t>(f)].plane;
            Gt.row(r).head(N) = pl(0) * pr.Ss.row(N) + pl(1) * pr.Sv.row(N);
            Gt(r, N + m) = -1.0;
            ht(r) = -(pl(0) * (pr.s0(N) + off) + pl(1) * pr.v0(N) + pl(2));
            ++r;
          }
          for (const auto & hp : dom) {
            Gt.row(r).head(N) = hp.a.x() * pr.Ss.row(N) + hp.a.y() * pr.Sv.row(N);
            ht(r) = hp.b - hp.a.x() * (pr.s0(N) + off) - hp.a.y() * pr.v0(N);
            ++r;
          }
        }
        G.conservativeResize(G.rows(), N + M);
        G.rightCols(M).setZero();
        append_rows(G, h, Gt, ht);
        H.conservativeResize(N + M, N + M);
        H.rightCols(M).setZero();
        H.bottomRows(M).setZero();
        c.conservativeResize(N + M);
        c.tail(M).setConstant(1.0 / M);
        p.qp.A.resize(0, N + M);
        p.qp.b.resize(0);
      } else {
        const auto & sup = env.support();
        const int n = static_cast<int>(sup.size());
        p.extra = M * n;
        const int nv = N + M * n;
        G.conservativeResize(G.rows(), nv);
        G.rightCols(M * n).setZero();
        Eigen::MatrixXd Gl = Eigen::MatrixXd::Zero(M * n, nv);
        Gl.rightCols(M * n) = -Eigen::MatrixXd::Identity(M * n, M * n);
        append_rows(G, h, Gl, Eigen::VectorXd::Zero(M * n));
        H.conservativeResize(nv, nv);
        H.rightCols(M * n).setZero();
        H.bottomRows(M * n).setZero();
        c.conservativeResize(nv);
        p.qp.A = Eigen::MatrixXd::Zero(3 * M, nv);
        p.qp.b.resize(3 * M);
        for (int m = 0; m < M; ++m) {
          const double off = spec.sn[static_cast<std::size_t>(m)] - spec.shift;
          for (int d = 0; d < n; ++d) {
            const auto & q = sup[static_cast<std::size_t>(d)];
            const int col = N + m * n + d;
            c(col) = q.J / M;
            p.qp.A(3 * m, col) = q.x.x();
            p.qp.A(3 * m + 1, col) = q.x.y();
            p.qp.A(3 * m + 2, col) = 1.0;
          }
          p.qp.A.row(3 * m).head(N) = -pr.Ss.row(N);
          p.qp.A.row(3 * m + 1).head(N) = -pr.Sv.row(N);
          p.qp.b(3 * m) = pr.s0(N) + off;
          p.qp.b(3 * m + 1) = pr.v0(N);
          p.qp.b(3 * m + 2) = 1.0;
        }
      }
    }
  }
  if (!with_cost) {
    p.extra = 0;
    p.qp.A.resize(0, N);
    p.qp.b.resize(0);
  }
  p.qp.H = H;
  p.qp.c = c;
  p.qp.G = G;
  p.qp.h = h;
  return p;
}

MpcProblem build_mpc(const Point2 & x_hat, const SegmentContext & ctx, const ControllableSet * S,
  const ControllableSet & P, const CostToGoTable & V, std::span<const double> sn, const MpcConfig & cfg)
{
  if (S && S->s_tl != P.s_tl) { throw Error("S and P refer to different lights"); }
  const double s_tl = x_hat.x() + ctx.distance;
  const double shift = s_tl - P.s_tl;
  const double tt = cfg.terminal_tightening();
  MpcSpec spec;
  spec.x0 = x_hat;
  if (!green_now_and_next(ctx)) { spec.red_limit = s_tl - cfg.red_tightening(); }
  ConvexRegion2 term = erode_s(P.region, tt);
  if (S) { term = intersect(term, erode_s(S->region, tt)); }
  spec.terminal = term.empty() ? term : translate_s(term, shift);
  spec.V = &V;
  spec.shift = s_tl - V.s_tl;
  spec.sn.assign(sn.begin(), sn.end());
  return assemble_mpc(spec, cfg);
}

MpcSolution solve_mpc(const MpcProblem & p)
{
  MpcSolution sol;
  if (p.infeasible) { return sol; }
  const auto t0 = std::chrono::steady_clock::now();
  const QpResult r = solve_qp(p.qp);
  sol.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (r.status != QpStatus::Optimal) { return sol; }
  if (!r.z.allFinite()) {
    std::ostringstream os;
    os << "numerical breakdown: non-finite QP solution (data finite: H " << p.qp.H.allFinite() << ", c "
       << p.qp.c.allFinite() << ", G " << p.qp.G.allFinite() << ", h " << p.qp.h.allFinite() << "; " << p.qp.G.rows()
       << " inequality rows)";
    throw Error(os.str());
  }
  sol.status = MpcStatus::Optimal;
  sol.u = r.z.head(p.N);
  sol.states = predict(p.spec.x0, sol.u);
  sol.objective = r.objective + p.constant;
  sol.kkt = kkt_residuals(p.qp, r).max();
  return sol;
}

double constraint_violation(const MpcProblem & p, const MpcSolution & sol, const MpcConfig & cfg)
{
  if (sol.status != MpcStatus::Optimal) { throw Error("no solution to check"); }
  const auto & lim = cfg.limits;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < sol.u.size(); ++i) {
    worst = std::max({worst, sol.u(i) - lim.a_max, lim.a_min - sol.u(i)});
  }
  for (std::size_t i = 1; i < sol.states.size(); ++i) {
    worst = std::max({worst, sol.states[i].y() - lim.v_max, -sol.states[i].y()});
  }
  if (p.spec.red_limit) { worst = std::max(worst, sol.states[1].x() - *p.spec.red_limit); }
  if (p.spec.deadline) {
    worst = std::max(worst, p.spec.deadline->second - sol.states[static_cast<std::size_t>(p.spec.deadline->first)].x());
  }
  for (const auto & hp : p.terminal.halfplanes()) { worst = std::max(worst, hp.eval(sol.states.back())); }
  return worst;
}

double sampled_terminal_cost(const MpcSpec & spec, const Point2 & xN)
{
  if (!spec.V) { return 0.0; }
  double sum = 0.0;
  for (double n : spec.sn) { sum += evaluate_V(*spec.V, xN + Point2(n - spec.shift, 0.0)); }
  return sum / static_cast<double>(spec.sn.size());
}

double stopping_distance(double v, double a)
{
  a = std::abs(a);
  if (v <= 0) { return 0.0; }
  if (a <= 0) { return kInf; }
  const double n = std::floor(v / a);
  const double r = v - n * a;
  return n * v - 0.5 * a * n * n + 0.5 * r;
}

namespace {

double track(double v, const CruiseConfig & cfg, const Limits & lim)
{
  const double u = std::clamp(cfg.k_p * (cfg.v_ref - v), lim.a_min, lim.a_max);
  return std::clamp(u, -v, lim.v_max - v);
}

double throttle(double v, const Limits & lim) { return std::clamp(lim.a_max, -v, lim.v_max - v); }

// Whether every step at which the true position may first pass the light is
// green, when u_first is applied now and the plan law afterwards.
bool clears_on_green(const Point2 & x_hat, long k, const TrafficLight & light, double u_first, bool full,
  const CruiseConfig & cfg, const Limits & lim, double e)
{
  double lo = x_hat.x() - e, hi = x_hat.x() + e, v = x_hat.y();
  double u = u_first;
  for (int j = 1; j <= 1000; ++j) {
    const double ds = v + 0.5 * u;
    const bool may_cross = hi + ds >= light.s_tl && lo < light.s_tl;
    lo += ds;
    hi += ds;
    v += u;
    if (may_cross && signal_at(light, k + j) != Signal::Green) { return false; }
    if (lo >= light.s_tl) { return true; }
    u = full ? throttle(v, lim) : track(v, cfg, lim);
    if (v <= 0 && u <= 0) { return false; }
  }
  return false;
}

}  // namespace

double cruise_control(const Point2 & x_hat, long k, const TrafficLight * light, std::size_t light_index,
  const CruiseConfig & cfg, const Limits & lim, double pos_err, CruiseMemory & memory)
{
  const double v = std::max(0.0, x_hat.y());
  const double u_track = track(v, cfg, lim);
  if (!light) { return u_track; }
  if (memory.committed_light == light_index) { return memory.full_throttle ? throttle(v, lim) : u_track; }
  memory = {};

  const double stop_at = light->s_tl - pos_err - cfg.stop_margin;
  auto stoppable = [&](double u) {
    return x_hat.x() + v + 0.5 * u + stopping_distance(v + u, lim.a_min) <= stop_at;
  };
  if (stoppable(u_track)) { return u_track; }
  if (clears_on_green(x_hat, k, *light, u_track, false, cfg, lim, pos_err)) {
    memory = {light_index, false};
    return u_track;
  }
  if (clears_on_green(x_hat, k, *light, throttle(v, lim), true, cfg, lim, pos_err)) {
    memory = {light_index, true};
    return throttle(v, lim);
  }
  // Brake to stop at the margin point; hold when already stopped.
  if (v <= 0) { return 0.0; }
  const double room = stop_at - x_hat.x();
  const double a = room > 0 ? -v * v / (2.0 * room) : lim.a_min;
  return std::clamp(a, std::max(lim.a_min, -v), 0.0);
}

std::optional<ControllableSet> LearnedArtifacts::set(TargetKind kind, int t) const
{
  const auto & seq = kind == TargetKind::BeforeLight ? before : after;
  if (!seq || t < 0) { return std::nullopt; }
  if (t > seq->t_max() && !seq->settled()) { return std::nullopt; }
  return ControllableSet{t, (*seq)[std::min(t, seq->t_max())], kind, 0.0};
}

const CostToGoTable & LearnedArtifacts::value(int t) const
{
  if (t >= 1 && t <= static_cast<int>(stages.size())) { return *stages[static_cast<std::size_t>(t - 1)]; }
  return *V;
}

LearnedArtifacts learn(const Dataset & d, const MpcConfig & cfg, std::span<const double> noise, const LearnOptions & opt)
{
  LearnedArtifacts a;
  a.data = d;
  if (d.pairs.empty()) { return a; }
  const RobustModel model = cfg.robust_model();
  a.before = std::make_shared<SetSequence>(d, light_target(TargetKind::BeforeLight, 0.0), model, opt.t_max, false);
  a.after = std::make_shared<SetSequence>(d, light_target(TargetKind::AfterLight, 0.0), model, opt.t_max, true);
  CostToGoOptions co = opt.cost;
  co.on_iterate = [&](int k, const CostToGoTable & t) {
    if (k <= opt.t_max) { a.stages.push_back(std::make_shared<CostToGoTable>(prune_value_points(t))); }
  };
  a.V = std::make_shared<CostToGoTable>(prune_value_points(cost_to_go(d, 0.0, model, cfg.energy, noise, co)));
  return a;
}

Controller::Controller(const ControllerConfig & cfg, const RouteSpec & route, const PassSchedule & schedule,
  std::shared_ptr<const LearnedArtifacts> artifacts)
  : cfg_(cfg), route_(route), schedule_(schedule), art_(std::move(artifacts))
{
  cfg_.mpc.validate();
  route_.validate();
  if (schedule_.k_pass.size() != route_.lights.size()) { throw Error("schedule and route disagree on the light count"); }
}

const std::vector<double> & Controller::samples(std::size_t light)
{
  if (sn_light_ != light) {
    Rng rng = Rng(cfg_.noise_seed).split(light);
    sn_ = sample_terminal_noise(rng, cfg_.mpc.M, cfg_.mpc.N, cfg_.mpc.L, NoiseModel{cfg_.mpc.W});
    sn_light_ = light;
  }
  return sn_;
}

double Controller::kinematic_v_ref(int k, const Point2 & x_hat, std::size_t light) const
{
  const int left = schedule_.k_pass[light] - k;
  if (left <= 0) { return cfg_.cruise.v_ref; }
  const double dist = route_.lights[light].s_tl + cfg_.mpc.pos_err() - x_hat.x();
  return std::clamp(dist / left, 0.0, route_.v_max);
}

ControlOutput Controller::cruise_step(int k, const Point2 & x_hat, std::size_t light)
{
  ControlOutput out;
  out.mode = ControlMode::Cruise;
  const TrafficLight * tl = light < route_.lights.size() ? &route_.lights[light] : nullptr;
  out.u = cruise_control(x_hat, k, tl, light, cfg_.cruise, route_.limits(), cfg_.mpc.pos_err(), memory_);
  return out;
}

ControlOutput Controller::step(int k, const Point2 & x_hat, std::size_t light)
{
  ControlOutput out;
  if (light >= route_.lights.size()) {
    out.mode = ControlMode::Tail;
    out.u = cruise_control(x_hat, k, nullptr, light, cfg_.cruise, route_.limits(), cfg_.mpc.pos_err(), memory_);
    return out;
  }
  const MpcConfig & mc = cfg_.mpc;
  const TrafficLight & tl = route_.lights[light];
  auto fallback = [&]() {
    CruiseConfig cc = cfg_.cruise;
    cc.v_ref = kinematic_v_ref(k, x_hat, light);
    out.mode = ControlMode::Fallback;
    out.u = cruise_control(x_hat, k, &tl, light, cc, route_.limits(), mc.pos_err(), memory_);
    return out;
  };
  if (!art_ || art_->empty()) { return fallback(); }

  const SegmentContext ctx = segment_context(route_, schedule_, k, x_hat.x(), light, mc.N);
  const auto & sn = samples(light);
  MpcProblem prob;
  try {
    if (ctx.windows) {
      out.windows = ctx.windows;
      std::optional<ControllableSet> S;
      if (ctx.windows->t_red) {
        S = art_->set(TargetKind::BeforeLight, *ctx.windows->t_red);
        if (!S) { return fallback(); }
      }
      const auto P = art_->set(TargetKind::AfterLight, ctx.windows->t_green);
      if (!P) { return fallback(); }
      prob = build_mpc(x_hat, ctx, S ? &*S : nullptr, *P, art_->value(ctx.windows->t_green), sn, mc);
    } else {
      // The deadline falls inside the horizon: be robustly past this light by
      // then and hand the terminal ingredients over to the next light.
      MpcSpec spec;
      spec.x0 = x_hat;
      if (!green_now_and_next(ctx)) { spec.red_limit = tl.s_tl - mc.red_tightening(); }
      const int istar = std::clamp(ctx.k_pass - k, 1, mc.N);
      spec.deadline = std::make_pair(istar, tl.s_tl + (2.0 * mc.L * istar + 1.0) * mc.pos_err());
      spec.sn = sn;
      if (light + 1 < route_.lights.size()) {
        const TrafficLight & nl = route_.lights[light + 1];
        const Windows w = compute_windows(k, mc.N, nl, schedule_.k_pass[light + 1]);
        out.windows = w;
        const auto P = art_->set(TargetKind::AfterLight, w.t_green);
        if (!P) { return fallback(); }
        ConvexRegion2 term = erode_s(P->region, mc.terminal_tightening());
        if (w.t_red) {
          const auto S = art_->set(TargetKind::BeforeLight, *w.t_red);
          if (!S) { return fallback(); }
          term = intersect(term, erode_s(S->region, mc.terminal_tightening()));
        }
        spec.terminal = term.empty() ? term : translate_s(term, nl.s_tl);
        spec.V = &art_->value(w.t_green);
        spec.shift = nl.s_tl;
      }
      prob = assemble_mpc(spec, mc);
    }
  } catch (const Error &) {
    return fallback();
  }

  MpcSolution sol;
  try {
    sol = solve_mpc(prob);
  } catch (const Error &) {
    return fallback();
  }
  out.solve_ms = sol.solve_ms;
  if (sol.status != MpcStatus::Optimal) { return fallback(); }
  out.mode = ControlMode::Mpc;
  out.status = sol.status;
  out.u = std::clamp(sol.u(0), mc.limits.a_min, mc.limits.a_max);
  out.u = std::clamp(out.u, -x_hat.y(), mc.limits.v_max - x_hat.y());
  out.objective = sol.objective;
  for (int i = 2; i <= mc.N; ++i) {
    const bool crosses = sol.states[static_cast<std::size_t>(i)].x() >= tl.s_tl &&
                         sol.states[static_cast<std::size_t>(i - 1)].x() < tl.s_tl;
    if (crosses && signal_at(tl, k + i) != Signal::Green) { out.intermediate_red_crossing = true; }
  }
  memory_ = {};
  return out;
}

}  // namespace ecodrive
