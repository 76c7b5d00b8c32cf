#include "ecodrive/traffic.hpp"

#include "ecodrive/error.hpp"

#include <algorithm>
#include <cmath>

namespace ecodrive {

const char * to_string(Signal s)
{
  switch (s) {
    case Signal::Green: return "green";
    case Signal::Yellow: return "yellow";
    case Signal::Red: return "red";
  }
  return "?";
}

void RouteSpec::validate() const
{
  for (std::size_t i = 0; i < lights.size(); ++i) {
    const auto & l = lights[i];
    if (l.green <= 0 || l.red <= 0 || l.yellow < 0) { throw Error("light durations must be positive"); }
    if (l.offset < 0 || l.offset >= l.cycle()) { throw Error("light offset must lie within the cycle"); }
    if (i > 0 && !(l.s_tl > lights[i - 1].s_tl)) { throw Error("light positions must be strictly increasing"); }
  }
  if (!(goal_s > 0)) { throw Error("goal_s must be positive"); }
  if (!(a_min < 0 && a_max > 0)) { throw Error("need a_min < 0 < a_max"); }
  if (!(v_max > 0)) { throw Error("v_max must be positive"); }
}

namespace {

int phase_time(const TrafficLight & light, long t)
{
  const long c = light.cycle();
  return static_cast<int>(((t + light.offset) % c + c) % c);
}

}  // namespace

Signal signal_at(const TrafficLight & light, long t)
{
  const int tau = phase_time(light, t);
  if (tau < light.green) { return Signal::Green; }
  if (tau < light.green + light.yellow) { return Signal::Yellow; }
  return Signal::Red;
}

int remaining_phase(const TrafficLight & light, long t)
{
  const int tau = phase_time(light, t);
  if (tau < light.green) { return light.green - tau; }
  if (tau < light.green + light.yellow) { return light.green + light.yellow - tau; }
  return light.cycle() - tau;
}

Windows compute_windows(int k, int N, const TrafficLight & light, int k_pass)
{
  const int start = k + N;
  if (start > k_pass) { throw Error("deadline inside horizon"); }
  if (signal_at(light, k_pass) != Signal::Green) { throw Error("infeasible schedule"); }
  int g = k_pass;
  while (g > start && signal_at(light, g - 1) == Signal::Green) { --g; }
  Windows w;
  w.t_green = k_pass - start;
  if (g > start) {
    w.t_red = g - start;
    if (*w.t_red >= w.t_green) { throw Error("infeasible schedule"); }
  }
  return w;
}

PassSchedule green_wave(const RouteSpec & route, int t0, double v_start, const GreenWaveOptions & opt)
{
  route.validate();
  PassSchedule out;
  double t_prev = t0, s_prev = 0.0, v_prev = std::clamp(v_start, 0.0, route.v_max);
  for (const auto & light : route.lights) {
    const double d = light.s_tl - s_prev;
    // Accelerate at a_max up to v_max, then hold.
    const double t_acc = (route.v_max - v_prev) / route.a_max;
    const double d_acc = v_prev * t_acc + 0.5 * route.a_max * t_acc * t_acc;
    double dt;
    if (d <= d_acc) {
      dt = (-v_prev + std::sqrt(v_prev * v_prev + 2.0 * route.a_max * d)) / route.a_max;
    } else {
      dt = t_acc + (d - d_acc) / route.v_max;
    }
    const double early = t_prev + dt;
    const double late = t_prev + d / opt.v_crawl;
    bool found = false;
    int t = static_cast<int>(std::ceil(early + opt.margin - 1e-9));
    if (!out.k_pass.empty()) { t = std::max(t, out.k_pass.back() + 1); }
    for (; t <= static_cast<int>(std::floor(late)); ++t) {
      bool ok = true;
      for (int j = t - opt.margin; j <= t + opt.margin && ok; ++j) { ok = signal_at(light, j) == Signal::Green; }
      if (ok) {
        found = true;
        break;
      }
    }
    if (!found) { throw Error("no green wave"); }
    out.k_pass.push_back(t);
    v_prev = std::min(route.v_max, d / (t - t_prev));
    t_prev = t;
    s_prev = light.s_tl;
  }
  return out;
}

std::size_t advance_segment(const RouteSpec & route, std::size_t light, double s_hat, double pos_err)
{
  while (light < route.lights.size() && s_hat - pos_err >= route.lights[light].s_tl) { ++light; }
  return light;
}

bool route_complete(const RouteSpec & route, std::size_t light, double s_hat, double pos_err)
{
  return light >= route.lights.size() && s_hat - pos_err >= route.goal_s;
}

SegmentContext segment_context(const RouteSpec & route, const PassSchedule & schedule, int k, double s_hat,
  std::size_t light, int N)
{
  SegmentContext ctx;
  ctx.light = light;
  if (light >= route.lights.size()) {
    ctx.distance = route.goal_s - s_hat;
    return ctx;
  }
  if (schedule.k_pass.size() != route.lights.size()) { throw Error("schedule does not match route"); }
  const auto & l = route.lights[light];
  ctx.has_light = true;
  ctx.signal = signal_at(l, k);
  ctx.remaining = remaining_phase(l, k);
  ctx.distance = l.s_tl - s_hat;
  ctx.k_pass = schedule.k_pass[light];
  if (k + N <= ctx.k_pass) { ctx.windows = compute_windows(k, N, l, ctx.k_pass); }
  return ctx;
}

}  // namespace ecodrive
