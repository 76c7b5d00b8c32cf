#pragma once

#include "ecodrive/plant.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ecodrive {

enum class Signal { Green, Yellow, Red };

const char * to_string(Signal s);

/// Fixed-time signal; the cycle runs green, yellow, red. Times in whole seconds.
struct TrafficLight
{
  double s_tl{0};
  int green{30};
  int yellow{5};
  int red{25};
  /// Position within the cycle at t = 0.
  int offset{0};

  int cycle() const { return green + yellow + red; }
};

struct RouteSpec
{
  std::vector<TrafficLight> lights;
  double goal_s{0};
  double v_max{14};
  double a_min{-3};
  double a_max{2};

  Limits limits() const { return {v_max, a_min, a_max}; }

  /// Throws on non-increasing light positions, bad durations or a bad box.
  void validate() const;
};

struct PassSchedule
{
  std::vector<int> k_pass;
};

Signal signal_at(const TrafficLight & light, long t);

/// Seconds until the signal at t changes.
int remaining_phase(const TrafficLight & light, long t);

/// Horizon-relative windows: stay behind the light until t_red + N, be past it by t_green + N.
struct Windows
{
  std::optional<int> t_red;
  int t_green{0};

  bool operator==(const Windows &) const = default;
};

Windows compute_windows(int k, int N, const TrafficLight & light, int k_pass);

struct GreenWaveOptions
{
  int margin{2};
  /// Slowest average speed considered when bounding the latest arrival.
  double v_crawl{1.0};
};

/// Greedy earliest-green schedule starting at s = 0 with speed v_start at time t0.
PassSchedule green_wave(const RouteSpec & route, int t0, double v_start, const GreenWaveOptions & opt = {});

/// Light index after applying the robust transition rule s_hat - pos_err >= s_tl.
std::size_t advance_segment(const RouteSpec & route, std::size_t light, double s_hat, double pos_err = 3.0);

bool route_complete(const RouteSpec & route, std::size_t light, double s_hat, double pos_err = 3.0);

struct SegmentContext
{
  std::size_t light{0};
  /// False once every light is behind the vehicle.
  bool has_light{false};
  Signal signal{Signal::Green};
  int remaining{0};
  double distance{0};
  int k_pass{0};
  /// Windows are only defined while the deadline lies beyond the horizon.
  std::optional<Windows> windows;
};

SegmentContext segment_context(const RouteSpec & route, const PassSchedule & schedule, int k, double s_hat,
  std::size_t light, int N);

}  // namespace ecodrive
