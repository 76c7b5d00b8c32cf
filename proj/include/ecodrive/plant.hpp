#pragma once

#include "ecodrive/geometry.hpp"
#include "ecodrive/rng.hpp"

#include <Eigen/Core>

#include <vector>

namespace ecodrive {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

/// (position [m], speed [m/s]).
using VehicleState = Vec2<double>;
/// (measured position, speed); the speed channel is noise free.
using Measurement = Vec2<double>;

/// Zero-order-hold double integrator, noise entering the position channel.
template <typename Scalar = double>
struct SystemMatrices
{
  Eigen::Matrix<Scalar, 2, 2> A;
  Vec2<Scalar> B;
  Vec2<Scalar> F{Scalar(1), Scalar(0)};
  Scalar Ts{1};

  static SystemMatrices zoh(Scalar Ts = Scalar(1))
  {
    SystemMatrices m;
    m.A << Scalar(1), Ts, Scalar(0), Scalar(1);
    m.B << Ts * Ts / Scalar(2), Ts;
    m.Ts = Ts;
    return m;
  }
};

template <typename Scalar>
Vec2<Scalar> step_true(const SystemMatrices<Scalar> & sys, const Vec2<Scalar> & x, Scalar u)
{
  return sys.A * x + sys.B * u;
}

/// State and input box: 0 <= v <= v_max, a_min <= u <= a_max.
struct Limits
{
  double v_max{14};
  double a_min{-3};
  double a_max{2};

  bool admits(const VehicleState & x, double u, double tol = 1e-9) const
  {
    return x.y() >= -tol && x.y() <= v_max + tol && u >= a_min - tol && u <= a_max + tol;
  }
};

/// Bounded additive position noise, uniform over its support.
struct NoiseModel
{
  SInterval bound{-3.0, 3.0};

  double sample(Rng & rng) const
  {
    return bound.width() > 0 ? rng.uniform(bound.lo, bound.hi) : bound.lo;
  }
};

/// Throws "noise outside support" when w is not in the noise bound.
Measurement measure(const VehicleState & x, double w, const NoiseModel & noise);

template <typename Scalar = double>
struct Observer
{
  Vec2<Scalar> estimate;
  Scalar L{0.05};
};

/// Starts the estimate at the first measurement.
template <typename Scalar>
Observer<Scalar> observer_init(const Vec2<Scalar> & y0, Scalar L)
{
  return {y0, L};
}

/// Prediction corrected by L times the position innovation; speed copied from y.
template <typename Scalar>
Observer<Scalar> observer_update(const SystemMatrices<Scalar> & sys, const Observer<Scalar> & obs, Scalar u,
  const Vec2<Scalar> & y_next)
{
  const Vec2<Scalar> pred = step_true(sys, obs.estimate, u);
  const Vec2<Scalar> innov = y_next - pred;
  Observer<Scalar> out = obs;
  out.estimate = pred + Vec2<Scalar>(obs.L * innov.x(), innov.y());
  return out;
}

/// Estimation error s - s_hat after one step.
inline double error_step(double ds, double w_next, double L) { return (1.0 - L) * ds - L * w_next; }

/// Correction the observer adds on top of the nominal prediction.
inline double lumped_noise(double ds, double w_next, double L) { return L * (ds + w_next); }

/**
 * Samples of the N-step sum of lumped noise in the stationary regime of the
 * estimation-error recursion. Each sample starts from a uniform error, runs a
 * burn-in, then sums N consecutive corrections.
 */
std::vector<double> sample_terminal_noise(Rng & rng, int M, int N, double L, const NoiseModel & noise,
  int burn_in = 1000);

}  // namespace ecodrive
