#include "ecodrive/plant.hpp"

#include "ecodrive/error.hpp"

namespace ecodrive {

Measurement measure(const VehicleState & x, double w, const NoiseModel & noise)
{
  if (w < noise.bound.lo - 1e-12 || w > noise.bound.hi + 1e-12) { throw Error("noise outside support"); }
  return {x.x() + w, x.y()};
}

std::vector<double> sample_terminal_noise(Rng & rng, int M, int N, double L, const NoiseModel & noise, int burn_in)
{
  if (M < 1) { throw Error("need at least one noise sample"); }
  if (N < 1) { throw Error("horizon must be positive"); }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    double ds = noise.sample(rng);
    for (int k = 0; k < burn_in; ++k) { ds = error_step(ds, noise.sample(rng), L); }
    double sum = 0.0;
    for (int i = 0; i < N; ++i) {
      const double w = noise.sample(rng);
      sum += lumped_noise(ds, w, L);
      ds = error_step(ds, w, L);
    }
    out.push_back(sum);
  }
  return out;
}

}  // namespace ecodrive
