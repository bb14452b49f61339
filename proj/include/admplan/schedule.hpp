#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "admplan/rng.hpp"

namespace admplan {

/// Power-interpolated noise ladder for sampling. sigmas() returns N+1 values:
/// the N inference noise levels from sigma_max down to sigma_last, plus a
/// final exact zero. Endpoints are assigned exactly; interior levels follow
///   sigma_i = (s0^(1/rho) + i/(N-1) * (sN^(1/rho) - s0^(1/rho)))^rho.
struct NoiseSchedule {
  int steps = 5;
  double sigma_max = 80.0;
  double sigma_last = 0.002;
  double rho = 7.0;

  std::vector<double> sigmas() const;
  void validate() const;
};

/// Log-normal noise level for training: ln sigma ~ N(mean, stddev^2).
struct TrainNoise {
  double log_mean = -1.2;
  double log_std = 1.2;

  double sample(Rng& rng) const { return std::exp(rng.normal(log_mean, log_std)); }
};

/// Projection curriculum. skip_probability gives the chance a transition is
/// left unprojected at noise level sigma: 1 above sigma_max, 0 below
/// sigma_min, linear in between. The named modes reproduce the standard
/// settings: pre projects at every inference level, mid ramps projections in
/// as the noise anneals, post projects only at the final level, off never
/// projects (encoded as sigma_min = sigma_max = infinity).
struct Curriculum {
  enum class Mode { kPre, kMid, kPost, kOff };

  double sigma_min = 0.0021;
  double sigma_max = 0.2;

  static Curriculum pre() { return {80.0, 80.0}; }
  static Curriculum mid() { return {0.0021, 0.2}; }
  static Curriculum post() { return {0.0021, 0.0021}; }
  static Curriculum off();
  static Curriculum from_mode(Mode mode);
  static Curriculum from_name(const std::string& name);

  double skip_probability(double sigma) const;
  bool is_off() const;
  void validate() const;

  /// Draws one projection decision at noise level sigma.
  bool draw_projection(double sigma, Rng& rng) const {
    return !(rng.uniform() < skip_probability(sigma));
  }
};

}  // namespace admplan
