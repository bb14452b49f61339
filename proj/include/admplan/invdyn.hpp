#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "admplan/env.hpp"

namespace admplan {

/// Inverse-dynamics solver configuration. The combined method runs the
/// polytopic search first and hands its result to the black-box refinement
/// when the tolerance was not reached.
struct IDConfig {
  enum class Method { kPolytopic, kBlackbox, kCombined, kAnalyticLinear };

  Method method = Method::kCombined;
  double tolerance = 1e-9;
  int max_iterations_polytopic = 50;
  int max_iterations_blackbox = 500;
  double shrink = 0.5;          ///< vertex shrink factor for the polytopic search
  double linesearch_hi = 4.0;   ///< upper bound of the black-box step-length search
  std::uint64_t seed = 0;

  /// Method/tolerance defaults for an environment: 1e-9 when the successor is
  /// affine in the action, 1e-7 otherwise.
  static IDConfig defaults_for(const EnvSpec& spec);
};

struct IDResult {
  Vec action;
  double residual = 0.0;  ///< ||target - f(s, action)||, recomputed at exit
  int iterations = 0;
  bool converged = false;
};

/// Recovers the action that reproduces `target` from `s` as closely as the
/// chosen method allows. `init` seeds the search; solvers return immediately
/// when the seed already meets the tolerance.
IDResult inverse_dynamics(const Env& env, const Vec& s, const Vec& target, const IDConfig& cfg,
                          const std::optional<Vec>& init = std::nullopt);

/// Verification record for one trajectory: per-step single-action errors, the
/// cumulative error of the re-based chain, and solver diagnostics.
struct AdmissibilityReport {
  Vec sae;                        ///< per transition: distance of the predicted next
                                  ///  state from the best reachable reconstruction
  double cae = 0.0;               ///< norm of the stacked chain deviation
  double sae_mean = 0.0;
  double sae_max = 0.0;
  Mat recovered_actions;          ///< H x n_actions
  std::vector<int> iterations;
  std::vector<bool> tolerance_hit;
};

/// Runs inverse dynamics along a trajectory, autoregressively re-basing each
/// step on the reconstructed chain. With `use_stored_actions` (the default)
/// stored actions seed each solve, so action-backed trajectories verify at
/// zero cost; pass false to measure blind recovery quality.
AdmissibilityReport id_trajectory(const Env& env, const Trajectory& traj, const IDConfig& cfg,
                                  bool use_stored_actions = true);

std::string report_to_json(const AdmissibilityReport& report);

}  // namespace admplan
