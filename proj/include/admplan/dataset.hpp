#pragma once

#include <memory>
#include <string>
#include <vector>

#include "admplan/env.hpp"
#include "admplan/rng.hpp"

namespace admplan {

/// Per-channel z-score statistics over the state and action channels of a
/// dataset. Scales are standard deviations floored at 1e-8 so constant
/// channels stay well-defined.
struct NormStats {
  Vec mean;   ///< n_states + n_actions entries, states first
  Vec scale;

  Vec normalize_state(const Vec& s) const;
  Vec denormalize_state(const Vec& s) const;
  Vec normalize_action(int n_states, const Vec& a) const;
  Vec denormalize_action(int n_states, const Vec& a) const;
};

struct Dataset {
  std::string env_name;
  int n_states = 0;
  int n_actions = 0;
  double dt = 0.0;
  int horizon = 0;
  Integrator integrator = Integrator::kSemiImplicitEuler;
  NormStats stats;
  std::string config_echo;  ///< resolved generation config, JSON text
  std::vector<Trajectory> trajectories;
};

NormStats compute_stats(const Dataset& data);

/// Generates `n_traj` admissible trajectories by rolling a named controller
/// out of initial states drawn from the environment's init box.
/// Controllers: lqr-goal (double integrators), pd-waypoints (unicycle),
/// scripted-slalom (quadrotor-lite). Actions are clamped to the action box
/// before storage so every stored trajectory re-simulates exactly.
Dataset generate_dataset(const Env& env, const std::string& controller, int n_traj, int horizon,
                         std::uint64_t seed);

std::vector<std::string> controller_names();

/// Binary container round-trip. save_dataset writes atomically; load_dataset
/// re-simulates every stored trajectory and fails on any admissibility
/// mismatch, so corrupted files are rejected at load time.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Human-inspectable JSON-lines export: one trajectory per line.
void save_jsonl(const Dataset& data, const std::string& path);

/// Single-trajectory container (same validation model as datasets: loading
/// re-simulates admissible-flagged trajectories and rejects mismatches).
void save_trajectory(const Env& env, const Trajectory& traj, const std::string& path);
Trajectory load_trajectory(const Env& env, const std::string& path);

}  // namespace admplan
