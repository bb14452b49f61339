#pragma once

#include <cstdint>
#include <string>

#include "admplan/dataset.hpp"
#include "admplan/env.hpp"

namespace admplan {

/// Small feedforward policy mapping a next-state residual to an action
/// correction. Trained on planted perturbations: for a dataset transition
/// (s, a, s') and noise da, the policy learns to read da back from
/// f(s, a + da) - s'. At projection time it turns the gap between a predicted
/// next state and the executed one into an action adjustment.
struct CorrectionPolicy {
  int n_states = 0;
  int n_actions = 0;
  int hidden = 64;
  Vec params;

  std::string env_name;
  Vec delta_sigma;          ///< per-channel stddev of the planted action noise
  std::uint64_t train_steps = 0;
  std::uint64_t seed = 0;
  double loss_initial = 0.0;  ///< evaluation-batch loss before training
  double loss_final = 0.0;    ///< evaluation-batch loss after training

  /// Action correction for a next-state residual.
  Vec infer(const Vec& state_residual) const;

  static Eigen::Index param_count(int n_states, int n_actions, int hidden);
};

struct CorrectionTrainConfig {
  int steps = 2000;
  int batch = 64;
  double lr = 1e-3;
  /// Planted-noise stddev as a fraction of each action channel's half-width.
  double sigma_fraction = 0.1;
  int hidden = 64;
  std::uint64_t seed = 0;
};

/// Trains a correction policy on the dataset's transitions. Deterministic for
/// a fixed seed. Requires action-bearing trajectories.
CorrectionPolicy train_correction_policy(const Env& env, const Dataset& data,
                                         const CorrectionTrainConfig& cfg);

void save_policy(const CorrectionPolicy& policy, const std::string& path);
CorrectionPolicy load_policy(const std::string& path);

namespace io {
class Writer;
class Reader;
}  // namespace io

/// Raw field (de)serialization, shared by the standalone policy file and the
/// policy block embedded in diffusion checkpoints.
void policy_write_fields(io::Writer& w, const CorrectionPolicy& policy);
CorrectionPolicy policy_read_fields(io::Reader& r);

}  // namespace admplan
