#pragma once

#include <optional>
#include <string>
#include <vector>

#include "admplan/correction.hpp"
#include "admplan/dataset.hpp"
#include "admplan/denoiser.hpp"
#include "admplan/env.hpp"
#include "admplan/project.hpp"
#include "admplan/rng.hpp"
#include "admplan/schedule.hpp"

namespace admplan {

/// What the generative model emits per time step.
///
/// kStates       state rows only; admissibility comes from projections
/// kStateActions joint state+action rows (the action row at the final step is
///               padding and excluded from the loss)
/// kActions      action rows conditioned on the initial state; the final
///               rollout closes the loop and is admissible by construction
enum class Modality { kStates, kStateActions, kActions };

Modality modality_from_name(const std::string& name);
std::string modality_name(Modality m);

/// Channels per tensor row and rows per trajectory for a modality.
Eigen::Index modality_channels(Modality m, int n_states, int n_actions);
Eigen::Index modality_rows(Modality m, int horizon);

/// Encodes a trajectory as a normalized tensor (one row per time step).
Mat tensor_from_trajectory(const Trajectory& traj, Modality m, const NormStats& stats,
                           int n_states, int n_actions);

/// Decodes a normalized tensor into a physical-space prediction. For
/// kActions the states matrix is left empty (the caller rolls the actions
/// out); for the other modalities `admissible` is always false here.
Trajectory trajectory_from_tensor(const Mat& x, Modality m, const NormStats& stats,
                                  int n_states, int n_actions);

/// One first-order deterministic denoising step: keeps the sigma_next/sigma
/// fraction of the iterate and moves the rest onto the denoiser output.
/// Requires sigma > sigma_next >= 0; sigma_next = 0 returns `denoised`
/// exactly. Equal noise levels are a degenerate no-op and are rejected.
Mat denoise_step(const Mat& x, const Mat& denoised, double sigma, double sigma_next);

struct TrainConfig {
  Modality modality = Modality::kStates;
  Projector projector;  ///< training-time projection; policy required for kStateAction
  Curriculum curriculum = Curriculum::mid();
  NoiseSchedule schedule;
  TrainNoise noise;
  int steps = 2000;
  int batch = 16;
  double lr = 1e-3;
  int width = 96;
  int kernel = 5;
  int sigma_features = 8;
  int eval_batch = 64;
  std::uint64_t seed = 0;
  std::string loss_trace_path;  ///< CSV (step, loss, sigma_mean, projection_fraction); empty skips

  void validate() const;
};

/// Self-contained trained model: environment identity, schedule, curriculum,
/// projector settings, normalization stats, network parameters, and, for
/// kStateAction, the correction policy it was trained with. Round-trips
/// losslessly through save/load.
struct Checkpoint {
  std::string env_name;
  int n_states = 0;
  int n_actions = 0;
  double dt = 0.0;
  int horizon = 0;
  Integrator integrator = Integrator::kSemiImplicitEuler;

  Modality modality = Modality::kStates;
  NoiseSchedule schedule;
  Curriculum curriculum;
  Projector::Kind projector_kind = Projector::Kind::kState;
  double ref_weight = 1.0;
  double action_shrink = 0.1;
  bool reduce = true;
  NormStats stats;
  DenoiserConfig net;
  Vec params;
  std::optional<CorrectionPolicy> correction;

  std::uint64_t seed = 0;
  int train_steps = 0;         ///< optimizer steps actually performed
  double loss_initial = 0.0;   ///< denoising loss on the fixed eval batch, before training
  double loss_final = 0.0;     ///< same eval batch after training
  bool aborted = false;  ///< training hit a non-finite loss; params are the last good step
  std::string config_echo;

  /// Rebuilds the training-time projector, wiring the embedded correction
  /// policy back in for kStateAction. The pointer stays valid while this
  /// checkpoint is alive.
  Projector projector() const;

  void check_env(const Env& env) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Denoiser training with curriculum-gated admissibility projections.
/// Per step and batch item: draw a trajectory, a log-normal noise level and
/// Gaussian noise, denoise, project the prediction transition-wise where the
/// curriculum gate fires (in physical space; straight-through gradients, so
/// simulator calls stay outside the differentiated path), and take an Adam
/// step on the masked mean-square error. A non-finite loss aborts with the
/// parameters of the last finite step. Deterministic given cfg.seed.
Checkpoint train(const Env& env, const Dataset& data, const TrainConfig& cfg);

struct SampleConfig {
  int n_samples = 1;
  std::uint64_t seed = 0;
  std::optional<Curriculum> curriculum;  ///< override the checkpoint curriculum
  std::optional<Projector> projector;    ///< override the checkpoint projector

  void validate() const;
};

struct Sample {
  Trajectory traj;  ///< physical space; admissible when action-backed and fully projected
  bool fully_projected = false;  ///< final iteration projected every transition
  double hull_residual_mean = 0.0;  ///< mean prediction-to-hull distance, final pass
};

/// Draws trajectories from a trained model. The iterate starts at
/// N(0, sigma_0^2 I), the first state row is pinned to the normalized s0
/// after every denoising step, and after the step from sigma_i the curriculum
/// gate at sigma_i decides per transition whether to project (in physical
/// space; reference projections use the pre-projection sample of the same
/// iteration). When the final iteration projected every transition the
/// physical projection output is returned verbatim, so action-backed
/// trajectories re-simulate bit-exactly; otherwise the denormalized tensor
/// is returned. kActions models skip projection entirely and roll their
/// action sequence out of s0 at the end.
std::vector<Sample> sample(const Env& env, const Checkpoint& ckpt, const Vec& s0,
                           const SampleConfig& cfg);

/// Index of the best trajectory under a named metric. Metrics:
/// "survival-steps" (length of the prefix inside the state constraint box)
/// and "reward-proxy" (EnvSpec-declared task score). Ties break to the
/// lowest index. Unknown names and empty batches are rejected.
std::size_t select_best(const Env& env, const std::vector<Trajectory>& batch,
                        const std::string& metric);

}  // namespace admplan
