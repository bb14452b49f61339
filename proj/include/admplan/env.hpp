#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace admplan {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Integrator { kSemiImplicitEuler, kExplicitEuler };

/// A slalom gate: the trajectory must cross the plane x = position with the
/// second state coordinate inside [lo, hi].
struct Gate {
  double position;
  double lo;
  double hi;
};

/// Static description of a discrete-time environment.
///
/// States are laid out positions-first. `actuated` marks the velocity-like
/// coordinates that the action reaches within a single step; the remaining
/// coordinates are kinematic and are rebuilt from the new velocities by
/// Env::reconstruct. Action and initial-state sets are axis-aligned boxes.
struct EnvSpec {
  std::string name;
  int n_states = 0;
  int n_actions = 0;
  double dt = 0.0;
  int default_horizon = 0;
  Integrator integrator = Integrator::kSemiImplicitEuler;
  bool control_affine = false;  ///< successor is affine in the action

  Vec action_lo, action_hi;       ///< action box
  Vec init_lo, init_hi;           ///< initial-state sampling box
  Vec state_lo, state_hi;         ///< constraint box; leaving it counts as a violation
  std::vector<bool> actuated;     ///< velocity coordinates reached by the action in one step
  std::vector<Gate> gates;        ///< slalom gates, empty for most environments

  int actuated_count() const;
  void validate() const;
};

struct Trajectory {
  Mat states;                    ///< (H+1) x n_states
  std::optional<Mat> actions;    ///< H x n_actions when known
  bool admissible = false;       ///< true only for rollouts: actions re-simulate bit-exactly

  Eigen::Index horizon() const { return states.rows() - 1; }
};

/// A discrete-time dynamical system s_{t+1} = f(s_t, a_t) with a box action
/// set. step() clamps out-of-box actions (reporting the clamp through the
/// optional flag) and validates inputs, so every successor it returns is
/// genuinely reachable.
class Env {
 public:
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }

  Vec clamp_action(const Vec& a, bool* clamped = nullptr) const;

  Vec step(const Vec& s, const Vec& a, bool* clamped = nullptr) const;

  /// Rolls the action sequence (one row per step) out of s0. The returned
  /// trajectory stores the clamped actions actually executed and is flagged
  /// admissible. Step failures are reported with the offending time index.
  Trajectory rollout(const Vec& s0, const Mat& actions) const;

  /// Extracts the actuated (velocity) coordinates of a state.
  Vec velocity_components(const Vec& s) const;

  /// Rebuilds the full successor state from the current state and the new
  /// velocity coordinates, using the environment's own kinematic update. For
  /// semi-implicit integrators positions advance with the new velocities; for
  /// explicit Euler they advance with the current ones, so the result is
  /// independent of `v_next` there.
  virtual Vec reconstruct(const Vec& s, const Vec& v_next) const = 0;

  /// True while the state stays inside the constraint box.
  bool within_constraints(const Vec& s) const;

  /// Scalar task score. Higher is better; the meaning is environment-specific
  /// (goal proximity, forward displacement, or gates passed).
  virtual double reward_proxy(const Trajectory& traj) const = 0;

 protected:
  explicit Env(EnvSpec spec);

  /// Dynamics with a pre-clamped action.
  virtual Vec step_dynamics(const Vec& s, const Vec& a) const = 0;

  EnvSpec spec_;
};

/// Instantiates a built-in environment. Valid names:
/// double-integrator-1d, double-integrator-1d-explicit, double-integrator-2d,
/// unicycle, quadrotor-lite. Unknown names raise with the valid set listed.
std::shared_ptr<const Env> make_env(const std::string& name);

std::vector<std::string> env_names();

/// Count of gates crossed inside their window; 0 for gate-free environments.
int gates_passed(const EnvSpec& spec, const Mat& states);

/// Number of leading states inside the constraint box (0..rows). The first
/// violation ends the count.
int survival_steps(const Env& env, const Mat& states);

}  // namespace admplan
