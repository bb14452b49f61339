#include "admplan/env.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace admplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + " contains non-finite values");
}

Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

int EnvSpec::actuated_count() const {
  int n = 0;
  for (bool b : actuated) n += b ? 1 : 0;
  return n;
}

void EnvSpec::validate() const {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("env dims must be positive");
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  if (default_horizon < 1) throw std::invalid_argument("default horizon must be positive");
  auto box_ok = [](const Vec& lo, const Vec& hi, int n) {
    return lo.size() == n && hi.size() == n && (lo.array() <= hi.array()).all();
  };
  if (!box_ok(action_lo, action_hi, n_actions)) throw std::invalid_argument("bad action box");
  if (!box_ok(init_lo, init_hi, n_states)) throw std::invalid_argument("bad init box");
  if (!box_ok(state_lo, state_hi, n_states)) throw std::invalid_argument("bad state box");
  if (static_cast<int>(actuated.size()) != n_states)
    throw std::invalid_argument("actuated mask size mismatch");
  if (actuated_count() < 1) throw std::invalid_argument("at least one actuated coordinate required");
}

Env::Env(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Vec Env::clamp_action(const Vec& a, bool* clamped) const {
  Vec out = a.cwiseMax(spec_.action_lo).cwiseMin(spec_.action_hi);
  if (clamped) *clamped = (out.array() != a.array()).any();
  return out;
}

Vec Env::step(const Vec& s, const Vec& a, bool* clamped) const {
  if (s.size() != spec_.n_states) throw std::invalid_argument("state dimension mismatch");
  if (a.size() != spec_.n_actions) throw std::invalid_argument("action dimension mismatch");
  require_finite(s, "state");
  require_finite(a, "action");
  return step_dynamics(s, clamp_action(a, clamped));
}

Trajectory Env::rollout(const Vec& s0, const Mat& actions) const {
  if (actions.cols() != spec_.n_actions) throw std::invalid_argument("action dimension mismatch");
  const Eigen::Index h = actions.rows();
  Trajectory traj;
  traj.states.resize(h + 1, spec_.n_states);
  Mat executed(h, spec_.n_actions);
  traj.states.row(0) = s0;
  Vec s = s0;
  for (Eigen::Index t = 0; t < h; ++t) {
    Vec a = actions.row(t);
    try {
      a = clamp_action(a);
      s = step(s, a);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "rollout failed at step " << t << ": " << e.what();
      throw std::invalid_argument(msg.str());
    }
    executed.row(t) = a;
    traj.states.row(t + 1) = s;
  }
  traj.actions = executed;
  traj.admissible = true;
  return traj;
}

Vec Env::velocity_components(const Vec& s) const {
  Vec v(spec_.actuated_count());
  Eigen::Index k = 0;
  for (int i = 0; i < spec_.n_states; ++i)
    if (spec_.actuated[static_cast<std::size_t>(i)]) v[k++] = s[i];
  return v;
}

bool Env::within_constraints(const Vec& s) const {
  return (s.array() >= spec_.state_lo.array()).all() &&
         (s.array() <= spec_.state_hi.array()).all();
}

int gates_passed(const EnvSpec& spec, const Mat& states) {
  int passed = 0;
  for (const Gate& g : spec.gates) {
    bool hit = false;
    for (Eigen::Index t = 0; t + 1 < states.rows() && !hit; ++t) {
      const double x0 = states(t, 0), x1 = states(t + 1, 0);
      const bool crosses = (x0 <= g.position && g.position <= x1) ||
                           (x1 <= g.position && g.position <= x0);
      if (!crosses) continue;
      double y;
      if (x1 == x0) {
        y = states(t, 1);
      } else {
        const double u = (g.position - x0) / (x1 - x0);
        y = states(t, 1) + u * (states(t + 1, 1) - states(t, 1));
      }
      hit = y >= g.lo && y <= g.hi;
    }
    if (hit) ++passed;
  }
  return passed;
}

int survival_steps(const Env& env, const Mat& states) {
  int alive = 0;
  for (Eigen::Index t = 0; t < states.rows(); ++t) {
    if (!env.within_constraints(states.row(t).transpose())) break;
    ++alive;
  }
  return alive;
}

namespace {

/// Point mass with direct acceleration control, in one or two spatial
/// dimensions. Linear dynamics, so the successor is affine in the action and
/// convex-hull projections are exact.
class DoubleIntegrator final : public Env {
 public:
  DoubleIntegrator(int dims, Integrator integ) : Env(build(dims, integ)), dims_(dims) {}

  Vec reconstruct(const Vec& s, const Vec& v_next) const override {
    Vec out(spec_.n_states);
    for (int i = 0; i < dims_; ++i) {
      const double v_for_pos =
          spec_.integrator == Integrator::kSemiImplicitEuler ? v_next[i] : s[dims_ + i];
      out[i] = s[i] + spec_.dt * v_for_pos;
      out[dims_ + i] = v_next[i];
    }
    return out;
  }

  double reward_proxy(const Trajectory& traj) const override {
    return -traj.states.row(traj.states.rows() - 1).norm();
  }

 protected:
  Vec step_dynamics(const Vec& s, const Vec& a) const override {
    Vec v_next(dims_);
    for (int i = 0; i < dims_; ++i) v_next[i] = s[dims_ + i] + spec_.dt * a[i];
    return reconstruct(s, v_next);
  }

 private:
  static EnvSpec build(int dims, Integrator integ) {
    EnvSpec e;
    e.name = dims == 1 ? (integ == Integrator::kSemiImplicitEuler ? "double-integrator-1d"
                                                                  : "double-integrator-1d-explicit")
                       : "double-integrator-2d";
    e.n_states = 2 * dims;
    e.n_actions = dims;
    e.dt = 0.1;
    e.default_horizon = 16;
    e.integrator = integ;
    e.control_affine = true;
    e.action_lo = Vec::Constant(dims, -1.0);
    e.action_hi = Vec::Constant(dims, 1.0);
    e.init_lo = Vec::Constant(2 * dims, -1.0);
    e.init_hi = Vec::Constant(2 * dims, 1.0);
    e.state_lo.resize(2 * dims);
    e.state_hi.resize(2 * dims);
    for (int i = 0; i < dims; ++i) {
      e.state_lo[i] = -3.0;
      e.state_hi[i] = 3.0;
      e.state_lo[dims + i] = -2.0;
      e.state_hi[dims + i] = 2.0;
    }
    e.actuated.assign(static_cast<std::size_t>(2 * dims), false);
    for (int i = 0; i < dims; ++i) e.actuated[static_cast<std::size_t>(dims + i)] = true;
    return e;
  }

  int dims_;
};

/// Planar unicycle: state (x, y, heading, speed, turn rate), actions
/// (longitudinal acceleration, angular acceleration). The heading enters the
/// position update through cos/sin, so the successor is not affine in the
/// action and hull projections are under-approximations.
class Unicycle final : public Env {
 public:
  Unicycle() : Env(build()) {}

  Vec reconstruct(const Vec& s, const Vec& v_next) const override {
    const double v = v_next[0], w = v_next[1];
    const double th = s[2] + spec_.dt * w;
    Vec out(5);
    out[0] = s[0] + spec_.dt * v * std::cos(th);
    out[1] = s[1] + spec_.dt * v * std::sin(th);
    out[2] = th;
    out[3] = v;
    out[4] = w;
    return out;
  }

  double reward_proxy(const Trajectory& traj) const override {
    return traj.states(traj.states.rows() - 1, 0) - traj.states(0, 0);
  }

 protected:
  Vec step_dynamics(const Vec& s, const Vec& a) const override {
    return reconstruct(s, make_vec({s[3] + spec_.dt * a[0], s[4] + spec_.dt * a[1]}));
  }

 private:
  static EnvSpec build() {
    EnvSpec e;
    e.name = "unicycle";
    e.n_states = 5;
    e.n_actions = 2;
    e.dt = 0.1;
    e.default_horizon = 24;
    e.integrator = Integrator::kSemiImplicitEuler;
    e.action_lo = make_vec({-1.0, -2.0});
    e.action_hi = make_vec({1.0, 2.0});
    e.init_lo = make_vec({-0.3, -0.3, -0.6, 0.3, -0.3});
    e.init_hi = make_vec({0.3, 0.3, 0.6, 1.0, 0.3});
    e.state_lo = make_vec({-6.0, -6.0, -kInf, -2.5, -4.0});
    e.state_hi = make_vec({6.0, 6.0, kInf, 2.5, 4.0});
    e.actuated = {false, false, false, true, true};
    return e;
  }
};

/// Planar quadrotor: state (x, y, tilt, vx, vy, tilt rate), actions (thrust,
/// torque). Torque integrates into the tilt within the step and the thrust
/// acts along the new tilt, so two actions steer six states and the action
/// enters the velocity update nonlinearly.
class QuadrotorLite final : public Env {
 public:
  QuadrotorLite() : Env(build()) {}

  static constexpr double kMass = 1.0;
  static constexpr double kInertia = 0.05;
  static constexpr double kGravity = 9.81;

  Vec reconstruct(const Vec& s, const Vec& v_next) const override {
    Vec out(6);
    out[0] = s[0] + spec_.dt * v_next[0];
    out[1] = s[1] + spec_.dt * v_next[1];
    out[2] = s[2] + spec_.dt * v_next[2];
    out[3] = v_next[0];
    out[4] = v_next[1];
    out[5] = v_next[2];
    return out;
  }

  double reward_proxy(const Trajectory& traj) const override {
    return static_cast<double>(gates_passed(spec_, traj.states));
  }

 protected:
  Vec step_dynamics(const Vec& s, const Vec& a) const override {
    const double w_next = s[5] + spec_.dt * (a[1] / kInertia);
    const double tilt_next = s[2] + spec_.dt * w_next;
    const double acc = a[0] / kMass;
    return reconstruct(s, make_vec({s[3] - spec_.dt * acc * std::sin(tilt_next),
                                    s[4] + spec_.dt * (acc * std::cos(tilt_next) - kGravity),
                                    w_next}));
  }

 private:
  static EnvSpec build() {
    EnvSpec e;
    e.name = "quadrotor-lite";
    e.n_states = 6;
    e.n_actions = 2;
    e.dt = 0.05;
    e.default_horizon = 48;
    e.integrator = Integrator::kSemiImplicitEuler;
    e.action_lo = make_vec({0.0, -1.5});
    e.action_hi = make_vec({2.0 * kMass * kGravity, 1.5});
    e.init_lo = make_vec({-0.05, 0.95, -0.03, 0.0, -0.05, -0.05});
    e.init_hi = make_vec({0.05, 1.05, 0.03, 0.2, 0.05, 0.05});
    e.state_lo = make_vec({-1.0, 0.05, -1.2, -4.0, -4.0, -10.0});
    e.state_hi = make_vec({4.0, 3.0, 1.2, 4.0, 4.0, 10.0});
    e.actuated = {false, false, false, true, true, true};
    e.gates = {{0.7, 1.1, 1.5}, {1.4, 0.5, 0.9}, {2.1, 1.1, 1.5}};
    return e;
  }
};

}  // namespace

std::vector<std::string> env_names() {
  return {"double-integrator-1d", "double-integrator-1d-explicit", "double-integrator-2d",
          "unicycle", "quadrotor-lite"};
}

std::shared_ptr<const Env> make_env(const std::string& name) {
  if (name == "double-integrator-1d")
    return std::make_shared<DoubleIntegrator>(1, Integrator::kSemiImplicitEuler);
  if (name == "double-integrator-1d-explicit")
    return std::make_shared<DoubleIntegrator>(1, Integrator::kExplicitEuler);
  if (name == "double-integrator-2d")
    return std::make_shared<DoubleIntegrator>(2, Integrator::kSemiImplicitEuler);
  if (name == "unicycle") return std::make_shared<Unicycle>();
  if (name == "quadrotor-lite") return std::make_shared<QuadrotorLite>();
  std::string valid;
  for (const auto& n : env_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown environment '" + name + "' (valid: " + valid + ")");
}

}  // namespace admplan
