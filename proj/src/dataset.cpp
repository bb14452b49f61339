#include "admplan/dataset.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "admplan/io.hpp"

namespace admplan {

namespace {

constexpr std::uint64_t kDatasetMagic = 0x3130415441445041ull;  // "APDATA01"
constexpr std::uint32_t kDatasetVersion = 1;

constexpr std::uint64_t kTrajectoryMagic = 0x31304a4152545041ull;  // "APTRAJ01"
constexpr std::uint32_t kTrajectoryVersion = 1;

using Controller = std::function<Vec(const Vec&, int)>;

/// Discrete-time LQR gain for the per-axis double-integrator pair, via a
/// fixed-point Riccati iteration with Q = I, R = 1.
Eigen::RowVector2d lqr_gain(double dt, Integrator integ) {
  Eigen::Matrix2d a;
  a << 1.0, dt, 0.0, 1.0;
  Eigen::Vector2d b;
  if (integ == Integrator::kSemiImplicitEuler)
    b << dt * dt, dt;
  else
    b << 0.0, dt;
  Eigen::Matrix2d p = Eigen::Matrix2d::Identity();
  for (int it = 0; it < 200; ++it) {
    const double r = 1.0 + b.dot(p * b);
    const Eigen::RowVector2d k = (b.transpose() * p * a) / r;
    p = Eigen::Matrix2d::Identity() + a.transpose() * p * (a - b * k);
  }
  const double r = 1.0 + b.dot(p * b);
  return (b.transpose() * p * a) / r;
}

Controller make_lqr_goal(const Env& env, Rng&) {
  const int dims = env.spec().n_actions;
  const Eigen::RowVector2d k = lqr_gain(env.spec().dt, env.spec().integrator);
  return [dims, k](const Vec& s, int) {
    Vec a(dims);
    for (int i = 0; i < dims; ++i) a[i] = -(k[0] * s[i] + k[1] * s[dims + i]);
    return a;
  };
}

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

Controller make_pd_waypoints(const Env& env, Rng& rng) {
  const EnvSpec& spec = env.spec();
  if (spec.name == "unicycle") {
    // Two waypoints ahead of the start, visited in order.
    std::vector<Eigen::Vector2d> wps;
    double wx = rng.uniform(1.0, 2.0), wy = rng.uniform(-1.0, 1.0);
    wps.push_back({wx, wy});
    wps.push_back({wx + rng.uniform(1.0, 2.0), wy + rng.uniform(-1.0, 1.0)});
    auto idx = std::make_shared<std::size_t>(0);
    return [wps, idx](const Vec& s, int) {
      const Eigen::Vector2d pos(s[0], s[1]);
      if (*idx + 1 < wps.size() && (wps[*idx] - pos).norm() < 0.3) ++*idx;
      const Eigen::Vector2d d = wps[*idx] - pos;
      const double dist = d.norm();
      const double heading_des = std::atan2(d[1], d[0]);
      const double v_des = std::min(1.5, std::max(0.3, dist));
      Vec a(2);
      a[0] = 2.0 * (v_des - s[3]);
      a[1] = 6.0 * wrap_angle(heading_des - s[2]) - 2.5 * s[4];
      return a;
    };
  }
  // Double integrators: PD toward one waypoint, then a second at mid-horizon.
  const int dims = spec.n_actions;
  Vec w1 = rng.uniform_box(Vec::Constant(dims, -1.5), Vec::Constant(dims, 1.5));
  Vec w2 = rng.uniform_box(Vec::Constant(dims, -1.5), Vec::Constant(dims, 1.5));
  const int swap_t = spec.default_horizon / 2;
  return [dims, w1, w2, swap_t](const Vec& s, int t) {
    const Vec& w = t < swap_t ? w1 : w2;
    Vec a(dims);
    for (int i = 0; i < dims; ++i) a[i] = 3.0 * (w[i] - s[i]) - 2.5 * s[dims + i];
    return a;
  };
}

/// Smoothstep interpolation through time-indexed knots; returns value and rate.
struct SmoothPath {
  std::vector<double> t, y;

  std::pair<double, double> eval(double time) const {
    if (time <= t.front()) return {y.front(), 0.0};
    if (time >= t.back()) return {y.back(), 0.0};
    std::size_t i = 1;
    while (t[i] < time) ++i;
    const double span = t[i] - t[i - 1];
    const double u = (time - t[i - 1]) / span;
    const double dy = y[i] - y[i - 1];
    return {y[i - 1] + dy * (3.0 * u * u - 2.0 * u * u * u),
            dy * (6.0 * u - 6.0 * u * u) / span};
  }
};

Controller make_scripted_slalom(const Env& env, Rng& rng, int horizon) {
  const EnvSpec& spec = env.spec();
  if (spec.gates.empty()) throw std::invalid_argument("scripted-slalom needs gates");
  const double dt = spec.dt;
  const double total = horizon * dt;
  const double x_start = 0.0;
  const double x_end = spec.gates.back().position + 0.5;
  const double vx_ref = (x_end - x_start) / total;

  SmoothPath path;
  path.t.push_back(0.0);
  path.y.push_back(1.0);
  for (const Gate& g : spec.gates) {
    const double mid = 0.5 * (g.lo + g.hi);
    const double target = mid + rng.uniform(-0.25, 0.25) * (g.hi - g.lo);
    path.t.push_back((g.position - x_start) / vx_ref);
    path.y.push_back(target);
  }
  path.t.push_back(total + dt);
  path.y.push_back(path.y.back());

  constexpr double kpx = 4.0, kdx = 3.5;
  constexpr double kpy = 14.0, kdy = 7.0;
  constexpr double kpt = 70.0, kdt = 14.0;
  const double m = 1.0, inertia = 0.05, g0 = 9.81;
  return [=](const Vec& s, int t) {
    const double time = t * dt;
    const double x_ref = x_start + vx_ref * time;
    const auto [y_ref, vy_ref] = path.eval(time);
    const double ax = kpx * (x_ref - s[0]) + kdx * (vx_ref - s[3]);
    const double ay = kpy * (y_ref - s[1]) + kdy * (vy_ref - s[4]);
    const double tilt_des = std::atan2(-ax, ay + g0);
    Vec a(2);
    a[0] = m * std::hypot(ax, ay + g0);
    a[1] = inertia * (kpt * wrap_angle(tilt_des - s[2]) - kdt * s[5]);
    return a;
  };
}

Controller make_controller(const std::string& name, const Env& env, Rng& rng, int horizon) {
  const std::string& env_name = env.spec().name;
  const bool is_di = env_name.rfind("double-integrator", 0) == 0;
  if (name == "lqr-goal") {
    if (!is_di) throw std::invalid_argument("lqr-goal supports the double-integrator environments");
    return make_lqr_goal(env, rng);
  }
  if (name == "pd-waypoints") {
    if (!is_di && env_name != "unicycle")
      throw std::invalid_argument("pd-waypoints supports double integrators and unicycle");
    return make_pd_waypoints(env, rng);
  }
  if (name == "scripted-slalom") {
    if (env_name != "quadrotor-lite")
      throw std::invalid_argument("scripted-slalom supports quadrotor-lite");
    return make_scripted_slalom(env, rng, horizon);
  }
  std::string valid;
  for (const auto& n : controller_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown controller '" + name + "' (valid: " + valid + ")");
}

}  // namespace

std::vector<std::string> controller_names() {
  return {"lqr-goal", "pd-waypoints", "scripted-slalom"};
}

Vec NormStats::normalize_state(const Vec& s) const {
  return (s - mean.head(s.size())).cwiseQuotient(scale.head(s.size()));
}

Vec NormStats::denormalize_state(const Vec& s) const {
  return s.cwiseProduct(scale.head(s.size())) + mean.head(s.size());
}

Vec NormStats::normalize_action(int n_states, const Vec& a) const {
  return (a - mean.segment(n_states, a.size())).cwiseQuotient(scale.segment(n_states, a.size()));
}

Vec NormStats::denormalize_action(int n_states, const Vec& a) const {
  return a.cwiseProduct(scale.segment(n_states, a.size())) + mean.segment(n_states, a.size());
}

NormStats compute_stats(const Dataset& data) {
  const int nc = data.n_states + data.n_actions;
  Vec sum = Vec::Zero(nc), sumsq = Vec::Zero(nc);
  double n_state_rows = 0, n_action_rows = 0;
  for (const Trajectory& traj : data.trajectories) {
    for (Eigen::Index r = 0; r < traj.states.rows(); ++r) {
      sum.head(data.n_states) += traj.states.row(r).transpose();
      sumsq.head(data.n_states) += traj.states.row(r).transpose().cwiseAbs2();
    }
    n_state_rows += static_cast<double>(traj.states.rows());
    if (traj.actions) {
      for (Eigen::Index r = 0; r < traj.actions->rows(); ++r) {
        sum.tail(data.n_actions) += traj.actions->row(r).transpose();
        sumsq.tail(data.n_actions) += traj.actions->row(r).transpose().cwiseAbs2();
      }
      n_action_rows += static_cast<double>(traj.actions->rows());
    }
  }
  NormStats st;
  st.mean = Vec::Zero(nc);
  st.scale = Vec::Ones(nc);
  if (n_state_rows > 0) {
    st.mean.head(data.n_states) = sum.head(data.n_states) / n_state_rows;
    Vec var = sumsq.head(data.n_states) / n_state_rows -
              st.mean.head(data.n_states).cwiseAbs2();
    st.scale.head(data.n_states) = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-8);
  }
  if (n_action_rows > 0) {
    st.mean.tail(data.n_actions) = sum.tail(data.n_actions) / n_action_rows;
    Vec var = sumsq.tail(data.n_actions) / n_action_rows -
              st.mean.tail(data.n_actions).cwiseAbs2();
    st.scale.tail(data.n_actions) = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-8);
  }
  return st;
}

Dataset generate_dataset(const Env& env, const std::string& controller, int n_traj, int horizon,
                         std::uint64_t seed) {
  if (n_traj < 0) throw std::invalid_argument("n_traj must be non-negative");
  const EnvSpec& spec = env.spec();
  const int h = horizon > 0 ? horizon : spec.default_horizon;

  Dataset data;
  data.env_name = spec.name;
  data.n_states = spec.n_states;
  data.n_actions = spec.n_actions;
  data.dt = spec.dt;
  data.horizon = h;
  data.integrator = spec.integrator;
  {
    nlohmann::ordered_json echo;
    echo["controller"] = controller;
    echo["n_traj"] = n_traj;
    echo["horizon"] = h;
    echo["seed"] = seed;
    data.config_echo = echo.dump();
  }

  Rng root(seed);
  data.trajectories.reserve(static_cast<std::size_t>(n_traj));
  for (int k = 0; k < n_traj; ++k) {
    Rng stream = root.substream(static_cast<std::uint64_t>(k));
    const Vec s0 = stream.uniform_box(spec.init_lo, spec.init_hi);
    Controller pi = make_controller(controller, env, stream, h);
    Mat actions(h, spec.n_actions);
    Vec s = s0;
    for (int t = 0; t < h; ++t) {
      const Vec a = env.clamp_action(pi(s, t));
      actions.row(t) = a;
      s = env.step(s, a);
    }
    data.trajectories.push_back(env.rollout(s0, actions));
  }
  data.stats = compute_stats(data);
  return data;
}

namespace {

void write_header(io::Writer& w, const Dataset& data) {
  w.u64(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.str(data.env_name);
  w.u32(static_cast<std::uint32_t>(data.n_states));
  w.u32(static_cast<std::uint32_t>(data.n_actions));
  w.f64(data.dt);
  w.u32(static_cast<std::uint32_t>(data.horizon));
  w.u32(data.integrator == Integrator::kSemiImplicitEuler ? 0u : 1u);
  w.u32(static_cast<std::uint32_t>(data.stats.mean.size()));
  w.vec(data.stats.mean);
  w.vec(data.stats.scale);
  w.str(data.config_echo);
}

}  // namespace

void save_dataset(const Dataset& data, const std::string& path) {
  for (const Trajectory& traj : data.trajectories) {
    if (traj.states.rows() != data.horizon + 1 || traj.states.cols() != data.n_states)
      throw std::invalid_argument("trajectory shape does not match dataset header");
    if (traj.actions &&
        (traj.actions->rows() != data.horizon || traj.actions->cols() != data.n_actions))
      throw std::invalid_argument("action shape does not match dataset header");
  }
  io::Writer w;
  write_header(w, data);
  w.u32(static_cast<std::uint32_t>(data.trajectories.size()));
  for (const Trajectory& traj : data.trajectories) {
    std::uint8_t flags = 0;
    if (traj.actions) flags |= 1;
    if (traj.admissible) flags |= 2;
    w.u8(flags);
    w.mat(traj.states);
    if (traj.actions) w.mat(*traj.actions);
  }
  io::atomic_write(path, w.buffer());
}

Dataset load_dataset(const std::string& path) {
  io::Reader r(io::read_file(path));
  if (r.u64() != kDatasetMagic) throw std::runtime_error(path + ": not a dataset file");
  if (r.u32() != kDatasetVersion) throw std::runtime_error(path + ": unsupported dataset version");
  Dataset data;
  data.env_name = r.str();
  data.n_states = static_cast<int>(r.u32());
  data.n_actions = static_cast<int>(r.u32());
  data.dt = r.f64();
  data.horizon = static_cast<int>(r.u32());
  data.integrator = r.u32() == 0 ? Integrator::kSemiImplicitEuler : Integrator::kExplicitEuler;
  const auto nc = static_cast<Eigen::Index>(r.u32());
  data.stats.mean = r.vec(nc);
  data.stats.scale = r.vec(nc);
  data.config_echo = r.str();

  const auto env = make_env(data.env_name);
  const EnvSpec& spec = env->spec();
  if (spec.n_states != data.n_states || spec.n_actions != data.n_actions ||
      spec.dt != data.dt || spec.integrator != data.integrator)
    throw std::runtime_error(path + ": header disagrees with environment " + data.env_name);

  const std::uint32_t n_traj = r.u32();
  data.trajectories.reserve(n_traj);
  for (std::uint32_t k = 0; k < n_traj; ++k) {
    const std::uint8_t flags = r.u8();
    Trajectory traj;
    traj.states = r.mat(data.horizon + 1, data.n_states);
    if (flags & 1) traj.actions = r.mat(data.horizon, data.n_actions);
    traj.admissible = (flags & 2) != 0;
    if (traj.admissible) {
      if (!traj.actions) throw std::runtime_error(path + ": admissible trajectory lacks actions");
      const Trajectory redo = env->rollout(traj.states.row(0), *traj.actions);
      if (!(redo.states.array() == traj.states.array()).all()) {
        std::ostringstream msg;
        msg << path << ": trajectory " << k << " fails its admissibility claim";
        throw std::runtime_error(msg.str());
      }
    }
    data.trajectories.push_back(std::move(traj));
  }
  return data;
}

void save_jsonl(const Dataset& data, const std::string& path) {
  std::string out;
  for (const Trajectory& traj : data.trajectories) {
    nlohmann::ordered_json line;
    line["env"] = data.env_name;
    line["admissible"] = traj.admissible;
    auto states = nlohmann::ordered_json::array();
    for (Eigen::Index t = 0; t < traj.states.rows(); ++t) {
      auto row = nlohmann::ordered_json::array();
      for (Eigen::Index c = 0; c < traj.states.cols(); ++c) row.push_back(traj.states(t, c));
      states.push_back(std::move(row));
    }
    line["states"] = std::move(states);
    if (traj.actions) {
      auto acts = nlohmann::ordered_json::array();
      for (Eigen::Index t = 0; t < traj.actions->rows(); ++t) {
        auto row = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < traj.actions->cols(); ++c)
          row.push_back((*traj.actions)(t, c));
        acts.push_back(std::move(row));
      }
      line["actions"] = std::move(acts);
    }
    out += line.dump();
    out += '\n';
  }
  io::atomic_write(path, out);
}

void save_trajectory(const Env& env, const Trajectory& traj, const std::string& path) {
  const EnvSpec& spec = env.spec();
  if (traj.states.cols() != spec.n_states)
    throw std::invalid_argument("trajectory state width does not match environment");
  if (traj.actions && traj.actions->cols() != spec.n_actions)
    throw std::invalid_argument("trajectory action width does not match environment");
  io::Writer w;
  w.u64(kTrajectoryMagic);
  w.u32(kTrajectoryVersion);
  w.str(spec.name);
  w.u32(static_cast<std::uint32_t>(spec.n_states));
  w.u32(static_cast<std::uint32_t>(spec.n_actions));
  w.f64(spec.dt);
  w.u32(static_cast<std::uint32_t>(traj.states.rows()));
  std::uint8_t flags = 0;
  if (traj.actions) flags |= 1;
  if (traj.admissible) flags |= 2;
  w.u8(flags);
  w.mat(traj.states);
  if (traj.actions) w.mat(*traj.actions);
  io::atomic_write(path, w.buffer());
}

Trajectory load_trajectory(const Env& env, const std::string& path) {
  io::Reader r(io::read_file(path));
  if (r.u64() != kTrajectoryMagic) throw std::runtime_error(path + ": not a trajectory file");
  if (r.u32() != kTrajectoryVersion)
    throw std::runtime_error(path + ": unsupported trajectory version");
  const EnvSpec& spec = env.spec();
  const std::string env_name = r.str();
  const int ns = static_cast<int>(r.u32());
  const int na = static_cast<int>(r.u32());
  const double dt = r.f64();
  if (env_name != spec.name || ns != spec.n_states || na != spec.n_actions || dt != spec.dt)
    throw std::runtime_error(path + ": trajectory belongs to environment " + env_name);
  const auto rows = static_cast<Eigen::Index>(r.u32());
  const std::uint8_t flags = r.u8();
  Trajectory traj;
  traj.states = r.mat(rows, ns);
  if (flags & 1) traj.actions = r.mat(rows - 1, na);
  traj.admissible = (flags & 2) != 0;
  if (!r.exhausted()) throw std::runtime_error(path + ": trailing bytes");
  if (traj.admissible) {
    if (!traj.actions) throw std::runtime_error(path + ": admissible trajectory lacks actions");
    const Trajectory redo = env.rollout(traj.states.row(0), *traj.actions);
    if (!(redo.states.array() == traj.states.array()).all())
      throw std::runtime_error(path + ": trajectory fails its admissibility claim");
  }
  return traj;
}

}  // namespace admplan
