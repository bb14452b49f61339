#include "admplan/invdyn.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "admplan/hull.hpp"
#include "admplan/reach.hpp"
#include "admplan/rng.hpp"

namespace admplan {

namespace {

double residual_at(const Env& env, const Vec& s, const Vec& target, const Vec& a) {
  return (target - env.step(s, a)).norm();
}

IDResult finish(const Env& env, const Vec& s, const Vec& target, Vec a, int iterations,
                double tolerance) {
  IDResult r;
  r.action = std::move(a);
  r.residual = residual_at(env, s, target, r.action);
  r.iterations = iterations;
  r.converged = r.residual <= tolerance;
  return r;
}

/// Shrunk-vertex search: re-centers a scaled copy of the action polytope on
/// the current guess, projects the target onto the hull of its successors,
/// and reads the next guess off the hull weights.
IDResult solve_polytopic(const Env& env, const Vec& s, const Vec& target, const IDConfig& cfg,
                         Vec a) {
  const Mat vertices = action_box_vertices(env.spec());
  Vec best_a = a;
  double best_r = residual_at(env, s, target, a);
  int it = 0;
  while (it < cfg.max_iterations_polytopic && best_r > cfg.tolerance) {
    const Mat shrunk = shrink_action_vertices(env.spec(), vertices, a, cfg.shrink);
    Mat successors(shrunk.rows(), env.spec().n_states);
    for (Eigen::Index i = 0; i < shrunk.rows(); ++i)
      successors.row(i) = env.step(s, shrunk.row(i));
    const HullProjection sol = project_to_hull(target, successors);
    a = shrunk.transpose() * sol.lambda;
    const double r = residual_at(env, s, target, a);
    if (r < best_r) {
      best_r = r;
      best_a = a;
    }
    ++it;
  }
  return finish(env, s, target, best_a, it, cfg.tolerance);
}

/// Per-action-channel sensitivity of the successor, measured across vertex
/// successor pairs that differ in exactly one channel. Scales the random
/// perturbations of the black-box search.
Vec channel_sensitivity(const Env& env, const Vec& s) {
  const EnvSpec& spec = env.spec();
  const int n = spec.n_actions;
  Vec sens = Vec::Ones(n);
  if (n <= 6) {
    const Mat vertices = action_box_vertices(spec);
    Mat successors(vertices.rows(), spec.n_states);
    for (Eigen::Index i = 0; i < vertices.rows(); ++i)
      successors.row(i) = env.step(s, vertices.row(i));
    for (int j = 0; j < n; ++j) {
      const double width = spec.action_hi[j] - spec.action_lo[j];
      if (width <= 0.0) continue;
      double acc = 0.0;
      int count = 0;
      for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
        const Eigen::Index partner = i ^ (Eigen::Index(1) << j);
        if (partner < i) continue;
        acc += (successors.row(i) - successors.row(partner)).norm() / width;
        ++count;
      }
      sens[j] = count > 0 ? acc / count : 1.0;
    }
    return sens;
  }
  const Vec center = 0.5 * (spec.action_lo + spec.action_hi);
  for (int j = 0; j < n; ++j) {
    const double h = 0.25 * (spec.action_hi[j] - spec.action_lo[j]);
    if (h <= 0.0) continue;
    Vec lo = center, hi = center;
    lo[j] -= h;
    hi[j] += h;
    sens[j] = (env.step(s, hi) - env.step(s, lo)).norm() / (2.0 * h);
  }
  return sens;
}

/// Golden-section minimization of the residual along a perturbation ray,
/// tracking the best sampled point so the result never regresses.
double linesearch(const Env& env, const Vec& s, const Vec& target, const Vec& a, const Vec& da,
                  double hi) {
  const auto phi = [&](double alpha) {
    return residual_at(env, s, target, env.clamp_action(a + alpha * da));
  };
  constexpr double kInvPhi = 0.6180339887498949;
  double lo = 0.0, up = hi;
  double x1 = up - kInvPhi * (up - lo);
  double x2 = lo + kInvPhi * (up - lo);
  double f1 = phi(x1), f2 = phi(x2);
  double best_a = 1.0, best_f = phi(1.0);
  for (int i = 0; i < 48; ++i) {
    if (f1 < f2) {
      up = x2;
      x2 = x1;
      f2 = f1;
      x1 = up - kInvPhi * (up - lo);
      f1 = phi(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (up - lo);
      f2 = phi(x2);
    }
    const double cand_a = f1 < f2 ? x1 : x2;
    const double cand_f = std::min(f1, f2);
    if (cand_f < best_f) {
      best_f = cand_f;
      best_a = cand_a;
    }
  }
  return best_a;
}

IDResult solve_blackbox(const Env& env, const Vec& s, const Vec& target, const IDConfig& cfg,
                        Vec a) {
  const EnvSpec& spec = env.spec();
  const Vec sens = channel_sensitivity(env, s).cwiseMax(1e-12);
  const Vec half_width = 0.5 * (spec.action_hi - spec.action_lo);
  Rng rng(cfg.seed);

  double r = residual_at(env, s, target, a);
  int it = 0;
  while (it < cfg.max_iterations_blackbox && r > cfg.tolerance) {
    Vec sigma = (0.5 * r) * sens.cwiseInverse();
    sigma = sigma.cwiseMin(half_width);
    const Vec da = sigma.cwiseProduct(rng.normal_vector(spec.n_actions));
    const Vec cand = env.clamp_action(a + da);
    if (residual_at(env, s, target, cand) < r) {
      const double alpha = linesearch(env, s, target, a, da, cfg.linesearch_hi);
      const Vec stepped = env.clamp_action(a + alpha * da);
      const double stepped_r = residual_at(env, s, target, stepped);
      if (stepped_r < r) {
        a = stepped;
        r = stepped_r;
      }
    }
    ++it;
  }
  return finish(env, s, target, a, it, cfg.tolerance);
}

/// Closed-form recovery for environments whose successor is affine in the
/// action. The affine map is probed at the box center; exact for the linear
/// environments and used as a verification oracle.
IDResult solve_analytic_linear(const Env& env, const Vec& s, const Vec& target,
                               const IDConfig& cfg) {
  const EnvSpec& spec = env.spec();
  const Vec center = 0.5 * (spec.action_lo + spec.action_hi);
  const Vec f0 = env.step(s, center);
  Mat b(spec.n_states, spec.n_actions);
  for (int j = 0; j < spec.n_actions; ++j) {
    const double h = 0.25 * (spec.action_hi[j] - spec.action_lo[j]);
    Vec lo = center, hi = center;
    lo[j] -= h;
    hi[j] += h;
    b.col(j) = (env.step(s, hi) - env.step(s, lo)) / (2.0 * h);
  }
  const Vec delta = b.completeOrthogonalDecomposition().solve(target - f0);
  const Vec a = env.clamp_action(center + delta);
  return finish(env, s, target, a, 1, cfg.tolerance);
}

}  // namespace

IDConfig IDConfig::defaults_for(const EnvSpec& spec) {
  IDConfig cfg;
  cfg.tolerance = spec.control_affine ? 1e-9 : 1e-7;
  return cfg;
}

IDResult inverse_dynamics(const Env& env, const Vec& s, const Vec& target, const IDConfig& cfg,
                          const std::optional<Vec>& init) {
  if (target.size() != env.spec().n_states)
    throw std::invalid_argument("target state dimension mismatch");
  Vec a0 = init ? env.clamp_action(*init)
                : Vec(action_box_vertices(env.spec()).colwise().mean().transpose());
  if (residual_at(env, s, target, a0) <= cfg.tolerance)
    return finish(env, s, target, a0, 0, cfg.tolerance);

  switch (cfg.method) {
    case IDConfig::Method::kPolytopic:
      return solve_polytopic(env, s, target, cfg, a0);
    case IDConfig::Method::kBlackbox:
      return solve_blackbox(env, s, target, cfg, a0);
    case IDConfig::Method::kAnalyticLinear:
      return solve_analytic_linear(env, s, target, cfg);
    case IDConfig::Method::kCombined: {
      IDResult first = solve_polytopic(env, s, target, cfg, a0);
      if (first.converged) return first;
      IDResult second = solve_blackbox(env, s, target, cfg, first.action);
      second.iterations += first.iterations;
      return second.residual <= first.residual ? second : first;
    }
  }
  throw std::logic_error("unreachable inverse dynamics method");
}

AdmissibilityReport id_trajectory(const Env& env, const Trajectory& traj, const IDConfig& cfg,
                                  bool use_stored_actions) {
  const Eigen::Index h = traj.horizon();
  if (h < 1) throw std::invalid_argument("trajectory needs at least one transition");

  AdmissibilityReport rep;
  rep.sae = Vec::Zero(h);
  rep.recovered_actions.resize(h, env.spec().n_actions);
  rep.iterations.resize(static_cast<std::size_t>(h));
  rep.tolerance_hit.resize(static_cast<std::size_t>(h));

  Rng seeds(cfg.seed);
  Mat chain(h + 1, env.spec().n_states);
  chain.row(0) = traj.states.row(0);
  Vec s = traj.states.row(0);
  for (Eigen::Index t = 0; t < h; ++t) {
    const Vec target = traj.states.row(t + 1);
    std::optional<Vec> init;
    if (use_stored_actions && traj.actions) init = Vec(traj.actions->row(t));
    IDConfig step_cfg = cfg;
    step_cfg.seed = seeds.substream(static_cast<std::uint64_t>(t)).seed();
    const IDResult res = inverse_dynamics(env, s, target, step_cfg, init);
    s = env.step(s, res.action);
    chain.row(t + 1) = s;
    rep.sae[t] = (target - s).norm();
    rep.recovered_actions.row(t) = res.action;
    rep.iterations[static_cast<std::size_t>(t)] = res.iterations;
    rep.tolerance_hit[static_cast<std::size_t>(t)] = res.converged;
  }

  rep.cae = (traj.states.bottomRows(h) - chain.bottomRows(h)).norm();
  rep.sae_mean = rep.sae.mean();
  rep.sae_max = rep.sae.maxCoeff();
  return rep;
}

std::string report_to_json(const AdmissibilityReport& report) {
  nlohmann::ordered_json j;
  j["horizon"] = report.sae.size();
  j["cae"] = report.cae;
  j["sae_mean"] = report.sae_mean;
  j["sae_max"] = report.sae_max;
  j["sae"] = std::vector<double>(report.sae.data(), report.sae.data() + report.sae.size());
  j["iterations"] = report.iterations;
  j["tolerance_hit"] = std::vector<int>(report.tolerance_hit.begin(), report.tolerance_hit.end());
  auto actions = nlohmann::ordered_json::array();
  for (Eigen::Index t = 0; t < report.recovered_actions.rows(); ++t) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < report.recovered_actions.cols(); ++c)
      row.push_back(report.recovered_actions(t, c));
    actions.push_back(std::move(row));
  }
  j["recovered_actions"] = std::move(actions);
  return j.dump(2);
}

}  // namespace admplan
