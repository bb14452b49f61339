#include "admplan/project.hpp"

#include <stdexcept>

namespace admplan {

namespace {

ProjectedStep project_onto_reachable(const Env& env, const Vec& s, const Vec& predicted_next,
                                     const Projector& projector,
                                     const std::optional<Vec>& reference_next,
                                     const std::optional<Vec>& predicted_action) {
  ReachPolytope poly =
      predicted_action
          ? reach_polytope_shrunk(env, s, env.clamp_action(*predicted_action),
                                  projector.action_shrink)
          : reach_polytope(env, s);

  HullProjection sol;
  Vec out_state;
  if (projector.reduce && env.spec().actuated_count() < env.spec().n_states) {
    const ReducedReach red = reduce_to_actuated(env, s, poly, predicted_next);
    if (projector.kind == Projector::Kind::kStateRef) {
      sol = project_to_hull_weighted(red.predicted, env.velocity_components(*reference_next),
                                     projector.ref_weight, red.polytope.successors);
    } else {
      sol = project_to_hull(red.predicted, red.polytope.successors);
    }
    out_state = red.rebuild(sol.point);
  } else {
    if (projector.kind == Projector::Kind::kStateRef) {
      sol = project_to_hull_weighted(predicted_next, *reference_next, projector.ref_weight,
                                     poly.successors);
    } else {
      sol = project_to_hull(predicted_next, poly.successors);
    }
    out_state = sol.point;
  }

  ProjectedStep step;
  step.state = out_state;
  step.action = Vec(poly.action_vertices.transpose() * sol.lambda);
  step.hull_residual = sol.residual;
  step.iterations = sol.iterations;
  return step;
}

}  // namespace

ProjectedStep project_state(const Env& env, const Vec& s, const Vec& predicted_next,
                            const Projector& projector, const std::optional<Vec>& reference_next,
                            const std::optional<Vec>& predicted_action) {
  if (predicted_next.size() != env.spec().n_states)
    throw std::invalid_argument("predicted state dimension mismatch");

  switch (projector.kind) {
    case Projector::Kind::kAction: {
      if (!predicted_action) throw std::invalid_argument("action projector needs an action");
      const Vec a = env.clamp_action(*predicted_action);
      ProjectedStep step;
      step.state = env.step(s, a);
      step.action = a;
      return step;
    }
    case Projector::Kind::kStateAction: {
      if (!predicted_action)
        throw std::invalid_argument("state-action projector needs an action");
      if (!projector.policy)
        throw std::invalid_argument("state-action projector needs a correction policy");
      const Vec a_pred = env.clamp_action(*predicted_action);
      const Vec base = env.step(s, a_pred);
      const Vec da = projector.policy->infer(predicted_next - base);
      const Vec a = env.clamp_action(a_pred + da);
      ProjectedStep step;
      step.state = env.step(s, a);
      step.action = a;
      return step;
    }
    case Projector::Kind::kStateRef:
      if (!reference_next)
        throw std::invalid_argument("reference projector needs a reference state");
      if (projector.ref_weight == 0.0) {
        Projector plain = projector;
        plain.kind = Projector::Kind::kState;
        return project_onto_reachable(env, s, predicted_next, plain, std::nullopt,
                                      predicted_action);
      }
      [[fallthrough]];
    case Projector::Kind::kState:
      return project_onto_reachable(env, s, predicted_next, projector, reference_next,
                                    predicted_action);
  }
  throw std::logic_error("unreachable projector kind");
}

std::string projector_kind_name(Projector::Kind kind) {
  switch (kind) {
    case Projector::Kind::kState: return "P";
    case Projector::Kind::kStateRef: return "Pref";
    case Projector::Kind::kAction: return "PA";
    case Projector::Kind::kStateAction: return "PSA";
  }
  throw std::logic_error("unreachable projector kind");
}

Projector::Kind projector_kind_from_name(const std::string& name) {
  if (name == "P") return Projector::Kind::kState;
  if (name == "Pref") return Projector::Kind::kStateRef;
  if (name == "PA") return Projector::Kind::kAction;
  if (name == "PSA") return Projector::Kind::kStateAction;
  throw std::invalid_argument("unknown projector '" + name + "' (valid: P, Pref, PA, PSA)");
}

GateFn gate_always() {
  return [](Eigen::Index) { return true; };
}

GateFn gate_never() {
  return [](Eigen::Index) { return false; };
}

ProjectedTrajectory project_trajectory(const Env& env, const Trajectory& predicted,
                                       const Projector& projector, const GateFn& gate,
                                       const std::optional<Trajectory>& reference) {
  const Eigen::Index h = predicted.horizon();
  const bool action_backed = projector.kind == Projector::Kind::kAction ||
                             projector.kind == Projector::Kind::kStateAction;
  const bool has_actions = predicted.actions.has_value();
  if (action_backed && !has_actions)
    throw std::invalid_argument("action-backed projection needs predicted actions");
  if (projector.kind == Projector::Kind::kStateRef && projector.ref_weight != 0.0 && !reference)
    throw std::invalid_argument("reference projection needs a reference trajectory");
  if (reference && reference->states.rows() != predicted.states.rows())
    throw std::invalid_argument("reference horizon mismatch");

  ProjectedTrajectory out;
  out.traj.states.resizeLike(predicted.states);
  out.traj.states.row(0) = predicted.states.row(0);
  if (has_actions) out.traj.actions = *predicted.actions;
  out.hull_residuals = Vec::Zero(h);
  out.step_errors = Vec::Zero(h);
  out.projected.assign(static_cast<std::size_t>(h), false);

  bool all_projected = true;
  Vec base = predicted.states.row(0);
  for (Eigen::Index t = 0; t < h; ++t) {
    const Vec pred_next = predicted.states.row(t + 1);
    if (!gate(t)) {
      out.traj.states.row(t + 1) = pred_next;
      base = pred_next;
      all_projected = false;
      continue;
    }
    std::optional<Vec> ref_next;
    if (reference) ref_next = Vec(reference->states.row(t + 1));
    std::optional<Vec> pred_action;
    if (has_actions) pred_action = Vec(predicted.actions->row(t));
    const ProjectedStep step =
        project_state(env, base, pred_next, projector, ref_next, pred_action);
    out.traj.states.row(t + 1) = step.state;
    if (step.action && out.traj.actions) out.traj.actions->row(t) = *step.action;
    out.hull_residuals[t] = step.hull_residual;
    out.step_errors[t] = (pred_next - step.state).norm();
    out.projected[static_cast<std::size_t>(t)] = true;
    base = step.state;
  }
  out.traj.admissible = action_backed && all_projected;
  return out;
}

}  // namespace admplan
