#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "admplan/correction.hpp"
#include "admplan/env.hpp"
#include "admplan/hull.hpp"
#include "admplan/reach.hpp"

namespace admplan {

/// Which admissibility projection to apply to a predicted transition.
///
/// kState      nearest point of the reachable hull (predicted state only)
/// kStateRef   hull point trading off the prediction against a reference
/// kAction     execute the predicted action through the dynamics
/// kStateAction execute the predicted action plus a learned correction
///             computed from the predicted next state
struct Projector {
  enum class Kind { kState, kStateRef, kAction, kStateAction };

  Kind kind = Kind::kState;
  double ref_weight = 1.0;     ///< reference weight for kStateRef
  double action_shrink = 0.1;  ///< vertex shrink for action-guided hull search
  bool reduce = true;          ///< project actuated coordinates only where declared
  const CorrectionPolicy* policy = nullptr;  ///< required for kStateAction

  static Projector state() { return {}; }
  static Projector state_ref(double weight) {
    Projector p;
    p.kind = Kind::kStateRef;
    p.ref_weight = weight;
    return p;
  }
  static Projector action() {
    Projector p;
    p.kind = Kind::kAction;
    return p;
  }
  static Projector state_action(const CorrectionPolicy* policy) {
    Projector p;
    p.kind = Kind::kStateAction;
    p.policy = policy;
    return p;
  }
};

/// Short projector names used by configs and reports: P, Pref, PA, PSA.
std::string projector_kind_name(Projector::Kind kind);
Projector::Kind projector_kind_from_name(const std::string& name);

struct ProjectedStep {
  Vec state;                  ///< admissible (or hull) next state
  std::optional<Vec> action;  ///< executed action, or hull-weight action estimate
  double hull_residual = 0.0; ///< prediction-to-hull distance in the projection space
  int iterations = 0;
};

/// Projects one predicted transition from the current state `s`.
/// `predicted_action` switches the hull projectors to the shrunk search
/// around that action and is mandatory for kAction/kStateAction.
/// `reference_next` is required by kStateRef.
ProjectedStep project_state(const Env& env, const Vec& s, const Vec& predicted_next,
                            const Projector& projector,
                            const std::optional<Vec>& reference_next = std::nullopt,
                            const std::optional<Vec>& predicted_action = std::nullopt);

/// Per-transition projection decision; true means project, false passes the
/// raw prediction through.
using GateFn = std::function<bool(Eigen::Index)>;

GateFn gate_always();
GateFn gate_never();

struct ProjectedTrajectory {
  Trajectory traj;
  Vec hull_residuals;           ///< per-transition prediction-to-hull distance (0 where skipped)
  Vec step_errors;              ///< ||predicted - output|| per transition
  std::vector<bool> projected;  ///< gate decision per transition
};

/// Chronological trajectory projection. Each transition builds its reachable
/// set at the previous *output* state, whether that state was projected or
/// passed through raw, and skipped predictions are kept exactly as drawn.
/// The first state is pinned from the prediction. For kAction/kStateAction the
/// output carries the executed actions and, when every transition was
/// projected, is flagged admissible.
ProjectedTrajectory project_trajectory(const Env& env, const Trajectory& predicted,
                                       const Projector& projector,
                                       const GateFn& gate = gate_always(),
                                       const std::optional<Trajectory>& reference = std::nullopt);

}  // namespace admplan
