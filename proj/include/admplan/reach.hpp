#pragma once

#include <functional>
#include <vector>

#include "admplan/env.hpp"

namespace admplan {

/// Vertex description of the polytopic under-approximation of a reachable
/// set: the convex hull of the successors of the action-set vertices.
struct ReachPolytope {
  Mat action_vertices;  ///< m x n_actions, rows inside the action box
  Mat successors;       ///< m x d, successor of each action vertex (d = n_states, or reduced)
  bool reduced = false; ///< successors hold actuated coordinates only
};

/// Vertices of the action box. All 2^n corners for n <= 6 actions; above that
/// a documented subset (box center plus both faces along each axis) keeps the
/// vertex count linear while staying inside the box.
Mat action_box_vertices(const EnvSpec& spec);

/// Action vertices shrunk by `shrink` in (0, 1] around `center` and clamped to
/// the action box: v_i -> center + shrink * (v_i - mean(v)). Clamping is
/// reported so callers can tell when the search region hit the box boundary.
Mat shrink_action_vertices(const EnvSpec& spec, const Mat& vertices, const Vec& center,
                           double shrink, bool* clamped = nullptr);

/// Hull vertices of the one-step reachable set from `s`, i.e. the successors
/// of the action-box vertices.
ReachPolytope reach_polytope(const Env& env, const Vec& s);

/// Same hull built over shrunk action vertices centered on a predicted action.
ReachPolytope reach_polytope_shrunk(const Env& env, const Vec& s, const Vec& center,
                                    double shrink);

/// Reduced form of a reachable polytope restricted to the actuated (velocity)
/// coordinates, plus a closure that rebuilds the full successor from a
/// projected velocity via the environment's kinematic update. Environments
/// whose actuated mask covers the whole state reduce to the identity.
struct ReducedReach {
  ReachPolytope polytope;                 ///< reduced successors (m x n_actuated)
  Vec predicted;                          ///< reduced target taken from the predicted state
  std::function<Vec(const Vec&)> rebuild; ///< reduced point -> full next state
};

ReducedReach reduce_to_actuated(const Env& env, const Vec& s, const ReachPolytope& full,
                                const Vec& predicted_next);

}  // namespace admplan
