#include "admplan/reach.hpp"

#include <stdexcept>

namespace admplan {

Mat action_box_vertices(const EnvSpec& spec) {
  const int n = spec.n_actions;
  if (n <= 6) {
    const int m = 1 << n;
    Mat v(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        v(i, j) = (i >> j) & 1 ? spec.action_hi[j] : spec.action_lo[j];
    return v;
  }
  // Box center plus the two face centers per axis: 2n + 1 vertices.
  const Vec center = 0.5 * (spec.action_lo + spec.action_hi);
  Mat v(2 * n + 1, n);
  v.row(0) = center;
  for (int j = 0; j < n; ++j) {
    v.row(1 + 2 * j) = center;
    v(1 + 2 * j, j) = spec.action_lo[j];
    v.row(2 + 2 * j) = center;
    v(2 + 2 * j, j) = spec.action_hi[j];
  }
  return v;
}

Mat shrink_action_vertices(const EnvSpec& spec, const Mat& vertices, const Vec& center,
                           double shrink, bool* clamped) {
  if (!(shrink > 0.0 && shrink <= 1.0))
    throw std::invalid_argument("shrink factor must be in (0, 1]");
  if (center.size() != spec.n_actions) throw std::invalid_argument("center dimension mismatch");
  const Vec mean = vertices.colwise().mean();
  Mat out(vertices.rows(), vertices.cols());
  bool any_clamped = false;
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    Vec v = center + shrink * (vertices.row(i).transpose() - mean);
    Vec cl = v.cwiseMax(spec.action_lo).cwiseMin(spec.action_hi);
    any_clamped = any_clamped || (cl.array() != v.array()).any();
    out.row(i) = cl;
  }
  if (clamped) *clamped = any_clamped;
  return out;
}

namespace {

ReachPolytope successors_of(const Env& env, const Vec& s, Mat action_vertices) {
  ReachPolytope poly;
  poly.successors.resize(action_vertices.rows(), env.spec().n_states);
  for (Eigen::Index i = 0; i < action_vertices.rows(); ++i)
    poly.successors.row(i) = env.step(s, action_vertices.row(i));
  poly.action_vertices = std::move(action_vertices);
  return poly;
}

}  // namespace

ReachPolytope reach_polytope(const Env& env, const Vec& s) {
  return successors_of(env, s, action_box_vertices(env.spec()));
}

ReachPolytope reach_polytope_shrunk(const Env& env, const Vec& s, const Vec& center,
                                    double shrink) {
  return successors_of(
      env, s, shrink_action_vertices(env.spec(), action_box_vertices(env.spec()), center, shrink));
}

ReducedReach reduce_to_actuated(const Env& env, const Vec& s, const ReachPolytope& full,
                                const Vec& predicted_next) {
  const EnvSpec& spec = env.spec();
  if (predicted_next.size() != spec.n_states)
    throw std::invalid_argument("predicted state dimension mismatch");

  ReducedReach red;
  red.polytope.action_vertices = full.action_vertices;
  if (spec.actuated_count() == spec.n_states) {
    red.polytope.successors = full.successors;
    red.polytope.reduced = false;
    red.predicted = predicted_next;
    red.rebuild = [](const Vec& p) { return p; };
    return red;
  }

  const int na = spec.actuated_count();
  red.polytope.successors.resize(full.successors.rows(), na);
  for (Eigen::Index i = 0; i < full.successors.rows(); ++i)
    red.polytope.successors.row(i) = env.velocity_components(full.successors.row(i));
  red.polytope.reduced = true;
  red.predicted = env.velocity_components(predicted_next);
  const Env* env_ptr = &env;
  const Vec base = s;
  red.rebuild = [env_ptr, base](const Vec& v_next) { return env_ptr->reconstruct(base, v_next); };
  return red;
}

}  // namespace admplan
