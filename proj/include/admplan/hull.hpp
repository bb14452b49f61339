#pragma once

#include <Eigen/Dense>

#include "admplan/env.hpp"

namespace admplan {

/// Result of projecting a target onto the convex hull of a point set:
/// the nearest hull point, its simplex weights over the input points, the
/// distance to the target, and solver diagnostics.
struct HullProjection {
  Vec lambda;       ///< simplex weights, non-negative, summing to 1 (+/- 1e-9)
  Vec point;        ///< sum_i lambda_i * points.row(i)
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct HullSolveOptions {
  int max_iterations = 200;
  double dual_tolerance = 1e-10;  ///< reduced-cost threshold for optimality
};

/// Euclidean projection of `target` onto conv(rows of points), solved as a
/// simplex-constrained least-squares problem with an active-set iteration.
/// Each face subproblem is solved exactly through its KKT system, so the
/// returned point is accurate to machine precision on the optimal face.
/// Ties (degenerate vertex sets, duplicate points) resolve deterministically
/// toward the lowest vertex index.
HullProjection project_to_hull(const Vec& target, const Mat& points,
                               const HullSolveOptions& opts = {});

/// Weighted two-anchor variant: argmin over the hull of
///   ||anchor_a - c|| + weight_b * ||anchor_b - c||,
/// solved by iteratively reweighted least squares on top of project_to_hull.
/// With weight_b = 0 this routes to the plain projection of anchor_a.
HullProjection project_to_hull_weighted(const Vec& anchor_a, const Vec& anchor_b, double weight_b,
                                        const Mat& points, const HullSolveOptions& opts = {});

}  // namespace admplan
