#include "admplan/hull.hpp"

#include <limits>
#include <stdexcept>
#include <vector>

namespace admplan {

namespace {

/// Solves min ||P_S^T mu - t||^2 subject to sum(mu) = 1 on the working face S
/// through the bordered KKT system. A complete orthogonal decomposition keeps
/// the solve well-defined when the face contains duplicate points.
Vec solve_face(const Mat& points, const std::vector<int>& face, const Vec& target) {
  const int k = static_cast<int>(face.size());
  Mat kkt(k + 1, k + 1);
  Vec rhs(k + 1);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j)
      kkt(i, j) = points.row(face[static_cast<std::size_t>(i)])
                      .dot(points.row(face[static_cast<std::size_t>(j)]));
    kkt(i, k) = 1.0;
    kkt(k, i) = 1.0;
    rhs[i] = points.row(face[static_cast<std::size_t>(i)]).dot(target);
  }
  kkt(k, k) = 0.0;
  rhs[k] = 1.0;
  const Vec sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  return sol.head(k);
}

}  // namespace

HullProjection project_to_hull(const Vec& target, const Mat& points,
                               const HullSolveOptions& opts) {
  const Eigen::Index m = points.rows();
  if (m < 1) throw std::invalid_argument("hull projection needs at least one point");
  if (points.cols() != target.size()) throw std::invalid_argument("point dimension mismatch");
  if (!target.allFinite() || !points.allFinite())
    throw std::invalid_argument("hull projection inputs must be finite");

  HullProjection out;
  out.lambda = Vec::Zero(m);

  // Nearest vertex seeds the active face; lowest index wins ties.
  int seed = 0;
  double best = (points.row(0).transpose() - target).norm();
  for (Eigen::Index i = 1; i < m; ++i) {
    const double d = (points.row(i).transpose() - target).norm();
    if (d < best) {
      best = d;
      seed = static_cast<int>(i);
    }
  }

  std::vector<int> face = {seed};
  Vec lambda_face = Vec::Ones(1);
  const double scale = 1.0 + points.rowwise().norm().maxCoeff() + target.norm();

  auto gather = [&](const std::vector<int>& f, const Vec& lf) {
    Vec full = Vec::Zero(m);
    for (std::size_t i = 0; i < f.size(); ++i) full[f[i]] = lf[static_cast<Eigen::Index>(i)];
    return full;
  };

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const Vec mu = solve_face(points, face, target);

    if ((mu.array() >= -1e-12).all()) {
      lambda_face = mu;
      const Vec full = gather(face, lambda_face);
      const Vec c = points.transpose() * full;
      const Vec grad = points * (c - target);
      double nu = 0.0;
      for (int idx : face) nu += grad[idx];
      nu /= static_cast<double>(face.size());

      int enter = -1;
      double worst = -opts.dual_tolerance * scale;
      for (Eigen::Index i = 0; i < m; ++i) {
        bool in_face = false;
        for (int idx : face) in_face = in_face || idx == i;
        if (in_face) continue;
        const double reduced = grad[i] - nu;
        if (reduced < worst) {
          worst = reduced;
          enter = static_cast<int>(i);
        }
      }
      if (enter < 0) {
        out.converged = true;
        break;
      }
      face.push_back(enter);
      Vec next(lambda_face.size() + 1);
      next.head(lambda_face.size()) = lambda_face;
      next[lambda_face.size()] = 0.0;
      lambda_face = next;
    } else {
      // Step from the current feasible weights toward mu until the first
      // coordinate hits zero, then drop it from the face (lowest index wins).
      double alpha = 1.0;
      int leave = -1;
      for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (mu[i] >= -1e-12) continue;
        const double denom = lambda_face[i] - mu[i];
        const double a = denom > 0.0 ? lambda_face[i] / denom : 0.0;
        if (a < alpha - 1e-15 || (a < alpha + 1e-15 && leave >= 0 &&
                                  face[static_cast<std::size_t>(i)] < face[static_cast<std::size_t>(leave)])) {
          alpha = a;
          leave = static_cast<int>(i);
        }
      }
      if (leave < 0) {  // numerically stuck; accept the clipped solution
        lambda_face = mu.cwiseMax(0.0);
        break;
      }
      lambda_face = lambda_face + alpha * (mu - lambda_face);
      face.erase(face.begin() + leave);
      Vec shrunk(lambda_face.size() - 1);
      Eigen::Index w = 0;
      for (Eigen::Index i = 0; i < lambda_face.size(); ++i)
        if (i != leave) shrunk[w++] = lambda_face[i];
      lambda_face = shrunk;
    }
  }

  out.iterations = it;
  Vec full = gather(face, lambda_face).cwiseMax(0.0);
  const double sum = full.sum();
  if (sum <= 0.0) {
    full.setZero();
    full[seed] = 1.0;
  } else {
    full /= sum;
  }
  out.lambda = full;
  out.point = points.transpose() * full;
  out.residual = (target - out.point).norm();
  return out;
}

HullProjection project_to_hull_weighted(const Vec& anchor_a, const Vec& anchor_b, double weight_b,
                                        const Mat& points, const HullSolveOptions& opts) {
  if (weight_b < 0.0) throw std::invalid_argument("anchor weight must be non-negative");
  if (weight_b == 0.0) return project_to_hull(anchor_a, points, opts);

  // Iteratively reweighted least squares: each pass minimizes
  //   wa ||anchor_a - c||^2 + wb ||anchor_b - c||^2
  // over the hull, which is a plain projection of the weighted midpoint. The
  // weights re-balance toward the exact sum-of-norms objective.
  constexpr int kPasses = 30;
  constexpr double kGuard = 1e-12;
  HullProjection cur = project_to_hull(anchor_a, points, opts);
  for (int pass = 0; pass < kPasses; ++pass) {
    const double da = std::max((anchor_a - cur.point).norm(), kGuard);
    const double db = std::max((anchor_b - cur.point).norm(), kGuard);
    const double wa = 1.0 / da;
    const double wb = weight_b / db;
    const Vec t = (wa * anchor_a + wb * anchor_b) / (wa + wb);
    cur = project_to_hull(t, points, opts);
  }
  cur.residual = (anchor_a - cur.point).norm();
  return cur;
}

}  // namespace admplan
