#include <doctest.h>

#include <cmath>

#include "admplan/hull.hpp"
#include "admplan/rng.hpp"

using namespace admplan;

namespace {

// Closed-form projection onto the segment p0-p1, the independent oracle for
// two-point hulls.
Vec segment_projection(const Vec& target, const Vec& p0, const Vec& p1, double* t_out = nullptr) {
  const Vec d = p1 - p0;
  double t = (target - p0).dot(d) / d.squaredNorm();
  t = std::min(1.0, std::max(0.0, t));
  if (t_out) *t_out = t;
  return p0 + t * d;
}

Mat two_points(const Vec& a, const Vec& b) {
  Mat m(2, a.size());
  m.row(0) = a.transpose();
  m.row(1) = b.transpose();
  return m;
}

}  // namespace

TEST_CASE("segment projection matches the closed form and a dense grid") {
  Vec p0(2), p1(2), target(2);
  p0 << -0.01, -0.1;
  p1 << 0.01, 0.1;
  target << 0.0, 0.05;
  const Mat points = two_points(p0, p1);
  const HullProjection proj = project_to_hull(target, points);
  CHECK(proj.converged);

  double t = 0.0;
  const Vec oracle = segment_projection(target, p0, p1, &t);
  CHECK(t > 0.0);
  CHECK(t < 1.0);
  CHECK((proj.point - oracle).norm() <= 1e-12);
  CHECK(proj.residual == doctest::Approx((target - oracle).norm()).epsilon(1e-12));
  CHECK(proj.lambda[1] == doctest::Approx(t).epsilon(1e-12));

  // Dense sweep over the segment: no sampled point beats the solver.
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 100000; ++k) {
    const double u = static_cast<double>(k) / 100000.0;
    best = std::min(best, (target - (p0 + u * (p1 - p0))).norm());
  }
  CHECK(proj.residual <= best + 1e-9);
}

TEST_CASE("targets beyond a vertex snap to it") {
  Vec p0(2), p1(2), target(2);
  p0 << 0.0, 0.0;
  p1 << 1.0, 0.0;
  target << 2.0, 1.0;
  const HullProjection proj = project_to_hull(target, two_points(p0, p1));
  CHECK((proj.point - p1).norm() <= 1e-12);
  CHECK(proj.lambda[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(proj.lambda[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("interior targets project to themselves with zero residual") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 3 + static_cast<int>(rng.uniform() * 5);
    const int d = 2 + static_cast<int>(rng.uniform() * 3);
    Mat points(m, d);
    for (Eigen::Index i = 0; i < points.size(); ++i)
      points.data()[i] = rng.uniform(-2.0, 2.0);
    Vec lambda(m);
    for (int i = 0; i < m; ++i) lambda[i] = rng.uniform();
    lambda /= lambda.sum();
    const Vec target = points.transpose() * lambda;
    const HullProjection proj = project_to_hull(target, points);
    CHECK(proj.residual <= 1e-8);
    CHECK((proj.point - target).norm() <= 1e-8);
  }
}

TEST_CASE("simplex weights and the variational optimality certificate hold") {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform() * 7);
    const int d = 1 + static_cast<int>(rng.uniform() * 5);
    Mat points(m, d);
    for (Eigen::Index i = 0; i < points.size(); ++i)
      points.data()[i] = rng.uniform(-1.0, 1.0);
    Vec target(d);
    for (int j = 0; j < d; ++j) target[j] = rng.uniform(-3.0, 3.0);

    const HullProjection proj = project_to_hull(target, points);
    CHECK(proj.converged);
    CHECK(proj.lambda.minCoeff() >= -1e-9);
    CHECK(proj.lambda.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((proj.point - points.transpose() * proj.lambda).norm() <= 1e-9);
    CHECK(proj.residual == doctest::Approx((target - proj.point).norm()).epsilon(1e-9));
    // Optimality of a hull projection: the target-to-point gap makes an obtuse
    // angle with every direction into the hull.
    for (Eigen::Index i = 0; i < m; ++i) {
      const double slack =
          (target - proj.point).dot(points.row(i).transpose() - proj.point);
      CHECK(slack <= 1e-8);
    }
  }
}

TEST_CASE("duplicate vertices resolve to the lowest index") {
  Mat points(3, 2);
  points << 1.0, 1.0, 1.0, 1.0, -1.0, -1.0;
  Vec target(2);
  target << 2.0, 2.0;
  const HullProjection proj = project_to_hull(target, points);
  CHECK(proj.lambda[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(proj.lambda[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single-point hull returns that point") {
  Mat points(1, 3);
  points << 0.5, -0.25, 2.0;
  Vec target(3);
  target << 0.0, 0.0, 0.0;
  const HullProjection proj = project_to_hull(target, points);
  CHECK((proj.point - points.row(0).transpose()).norm() == 0.0);
  CHECK(proj.lambda[0] == 1.0);
  CHECK(proj.residual == doctest::Approx(points.row(0).norm()).epsilon(1e-12));
}

TEST_CASE("weighted projection with zero weight routes to the plain projection") {
  Rng rng(41);
  Mat points(4, 2);
  for (Eigen::Index i = 0; i < points.size(); ++i)
    points.data()[i] = rng.uniform(-1.0, 1.0);
  Vec a(2), b(2);
  a << 2.0, 2.0;
  b << -3.0, 1.0;
  const HullProjection plain = project_to_hull(a, points);
  const HullProjection weighted = project_to_hull_weighted(a, b, 0.0, points);
  CHECK((weighted.point - plain.point).norm() == 0.0);
  CHECK((weighted.lambda - plain.lambda).norm() == 0.0);
}

TEST_CASE("weighted projection balances the two anchors") {
  // Hull is the segment x in [-1, 1] at y = 0; anchors sit above and below
  // the origin, so the symmetric optimum of ||a-c|| + ||b-c|| is (0, 0).
  Vec p0(2), p1(2), a(2), b(2);
  p0 << -1.0, 0.0;
  p1 << 1.0, 0.0;
  a << 0.0, 2.0;
  b << 0.0, -1.0;
  const Mat points = two_points(p0, p1);
  const HullProjection proj = project_to_hull_weighted(a, b, 1.0, points);
  CHECK(proj.converged);
  CHECK(std::abs(proj.point[0]) <= 1e-8);
  CHECK(std::abs(proj.point[1]) <= 1e-12);

  // A dominant second anchor pulls the optimum toward its own projection.
  Vec far(2);
  far << 0.8, -0.5;
  const HullProjection heavy = project_to_hull_weighted(a, far, 1e6, points);
  const HullProjection far_only = project_to_hull(far, points);
  CHECK((heavy.point - far_only.point).norm() <= 1e-4);
}

TEST_CASE("weighted objective beats a dense sweep on a segment") {
  Vec p0(2), p1(2), a(2), b(2);
  p0 << -1.0, 0.0;
  p1 << 1.0, 0.0;
  a << 0.7, 1.0;
  b << -0.4, 0.5;
  const double w = 2.5;
  const HullProjection proj = project_to_hull_weighted(a, b, w, two_points(p0, p1));
  const double got = (a - proj.point).norm() + w * (b - proj.point).norm();
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 100000; ++k) {
    const Vec c = p0 + (static_cast<double>(k) / 100000.0) * (p1 - p0);
    best = std::min(best, (a - c).norm() + w * (b - c).norm());
  }
  CHECK(got <= best + 1e-6);
}

TEST_CASE("hull projection rejects malformed inputs") {
  Mat points(2, 2);
  points << 0.0, 0.0, 1.0, 1.0;
  Vec bad(3);
  bad << 0.0, 0.0, 0.0;
  CHECK_THROWS_AS(project_to_hull(bad, points), std::invalid_argument);
  CHECK_THROWS_AS(project_to_hull(Vec::Zero(2), Mat(0, 2)), std::invalid_argument);
}
