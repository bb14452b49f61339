#include <doctest.h>

#include <cmath>

#include "admplan/correction.hpp"
#include "admplan/dataset.hpp"
#include "admplan/project.hpp"
#include "admplan/rng.hpp"

using namespace admplan;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// A prediction whose velocity outruns the one-step reachable interval at
// every transition. From rest the double integrator can change velocity by
// at most dt * |a| = 0.1 per step; this path asks for 0.3.
Trajectory runaway_prediction(int horizon) {
  Trajectory traj;
  traj.states = Mat::Zero(horizon + 1, 2);
  for (int t = 1; t <= horizon; ++t) {
    traj.states(t, 1) = 0.3 * t;
    traj.states(t, 0) = traj.states(t - 1, 0) + 0.1 * traj.states(t, 1);
  }
  return traj;
}

}  // namespace

TEST_CASE("projector kind names round-trip") {
  for (const auto* name : {"P", "Pref", "PA", "PSA"}) {
    CHECK(projector_kind_name(projector_kind_from_name(name)) == name);
  }
  CHECK_THROWS_AS(projector_kind_from_name("Q"), std::invalid_argument);
  try {
    projector_kind_from_name("Q");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("PSA") != std::string::npos);
  }
}

TEST_CASE("reachable predictions pass through the hull projector untouched") {
  auto env = make_env("double-integrator-1d");
  const Vec s = vec2(0.0, 0.0);
  const Vec inside = env->step(s, Vec::Constant(1, 0.4));
  Projector p;
  const ProjectedStep out = project_state(*env, s, inside, p);
  CHECK((out.state - inside).norm() <= 1e-9);
  CHECK(out.hull_residual <= 1e-9);
}

TEST_CASE("reduced hull projection matches the hand-computed velocity clamp") {
  auto env = make_env("double-integrator-1d");
  const Vec s = vec2(0.0, 0.0);
  // Reachable velocities from rest span [-0.1, 0.1]; the prediction asks for
  // 0.3, so the projection saturates at 0.1 and the position rebuilds
  // kinematically: x = 0 + 0.1 * 0.1.
  const Vec predicted = vec2(0.05, 0.3);
  Projector p;  // kState, reduce = true
  const ProjectedStep out = project_state(*env, s, predicted, p);
  CHECK(out.state[1] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(out.state[0] == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(out.hull_residual == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("full-state hull projection differs from the reduced one as geometry says") {
  auto env = make_env("double-integrator-1d");
  const Vec s = vec2(0.0, 0.0);
  // Interior velocity, biased position. Reduced mode keeps v = 0.05 exactly
  // and rebuilds x = 0.005; full mode projects (0, 0.05) onto the segment
  // between (-0.01, -0.1) and (0.01, 0.1).
  const Vec predicted = vec2(0.0, 0.05);
  Projector reduced;
  const ProjectedStep a = project_state(*env, s, predicted, reduced);
  CHECK(a.state[1] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(a.state[0] == doctest::Approx(0.005).epsilon(1e-12));

  Projector full;
  full.reduce = false;
  const ProjectedStep b = project_state(*env, s, predicted, full);
  const Vec p0 = vec2(-0.01, -0.1), d = vec2(0.02, 0.2);
  const double t = (predicted - p0).dot(d) / d.squaredNorm();
  const Vec oracle = p0 + t * d;
  CHECK((b.state - oracle).norm() <= 1e-9);
  CHECK((a.state - b.state).norm() > 1e-4);
}

TEST_CASE("reference projection with zero weight equals the plain projection") {
  auto env = make_env("double-integrator-2d");
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec s = rng.uniform_box(env->spec().init_lo, env->spec().init_hi);
    Vec predicted(4), reference(4);
    for (int j = 0; j < 4; ++j) {
      predicted[j] = rng.uniform(-1.5, 1.5);
      reference[j] = rng.uniform(-1.5, 1.5);
    }
    Projector plain;
    Projector ref = Projector::state_ref(0.0);
    const ProjectedStep a = project_state(*env, s, predicted, plain);
    const ProjectedStep b = project_state(*env, s, predicted, ref, reference);
    CHECK((a.state - b.state).norm() == 0.0);
  }
}

TEST_CASE("reference weight pulls the projection toward the reference") {
  auto env = make_env("double-integrator-1d");
  const Vec s = vec2(0.0, 0.0);
  const Vec predicted = vec2(0.01, 0.09);   // near the top of the hull
  const Vec reference = vec2(-0.01, -0.09); // near the bottom
  const ProjectedStep plain = project_state(*env, s, predicted, Projector{});
  const ProjectedStep pulled =
      project_state(*env, s, predicted, Projector::state_ref(5.0), reference);
  const ProjectedStep anchored =
      project_state(*env, s, predicted, Projector::state_ref(1e7), reference);
  CHECK((pulled.state - reference).norm() < (plain.state - reference).norm());
  // With an overwhelming weight the output is the projection of the reference.
  const ProjectedStep ref_only = project_state(*env, s, reference, Projector{});
  CHECK((anchored.state - ref_only.state).norm() <= 1e-4);
  CHECK_THROWS_AS(project_state(*env, s, predicted, Projector::state_ref(1.0)),
                  std::invalid_argument);
}

TEST_CASE("action projector executes the clamped predicted action") {
  auto env = make_env("double-integrator-1d");
  const Vec s = vec2(0.2, -0.3);
  const Vec predicted = vec2(9.0, 9.0);  // ignored by the dynamics
  Projector p = Projector::action();
  const Vec a = Vec::Constant(1, 1.7);
  const ProjectedStep out = project_state(*env, s, predicted, p, std::nullopt, a);
  REQUIRE(out.action.has_value());
  CHECK((*out.action)[0] == 1.0);  // clamped to the box
  CHECK((out.state - env->step(s, *out.action)).norm() == 0.0);
  CHECK_THROWS_AS(project_state(*env, s, predicted, p), std::invalid_argument);
}

TEST_CASE("hull weights reconstruct an executable action for affine dynamics") {
  // The simplex weights of the projected point, applied to the action
  // vertices, give an action whose execution reproduces that point.
  for (const auto* name : {"double-integrator-1d", "double-integrator-2d"}) {
    auto env = make_env(name);
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
      const Vec s = rng.uniform_box(env->spec().init_lo, env->spec().init_hi);
      Vec predicted(env->spec().n_states);
      for (Eigen::Index j = 0; j < predicted.size(); ++j)
        predicted[j] = rng.uniform(-2.0, 2.0);
      const ProjectedStep out = project_state(*env, s, predicted, Projector{});
      REQUIRE(out.action.has_value());
      CHECK((env->step(s, *out.action) - out.state).norm() <= 1e-9);
    }
  }
}

TEST_CASE("trained correction policy recovers planted action noise") {
  auto env = make_env("double-integrator-2d");
  const Dataset data = generate_dataset(*env, "lqr-goal", 48, 16, 5);
  CorrectionTrainConfig cfg;
  cfg.steps = 1500;
  cfg.seed = 9;
  const CorrectionPolicy policy = train_correction_policy(*env, data, cfg);
  CHECK(policy.loss_final < policy.loss_initial);
  CHECK(policy.env_name == env->spec().name);

  Rng rng(21);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto& traj = data.trajectories[static_cast<std::size_t>(trial % 48)];
    const Vec s = traj.states.row(0).transpose();
    const Vec a = traj.actions->row(0).transpose();
    Vec da(2);
    for (int j = 0; j < 2; ++j) da[j] = 0.05 * rng.normal();
    bool clamped = false;
    env->clamp_action(a + da, &clamped);
    if (clamped) continue;
    const Vec drifted = env->step(s, a + da);
    const Vec nominal = env->step(s, a);
    const Vec recovered = policy.infer(drifted - nominal);
    worst = std::max(worst, (recovered - da).norm());
  }
  CHECK(worst < 0.02);
}

TEST_CASE("state-action projector undoes an action-space perturbation") {
  auto env = make_env("double-integrator-2d");
  const Dataset data = generate_dataset(*env, "lqr-goal", 48, 16, 5);
  CorrectionTrainConfig ccfg;
  ccfg.steps = 1500;
  ccfg.seed = 9;
  const CorrectionPolicy policy = train_correction_policy(*env, data, ccfg);

  Projector psa = Projector::state_action(&policy);
  Rng rng(33);
  double with_correction = 0.0, without = 0.0;
  int cases = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto& traj = data.trajectories[static_cast<std::size_t>(trial)];
    const Vec s = traj.states.row(3).transpose();
    const Vec a_true = traj.actions->row(3).transpose();
    const Vec target = traj.states.row(4).transpose();
    Vec da(2);
    for (int j = 0; j < 2; ++j) da[j] = 0.08 * rng.normal();
    bool clamped = false;
    const Vec a_noisy = env->clamp_action(a_true + da, &clamped);
    if (clamped) continue;
    ++cases;
    const ProjectedStep raw =
        project_state(*env, s, target, Projector::action(), std::nullopt, a_noisy);
    const ProjectedStep fixed = project_state(*env, s, target, psa, std::nullopt, a_noisy);
    without += (raw.state - target).norm();
    with_correction += (fixed.state - target).norm();
  }
  REQUIRE(cases > 10);
  CHECK(with_correction < 0.25 * without);
}

TEST_CASE("state-action projector requires its policy") {
  auto env = make_env("double-integrator-1d");
  Projector psa;
  psa.kind = Projector::Kind::kStateAction;
  CHECK_THROWS_AS(
      project_state(*env, vec2(0, 0), vec2(0, 0), psa, std::nullopt, Vec::Constant(1, 0.0)),
      std::invalid_argument);
}

TEST_CASE("trajectory projection chains chronologically through projected states") {
  auto env = make_env("double-integrator-1d");
  const Trajectory pred = runaway_prediction(4);
  const ProjectedTrajectory out = project_trajectory(*env, pred, Projector{});
  CHECK(out.traj.states.row(0) == pred.states.row(0));
  // Every transition of the output is reachable from its own predecessor:
  // the velocity change per step stays within dt * |a|max = 0.1.
  for (int t = 0; t < 4; ++t) {
    const double dv = out.traj.states(t + 1, 1) - out.traj.states(t, 1);
    CHECK(std::abs(dv) <= 0.1 + 1e-12);
  }
  // The runaway prediction saturates the hull every step: v_t = 0.1 t.
  for (int t = 1; t <= 4; ++t)
    CHECK(out.traj.states(t, 1) == doctest::Approx(0.1 * t).epsilon(1e-9));
  CHECK(out.projected == std::vector<bool>{true, true, true, true});
  CHECK(out.hull_residuals.minCoeff() > 0.0);
  CHECK(out.step_errors.minCoeff() > 0.0);
}

TEST_CASE("gated steps keep the raw prediction and later hulls re-base on it") {
  auto env = make_env("double-integrator-1d");
  const Trajectory pred = runaway_prediction(5);
  const GateFn skip_second = [](Eigen::Index t) { return t != 1; };
  const ProjectedTrajectory out = project_trajectory(*env, pred, Projector{}, skip_second);
  CHECK(out.traj.states.row(2) == pred.states.row(2));  // kept exactly
  CHECK(out.projected[1] == false);
  CHECK(out.hull_residuals[1] == 0.0);
  CHECK(out.step_errors[1] == 0.0);
  // Step 2 projects from the raw (faster) state, so its velocity tops out at
  // the prediction's velocity plus the reachable increment.
  CHECK(out.traj.states(3, 1) == doctest::Approx(0.6 + 0.1).epsilon(1e-9));

  const ProjectedTrajectory none = project_trajectory(*env, pred, Projector{}, gate_never());
  CHECK((none.traj.states - pred.states).norm() == 0.0);
}

TEST_CASE("action-backed trajectory projection is admissible only when complete") {
  auto env = make_env("double-integrator-1d");
  const Dataset data = generate_dataset(*env, "lqr-goal", 4, 8, 2);
  Trajectory pred = data.trajectories[0];
  // Corrupt the states but keep the stored actions as the prediction.
  pred.states.bottomRows(8).array() += 0.05;
  pred.admissible = false;

  const ProjectedTrajectory full = project_trajectory(*env, pred, Projector::action());
  CHECK(full.traj.admissible);
  REQUIRE(full.traj.actions.has_value());
  const Trajectory redo = env->rollout(full.traj.states.row(0), *full.traj.actions);
  CHECK((redo.states.array() == full.traj.states.array()).all());

  const GateFn partial = [](Eigen::Index t) { return t != 3; };
  const ProjectedTrajectory part = project_trajectory(*env, pred, Projector::action(), partial);
  CHECK_FALSE(part.traj.admissible);
}

TEST_CASE("trajectory projection validates its reference") {
  auto env = make_env("double-integrator-1d");
  const Trajectory pred = runaway_prediction(3);
  CHECK_THROWS_AS(project_trajectory(*env, pred, Projector::state_ref(1.0)),
                  std::invalid_argument);
  const ProjectedTrajectory ok =
      project_trajectory(*env, pred, Projector::state_ref(1.0), gate_always(), pred);
  CHECK(ok.traj.states.rows() == pred.states.rows());
}
