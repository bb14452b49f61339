#include <doctest.h>

#include <cmath>

#include "admplan/env.hpp"

using namespace admplan;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("environment registry") {
  CHECK(env_names().size() == 5);
  for (const auto& name : env_names()) {
    auto env = make_env(name);
    CHECK(env->spec().name == name);
    CHECK_NOTHROW(env->spec().validate());
  }
  CHECK_THROWS_AS(make_env("pendulum"), std::invalid_argument);
  try {
    make_env("pendulum");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("double-integrator-1d") != std::string::npos);
  }
}

TEST_CASE("double integrator semi-implicit step, hand iterated") {
  auto env = make_env("double-integrator-1d");
  // From rest with a = 1: v' = 0 + 0.1 * 1 = 0.1, then x' = 0 + 0.1 * 0.1.
  const Vec next = env->step(vec2(0.0, 0.0), Vec::Constant(1, 1.0));
  CHECK(next[0] == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(next[1] == doctest::Approx(0.1).epsilon(1e-15));

  // Two steps of a = 1: v = 0, 0.1, 0.2 and x = 0, 0.01, 0.03.
  Mat actions = Mat::Constant(2, 1, 1.0);
  const Trajectory traj = env->rollout(vec2(0.0, 0.0), actions);
  CHECK(traj.admissible);
  CHECK(traj.states.rows() == 3);
  CHECK(traj.states(1, 0) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(traj.states(2, 0) == doctest::Approx(0.03).epsilon(1e-15));
  CHECK(traj.states(2, 1) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("explicit euler variant advances positions with the old velocity") {
  auto env = make_env("double-integrator-1d-explicit");
  const Vec next = env->step(vec2(0.0, 0.0), Vec::Constant(1, 1.0));
  CHECK(next[0] == 0.0);  // x' = x + dt * v_old = 0
  CHECK(next[1] == doctest::Approx(0.1).epsilon(1e-15));
  const Vec next2 = env->step(next, Vec::Constant(1, 1.0));
  CHECK(next2[0] == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(next2[1] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("action clamping reports saturation") {
  auto env = make_env("double-integrator-1d");
  bool clamped = false;
  const Vec a = env->clamp_action(Vec::Constant(1, 3.0), &clamped);
  CHECK(a[0] == 1.0);
  CHECK(clamped);
  clamped = true;
  const Vec b = env->clamp_action(Vec::Constant(1, -0.4), &clamped);
  CHECK(b[0] == -0.4);
  CHECK_FALSE(clamped);
  // step() applies the same clamp before integrating.
  const Vec via_step = env->step(vec2(0.0, 0.0), Vec::Constant(1, 3.0));
  const Vec via_clamped = env->step(vec2(0.0, 0.0), Vec::Constant(1, 1.0));
  CHECK(via_step == via_clamped);
}

TEST_CASE("unicycle step matches the hand-derived update") {
  auto env = make_env("unicycle");
  Vec s(5);
  s << 0.0, 0.0, 0.0, 1.0, 0.0;
  Vec a(2);
  a << 0.5, 1.0;
  const Vec next = env->step(s, a);
  // v' = 1.05, w' = 0.1, th' = 0.01, position advances along the new heading.
  CHECK(next[0] == doctest::Approx(0.10499475004374986).epsilon(1e-14));
  CHECK(next[1] == doctest::Approx(0.0010499825000875001).epsilon(1e-14));
  CHECK(next[2] == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(next[3] == doctest::Approx(1.05).epsilon(1e-15));
  CHECK(next[4] == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("quadrotor hovers under exactly compensating thrust") {
  auto env = make_env("quadrotor-lite");
  Vec s(6);
  s << 0.0, 1.0, 0.0, 0.0, 0.0, 0.0;
  Vec hover(2);
  hover << 9.81, 0.0;
  const Vec next = env->step(s, hover);
  CHECK((next.array() == s.array()).all());
}

TEST_CASE("quadrotor torque tilts before the thrust direction is read") {
  auto env = make_env("quadrotor-lite");
  Vec s(6);
  s << 0.0, 1.0, 0.0, 0.0, 0.0, 0.0;
  Vec a(2);
  a << 9.81, 0.05;
  const Vec next = env->step(s, a);
  CHECK(next[5] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(next[2] == doctest::Approx(0.0025).epsilon(1e-14));
  CHECK(next[3] == doctest::Approx(-0.0012262487226566495).epsilon(1e-12));
  CHECK(next[4] == doctest::Approx(-1.5328117016544242e-06).epsilon(1e-9));
  CHECK(next[0] == doctest::Approx(-6.131243613283247e-05).epsilon(1e-12));
  CHECK(next[1] == doctest::Approx(0.9999999233594149).epsilon(1e-14));
}

TEST_CASE("reconstruct agrees with step on the velocity components") {
  for (const auto& name : env_names()) {
    auto env = make_env(name);
    Vec s = 0.5 * (env->spec().init_lo + env->spec().init_hi);
    Vec a = 0.25 * env->spec().action_lo + 0.75 * env->spec().action_hi;
    const Vec next = env->step(s, a);
    const Vec rebuilt = env->reconstruct(s, env->velocity_components(next));
    CHECK((rebuilt - next).norm() == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("velocity components follow the actuated mask") {
  auto quad = make_env("quadrotor-lite");
  Vec s(6);
  s << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  const Vec v = quad->velocity_components(s);
  REQUIRE(v.size() == 3);
  CHECK(v[0] == 4.0);
  CHECK(v[1] == 5.0);
  CHECK(v[2] == 6.0);
  CHECK(quad->spec().actuated_count() == 3);
  CHECK(make_env("unicycle")->spec().actuated_count() == 2);
  CHECK(make_env("double-integrator-1d")->spec().actuated_count() == 1);
}

TEST_CASE("constraint box is inclusive at its boundary") {
  auto env = make_env("double-integrator-1d");
  CHECK(env->within_constraints(vec2(3.0, 2.0)));
  CHECK_FALSE(env->within_constraints(vec2(3.0000001, 0.0)));
  CHECK_FALSE(env->within_constraints(vec2(0.0, -2.1)));
}

TEST_CASE("survival counts the leading in-box prefix") {
  auto env = make_env("double-integrator-1d");
  Mat states(4, 2);
  states << 0.0, 0.0, 2.9, 0.0, 3.1, 0.0, 0.0, 0.0;
  CHECK(survival_steps(*env, states) == 2);
  Mat fine = Mat::Zero(3, 2);
  CHECK(survival_steps(*env, fine) == 3);
  Mat dead(2, 2);
  dead << 5.0, 0.0, 0.0, 0.0;
  CHECK(survival_steps(*env, dead) == 0);
}

TEST_CASE("gate crossings interpolate the vertical position") {
  auto env = make_env("quadrotor-lite");
  const EnvSpec& spec = env->spec();
  REQUIRE(spec.gates.size() == 3);
  Mat states = Mat::Zero(2, 6);
  states(0, 0) = 0.6;
  states(0, 1) = 1.2;
  states(1, 0) = 0.8;
  states(1, 1) = 1.3;
  CHECK(gates_passed(spec, states) == 1);  // crosses x=0.7 at y=1.25

  states(0, 1) = 0.2;  // interpolated y = 0.75, below the first window
  states(1, 1) = 1.3;
  CHECK(gates_passed(spec, states) == 0);

  Mat full = Mat::Zero(4, 6);
  full.col(0) << 0.0, 1.0, 1.4, 2.2;
  full.col(1) << 1.3, 1.3, 0.7, 1.3;
  // gate 1 crossed at y = 1.3, gate 2 hit exactly at the (1.4, 0.7) knot,
  // gate 3 crossed at y = 0.7 + 0.875 * 0.6 = 1.225.
  CHECK(gates_passed(spec, full) == 3);
}

TEST_CASE("reward proxies rank what each task cares about") {
  auto di = make_env("double-integrator-1d");
  Trajectory close;
  close.states = Mat::Zero(2, 2);
  Trajectory far;
  far.states = Mat::Zero(2, 2);
  far.states(1, 0) = 2.0;
  CHECK(di->reward_proxy(close) > di->reward_proxy(far));

  auto uni = make_env("unicycle");
  Trajectory forward;
  forward.states = Mat::Zero(2, 5);
  forward.states(1, 0) = 1.5;
  CHECK(uni->reward_proxy(forward) == doctest::Approx(1.5));
}

TEST_CASE("spec validation rejects malformed boxes") {
  EnvSpec spec = make_env("double-integrator-1d")->spec();
  spec.action_lo[0] = 2.0;  // above action_hi
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  EnvSpec spec2 = make_env("double-integrator-1d")->spec();
  spec2.actuated.assign(2, false);
  CHECK_THROWS_AS(spec2.validate(), std::invalid_argument);
}
