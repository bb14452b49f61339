#include <doctest.h>

#include <cmath>

#include "admplan/denoiser.hpp"
#include "admplan/rng.hpp"

using namespace admplan;

namespace {

DenoiserConfig small_config(int ctx_dim) {
  DenoiserConfig cfg;
  cfg.channels = 3;
  cfg.ctx_dim = ctx_dim;
  cfg.width = 8;
  cfg.kernel = 3;
  cfg.sigma_features = 6;
  return cfg;
}

Mat random_input(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Mat x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

// Scalar loss sum(dy .* forward(x)) whose parameter gradient backward() must
// reproduce; dy plays the role of a fixed cotangent.
double probe_loss(const Denoiser& net, const Mat& x, double sigma, const Vec& ctx,
                  const Mat& dy) {
  return (dy.array() * net.forward(x, sigma, ctx).array()).sum();
}

}  // namespace

TEST_CASE("config validation and parameter counting") {
  DenoiserConfig cfg = small_config(0);
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.param_count() > 0);

  DenoiserConfig even = cfg;
  even.kernel = 4;
  CHECK_THROWS_AS(even.validate(), std::invalid_argument);
  DenoiserConfig empty = cfg;
  empty.channels = 0;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
  DenoiserConfig nosig = cfg;
  nosig.sigma_features = 0;
  CHECK_THROWS_AS(nosig.validate(), std::invalid_argument);
  nosig.sigma_features = 1;  // no room for the two monotone tail features
  CHECK_THROWS_AS(nosig.validate(), std::invalid_argument);

  // Context features enlarge exactly the first-layer block.
  DenoiserConfig with_ctx = small_config(4);
  CHECK(with_ctx.param_count() == cfg.param_count() + 4 * cfg.width);

  const Denoiser net(cfg, 1);
  CHECK(net.params().size() == cfg.param_count());
  CHECK_THROWS_AS(Denoiser(cfg, Vec::Zero(cfg.param_count() - 1)), std::invalid_argument);
}

TEST_CASE("initialization is seed-deterministic") {
  const DenoiserConfig cfg = small_config(2);
  const Denoiser a(cfg, 7), b(cfg, 7), c(cfg, 8);
  CHECK((a.params() - b.params()).norm() == 0.0);
  CHECK((a.params() - c.params()).norm() > 0.0);
  CHECK(a.params().allFinite());
}

TEST_CASE("sigma embedding is finite, deterministic, and separates noise levels") {
  const Vec e1 = Denoiser::sigma_embedding(0.002, 8);
  const Vec e2 = Denoiser::sigma_embedding(80.0, 8);
  REQUIRE(e1.size() == 8);
  CHECK(e1.allFinite());
  CHECK(e2.allFinite());
  CHECK((e1 - e2).norm() > 0.1);
  CHECK((Denoiser::sigma_embedding(0.002, 8) - e1).norm() == 0.0);
  // The monotone features make even far-apart large sigmas distinguishable.
  CHECK((Denoiser::sigma_embedding(40.0, 8) - e2).norm() > 1e-6);
}

TEST_CASE("forward output has the input shape and responds to sigma and context") {
  const DenoiserConfig cfg = small_config(2);
  const Denoiser net(cfg, 3);
  Rng rng(5);
  const Mat x = random_input(rng, 7, 3);
  Vec ctx(2);
  ctx << 0.4, -1.0;
  const Mat y = net.forward(x, 1.0, ctx);
  CHECK(y.rows() == 7);
  CHECK(y.cols() == 3);
  CHECK(y.allFinite());
  const Mat y2 = net.forward(x, 2.0, ctx);
  CHECK((y - y2).norm() > 0.0);
  Vec ctx2(2);
  ctx2 << -0.4, 1.0;
  CHECK((y - net.forward(x, 1.0, ctx2)).norm() > 0.0);

  const Denoiser plain(small_config(0), 3);
  CHECK_NOTHROW(plain.forward(x, 1.0));
  CHECK_THROWS_AS(net.forward(x, 1.0), std::invalid_argument);  // missing ctx
  CHECK_THROWS_AS(net.forward(random_input(rng, 7, 2), 1.0, ctx), std::invalid_argument);
}

TEST_CASE("temporal mixing respects the kernel footprint") {
  const DenoiserConfig cfg = small_config(0);  // kernel 3: one-step neighborhood
  const Denoiser net(cfg, 11);
  Rng rng(13);
  const Mat x = random_input(rng, 9, 3);
  Mat bumped = x;
  bumped(8, 1) += 1.0;  // last row
  const Mat y = net.forward(x, 0.5);
  const Mat yb = net.forward(bumped, 0.5);
  // Rows further than (kernel/2) * layers = 2 steps from the bump are
  // untouched by two stacked kernel-3 convolutions.
  for (Eigen::Index t = 0; t <= 5; ++t) CHECK((y.row(t) - yb.row(t)).norm() == 0.0);
  CHECK((y.row(8) - yb.row(8)).norm() > 0.0);
  CHECK((y.row(7) - yb.row(7)).norm() > 0.0);
}

TEST_CASE("backward matches central finite differences") {
  for (const int ctx_dim : {0, 2}) {
    const DenoiserConfig cfg = small_config(ctx_dim);
    const Denoiser net(cfg, 17);
    Rng rng(19);
    const Mat x = random_input(rng, 6, 3);
    const Mat dy = random_input(rng, 6, 3);
    Vec ctx;
    if (ctx_dim > 0) {
      ctx = Vec(ctx_dim);
      for (int j = 0; j < ctx_dim; ++j) ctx[j] = rng.normal();
    }
    const double sigma = 0.7;

    Denoiser::Cache cache;
    net.forward(x, sigma, ctx, cache);
    Vec grad = Vec::Zero(cfg.param_count());
    net.backward(cache, dy, grad);

    // Probe a deterministic spread of parameters across all blocks.
    const Eigen::Index n = cfg.param_count();
    const Eigen::Index stride = std::max<Eigen::Index>(1, n / 60);
    Vec params = net.params();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; i += stride) {
      const double h = 1e-5;
      Vec bumped = params;
      bumped[i] = params[i] + h;
      const double up = probe_loss(Denoiser(cfg, bumped), x, sigma, ctx, dy);
      bumped[i] = params[i] - h;
      const double dn = probe_loss(Denoiser(cfg, bumped), x, sigma, ctx, dy);
      const double fd = (up - dn) / (2.0 * h);
      const double denom = std::max({1.0, std::abs(fd), std::abs(grad[i])});
      worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("backward accumulates rather than overwriting") {
  const DenoiserConfig cfg = small_config(0);
  const Denoiser net(cfg, 23);
  Rng rng(29);
  const Mat x = random_input(rng, 5, 3);
  const Mat dy = random_input(rng, 5, 3);
  Denoiser::Cache cache;
  net.forward(x, 0.9, Vec(), cache);
  Vec once = Vec::Zero(cfg.param_count());
  net.backward(cache, dy, once);
  Vec twice = Vec::Zero(cfg.param_count());
  net.backward(cache, dy, twice);
  net.backward(cache, dy, twice);
  CHECK((twice - 2.0 * once).norm() <= 1e-12 * std::max(1.0, once.norm()));
}

TEST_CASE("gated skip path feeds the input through at the parameter level") {
  // Zero all parameters except the skip matrix and open the gate: the output
  // reduces to sigmoid(bg) * x * Ws^T, checkable by hand with Ws = I.
  DenoiserConfig cfg = small_config(0);
  const Denoiser ref(cfg, 1);
  Vec params = Vec::Zero(cfg.param_count());
  // The skip block Ws (channels x channels) sits right before wg and bg at
  // the tail of the layout; bg is the last parameter.
  const Eigen::Index c = cfg.channels;
  const Eigen::Index ws_start = cfg.param_count() - 1 - cfg.sigma_features - c * c;
  for (Eigen::Index i = 0; i < c; ++i) params[ws_start + i * c + i] = 1.0;
  params[cfg.param_count() - 1] = 50.0;  // gate saturates to 1
  const Denoiser net(cfg, params);
  Rng rng(31);
  const Mat x = random_input(rng, 4, 3);
  const Mat y = net.forward(x, 1.0);
  CHECK((y - x).norm() <= 1e-12);
}
