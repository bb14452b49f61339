#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "admplan/env.hpp"
#include "admplan/rng.hpp"

namespace admplan {

/// Architecture of the trajectory denoiser: two temporal-convolution layers
/// (a shared feedforward block over a window of neighboring timesteps) with a
/// sinusoidal noise-level embedding added at each layer, followed by a linear
/// readout plus a noise-gated linear skip from the input sequence.
struct DenoiserConfig {
  int channels = 0;       ///< per-timestep channels of the trajectory tensor
  int ctx_dim = 0;        ///< conditioning vector appended at every timestep
  int width = 96;
  int kernel = 5;         ///< temporal window, odd
  int sigma_features = 8;

  void validate() const;
  Eigen::Index param_count() const;
};

/// D(x; sigma): predicts the clean trajectory tensor from a noisy one.
/// Operates on normalized (z-scored) sequences, one row per timestep.
class Denoiser {
 public:
  Denoiser(DenoiserConfig cfg, std::uint64_t init_seed);
  Denoiser(DenoiserConfig cfg, Vec params);

  const DenoiserConfig& config() const { return cfg_; }
  const Vec& params() const { return params_; }
  Vec& params() { return params_; }

  /// Cached intermediate activations for one forward pass.
  struct Cache {
    Mat x, u1, h1, u2, h2, skip;
    Vec feats, ctx;
    double gate = 0.0;
  };

  Mat forward(const Mat& x, double sigma, const Vec& ctx = Vec()) const;
  Mat forward(const Mat& x, double sigma, const Vec& ctx, Cache& cache) const;

  /// Accumulates parameter gradients for the output gradient dy into `grad`
  /// (same layout and size as params()).
  void backward(const Cache& cache, const Mat& dy, Vec& grad) const;

  /// Noise-level embedding: sinusoids of ln(sigma) plus two monotone features.
  static Vec sigma_embedding(double sigma, int n_features);

 private:
  DenoiserConfig cfg_;
  Vec params_;
};

}  // namespace admplan
