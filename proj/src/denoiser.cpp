#include "admplan/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace admplan {

namespace {

/// Flat parameter layout. All matrices are column-major maps into one vector.
struct Offsets {
  Eigen::Index w1, wf1, wc1, b1;
  Eigen::Index w2, wf2, b2;
  Eigen::Index wo, bo, ws, wg, bg;
  Eigen::Index total;

  explicit Offsets(const DenoiserConfig& c) {
    const Eigen::Index d = c.width, ch = c.channels, k = c.kernel, e = c.sigma_features,
                       cc = c.ctx_dim;
    Eigen::Index p = 0;
    w1 = p;
    p += d * (k * ch);
    wf1 = p;
    p += d * e;
    wc1 = p;
    p += d * cc;
    b1 = p;
    p += d;
    w2 = p;
    p += d * (k * d);
    wf2 = p;
    p += d * e;
    b2 = p;
    p += d;
    wo = p;
    p += ch * d;
    bo = p;
    p += ch;
    ws = p;
    p += ch * ch;
    wg = p;
    p += e;
    bg = p;
    p += 1;
    total = p;
  }
};

using CMap = Eigen::Map<const Mat>;
using CVMap = Eigen::Map<const Vec>;
using MMap = Eigen::Map<Mat>;
using VMap = Eigen::Map<Vec>;

/// Stacks the temporal window around each timestep into one row (zero padded
/// at the sequence ends), turning the shared-block convolution into a GEMM.
Mat im2col(const Mat& x, int kernel) {
  const Eigen::Index t_len = x.rows(), ch = x.cols();
  const int half = kernel / 2;
  Mat u = Mat::Zero(t_len, kernel * ch);
  for (int k = 0; k < kernel; ++k) {
    const Eigen::Index shift = k - half;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min<Eigen::Index>(t_len, t_len - shift);
    if (lo >= hi) continue;
    u.block(lo, k * ch, hi - lo, ch) = x.block(lo + shift, 0, hi - lo, ch);
  }
  return u;
}

/// Transpose of im2col: scatters window-stacked gradients back per timestep.
Mat col2im(const Mat& du, Eigen::Index t_len, Eigen::Index ch, int kernel) {
  const int half = kernel / 2;
  Mat dx = Mat::Zero(t_len, ch);
  for (int k = 0; k < kernel; ++k) {
    const Eigen::Index shift = k - half;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min<Eigen::Index>(t_len, t_len - shift);
    if (lo >= hi) continue;
    dx.block(lo + shift, 0, hi - lo, ch) += du.block(lo, k * ch, hi - lo, ch);
  }
  return dx;
}

}  // namespace

void DenoiserConfig::validate() const {
  if (channels < 1) throw std::invalid_argument("denoiser needs at least one channel");
  if (ctx_dim < 0 || width < 1) throw std::invalid_argument("bad denoiser dims");
  if (sigma_features < 2)
    throw std::invalid_argument("sigma embedding needs at least its two monotone features");
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("kernel must be odd");
}

Eigen::Index DenoiserConfig::param_count() const {
  validate();
  return Offsets(*this).total;
}

Denoiser::Denoiser(DenoiserConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  const Offsets off(cfg_);
  params_.resize(off.total);
  Rng rng(init_seed);
  auto fill = [&rng, this](Eigen::Index start, Eigen::Index n, Eigen::Index fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < n; ++i) params_[start + i] = rng.uniform(-s, s);
  };
  const Eigen::Index d = cfg_.width, ch = cfg_.channels, k = cfg_.kernel,
                     e = cfg_.sigma_features, cc = cfg_.ctx_dim;
  fill(off.w1, d * k * ch, k * ch);
  fill(off.wf1, d * e, e);
  if (cc > 0) fill(off.wc1, d * cc, cc);
  params_.segment(off.b1, d).setZero();
  fill(off.w2, d * k * d, k * d);
  fill(off.wf2, d * e, e);
  params_.segment(off.b2, d).setZero();
  fill(off.wo, ch * d, d);
  params_.segment(off.bo, ch).setZero();
  fill(off.ws, ch * ch, ch);
  fill(off.wg, e, e);
  params_[off.bg] = 0.0;
}

Denoiser::Denoiser(DenoiserConfig cfg, Vec params) : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  if (params_.size() != cfg_.param_count())
    throw std::invalid_argument("denoiser parameter count mismatch");
}

Vec Denoiser::sigma_embedding(double sigma, int n_features) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma embedding needs sigma > 0");
  Vec f(n_features);
  const double ls = std::log(sigma);
  const int pairs = (n_features - 2) / 2;
  double freq = 0.5;
  Eigen::Index i = 0;
  for (int p = 0; p < pairs; ++p) {
    f[i++] = std::sin(freq * ls);
    f[i++] = std::cos(freq * ls);
    freq *= 2.0;
  }
  while (i < n_features - 2) f[i++] = 0.0;
  f[i++] = 0.25 * ls;
  f[i++] = 1.0 / (1.0 + sigma);
  return f;
}

Mat Denoiser::forward(const Mat& x, double sigma, const Vec& ctx) const {
  Cache cache;
  return forward(x, sigma, ctx, cache);
}

Mat Denoiser::forward(const Mat& x, double sigma, const Vec& ctx, Cache& cache) const {
  if (x.cols() != cfg_.channels) throw std::invalid_argument("denoiser channel mismatch");
  if (ctx.size() != cfg_.ctx_dim) throw std::invalid_argument("denoiser context mismatch");
  const Offsets off(cfg_);
  const Eigen::Index d = cfg_.width, ch = cfg_.channels, k = cfg_.kernel,
                     e = cfg_.sigma_features, cc = cfg_.ctx_dim;
  const double* p = params_.data();
  CMap w1(p + off.w1, d, k * ch), wf1(p + off.wf1, d, e), w2(p + off.w2, d, k * d),
      wf2(p + off.wf2, d, e), wo(p + off.wo, ch, d), ws(p + off.ws, ch, ch);
  CVMap b1(p + off.b1, d), b2(p + off.b2, d), bo(p + off.bo, ch), wg(p + off.wg, e);

  cache.x = x;
  cache.ctx = ctx;
  cache.feats = sigma_embedding(sigma, cfg_.sigma_features);

  Vec base1 = wf1 * cache.feats + b1;
  if (cc > 0) {
    CMap wc1(p + off.wc1, d, cc);
    base1 += wc1 * ctx;
  }
  cache.u1 = im2col(x, cfg_.kernel);
  cache.h1 = ((cache.u1 * w1.transpose()).rowwise() + base1.transpose()).array().tanh();

  const Vec base2 = wf2 * cache.feats + b2;
  cache.u2 = im2col(cache.h1, cfg_.kernel);
  cache.h2 = ((cache.u2 * w2.transpose()).rowwise() + base2.transpose()).array().tanh();

  cache.gate = 1.0 / (1.0 + std::exp(-(wg.dot(cache.feats) + params_[off.bg])));
  cache.skip = x * ws.transpose();

  Mat y = cache.h2 * wo.transpose() + cache.gate * cache.skip;
  y.rowwise() += bo.transpose();
  return y;
}

void Denoiser::backward(const Cache& cache, const Mat& dy, Vec& grad) const {
  const Offsets off(cfg_);
  const Eigen::Index d = cfg_.width, ch = cfg_.channels, k = cfg_.kernel,
                     e = cfg_.sigma_features, cc = cfg_.ctx_dim;
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
  const double* p = params_.data();
  CMap w1(p + off.w1, d, k * ch), w2(p + off.w2, d, k * d), wo(p + off.wo, ch, d);
  double* g = grad.data();
  MMap dw1(g + off.w1, d, k * ch), dwf1(g + off.wf1, d, e), dw2(g + off.w2, d, k * d),
      dwf2(g + off.wf2, d, e), dwo(g + off.wo, ch, d), dws(g + off.ws, ch, ch);
  VMap db1(g + off.b1, d), db2(g + off.b2, d), dbo(g + off.bo, ch), dwg(g + off.wg, e);

  dwo += dy.transpose() * cache.h2;
  dbo += dy.colwise().sum().transpose();

  const double dgate = (dy.array() * cache.skip.array()).sum();
  dws += cache.gate * (dy.transpose() * cache.x);
  const double sig_grad = dgate * cache.gate * (1.0 - cache.gate);
  dwg += sig_grad * cache.feats;
  grad[off.bg] += sig_grad;

  const Mat dh2 = dy * wo;
  const Mat dz2 = dh2.array() * (1.0 - cache.h2.array().square());
  dw2 += dz2.transpose() * cache.u2;
  const Vec dz2_sum = dz2.colwise().sum().transpose();
  db2 += dz2_sum;
  dwf2 += dz2_sum * cache.feats.transpose();

  const Mat dh1 = col2im(dz2 * w2, cache.h1.rows(), d, k);
  const Mat dz1 = dh1.array() * (1.0 - cache.h1.array().square());
  dw1 += dz1.transpose() * cache.u1;
  const Vec dz1_sum = dz1.colwise().sum().transpose();
  db1 += dz1_sum;
  dwf1 += dz1_sum * cache.feats.transpose();
  if (cc > 0) {
    MMap dwc1(g + off.wc1, d, cc);
    dwc1 += dz1_sum * cache.ctx.transpose();
  }
}

}  // namespace admplan
