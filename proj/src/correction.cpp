#include "admplan/correction.hpp"

#include <stdexcept>
#include <vector>

#include "admplan/adam.hpp"
#include "admplan/io.hpp"
#include "admplan/rng.hpp"

namespace admplan {

namespace {

constexpr std::uint64_t kPolicyMagic = 0x31304c4f50415041ull;  // "APAPOL01" reversed bytes
constexpr std::uint32_t kPolicyVersion = 1;

/// Two-hidden-layer tanh network over a flat parameter vector.
/// Layout: W1 (h x in), b1, W2 (h x h), b2, W3 (out x h), b3.
struct MlpView {
  Eigen::Map<const Mat> w1, w2, w3;
  Eigen::Map<const Vec> b1, b2, b3;

  MlpView(const Vec& p, int in, int h, int out)
      : w1(p.data(), h, in),
        w2(p.data() + h * in + h, h, h),
        w3(p.data() + h * in + h + h * h + h, out, h),
        b1(p.data() + h * in, h),
        b2(p.data() + h * in + h + h * h, h),
        b3(p.data() + h * in + h + h * h + h + out * h, out) {}
};

struct MlpCache {
  Vec x, z1, z2, y;
};

MlpCache mlp_forward(const MlpView& net, const Vec& x) {
  MlpCache c;
  c.x = x;
  c.z1 = (net.w1 * x + net.b1).array().tanh();
  c.z2 = (net.w2 * c.z1 + net.b2).array().tanh();
  c.y = net.w3 * c.z2 + net.b3;
  return c;
}

/// Accumulates parameter gradients for an output gradient dy.
void mlp_backward(const MlpView& net, const MlpCache& c, const Vec& dy, int in, int h, int out,
                  Vec& grad) {
  Eigen::Map<Mat> dw1(grad.data(), h, in);
  Eigen::Map<Vec> db1(grad.data() + h * in, h);
  Eigen::Map<Mat> dw2(grad.data() + h * in + h, h, h);
  Eigen::Map<Vec> db2(grad.data() + h * in + h + h * h, h);
  Eigen::Map<Mat> dw3(grad.data() + h * in + h + h * h + h, out, h);
  Eigen::Map<Vec> db3(grad.data() + h * in + h + h * h + h + out * h, out);

  dw3 += dy * c.z2.transpose();
  db3 += dy;
  const Vec dz2 = (net.w3.transpose() * dy).cwiseProduct((1.0 - c.z2.array().square()).matrix());
  dw2 += dz2 * c.z1.transpose();
  db2 += dz2;
  const Vec dz1 = (net.w2.transpose() * dz2).cwiseProduct((1.0 - c.z1.array().square()).matrix());
  dw1 += dz1 * c.x.transpose();
  db1 += dz1;
}

Vec init_params(int in, int h, int out, Rng& rng) {
  Vec p(CorrectionPolicy::param_count(in, out, h));
  auto fill = [&rng](double* data, Eigen::Index n, int fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < n; ++i) data[i] = rng.uniform(-s, s);
  };
  double* ptr = p.data();
  fill(ptr, h * in, in);
  ptr += h * in;
  std::fill(ptr, ptr + h, 0.0);
  ptr += h;
  fill(ptr, h * h, h);
  ptr += h * h;
  std::fill(ptr, ptr + h, 0.0);
  ptr += h;
  fill(ptr, out * h, h);
  ptr += out * h;
  std::fill(ptr, ptr + out, 0.0);
  return p;
}

struct Triplet {
  Vec s, a, s_next;
};

std::vector<Triplet> collect_triplets(const Dataset& data) {
  std::vector<Triplet> out;
  for (const Trajectory& traj : data.trajectories) {
    if (!traj.actions) continue;
    for (Eigen::Index t = 0; t < traj.actions->rows(); ++t)
      out.push_back({traj.states.row(t), traj.actions->row(t), traj.states.row(t + 1)});
  }
  if (out.empty())
    throw std::invalid_argument("correction policy training needs action-bearing trajectories");
  return out;
}

struct Sample {
  Vec input;
  Vec target;
};

Sample make_sample(const Env& env, const std::vector<Triplet>& trips, const Vec& sigma, Rng& rng) {
  const Triplet& tr = trips[rng.index(trips.size())];
  Vec da = sigma.cwiseProduct(rng.normal_vector(sigma.size()));
  const Vec a_pert = env.clamp_action(tr.a + da);
  da = a_pert - tr.a;  // effective perturbation after the box clamp
  const Vec s_pert = env.step(tr.s, a_pert);
  return {s_pert - tr.s_next, da};
}

double batch_loss(const MlpView& net, const std::vector<Sample>& batch) {
  double loss = 0.0;
  for (const Sample& s : batch) loss += (mlp_forward(net, s.input).y - s.target).squaredNorm();
  return loss / (static_cast<double>(batch.size()) * batch.front().target.size());
}

}  // namespace

Eigen::Index CorrectionPolicy::param_count(int n_states, int n_actions, int hidden) {
  return hidden * n_states + hidden + hidden * hidden + hidden + n_actions * hidden + n_actions;
}

Vec CorrectionPolicy::infer(const Vec& state_residual) const {
  if (state_residual.size() != n_states)
    throw std::invalid_argument("residual dimension mismatch");
  const MlpView net(params, n_states, hidden, n_actions);
  return mlp_forward(net, state_residual).y;
}

CorrectionPolicy train_correction_policy(const Env& env, const Dataset& data,
                                         const CorrectionTrainConfig& cfg) {
  if (cfg.steps < 0 || cfg.batch < 1) throw std::invalid_argument("bad training config");
  const EnvSpec& spec = env.spec();
  if (data.env_name != spec.name) throw std::invalid_argument("dataset/environment mismatch");

  const std::vector<Triplet> trips = collect_triplets(data);
  const Vec sigma = cfg.sigma_fraction * 0.5 * (spec.action_hi - spec.action_lo);

  CorrectionPolicy policy;
  policy.n_states = spec.n_states;
  policy.n_actions = spec.n_actions;
  policy.hidden = cfg.hidden;
  policy.env_name = spec.name;
  policy.delta_sigma = sigma;
  policy.train_steps = static_cast<std::uint64_t>(cfg.steps);
  policy.seed = cfg.seed;

  Rng root(cfg.seed);
  Rng init_rng = root.substream(1);
  policy.params = init_params(spec.n_states, cfg.hidden, spec.n_actions, init_rng);

  Rng eval_rng = root.substream(2);
  std::vector<Sample> eval_batch;
  for (int i = 0; i < 256; ++i) eval_batch.push_back(make_sample(env, trips, sigma, eval_rng));

  {
    const MlpView net(policy.params, spec.n_states, cfg.hidden, spec.n_actions);
    policy.loss_initial = batch_loss(net, eval_batch);
  }

  Adam adam(policy.params.size(), cfg.lr);
  Vec grad(policy.params.size());
  Rng train_rng = root.substream(3);
  for (int stepi = 0; stepi < cfg.steps; ++stepi) {
    grad.setZero();
    const MlpView net(policy.params, spec.n_states, cfg.hidden, spec.n_actions);
    const double norm = 1.0 / (static_cast<double>(cfg.batch) * spec.n_actions);
    for (int b = 0; b < cfg.batch; ++b) {
      const Sample s = make_sample(env, trips, sigma, train_rng);
      const MlpCache cache = mlp_forward(net, s.input);
      const Vec dy = 2.0 * norm * (cache.y - s.target);
      mlp_backward(net, cache, dy, spec.n_states, cfg.hidden, spec.n_actions, grad);
    }
    adam.step(policy.params, grad);
  }

  {
    const MlpView net(policy.params, spec.n_states, cfg.hidden, spec.n_actions);
    policy.loss_final = batch_loss(net, eval_batch);
  }
  return policy;
}

void policy_write_fields(io::Writer& w, const CorrectionPolicy& policy) {
  w.str(policy.env_name);
  w.u32(static_cast<std::uint32_t>(policy.n_states));
  w.u32(static_cast<std::uint32_t>(policy.n_actions));
  w.u32(static_cast<std::uint32_t>(policy.hidden));
  w.u32(static_cast<std::uint32_t>(policy.delta_sigma.size()));
  w.vec(policy.delta_sigma);
  w.u64(policy.train_steps);
  w.u64(policy.seed);
  w.f64(policy.loss_initial);
  w.f64(policy.loss_final);
  w.u64(static_cast<std::uint64_t>(policy.params.size()));
  w.vec(policy.params);
}

CorrectionPolicy policy_read_fields(io::Reader& r) {
  CorrectionPolicy p;
  p.env_name = r.str();
  p.n_states = static_cast<int>(r.u32());
  p.n_actions = static_cast<int>(r.u32());
  p.hidden = static_cast<int>(r.u32());
  p.delta_sigma = r.vec(static_cast<Eigen::Index>(r.u32()));
  p.train_steps = r.u64();
  p.seed = r.u64();
  p.loss_initial = r.f64();
  p.loss_final = r.f64();
  const auto n = static_cast<Eigen::Index>(r.u64());
  if (n != CorrectionPolicy::param_count(p.n_states, p.n_actions, p.hidden))
    throw std::runtime_error("correction policy parameter count mismatch");
  p.params = r.vec(n);
  return p;
}

void save_policy(const CorrectionPolicy& policy, const std::string& path) {
  io::Writer w;
  w.u64(kPolicyMagic);
  w.u32(kPolicyVersion);
  policy_write_fields(w, policy);
  io::atomic_write(path, w.buffer());
}

CorrectionPolicy load_policy(const std::string& path) {
  io::Reader r(io::read_file(path));
  if (r.u64() != kPolicyMagic) throw std::runtime_error(path + ": not a correction policy file");
  if (r.u32() != kPolicyVersion) throw std::runtime_error(path + ": unsupported policy version");
  try {
    return policy_read_fields(r);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace admplan
