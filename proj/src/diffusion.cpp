#include "admplan/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "admplan/adam.hpp"
#include "admplan/io.hpp"

namespace admplan {

namespace {

constexpr std::uint64_t kCheckpointMagic = 0x313054504b435041ull;  // "APCKPT01"
constexpr std::uint32_t kCheckpointVersion = 1;

// Substream ids. Training items use step * batch + item, which stays far
// below the reserved blocks for any realistic run length.
constexpr std::uint64_t kEvalStreamBase = 1ull << 40;
constexpr std::uint64_t kInitStreamId = 1ull << 41;

Eigen::Index channel_count(Modality m, int ns, int na) {
  switch (m) {
    case Modality::kStates: return ns;
    case Modality::kStateActions: return ns + na;
    case Modality::kActions: return na;
  }
  throw std::logic_error("unreachable modality");
}

/// Loss mask: ones everywhere except the padded action cells of the final
/// state-action row.
Mat loss_mask(Modality m, Eigen::Index rows, int ns, int na) {
  Mat mask = Mat::Ones(rows, channel_count(m, ns, na));
  if (m == Modality::kStateActions) mask.row(rows - 1).segment(ns, na).setZero();
  return mask;
}

/// The projector kinds a modality can feed. Hull projectors need predicted
/// states; action-backed projectors need predicted actions; action-sequence
/// models admit only the action (clamp) projector.
void check_projector_modality(Modality m, const Projector& projector) {
  const auto kind = projector.kind;
  if (m == Modality::kStates &&
      (kind == Projector::Kind::kAction || kind == Projector::Kind::kStateAction))
    throw std::invalid_argument(
        "projector " + projector_kind_name(kind) + " needs predicted actions; use modality SA");
  if (m == Modality::kActions && kind != Projector::Kind::kAction)
    throw std::invalid_argument("action-sequence models only support projector PA");
  if (kind == Projector::Kind::kStateAction && projector.policy == nullptr)
    throw std::invalid_argument("projector PSA needs a correction policy");
}

void check_dataset_env(const Env& env, const Dataset& data) {
  const EnvSpec& spec = env.spec();
  if (data.env_name != spec.name || data.n_states != spec.n_states ||
      data.n_actions != spec.n_actions || data.dt != spec.dt)
    throw std::invalid_argument("dataset was generated for environment '" + data.env_name +
                                "', not '" + spec.name + "'");
}

std::vector<bool> draw_gates(const Curriculum& curriculum, double sigma, Eigen::Index n,
                             Rng& rng) {
  std::vector<bool> gates(static_cast<std::size_t>(n));
  for (auto&& g : gates) g = curriculum.draw_projection(sigma, rng);
  return gates;
}

/// Clamps the gated rows of a normalized action tensor to the action box.
int clamp_action_rows(const Env& env, const NormStats& stats, int ns, Mat& x,
                      const std::vector<bool>& gates) {
  int clamped = 0;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    if (!gates[static_cast<std::size_t>(t)]) continue;
    const Vec a = env.clamp_action(stats.denormalize_action(ns, x.row(t).transpose()));
    x.row(t) = stats.normalize_action(ns, a).transpose();
    ++clamped;
  }
  return clamped;
}

nlohmann::ordered_json finite_or_tag(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string build_config_echo(const Env& env, const Dataset& data, const TrainConfig& cfg) {
  nlohmann::ordered_json echo;
  echo["env"] = env.spec().name;
  echo["modality"] = modality_name(cfg.modality);
  echo["projector"]["kind"] = projector_kind_name(cfg.projector.kind);
  echo["projector"]["ref_weight"] = cfg.projector.ref_weight;
  echo["projector"]["action_shrink"] = cfg.projector.action_shrink;
  echo["projector"]["reduce"] = cfg.projector.reduce;
  echo["curriculum"]["sigma_min"] = finite_or_tag(cfg.curriculum.sigma_min);
  echo["curriculum"]["sigma_max"] = finite_or_tag(cfg.curriculum.sigma_max);
  echo["schedule"]["steps"] = cfg.schedule.steps;
  echo["schedule"]["sigma_max"] = cfg.schedule.sigma_max;
  echo["schedule"]["sigma_last"] = cfg.schedule.sigma_last;
  echo["schedule"]["rho"] = cfg.schedule.rho;
  echo["noise"]["log_mean"] = cfg.noise.log_mean;
  echo["noise"]["log_std"] = cfg.noise.log_std;
  echo["train"]["steps"] = cfg.steps;
  echo["train"]["batch"] = cfg.batch;
  echo["train"]["lr"] = cfg.lr;
  echo["train"]["width"] = cfg.width;
  echo["train"]["kernel"] = cfg.kernel;
  echo["train"]["sigma_features"] = cfg.sigma_features;
  echo["train"]["eval_batch"] = cfg.eval_batch;
  echo["train"]["seed"] = cfg.seed;
  echo["data"]["trajectories"] = data.trajectories.size();
  echo["data"]["horizon"] = data.horizon;
  return echo.dump(2);
}

struct EvalItem {
  Mat noisy;
  Mat target;
  Vec ctx;
  double sigma;
};

double eval_loss(const Denoiser& net, const std::vector<EvalItem>& items, const Mat& mask) {
  const double mask_sum = mask.sum();
  double total = 0.0;
  for (const EvalItem& item : items) {
    const Mat d = net.forward(item.noisy, item.sigma, item.ctx);
    total += (mask.array() * (d - item.target).array().square()).sum() / mask_sum;
  }
  return total / static_cast<double>(items.size());
}

}  // namespace

Modality modality_from_name(const std::string& name) {
  if (name == "S" || name == "s") return Modality::kStates;
  if (name == "SA" || name == "sa") return Modality::kStateActions;
  if (name == "A" || name == "a") return Modality::kActions;
  throw std::invalid_argument("unknown modality '" + name + "' (valid: S, SA, A)");
}

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::kStates: return "S";
    case Modality::kStateActions: return "SA";
    case Modality::kActions: return "A";
  }
  throw std::logic_error("unreachable modality");
}

Eigen::Index modality_channels(Modality m, int n_states, int n_actions) {
  return channel_count(m, n_states, n_actions);
}

Eigen::Index modality_rows(Modality m, int horizon) {
  return m == Modality::kActions ? horizon : horizon + 1;
}

Mat tensor_from_trajectory(const Trajectory& traj, Modality m, const NormStats& stats,
                           int n_states, int n_actions) {
  if (traj.states.rows() >= 1 && traj.states.cols() != n_states)
    throw std::invalid_argument("trajectory state width mismatch");
  if (m != Modality::kStates && !traj.actions)
    throw std::invalid_argument("modality " + modality_name(m) + " needs stored actions");
  switch (m) {
    case Modality::kStates: {
      Mat x(traj.states.rows(), n_states);
      for (Eigen::Index t = 0; t < x.rows(); ++t)
        x.row(t) = stats.normalize_state(traj.states.row(t).transpose()).transpose();
      return x;
    }
    case Modality::kStateActions: {
      const Mat& acts = *traj.actions;
      if (acts.rows() + 1 != traj.states.rows())
        throw std::invalid_argument("trajectory action rows must be horizon");
      Mat x = Mat::Zero(traj.states.rows(), n_states + n_actions);
      for (Eigen::Index t = 0; t < x.rows(); ++t)
        x.row(t).head(n_states) = stats.normalize_state(traj.states.row(t).transpose()).transpose();
      for (Eigen::Index t = 0; t < acts.rows(); ++t)
        x.row(t).segment(n_states, n_actions) =
            stats.normalize_action(n_states, acts.row(t).transpose()).transpose();
      return x;
    }
    case Modality::kActions: {
      const Mat& acts = *traj.actions;
      Mat x(acts.rows(), n_actions);
      for (Eigen::Index t = 0; t < x.rows(); ++t)
        x.row(t) = stats.normalize_action(n_states, acts.row(t).transpose()).transpose();
      return x;
    }
  }
  throw std::logic_error("unreachable modality");
}

Trajectory trajectory_from_tensor(const Mat& x, Modality m, const NormStats& stats,
                                  int n_states, int n_actions) {
  if (x.cols() != channel_count(m, n_states, n_actions))
    throw std::invalid_argument("tensor channel mismatch for modality " + modality_name(m));
  Trajectory out;
  out.admissible = false;
  switch (m) {
    case Modality::kStates: {
      out.states.resize(x.rows(), n_states);
      for (Eigen::Index t = 0; t < x.rows(); ++t)
        out.states.row(t) = stats.denormalize_state(x.row(t).transpose()).transpose();
      return out;
    }
    case Modality::kStateActions: {
      out.states.resize(x.rows(), n_states);
      Mat acts(x.rows() - 1, n_actions);
      for (Eigen::Index t = 0; t < x.rows(); ++t)
        out.states.row(t) =
            stats.denormalize_state(x.row(t).head(n_states).transpose()).transpose();
      for (Eigen::Index t = 0; t + 1 < x.rows(); ++t)
        acts.row(t) =
            stats.denormalize_action(n_states, x.row(t).segment(n_states, n_actions).transpose())
                .transpose();
      out.actions = std::move(acts);
      return out;
    }
    case Modality::kActions: {
      out.states.resize(0, n_states);
      Mat acts(x.rows(), n_actions);
      for (Eigen::Index t = 0; t < x.rows(); ++t)
        acts.row(t) = stats.denormalize_action(n_states, x.row(t).transpose()).transpose();
      out.actions = std::move(acts);
      return out;
    }
  }
  throw std::logic_error("unreachable modality");
}

Mat denoise_step(const Mat& x, const Mat& denoised, double sigma, double sigma_next) {
  if (!(sigma > 0.0)) throw std::invalid_argument("denoise_step needs sigma > 0");
  if (!(sigma_next >= 0.0) || !(sigma_next < sigma))
    throw std::invalid_argument("denoise_step needs sigma > sigma_next >= 0");
  if (x.rows() != denoised.rows() || x.cols() != denoised.cols())
    throw std::invalid_argument("denoise_step shape mismatch");
  if (sigma_next == 0.0) return denoised;
  const double keep = sigma_next / sigma;
  return keep * x + (1.0 - keep) * denoised;
}

void TrainConfig::validate() const {
  if (steps < 0 || batch < 1 || eval_batch < 1) throw std::invalid_argument("bad train sizes");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (width < 1 || kernel < 1 || kernel % 2 == 0 || sigma_features < 2)
    throw std::invalid_argument("bad network dims");
  if (!(noise.log_std >= 0.0)) throw std::invalid_argument("noise log_std must be >= 0");
  schedule.validate();
  curriculum.validate();
}

void SampleConfig::validate() const {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (curriculum) curriculum->validate();
}

Projector Checkpoint::projector() const {
  Projector p;
  p.kind = projector_kind;
  p.ref_weight = ref_weight;
  p.action_shrink = action_shrink;
  p.reduce = reduce;
  if (projector_kind == Projector::Kind::kStateAction) {
    if (!correction)
      throw std::runtime_error("checkpoint has a PSA projector but no embedded correction policy");
    p.policy = &*correction;
  }
  return p;
}

void Checkpoint::check_env(const Env& env) const {
  const EnvSpec& spec = env.spec();
  if (env_name != spec.name || n_states != spec.n_states || n_actions != spec.n_actions ||
      dt != spec.dt || integrator != spec.integrator)
    throw std::invalid_argument("checkpoint was trained for environment '" + env_name +
                                "', not '" + spec.name + "'");
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  io::Writer w;
  w.u64(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(ckpt.env_name);
  w.u32(static_cast<std::uint32_t>(ckpt.n_states));
  w.u32(static_cast<std::uint32_t>(ckpt.n_actions));
  w.f64(ckpt.dt);
  w.u32(static_cast<std::uint32_t>(ckpt.horizon));
  w.u8(static_cast<std::uint8_t>(ckpt.integrator));
  w.u8(static_cast<std::uint8_t>(ckpt.modality));
  w.u32(static_cast<std::uint32_t>(ckpt.schedule.steps));
  w.f64(ckpt.schedule.sigma_max);
  w.f64(ckpt.schedule.sigma_last);
  w.f64(ckpt.schedule.rho);
  w.f64(ckpt.curriculum.sigma_min);
  w.f64(ckpt.curriculum.sigma_max);
  w.u8(static_cast<std::uint8_t>(ckpt.projector_kind));
  w.f64(ckpt.ref_weight);
  w.f64(ckpt.action_shrink);
  w.u8(ckpt.reduce ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(ckpt.stats.mean.size()));
  w.vec(ckpt.stats.mean);
  w.vec(ckpt.stats.scale);
  w.u32(static_cast<std::uint32_t>(ckpt.net.channels));
  w.u32(static_cast<std::uint32_t>(ckpt.net.ctx_dim));
  w.u32(static_cast<std::uint32_t>(ckpt.net.width));
  w.u32(static_cast<std::uint32_t>(ckpt.net.kernel));
  w.u32(static_cast<std::uint32_t>(ckpt.net.sigma_features));
  w.u64(static_cast<std::uint64_t>(ckpt.params.size()));
  w.vec(ckpt.params);
  w.u8(ckpt.correction ? 1 : 0);
  if (ckpt.correction) policy_write_fields(w, *ckpt.correction);
  w.u64(ckpt.seed);
  w.u32(static_cast<std::uint32_t>(ckpt.train_steps));
  w.f64(ckpt.loss_initial);
  w.f64(ckpt.loss_final);
  w.u8(ckpt.aborted ? 1 : 0);
  w.str(ckpt.config_echo);
  io::atomic_write(path, w.buffer());
}

Checkpoint load_checkpoint(const std::string& path) {
  io::Reader r(io::read_file(path));
  if (r.u64() != kCheckpointMagic)
    throw std::runtime_error(path + ": not a checkpoint file");
  if (r.u32() != kCheckpointVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version");
  Checkpoint c;
  c.env_name = r.str();
  c.n_states = static_cast<int>(r.u32());
  c.n_actions = static_cast<int>(r.u32());
  c.dt = r.f64();
  c.horizon = static_cast<int>(r.u32());
  const std::uint8_t integrator = r.u8();
  if (integrator > 1) throw std::runtime_error(path + ": bad integrator tag");
  c.integrator = static_cast<Integrator>(integrator);
  const std::uint8_t modality = r.u8();
  if (modality > 2) throw std::runtime_error(path + ": bad modality tag");
  c.modality = static_cast<Modality>(modality);
  c.schedule.steps = static_cast<int>(r.u32());
  c.schedule.sigma_max = r.f64();
  c.schedule.sigma_last = r.f64();
  c.schedule.rho = r.f64();
  c.curriculum.sigma_min = r.f64();
  c.curriculum.sigma_max = r.f64();
  const std::uint8_t kind = r.u8();
  if (kind > 3) throw std::runtime_error(path + ": bad projector tag");
  c.projector_kind = static_cast<Projector::Kind>(kind);
  c.ref_weight = r.f64();
  c.action_shrink = r.f64();
  c.reduce = r.u8() != 0;
  const Eigen::Index n_stats = static_cast<Eigen::Index>(r.u32());
  c.stats.mean = r.vec(n_stats);
  c.stats.scale = r.vec(n_stats);
  c.net.channels = static_cast<int>(r.u32());
  c.net.ctx_dim = static_cast<int>(r.u32());
  c.net.width = static_cast<int>(r.u32());
  c.net.kernel = static_cast<int>(r.u32());
  c.net.sigma_features = static_cast<int>(r.u32());
  c.params = r.vec(static_cast<Eigen::Index>(r.u64()));
  if (r.u8() != 0) c.correction = policy_read_fields(r);
  c.seed = r.u64();
  c.train_steps = static_cast<int>(r.u32());
  c.loss_initial = r.f64();
  c.loss_final = r.f64();
  c.aborted = r.u8() != 0;
  c.config_echo = r.str();
  if (!r.exhausted()) throw std::runtime_error(path + ": trailing bytes");
  if (c.params.size() != c.net.param_count())
    throw std::runtime_error(path + ": parameter count mismatch");
  return c;
}

Checkpoint train(const Env& env, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  check_dataset_env(env, data);
  if (data.trajectories.empty()) throw std::invalid_argument("training needs trajectories");
  const EnvSpec& spec = env.spec();
  const int ns = spec.n_states, na = spec.n_actions;
  if (!cfg.curriculum.is_off()) {
    check_projector_modality(cfg.modality, cfg.projector);
    if (cfg.projector.kind == Projector::Kind::kStateAction &&
        cfg.projector.policy->env_name != spec.name)
      throw std::invalid_argument("correction policy was trained for environment '" +
                                  cfg.projector.policy->env_name + "', not '" + spec.name + "'");
  }

  DenoiserConfig netcfg;
  netcfg.channels = static_cast<int>(channel_count(cfg.modality, ns, na));
  netcfg.ctx_dim = cfg.modality == Modality::kActions ? ns : 0;
  netcfg.width = cfg.width;
  netcfg.kernel = cfg.kernel;
  netcfg.sigma_features = cfg.sigma_features;

  const Rng root(cfg.seed);
  Denoiser net(netcfg, root.substream(kInitStreamId).seed());

  // Fixed evaluation batch: deterministic denoising loss used for the
  // loss_initial/loss_final bookkeeping. Masks only depend on row counts,
  // which the dataset keeps uniform per generation run.
  const Mat mask = loss_mask(cfg.modality, modality_rows(cfg.modality, data.horizon), ns, na);
  const double mask_sum = mask.sum();
  const std::size_t n_traj = data.trajectories.size();
  std::vector<EvalItem> eval_items;
  eval_items.reserve(static_cast<std::size_t>(cfg.eval_batch));
  for (int j = 0; j < cfg.eval_batch; ++j) {
    Rng erng = root.substream(kEvalStreamBase + static_cast<std::uint64_t>(j));
    const Trajectory& traj = data.trajectories[erng.index(n_traj)];
    EvalItem item;
    item.target = tensor_from_trajectory(traj, cfg.modality, data.stats, ns, na);
    item.sigma = cfg.noise.sample(erng);
    item.noisy = item.target;
    for (Eigen::Index t = 0; t < item.noisy.rows(); ++t)
      for (Eigen::Index ch = 0; ch < item.noisy.cols(); ++ch)
        item.noisy(t, ch) += item.sigma * erng.normal();
    if (cfg.modality == Modality::kActions)
      item.ctx = data.stats.normalize_state(traj.states.row(0).transpose());
    eval_items.push_back(std::move(item));
  }
  const double loss_initial = eval_loss(net, eval_items, mask);

  Adam opt(net.params().size(), cfg.lr);
  Vec grad(net.params().size());
  Vec last_good = net.params();
  std::string trace = "step,loss,sigma_mean,projection_fraction\n";
  bool aborted = false;
  int performed = 0;

  for (int step = 0; step < cfg.steps; ++step) {
    grad.setZero();
    double batch_loss = 0.0;
    double sigma_sum = 0.0;
    long projected = 0, gated = 0;
    for (int i = 0; i < cfg.batch; ++i) {
      Rng irng = root.substream(static_cast<std::uint64_t>(step) *
                                    static_cast<std::uint64_t>(cfg.batch) +
                                static_cast<std::uint64_t>(i));
      const Trajectory& traj = data.trajectories[irng.index(n_traj)];
      const Mat target = tensor_from_trajectory(traj, cfg.modality, data.stats, ns, na);
      const double sigma = cfg.noise.sample(irng);
      sigma_sum += sigma;
      Mat noisy = target;
      for (Eigen::Index t = 0; t < noisy.rows(); ++t)
        for (Eigen::Index ch = 0; ch < noisy.cols(); ++ch) noisy(t, ch) += sigma * irng.normal();
      Vec ctx;
      if (cfg.modality == Modality::kActions)
        ctx = data.stats.normalize_state(traj.states.row(0).transpose());

      Denoiser::Cache cache;
      const Mat denoised = net.forward(noisy, sigma, ctx, cache);

      // Curriculum-gated admissibility projection of the prediction, in
      // physical space. Gradients pass straight through the projection, so
      // the simulator stays outside the differentiated graph.
      Mat projected_tensor = denoised;
      if (!cfg.curriculum.is_off()) {
        const Eigen::Index h =
            cfg.modality == Modality::kActions ? denoised.rows() : denoised.rows() - 1;
        const std::vector<bool> gates = draw_gates(cfg.curriculum, sigma, h, irng);
        const bool any = std::find(gates.begin(), gates.end(), true) != gates.end();
        gated += h;
        if (any && cfg.modality == Modality::kActions) {
          projected += clamp_action_rows(env, data.stats, ns, projected_tensor, gates);
        } else if (any) {
          const Trajectory pred =
              trajectory_from_tensor(denoised, cfg.modality, data.stats, ns, na);
          std::optional<Trajectory> reference;
          if (cfg.projector.kind == Projector::Kind::kStateRef) reference = traj;
          const ProjectedTrajectory pt = project_trajectory(
              env, pred, cfg.projector,
              [&gates](Eigen::Index t) { return gates[static_cast<std::size_t>(t)]; }, reference);
          projected += static_cast<long>(std::count(pt.projected.begin(), pt.projected.end(), true));
          projected_tensor = tensor_from_trajectory(pt.traj, cfg.modality, data.stats, ns, na);
        }
      }

      const Mat diff = (mask.array() * (projected_tensor - target).array()).matrix();
      batch_loss += diff.array().square().sum() / mask_sum;
      const Mat dy = (2.0 / (mask_sum * static_cast<double>(cfg.batch))) * diff;
      net.backward(cache, dy, grad);
    }
    batch_loss /= static_cast<double>(cfg.batch);

    char line[192];
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", step, batch_loss,
                  sigma_sum / static_cast<double>(cfg.batch),
                  gated > 0 ? static_cast<double>(projected) / static_cast<double>(gated) : 0.0);
    trace += line;

    if (!std::isfinite(batch_loss)) {
      net.params() = last_good;
      aborted = true;
      break;
    }
    last_good = net.params();
    opt.step(net.params(), grad);
    ++performed;
  }

  if (!cfg.loss_trace_path.empty()) io::atomic_write(cfg.loss_trace_path, trace);

  Checkpoint ckpt;
  ckpt.env_name = spec.name;
  ckpt.n_states = ns;
  ckpt.n_actions = na;
  ckpt.dt = spec.dt;
  ckpt.horizon = data.horizon;
  ckpt.integrator = spec.integrator;
  ckpt.modality = cfg.modality;
  ckpt.schedule = cfg.schedule;
  ckpt.curriculum = cfg.curriculum;
  ckpt.projector_kind = cfg.projector.kind;
  ckpt.ref_weight = cfg.projector.ref_weight;
  ckpt.action_shrink = cfg.projector.action_shrink;
  ckpt.reduce = cfg.projector.reduce;
  ckpt.stats = data.stats;
  ckpt.net = netcfg;
  ckpt.params = net.params();
  if (cfg.projector.kind == Projector::Kind::kStateAction && cfg.projector.policy)
    ckpt.correction = *cfg.projector.policy;
  ckpt.seed = cfg.seed;
  ckpt.train_steps = performed;
  ckpt.loss_initial = loss_initial;
  ckpt.loss_final = eval_loss(net, eval_items, mask);
  ckpt.aborted = aborted;
  ckpt.config_echo = build_config_echo(env, data, cfg);
  return ckpt;
}

std::vector<Sample> sample(const Env& env, const Checkpoint& ckpt, const Vec& s0,
                           const SampleConfig& cfg) {
  cfg.validate();
  ckpt.check_env(env);
  const EnvSpec& spec = env.spec();
  const int ns = spec.n_states, na = spec.n_actions;
  if (s0.size() != ns) throw std::invalid_argument("initial state dimension mismatch");
  if (!s0.allFinite()) throw std::invalid_argument("initial state must be finite");

  const Curriculum curriculum = cfg.curriculum ? *cfg.curriculum : ckpt.curriculum;
  Projector projector = cfg.projector ? *cfg.projector : ckpt.projector();
  if (projector.kind == Projector::Kind::kStateAction && projector.policy == nullptr) {
    if (!ckpt.correction)
      throw std::invalid_argument("PSA sampling needs a correction policy");
    projector.policy = &*ckpt.correction;
  }
  if (!curriculum.is_off()) check_projector_modality(ckpt.modality, projector);

  const std::vector<double> sigmas = ckpt.schedule.sigmas();
  const Modality m = ckpt.modality;
  const Eigen::Index rows = modality_rows(m, ckpt.horizon);
  const Eigen::Index channels = channel_count(m, ns, na);
  const Vec s0n = ckpt.stats.normalize_state(s0);
  const Denoiser net(ckpt.net, ckpt.params);

  const Rng root(cfg.seed);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(cfg.n_samples));
  for (int k = 0; k < cfg.n_samples; ++k) {
    Rng srng = root.substream(static_cast<std::uint64_t>(k));
    Mat x(rows, channels);
    for (Eigen::Index t = 0; t < rows; ++t)
      for (Eigen::Index ch = 0; ch < channels; ++ch) x(t, ch) = sigmas[0] * srng.normal();

    bool final_all = false;
    std::optional<ProjectedTrajectory> final_pass;
    for (std::size_t i = 0; i + 1 < sigmas.size(); ++i) {
      const Vec ctx = m == Modality::kActions ? s0n : Vec();
      const Mat denoised = net.forward(x, sigmas[i], ctx);
      x = denoise_step(x, denoised, sigmas[i], sigmas[i + 1]);
      if (m != Modality::kActions) x.row(0).head(ns) = s0n.transpose();

      const bool last = i + 2 == sigmas.size();
      if (curriculum.is_off()) continue;
      const Eigen::Index h = m == Modality::kActions ? rows : rows - 1;
      const std::vector<bool> gates = draw_gates(curriculum, sigmas[i], h, srng);
      const bool any = std::find(gates.begin(), gates.end(), true) != gates.end();
      const bool all = std::find(gates.begin(), gates.end(), false) == gates.end();
      if (last) final_all = all;
      if (!any) continue;
      if (m == Modality::kActions) {
        clamp_action_rows(env, ckpt.stats, ns, x, gates);
        continue;
      }
      Trajectory pred = trajectory_from_tensor(x, m, ckpt.stats, ns, na);
      pred.states.row(0) = s0.transpose();
      std::optional<Trajectory> reference;
      if (projector.kind == Projector::Kind::kStateRef) reference = pred;
      ProjectedTrajectory pass = project_trajectory(
          env, pred, projector,
          [&gates](Eigen::Index t) { return gates[static_cast<std::size_t>(t)]; }, reference);
      x = tensor_from_trajectory(pass.traj, m, ckpt.stats, ns, na);
      x.row(0).head(ns) = s0n.transpose();
      if (last) final_pass = std::move(pass);
    }

    Sample sample_out;
    if (m == Modality::kActions) {
      const Trajectory decoded = trajectory_from_tensor(x, m, ckpt.stats, ns, na);
      sample_out.traj = env.rollout(s0, *decoded.actions);
      sample_out.fully_projected = true;
    } else if (final_all && final_pass) {
      // The final iteration projected every transition: return the physical
      // projection output verbatim so action-backed trajectories re-simulate
      // bit-exactly.
      sample_out.traj = std::move(final_pass->traj);
      sample_out.fully_projected = true;
    } else {
      sample_out.traj = trajectory_from_tensor(x, m, ckpt.stats, ns, na);
      sample_out.traj.states.row(0) = s0.transpose();
    }
    if (final_pass) {
      double total = 0.0;
      long count = 0;
      for (std::size_t t = 0; t < final_pass->projected.size(); ++t) {
        if (!final_pass->projected[t]) continue;
        total += final_pass->hull_residuals[static_cast<Eigen::Index>(t)];
        ++count;
      }
      if (count > 0) sample_out.hull_residual_mean = total / static_cast<double>(count);
    }
    out.push_back(std::move(sample_out));
  }
  return out;
}

std::size_t select_best(const Env& env, const std::vector<Trajectory>& batch,
                        const std::string& metric) {
  if (batch.empty()) throw std::invalid_argument("select_best needs a non-empty batch");
  auto score = [&](const Trajectory& traj) -> double {
    if (metric == "survival-steps") return static_cast<double>(survival_steps(env, traj.states));
    if (metric == "reward-proxy") return env.reward_proxy(traj);
    throw std::invalid_argument("unknown metric '" + metric +
                                "' (valid: survival-steps, reward-proxy)");
  };
  std::size_t best = 0;
  double best_score = score(batch[0]);
  for (std::size_t i = 1; i < batch.size(); ++i) {
    const double s = score(batch[i]);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

}  // namespace admplan
