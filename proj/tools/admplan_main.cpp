// admplan: command-line front end for the admissibility-projected diffusion
// planner. Subcommands cover the full pipeline: dataset generation, denoiser
// training, sampling, dataset projection, admissibility verification,
// experiment evaluation, and schedule inspection.
//
// Exit codes: 0 success, 1 usage error, 2 verification failure, 3 runtime
// failure. Option precedence is CLI flag > config file (--config) > built-in
// default; every artifact-producing subcommand echoes its resolved
// configuration into the artifact header.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "admplan/correction.hpp"
#include "admplan/dataset.hpp"
#include "admplan/diffusion.hpp"
#include "admplan/env.hpp"
#include "admplan/evaluate.hpp"
#include "admplan/invdyn.hpp"
#include "admplan/io.hpp"
#include "admplan/project.hpp"
#include "admplan/schedule.hpp"

namespace {

using namespace admplan;
using nlohmann::ordered_json;

std::string joined(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += names[i];
  }
  return out;
}

IDConfig::Method id_method_from_name(const std::string& name) {
  if (name == "polytopic") return IDConfig::Method::kPolytopic;
  if (name == "blackbox") return IDConfig::Method::kBlackbox;
  if (name == "combined") return IDConfig::Method::kCombined;
  if (name == "analytic-linear") return IDConfig::Method::kAnalyticLinear;
  throw std::invalid_argument("unknown inverse-dynamics method '" + name +
                              "' (valid: polytopic, blackbox, combined, analytic-linear)");
}

std::string id_method_name(IDConfig::Method m) {
  switch (m) {
    case IDConfig::Method::kPolytopic: return "polytopic";
    case IDConfig::Method::kBlackbox: return "blackbox";
    case IDConfig::Method::kCombined: return "combined";
    case IDConfig::Method::kAnalyticLinear: return "analytic-linear";
  }
  return "?";
}

Vec parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size())
      throw std::invalid_argument("could not parse '" + item + "' as a number");
    values.push_back(v);
  }
  Vec out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<Eigen::Index>(i)] = values[i];
  return out;
}

ordered_json json_number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

ordered_json curriculum_json(const std::string& name, const Curriculum& c) {
  ordered_json j;
  j["name"] = name;
  j["sigma_min"] = json_number(c.sigma_min);
  j["sigma_max"] = json_number(c.sigma_max);
  return j;
}

ordered_json projector_json(const Projector& p) {
  ordered_json j;
  j["kind"] = projector_kind_name(p.kind);
  j["lambda_ref"] = p.ref_weight;
  j["delta"] = p.action_shrink;
  j["reduce"] = p.reduce;
  return j;
}

Curriculum resolve_curriculum(const std::string& name, const std::optional<double>& sigma_min,
                              const std::optional<double>& sigma_max) {
  Curriculum c = Curriculum::from_name(name);
  if (sigma_min) c.sigma_min = *sigma_min;
  if (sigma_max) c.sigma_max = *sigma_max;
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// schedule

struct ScheduleOpts {
  int steps = 5;
  double rho = 7.0;
  double sigma_start = 80.0;
  double sigma_last = 0.002;
  std::string curriculum = "mid";
  std::optional<double> sigma_min, sigma_max;
};

int cmd_schedule(const ScheduleOpts& o) {
  NoiseSchedule sched;
  sched.steps = o.steps;
  sched.rho = o.rho;
  sched.sigma_max = o.sigma_start;
  sched.sigma_last = o.sigma_last;
  sched.validate();
  const Curriculum curr = resolve_curriculum(o.curriculum, o.sigma_min, o.sigma_max);

  const std::vector<double> sigmas = sched.sigmas();
  std::printf("noise ladder (N=%d, sigma %.12g -> %.12g, rho=%.12g):\n", sched.steps,
              sched.sigma_max, sched.sigma_last, sched.rho);
  for (std::size_t i = 0; i < sigmas.size(); ++i)
    std::printf("  %2zu  %.12g\n", i, sigmas[i]);

  std::printf("\nprojection curriculum '%s' (sigma_min=%.12g, sigma_max=%.12g):\n",
              o.curriculum.c_str(), curr.sigma_min, curr.sigma_max);
  std::printf("  %-16s %-16s %s\n", "sigma", "p_skip", "p_project");
  for (const double s : sigmas) {
    const double p = curr.skip_probability(s);
    std::printf("  %-16.12g %-16.12g %.12g\n", s, p, 1.0 - p);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOpts {
  std::string env, controller, out, jsonl;
  int n = 256;
  int horizon = 0;
  std::uint64_t seed = 0;
};

int cmd_gen_data(const GenDataOpts& o) {
  auto env = make_env(o.env);
  const int horizon = o.horizon > 0 ? o.horizon : env->spec().default_horizon;
  const Dataset data = generate_dataset(*env, o.controller, o.n, horizon, o.seed);
  save_dataset(data, o.out);
  if (!o.jsonl.empty()) save_jsonl(data, o.jsonl);
  std::printf("wrote %d trajectories (env %s, horizon %d, seed %llu) to %s\n", o.n,
              o.env.c_str(), horizon, static_cast<unsigned long long>(o.seed), o.out.c_str());
  if (!o.jsonl.empty()) std::printf("wrote JSONL mirror to %s\n", o.jsonl.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string env, data, out;
  std::string modality = "S";
  std::string projector;  // empty picks a modality-appropriate default
  std::string curriculum = "mid";
  std::optional<double> sigma_min, sigma_max;
  double lambda_ref = 1.0;
  double delta = 0.1;
  bool no_reduce = false;
  std::string policy;      // pre-trained correction policy for PSA
  std::string loss_trace;  // CSV trace path
  int steps = 2000;
  int batch = 16;
  double lr = 1e-3;
  int width = 96;
  int kernel = 5;
  int sigma_features = 8;
  int eval_batch = 64;
  std::uint64_t seed = 0;
  int ladder_steps = 5;
  double rho = 7.0;
  double sigma_start = 80.0;
  double sigma_last = 0.002;
};

int cmd_train(const TrainOpts& o) {
  auto env = make_env(o.env);
  const Dataset data = load_dataset(o.data);

  TrainConfig cfg;
  cfg.modality = modality_from_name(o.modality);
  std::string projector_name = o.projector;
  if (projector_name.empty())
    projector_name = cfg.modality == Modality::kStates ? "P" : "PA";
  cfg.projector.kind = projector_kind_from_name(projector_name);
  cfg.projector.ref_weight = o.lambda_ref;
  cfg.projector.action_shrink = o.delta;
  cfg.projector.reduce = !o.no_reduce;
  cfg.curriculum = resolve_curriculum(o.curriculum, o.sigma_min, o.sigma_max);
  cfg.schedule.steps = o.ladder_steps;
  cfg.schedule.rho = o.rho;
  cfg.schedule.sigma_max = o.sigma_start;
  cfg.schedule.sigma_last = o.sigma_last;
  cfg.steps = o.steps;
  cfg.batch = o.batch;
  cfg.lr = o.lr;
  cfg.width = o.width;
  cfg.kernel = o.kernel;
  cfg.sigma_features = o.sigma_features;
  cfg.eval_batch = o.eval_batch;
  cfg.seed = o.seed;
  cfg.loss_trace_path = o.loss_trace;

  std::optional<CorrectionPolicy> policy;
  if (cfg.projector.kind == Projector::Kind::kStateAction) {
    if (!o.policy.empty()) {
      policy = load_policy(o.policy);
    } else {
      std::printf("no --policy given; training a correction policy on the dataset\n");
      CorrectionTrainConfig pcfg;
      pcfg.seed = o.seed;
      policy = train_correction_policy(*env, data, pcfg);
    }
    cfg.projector.policy = &*policy;
  }

  const Checkpoint ckpt = train(*env, data, cfg);
  save_checkpoint(ckpt, o.out);
  std::printf("trained %d steps (modality %s, projector %s, curriculum %s)\n", ckpt.train_steps,
              o.modality.c_str(), projector_name.c_str(), o.curriculum.c_str());
  std::printf("eval denoising loss %.6g -> %.6g\n", ckpt.loss_initial, ckpt.loss_final);
  if (ckpt.aborted)
    std::fprintf(stderr,
                 "warning: training aborted on a non-finite loss; checkpoint holds the last "
                 "finite step\n");
  std::printf("wrote checkpoint to %s\n", o.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleOpts {
  std::string env, checkpoint, out;
  int n = 8;
  std::uint64_t seed = 0;
  std::string s0;          // comma-separated initial state; empty draws one
  std::string curriculum;  // override; empty keeps the checkpoint's
  std::optional<double> sigma_min, sigma_max;
  std::string projector;  // override; empty keeps the checkpoint's
  std::optional<double> lambda_ref, delta;
  std::string policy;  // correction policy for a PSA override
  std::string select;  // optional best-of metric
};

int cmd_sample(const SampleOpts& o) {
  auto env = make_env(o.env);
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  ckpt.check_env(*env);

  SampleConfig cfg;
  cfg.n_samples = o.n;
  cfg.seed = o.seed;
  std::string curriculum_name = o.curriculum;
  if (!o.curriculum.empty() || o.sigma_min || o.sigma_max) {
    Curriculum c = o.curriculum.empty() ? ckpt.curriculum
                                        : Curriculum::from_name(o.curriculum);
    if (o.sigma_min) c.sigma_min = *o.sigma_min;
    if (o.sigma_max) c.sigma_max = *o.sigma_max;
    c.validate();
    cfg.curriculum = c;
  }
  if (curriculum_name.empty()) curriculum_name = "(checkpoint)";

  std::optional<CorrectionPolicy> policy;
  if (!o.projector.empty() || o.lambda_ref || o.delta || !o.policy.empty()) {
    Projector p = ckpt.projector();
    if (!o.projector.empty()) p.kind = projector_kind_from_name(o.projector);
    if (o.lambda_ref) p.ref_weight = *o.lambda_ref;
    if (o.delta) p.action_shrink = *o.delta;
    if (!o.policy.empty()) {
      policy = load_policy(o.policy);
      p.policy = &*policy;
    }
    cfg.projector = p;
  }

  Vec s0;
  std::string s0_source;
  if (!o.s0.empty()) {
    s0 = parse_vector(o.s0);
    if (s0.size() != env->spec().n_states)
      throw std::invalid_argument("--s0 needs " + std::to_string(env->spec().n_states) +
                                  " values for " + o.env);
    s0_source = "flag";
  } else {
    Rng rng(o.seed);
    s0 = rng.substream(0x53305345ull).uniform_box(env->spec().init_lo, env->spec().init_hi);
    s0_source = "drawn";
  }

  const std::vector<Sample> samples = sample(*env, ckpt, s0, cfg);
  std::filesystem::create_directories(o.out);

  const Projector used_projector = cfg.projector ? *cfg.projector : ckpt.projector();
  const Curriculum used_curriculum = cfg.curriculum ? *cfg.curriculum : ckpt.curriculum;

  ordered_json manifest;
  manifest["env"] = o.env;
  manifest["checkpoint"] = o.checkpoint;
  manifest["n_samples"] = o.n;
  manifest["seed"] = o.seed;
  manifest["s0_source"] = s0_source;
  auto s0_json = ordered_json::array();
  for (Eigen::Index i = 0; i < s0.size(); ++i) s0_json.push_back(s0[i]);
  manifest["s0"] = std::move(s0_json);
  manifest["curriculum"] = curriculum_json(curriculum_name, used_curriculum);
  manifest["projector"] = projector_json(used_projector);

  std::vector<Trajectory> trajs;
  auto rows = ordered_json::array();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%03zu.traj", k);
    const std::string path = (std::filesystem::path(o.out) / name).string();
    save_trajectory(*env, samples[k].traj, path);
    trajs.push_back(samples[k].traj);
    ordered_json row;
    row["file"] = name;
    row["admissible"] = samples[k].traj.admissible;
    row["fully_projected"] = samples[k].fully_projected;
    row["hull_residual_mean"] = samples[k].hull_residual_mean;
    row["survival_steps"] = survival_steps(*env, samples[k].traj.states);
    row["reward_proxy"] = env->reward_proxy(samples[k].traj);
    rows.push_back(std::move(row));
    std::printf("sample %3zu: admissible=%d fully_projected=%d survival=%d reward=%.6g\n", k,
                samples[k].traj.admissible ? 1 : 0, samples[k].fully_projected ? 1 : 0,
                survival_steps(*env, samples[k].traj.states), env->reward_proxy(samples[k].traj));
  }
  manifest["samples"] = std::move(rows);

  if (!o.select.empty()) {
    const std::size_t best = select_best(*env, trajs, o.select);
    manifest["select_metric"] = o.select;
    manifest["selected"] = best;
    std::printf("best by %s: sample %zu\n", o.select.c_str(), best);
  }

  io::atomic_write((std::filesystem::path(o.out) / "samples.json").string(),
                   manifest.dump(2) + "\n");
  std::printf("wrote %zu trajectories and samples.json to %s\n", samples.size(), o.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// project

struct ProjectOpts {
  std::string env, data, out;
  std::string kind = "P";
  double lambda_ref = 1.0;
  double delta = 0.1;
  bool no_reduce = false;
  std::string policy;
};

int cmd_project(const ProjectOpts& o) {
  auto env = make_env(o.env);
  Dataset data = load_dataset(o.data);
  if (data.env_name != env->spec().name)
    throw std::invalid_argument("dataset belongs to environment " + data.env_name);

  Projector projector;
  projector.kind = projector_kind_from_name(o.kind);
  projector.ref_weight = o.lambda_ref;
  projector.action_shrink = o.delta;
  projector.reduce = !o.no_reduce;
  std::optional<CorrectionPolicy> policy;
  if (projector.kind == Projector::Kind::kStateAction) {
    if (o.policy.empty())
      throw std::invalid_argument("--kind PSA needs --policy <correction policy file>");
    policy = load_policy(o.policy);
    projector.policy = &*policy;
  }

  double worst = 0.0;
  for (std::size_t k = 0; k < data.trajectories.size(); ++k) {
    const Trajectory& traj = data.trajectories[k];
    const ProjectedTrajectory proj =
        project_trajectory(*env, traj, projector, gate_always(), traj);
    std::printf("trajectory %zu: residual mean=%.6g max=%.6g\n", k,
                proj.hull_residuals.size() ? proj.hull_residuals.mean() : 0.0,
                proj.hull_residuals.size() ? proj.hull_residuals.maxCoeff() : 0.0);
    std::printf("  per-step:");
    for (Eigen::Index t = 0; t < proj.hull_residuals.size(); ++t)
      std::printf(" %.6g", proj.hull_residuals[t]);
    std::printf("\n");
    if (proj.hull_residuals.size()) worst = std::max(worst, proj.hull_residuals.maxCoeff());
    data.trajectories[k] = proj.traj;
  }

  ordered_json echo;
  echo["projected_from"] = o.data;
  echo["projector"] = projector_json(projector);
  ordered_json source = ordered_json::object();
  if (!data.config_echo.empty()) {
    source = ordered_json::parse(data.config_echo, nullptr, false);
    if (source.is_discarded()) source = data.config_echo;
  }
  echo["source_config"] = std::move(source);
  data.config_echo = echo.dump(2);

  save_dataset(data, o.out);
  std::printf("projected %zu trajectories (worst residual %.6g); wrote %s\n",
              data.trajectories.size(), worst, o.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyOpts {
  std::string env, data, traj, out;
  bool blind = false;
  std::optional<double> max_sae, max_cae;
  std::string method;  // empty uses the environment default
  std::optional<double> tolerance;
  double delta = 0.5;
  std::uint64_t seed = 0;
};

int cmd_verify(const VerifyOpts& o) {
  if (o.data.empty() == o.traj.empty())
    throw std::invalid_argument("verify needs exactly one of --data or --traj");
  auto env = make_env(o.env);

  std::vector<Trajectory> trajs;
  std::string source;
  try {
    if (!o.data.empty()) {
      const Dataset data = load_dataset(o.data);
      if (data.env_name != env->spec().name)
        throw std::invalid_argument("dataset belongs to environment " + data.env_name);
      trajs = data.trajectories;
      source = o.data;
    } else {
      trajs.push_back(load_trajectory(*env, o.traj));
      source = o.traj;
    }
  } catch (const std::runtime_error& e) {
    if (std::string(e.what()).find("admissibility claim") != std::string::npos) {
      std::fprintf(stderr, "verification failure: %s\n", e.what());
      return 2;
    }
    throw;
  }

  IDConfig cfg = IDConfig::defaults_for(env->spec());
  if (!o.method.empty()) cfg.method = id_method_from_name(o.method);
  if (o.tolerance) cfg.tolerance = *o.tolerance;
  cfg.shrink = o.delta;
  cfg.seed = o.seed;

  ordered_json out;
  out["env"] = o.env;
  out["source"] = source;
  out["blind"] = o.blind;
  out["method"] = id_method_name(cfg.method);
  out["tolerance"] = cfg.tolerance;
  if (o.max_sae) out["max_sae"] = *o.max_sae;
  if (o.max_cae) out["max_cae"] = *o.max_cae;
  auto reports = ordered_json::array();

  int failures = 0;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const AdmissibilityReport report = id_trajectory(*env, trajs[k], cfg, !o.blind);
    bool ok = true;
    if (o.max_sae && report.sae_max > *o.max_sae) ok = false;
    if (o.max_cae && report.cae > *o.max_cae) ok = false;
    if (!ok) ++failures;
    int converged = 0;
    for (const bool hit : report.tolerance_hit) converged += hit ? 1 : 0;
    std::printf("trajectory %zu: sae_mean=%.6g sae_max=%.6g cae=%.6g converged=%d/%zu%s\n", k,
                report.sae_mean, report.sae_max, report.cae, converged,
                report.tolerance_hit.size(), ok ? "" : "  FAIL");
    ordered_json rj = ordered_json::parse(report_to_json(report));
    rj["within_limits"] = ok;
    reports.push_back(std::move(rj));
  }
  out["reports"] = std::move(reports);
  out["failures"] = failures;
  if (!o.out.empty()) io::atomic_write(o.out, out.dump(2) + "\n");

  if (failures > 0) {
    std::fprintf(stderr, "verification failure: %d of %zu trajectories exceed limits\n", failures,
                 trajs.size());
    return 2;
  }
  std::printf("verified %zu trajectories: all within limits\n", trajs.size());
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOpts {
  std::string env, plan, out;
};

int cmd_evaluate(const EvaluateOpts& o) {
  const ExperimentPlan plan = plan_from_json(io::read_file(o.plan));
  if (!o.env.empty() && o.env != plan.env_name)
    throw std::invalid_argument("--env " + o.env + " does not match the plan's environment " +
                                plan.env_name);
  auto env = make_env(plan.env_name);
  const ExperimentReport report = run_experiment(*env, plan, o.out);
  for (const CellSummary& cell : report.summaries) {
    std::printf("cell %s:", cell.cell.c_str());
    for (std::size_t m = 0; m < cell.metric_names.size(); ++m)
      std::printf(" %s=%.6g+-%.6g", cell.metric_names[m].c_str(), cell.mean[m], cell.stddev[m]);
    std::printf("\n");
  }
  std::printf("wrote report bundle to %s\n", report.directory.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"admissibility-projected trajectory diffusion toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read option defaults from an INI/TOML file");

  ScheduleOpts sched;
  CLI::App* sub_schedule = app.add_subcommand("schedule", "print the noise ladder and p(sigma)");
  sub_schedule->add_option("--N,--steps", sched.steps, "inference steps")->capture_default_str();
  sub_schedule->add_option("--rho", sched.rho, "ladder curvature")->capture_default_str();
  sub_schedule->add_option("--sigma-start", sched.sigma_start, "largest noise level")
      ->capture_default_str();
  sub_schedule->add_option("--sigma-last", sched.sigma_last, "smallest nonzero noise level")
      ->capture_default_str();
  sub_schedule->add_option("--curriculum", sched.curriculum, "pre, mid, post or off")
      ->capture_default_str();
  sub_schedule->add_option("--sigma-min", sched.sigma_min, "curriculum band lower edge");
  sub_schedule->add_option("--sigma-max", sched.sigma_max, "curriculum band upper edge");

  GenDataOpts gen;
  CLI::App* sub_gen = app.add_subcommand("gen-data", "generate a controller dataset");
  sub_gen->add_option("--env", gen.env, "environment name")->required();
  sub_gen->add_option("--controller", gen.controller, "controller name")->required();
  sub_gen->add_option("--n,--n-traj", gen.n, "trajectory count")->capture_default_str();
  sub_gen->add_option("--horizon", gen.horizon, "steps per trajectory (0 = env default)")
      ->capture_default_str();
  sub_gen->add_option("--seed", gen.seed, "rng seed")->capture_default_str();
  sub_gen->add_option("--out", gen.out, "output dataset path")->required();
  sub_gen->add_option("--jsonl", gen.jsonl, "also write a JSONL mirror here");

  TrainOpts tr;
  CLI::App* sub_train = app.add_subcommand("train", "train a diffusion policy");
  sub_train->add_option("--env", tr.env, "environment name")->required();
  sub_train->add_option("--data", tr.data, "training dataset path")->required();
  sub_train->add_option("--out", tr.out, "output checkpoint path")->required();
  sub_train->add_option("--modality", tr.modality, "S, SA or A")->capture_default_str();
  sub_train->add_option("--projector", tr.projector, "P, Pref, PA or PSA (default by modality)");
  sub_train->add_option("--curriculum", tr.curriculum, "pre, mid, post or off")
      ->capture_default_str();
  sub_train->add_option("--sigma-min", tr.sigma_min, "curriculum band lower edge");
  sub_train->add_option("--sigma-max", tr.sigma_max, "curriculum band upper edge");
  sub_train->add_option("--lambda-ref", tr.lambda_ref, "reference weight for Pref")
      ->capture_default_str();
  sub_train->add_option("--delta", tr.delta, "action-hull shrink for PA/PSA")
      ->capture_default_str();
  sub_train->add_flag("--no-reduce", tr.no_reduce, "project the full state instead of the "
                                                   "actuated coordinates");
  sub_train->add_option("--policy", tr.policy, "correction policy file for PSA");
  sub_train->add_option("--loss-trace", tr.loss_trace, "write a per-step loss CSV here");
  sub_train->add_option("--steps", tr.steps, "optimizer steps")->capture_default_str();
  sub_train->add_option("--batch", tr.batch, "batch size")->capture_default_str();
  sub_train->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  sub_train->add_option("--width", tr.width, "hidden width")->capture_default_str();
  sub_train->add_option("--kernel", tr.kernel, "temporal kernel size (odd)")
      ->capture_default_str();
  sub_train->add_option("--sigma-features", tr.sigma_features, "noise embedding size")
      ->capture_default_str();
  sub_train->add_option("--eval-batch", tr.eval_batch, "fixed eval batch size")
      ->capture_default_str();
  sub_train->add_option("--seed", tr.seed, "rng seed")->capture_default_str();
  sub_train->add_option("--N", tr.ladder_steps, "inference ladder steps")->capture_default_str();
  sub_train->add_option("--rho", tr.rho, "ladder curvature")->capture_default_str();
  sub_train->add_option("--sigma-start", tr.sigma_start, "largest noise level")
      ->capture_default_str();
  sub_train->add_option("--sigma-last", tr.sigma_last, "smallest nonzero noise level")
      ->capture_default_str();

  SampleOpts sm;
  CLI::App* sub_sample = app.add_subcommand("sample", "draw trajectories from a checkpoint");
  sub_sample->add_option("--env", sm.env, "environment name")->required();
  sub_sample->add_option("--checkpoint", sm.checkpoint, "trained checkpoint path")->required();
  sub_sample->add_option("--out", sm.out, "output directory")->required();
  sub_sample->add_option("--n,--n-samples", sm.n, "sample count")->capture_default_str();
  sub_sample->add_option("--seed", sm.seed, "rng seed")->capture_default_str();
  sub_sample->add_option("--s0", sm.s0, "initial state, comma separated (default: drawn)");
  sub_sample->add_option("--curriculum", sm.curriculum, "override: pre, mid, post or off");
  sub_sample->add_option("--sigma-min", sm.sigma_min, "curriculum band lower edge");
  sub_sample->add_option("--sigma-max", sm.sigma_max, "curriculum band upper edge");
  sub_sample->add_option("--projector", sm.projector, "override: P, Pref, PA or PSA");
  sub_sample->add_option("--lambda-ref", sm.lambda_ref, "reference weight for Pref");
  sub_sample->add_option("--delta", sm.delta, "action-hull shrink for PA/PSA");
  sub_sample->add_option("--policy", sm.policy, "correction policy file for a PSA override");
  sub_sample->add_option("--select", sm.select, "report the best sample by this metric "
                                                "(survival-steps, reward-proxy)");

  ProjectOpts pr;
  CLI::App* sub_project = app.add_subcommand("project", "project a dataset onto reachable sets");
  sub_project->add_option("--env", pr.env, "environment name")->required();
  sub_project->add_option("--data", pr.data, "input dataset path")->required();
  sub_project->add_option("--out", pr.out, "output dataset path")->required();
  sub_project->add_option("--kind", pr.kind, "P, Pref, PA or PSA")->capture_default_str();
  sub_project->add_option("--lambda-ref", pr.lambda_ref, "reference weight for Pref")
      ->capture_default_str();
  sub_project->add_option("--delta", pr.delta, "action-hull shrink for PA/PSA")
      ->capture_default_str();
  sub_project->add_flag("--no-reduce", pr.no_reduce, "project the full state instead of the "
                                                     "actuated coordinates");
  sub_project->add_option("--policy", pr.policy, "correction policy file for PSA");

  VerifyOpts vf;
  CLI::App* sub_verify = app.add_subcommand("verify", "check admissibility via inverse dynamics");
  sub_verify->add_option("--env", vf.env, "environment name")->required();
  sub_verify->add_option("--data", vf.data, "dataset to verify");
  sub_verify->add_option("--traj", vf.traj, "single trajectory file to verify");
  sub_verify->add_flag("--blind", vf.blind, "ignore stored actions when recovering");
  sub_verify->add_option("--max-sae", vf.max_sae, "fail when any per-step error exceeds this");
  sub_verify->add_option("--max-cae", vf.max_cae, "fail when the cumulative error exceeds this");
  sub_verify->add_option("--method", vf.method,
                         "polytopic, blackbox, combined or analytic-linear (default: by env)");
  sub_verify->add_option("--tolerance", vf.tolerance, "solver tolerance (default: by env)");
  sub_verify->add_option("--delta", vf.delta, "polytopic vertex shrink")->capture_default_str();
  sub_verify->add_option("--seed", vf.seed, "rng seed")->capture_default_str();
  sub_verify->add_option("--out", vf.out, "write the JSON report here");

  EvaluateOpts ev;
  CLI::App* sub_evaluate = app.add_subcommand("evaluate", "run an experiment plan");
  sub_evaluate->add_option("--env", ev.env, "environment name (must match the plan)");
  sub_evaluate->add_option("--plan", ev.plan, "experiment plan JSON path")->required();
  sub_evaluate->add_option("--out", ev.out, "report bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (sub_schedule->parsed()) return cmd_schedule(sched);
    if (sub_gen->parsed()) return cmd_gen_data(gen);
    if (sub_train->parsed()) return cmd_train(tr);
    if (sub_sample->parsed()) return cmd_sample(sm);
    if (sub_project->parsed()) return cmd_project(pr);
    if (sub_verify->parsed()) return cmd_verify(vf);
    if (sub_evaluate->parsed()) return cmd_evaluate(ev);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
