#include "admplan/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "admplan/dataset.hpp"
#include "admplan/invdyn.hpp"
#include "admplan/io.hpp"
#include "admplan/svg.hpp"

namespace admplan {

namespace {

constexpr std::uint64_t kS0StreamBase = 1ull << 20;
constexpr std::uint64_t kSampleStreamBase = 1ull << 30;
constexpr std::uint64_t kIdStreamBase = 1ull << 50;

const std::set<std::string>& known_metrics() {
  static const std::set<std::string> m = {"sae", "cae", "survival-fraction", "reward-proxy",
                                          "task-completion"};
  return m;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool file_safe(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  return true;
}

struct MetricWants {
  bool sae = false, cae = false, survival = false, reward = false, task = false;

  bool id() const { return sae || cae; }
};

MetricWants wants_of(const std::vector<std::string>& metrics) {
  MetricWants w;
  for (const std::string& m : metrics) {
    if (m == "sae") w.sae = true;
    if (m == "cae") w.cae = true;
    if (m == "survival-fraction") w.survival = true;
    if (m == "reward-proxy") w.reward = true;
    if (m == "task-completion") w.task = true;
  }
  return w;
}

/// Column labels a plan's metric list expands to, in plan order.
std::vector<std::string> metric_columns(const std::vector<std::string>& metrics) {
  std::vector<std::string> cols;
  for (const std::string& m : metrics) {
    if (m == "sae") {
      cols.push_back("sae_mean");
      cols.push_back("sae_max");
    } else if (m == "cae") {
      cols.push_back("cae");
    } else if (m == "survival-fraction") {
      cols.push_back("survival_fraction");
    } else if (m == "reward-proxy") {
      cols.push_back("reward_proxy");
    } else if (m == "task-completion") {
      cols.push_back("task_completion");
    }
  }
  return cols;
}

double population_std(const std::vector<double>& values, double mean) {
  if (values.empty()) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

}  // namespace

void ExperimentPlan::validate() const {
  if (env_name.empty()) throw std::invalid_argument("plan needs an environment");
  if (cells.empty()) throw std::invalid_argument("plan needs at least one cell");
  if (n_initial_states < 1 || samples_per_state < 1)
    throw std::invalid_argument("plan needs positive sample counts");
  if (metrics.empty()) throw std::invalid_argument("plan needs at least one metric");
  std::set<std::string> seen_metrics;
  for (const std::string& m : metrics) {
    if (!known_metrics().count(m)) {
      std::string valid;
      for (const std::string& k : known_metrics()) valid += (valid.empty() ? "" : ", ") + k;
      throw std::invalid_argument("unknown metric '" + m + "' (valid: " + valid + ")");
    }
    if (!seen_metrics.insert(m).second)
      throw std::invalid_argument("duplicate metric '" + m + "'");
  }
  std::set<std::string> names;
  for (const ExperimentCell& cell : cells) {
    if (!file_safe(cell.name))
      throw std::invalid_argument("cell names must be non-empty [A-Za-z0-9_-]: '" + cell.name +
                                  "'");
    if (!names.insert(cell.name).second)
      throw std::invalid_argument("duplicate cell name '" + cell.name + "'");
    if (cell.checkpoint.empty())
      throw std::invalid_argument("cell '" + cell.name + "' needs a checkpoint path");
    if (!cell.curriculum.empty()) Curriculum::from_name(cell.curriculum);
    if (!cell.projector.empty()) projector_kind_from_name(cell.projector);
  }
}

ExperimentPlan plan_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  static const std::set<std::string> top_keys = {"env",     "cells", "n_initial_states",
                                                 "samples_per_state", "metrics", "seed"};
  static const std::set<std::string> cell_keys = {"name", "checkpoint", "curriculum", "projector"};
  for (const auto& item : j.items())
    if (!top_keys.count(item.key()))
      throw std::invalid_argument("unknown plan key '" + item.key() + "'");
  ExperimentPlan plan;
  plan.env_name = j.at("env").get<std::string>();
  plan.n_initial_states = j.value("n_initial_states", plan.n_initial_states);
  plan.samples_per_state = j.value("samples_per_state", plan.samples_per_state);
  plan.seed = j.value("seed", plan.seed);
  plan.metrics = j.at("metrics").get<std::vector<std::string>>();
  for (const nlohmann::json& cj : j.at("cells")) {
    for (const auto& item : cj.items())
      if (!cell_keys.count(item.key()))
        throw std::invalid_argument("unknown cell key '" + item.key() + "'");
    ExperimentCell cell;
    cell.name = cj.at("name").get<std::string>();
    cell.checkpoint = cj.at("checkpoint").get<std::string>();
    cell.curriculum = cj.value("curriculum", std::string());
    cell.projector = cj.value("projector", std::string());
    plan.cells.push_back(std::move(cell));
  }
  plan.validate();
  return plan;
}

std::string plan_to_json(const ExperimentPlan& plan) {
  nlohmann::ordered_json j;
  j["env"] = plan.env_name;
  j["n_initial_states"] = plan.n_initial_states;
  j["samples_per_state"] = plan.samples_per_state;
  j["metrics"] = plan.metrics;
  j["seed"] = plan.seed;
  j["cells"] = nlohmann::ordered_json::array();
  for (const ExperimentCell& cell : plan.cells) {
    nlohmann::ordered_json cj;
    cj["name"] = cell.name;
    cj["checkpoint"] = cell.checkpoint;
    cj["curriculum"] = cell.curriculum;
    cj["projector"] = cell.projector;
    j["cells"].push_back(std::move(cj));
  }
  return j.dump(2) + "\n";
}

double CellSummary::value(const std::string& metric_name) const {
  for (std::size_t i = 0; i < metric_names.size(); ++i)
    if (metric_names[i] == metric_name) return mean[i];
  throw std::invalid_argument("summary has no metric '" + metric_name + "'");
}

ExperimentReport run_experiment(const Env& env, const ExperimentPlan& plan,
                                const std::string& out_dir) {
  plan.validate();
  const EnvSpec& spec = env.spec();
  if (plan.env_name != spec.name)
    throw std::invalid_argument("plan targets environment '" + plan.env_name + "', not '" +
                                spec.name + "'");
  const MetricWants wants = wants_of(plan.metrics);
  const std::vector<std::string> columns = metric_columns(plan.metrics);
  const std::filesystem::path dir(out_dir);

  struct LoadedCell {
    ExperimentCell cell;
    Checkpoint ckpt;
  };
  std::vector<LoadedCell> cells;
  cells.reserve(plan.cells.size());
  for (const ExperimentCell& cell : plan.cells) {
    LoadedCell lc{cell, load_checkpoint(cell.checkpoint)};
    lc.ckpt.check_env(env);
    cells.push_back(std::move(lc));
  }

  const Rng root(plan.seed);
  std::vector<Vec> initial_states;
  initial_states.reserve(static_cast<std::size_t>(plan.n_initial_states));
  for (int j = 0; j < plan.n_initial_states; ++j) {
    Rng srng = root.substream(kS0StreamBase + static_cast<std::uint64_t>(j));
    initial_states.push_back(srng.uniform_box(spec.init_lo, spec.init_hi));
  }

  std::string metrics_csv = "cell,state,sample,trajectory,admissible";
  for (const std::string& col : columns) metrics_csv += "," + col;
  if (wants.id()) metrics_csv += ",id_converged_fraction";
  metrics_csv += "\n";

  // Per cell: per expanded column, the per-sample values; plus the data the
  // plots need.
  struct CellData {
    std::vector<std::vector<double>> column_values;
    std::vector<int> survival;
    Eigen::Index rows = 0;
    std::vector<double> sae_values, cae_values;
  };
  std::vector<CellData> data(cells.size());

  const int n_gates = static_cast<int>(spec.gates.size());
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const LoadedCell& lc = cells[ci];
    CellData& cd = data[ci];
    cd.column_values.assign(columns.size(), {});
    for (int j = 0; j < plan.n_initial_states; ++j) {
      SampleConfig scfg;
      scfg.n_samples = plan.samples_per_state;
      scfg.seed = root.substream(kSampleStreamBase + static_cast<std::uint64_t>(j)).seed();
      if (!lc.cell.curriculum.empty()) scfg.curriculum = Curriculum::from_name(lc.cell.curriculum);
      if (!lc.cell.projector.empty()) {
        Projector p;
        p.kind = projector_kind_from_name(lc.cell.projector);
        p.ref_weight = lc.ckpt.ref_weight;
        p.action_shrink = lc.ckpt.action_shrink;
        p.reduce = lc.ckpt.reduce;
        scfg.projector = p;
      }
      const std::vector<Sample> samples = sample(env, lc.ckpt, initial_states[j], scfg);
      for (int k = 0; k < plan.samples_per_state; ++k) {
        const Trajectory& traj = samples[static_cast<std::size_t>(k)].traj;
        char name[96];
        std::snprintf(name, sizeof name, "s%03d_k%03d.traj", j, k);
        const std::filesystem::path rel =
            std::filesystem::path("trajectories") / lc.cell.name / name;
        save_trajectory(env, traj, (dir / rel).string());

        const int alive = survival_steps(env, traj.states);
        cd.survival.push_back(alive);
        cd.rows = traj.states.rows();

        double sae_mean = 0.0, sae_max = 0.0, cae = 0.0, id_frac = 1.0;
        if (wants.id()) {
          IDConfig idcfg = IDConfig::defaults_for(spec);
          const std::uint64_t id_index =
              (static_cast<std::uint64_t>(ci) * static_cast<std::uint64_t>(plan.n_initial_states) +
               static_cast<std::uint64_t>(j)) *
                  static_cast<std::uint64_t>(plan.samples_per_state) +
              static_cast<std::uint64_t>(k);
          idcfg.seed = root.substream(kIdStreamBase + id_index).seed();
          const AdmissibilityReport report = id_trajectory(env, traj, idcfg);
          sae_mean = report.sae_mean;
          sae_max = report.sae_max;
          cae = report.cae;
          long hit = 0;
          for (bool b : report.tolerance_hit) hit += b ? 1 : 0;
          id_frac = report.tolerance_hit.empty()
                        ? 1.0
                        : static_cast<double>(hit) / static_cast<double>(report.tolerance_hit.size());
          cd.sae_values.push_back(sae_mean);
          cd.cae_values.push_back(cae);
        }
        const double survival_fraction =
            static_cast<double>(alive) / static_cast<double>(traj.states.rows());
        const double reward = env.reward_proxy(traj);
        const bool complete = alive == traj.states.rows() &&
                              gates_passed(spec, traj.states) == n_gates;

        metrics_csv += lc.cell.name;
        char prefix[64];
        std::snprintf(prefix, sizeof prefix, ",%d,%d,", j, k);
        metrics_csv += prefix;
        metrics_csv += rel.generic_string();
        metrics_csv += traj.admissible ? ",1" : ",0";
        for (std::size_t col = 0; col < columns.size(); ++col) {
          double v = 0.0;
          if (columns[col] == "sae_mean") v = sae_mean;
          else if (columns[col] == "sae_max") v = sae_max;
          else if (columns[col] == "cae") v = cae;
          else if (columns[col] == "survival_fraction") v = survival_fraction;
          else if (columns[col] == "reward_proxy") v = reward;
          else v = complete ? 1.0 : 0.0;
          cd.column_values[col].push_back(v);
          metrics_csv += ",";
          metrics_csv += fmt(v);
        }
        if (wants.id()) {
          metrics_csv += ",";
          metrics_csv += fmt(id_frac);
        }
        metrics_csv += "\n";
      }
    }
  }

  // Summaries and summary.csv (long format: cell, metric, mean, std).
  ExperimentReport report;
  report.directory = dir.string();
  std::string summary_csv = "cell,metric,mean,std\n";
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    CellSummary summary;
    summary.cell = cells[ci].cell.name;
    for (std::size_t col = 0; col < columns.size(); ++col) {
      const std::vector<double>& values = data[ci].column_values[col];
      double mean = 0.0;
      for (double v : values) mean += v;
      if (!values.empty()) mean /= static_cast<double>(values.size());
      const double stddev = population_std(values, mean);
      summary.metric_names.push_back(columns[col]);
      summary.mean.push_back(mean);
      summary.stddev.push_back(stddev);
      summary_csv += summary.cell + "," + columns[col] + "," + fmt(mean) + "," + fmt(stddev) + "\n";
    }
    report.summaries.push_back(std::move(summary));
  }

  // Plots: metric CDFs and the violation-ratio curve.
  auto cdf_chart = [&](const std::string& title, const std::string& x_label,
                       auto member) {
    std::vector<svg::Series> series;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      std::vector<double> values = data[ci].*member;
      std::sort(values.begin(), values.end());
      svg::Series s;
      s.label = cells[ci].cell.name;
      for (std::size_t i = 0; i < values.size(); ++i) {
        s.x.push_back(values[i]);
        s.y.push_back(static_cast<double>(i + 1) / static_cast<double>(values.size()));
      }
      series.push_back(std::move(s));
    }
    return svg::line_chart(title, x_label, "fraction of samples", series);
  };
  if (wants.sae)
    io::atomic_write((dir / "plots" / "sae_cdf.svg").string(),
                     cdf_chart("SAE distribution", "mean SAE", &CellData::sae_values));
  if (wants.cae)
    io::atomic_write((dir / "plots" / "cae_cdf.svg").string(),
                     cdf_chart("CAE distribution", "CAE", &CellData::cae_values));
  {
    std::vector<svg::Series> series;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      const CellData& cd = data[ci];
      svg::Series s;
      s.label = cells[ci].cell.name;
      const double n = static_cast<double>(cd.survival.size());
      for (Eigen::Index t = 0; t < cd.rows; ++t) {
        long violated = 0;
        for (int alive : cd.survival) violated += alive <= t ? 1 : 0;
        s.x.push_back(static_cast<double>(t));
        s.y.push_back(n > 0 ? static_cast<double>(violated) / n : 0.0);
      }
      series.push_back(std::move(s));
    }
    io::atomic_write((dir / "plots" / "violation_ratio.svg").string(),
                     svg::line_chart("Constraint violations over time", "step",
                                     "violated fraction", series));
  }

  io::atomic_write((dir / "plan.json").string(), plan_to_json(plan));
  io::atomic_write((dir / "metrics.csv").string(), metrics_csv);
  io::atomic_write((dir / "summary.csv").string(), summary_csv);
  return report;
}

}  // namespace admplan
