#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "admplan/dataset.hpp"
#include "admplan/evaluate.hpp"
#include "admplan/invdyn.hpp"
#include "admplan/rng.hpp"

using namespace admplan;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& stem) {
  const fs::path p = fs::temp_directory_path() / stem;
  fs::remove_all(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

/// Trains (once per binary run) a small state-action model whose checkpoint
/// the experiment cells share.
const std::string& shared_checkpoint() {
  static const std::string path = [] {
    const auto env = make_env("double-integrator-2d");
    const Dataset data = generate_dataset(*env, "lqr-goal", 24, 10, 3);
    TrainConfig cfg;
    cfg.modality = Modality::kStateActions;
    cfg.projector.kind = Projector::Kind::kAction;
    cfg.curriculum = Curriculum::mid();
    cfg.steps = 60;
    cfg.batch = 8;
    cfg.width = 16;
    cfg.kernel = 3;
    cfg.sigma_features = 4;
    cfg.eval_batch = 8;
    cfg.seed = 77;
    const Checkpoint ckpt = train(*env, data, cfg);
    const std::string p = (fs::temp_directory_path() / "admplan_eval_ckpt.bin").string();
    save_checkpoint(ckpt, p);
    return p;
  }();
  return path;
}

ExperimentPlan small_plan() {
  ExperimentPlan plan;
  plan.env_name = "double-integrator-2d";
  plan.cells = {{"proj", shared_checkpoint(), "", ""},
                {"off", shared_checkpoint(), "off", ""}};
  plan.n_initial_states = 2;
  plan.samples_per_state = 2;
  plan.metrics = {"sae", "cae", "survival-fraction", "reward-proxy", "task-completion"};
  plan.seed = 99;
  return plan;
}

}  // namespace

TEST_CASE("plans validate their fields and parse strictly") {
  ExperimentPlan plan = small_plan();
  CHECK_NOTHROW(plan.validate());

  ExperimentPlan bad = plan;
  bad.env_name.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = plan;
  bad.cells.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = plan;
  bad.n_initial_states = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = plan;
  bad.metrics = {"sae", "winrate"};
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("survival-fraction"),
                       std::invalid_argument);
  bad = plan;
  bad.metrics = {"sae", "sae"};
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("duplicate"), std::invalid_argument);
  bad = plan;
  bad.cells[1].name = "proj";
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("duplicate"), std::invalid_argument);
  bad = plan;
  bad.cells[0].name = "pro/j";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = plan;
  bad.cells[0].checkpoint.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  CHECK_THROWS_WITH_AS(
      plan_from_json(R"({"env":"e","metrics":["sae"],"cells":[],"budget":3})"),
      doctest::Contains("unknown plan key 'budget'"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      plan_from_json(
          R"({"env":"e","metrics":["sae"],"cells":[{"name":"a","checkpoint":"c","model":"m"}]})"),
      doctest::Contains("unknown cell key 'model'"), std::invalid_argument);
}

TEST_CASE("plans round-trip through json") {
  const ExperimentPlan plan = small_plan();
  const ExperimentPlan back = plan_from_json(plan_to_json(plan));
  CHECK(back.env_name == plan.env_name);
  CHECK(back.n_initial_states == plan.n_initial_states);
  CHECK(back.samples_per_state == plan.samples_per_state);
  CHECK(back.seed == plan.seed);
  CHECK(back.metrics == plan.metrics);
  REQUIRE(back.cells.size() == plan.cells.size());
  for (std::size_t i = 0; i < plan.cells.size(); ++i) {
    CHECK(back.cells[i].name == plan.cells[i].name);
    CHECK(back.cells[i].checkpoint == plan.cells[i].checkpoint);
    CHECK(back.cells[i].curriculum == plan.cells[i].curriculum);
    CHECK(back.cells[i].projector == plan.cells[i].projector);
  }
  CHECK(plan_to_json(back) == plan_to_json(plan));
}

TEST_CASE("experiment bundles are complete, self-consistent, and recomputable") {
  const auto env = make_env("double-integrator-2d");
  const ExperimentPlan plan = small_plan();
  const std::string dir = temp_dir("admplan_eval_bundle");
  const ExperimentReport report = run_experiment(*env, plan, dir);
  CHECK(report.directory == dir);
  REQUIRE(report.summaries.size() == 2);

  for (const char* rel : {"plan.json", "metrics.csv", "summary.csv", "plots/sae_cdf.svg",
                          "plots/cae_cdf.svg", "plots/violation_ratio.svg",
                          "trajectories/proj/s000_k000.traj", "trajectories/off/s001_k001.traj"})
    CHECK(fs::exists(fs::path(dir) / rel));

  // The plan echo reparses to the plan that ran.
  CHECK(plan_to_json(plan_from_json(slurp(dir + "/plan.json"))) == plan_to_json(plan));

  // metrics.csv: header plus one row per cell x state x sample, expanded
  // columns in plan order.
  std::istringstream metrics(slurp(dir + "/metrics.csv"));
  std::string line;
  REQUIRE(std::getline(metrics, line));
  CHECK(line ==
        "cell,state,sample,trajectory,admissible,sae_mean,sae_max,cae,survival_fraction,"
        "reward_proxy,task_completion,id_converged_fraction");
  const auto header = split(line, ',');
  struct Row {
    std::string cell, traj_file;
    bool admissible;
    std::map<std::string, double> value;
  };
  std::vector<Row> rows;
  while (std::getline(metrics, line)) {
    const auto fields = split(line, ',');
    REQUIRE(fields.size() == header.size());
    Row row;
    row.cell = fields[0];
    row.traj_file = fields[3];
    row.admissible = fields[4] == "1";
    for (std::size_t i = 5; i < fields.size(); ++i) row.value[header[i]] = std::stod(fields[i]);
    rows.push_back(std::move(row));
  }
  CHECK(rows.size() == 8);

  // Every reported value is recomputable from the stored trajectory file.
  // The verifier seed matches the run's derivation from the plan seed.
  const EnvSpec& spec = env->spec();
  std::size_t index = 0;
  for (const Row& row : rows) {
    const Trajectory traj = load_trajectory(*env, dir + "/" + row.traj_file);
    CHECK(traj.admissible == row.admissible);
    IDConfig idcfg = IDConfig::defaults_for(spec);
    idcfg.seed = Rng(plan.seed).substream((1ull << 50) + index).seed();
    const AdmissibilityReport id = id_trajectory(*env, traj, idcfg);
    CHECK(id.sae_mean == row.value.at("sae_mean"));
    CHECK(id.sae_max == row.value.at("sae_max"));
    CHECK(id.cae == row.value.at("cae"));
    if (row.admissible) {
      CHECK(row.value.at("sae_max") == 0.0);
      CHECK(row.value.at("cae") == 0.0);
    }
    CHECK(row.value.at("survival_fraction") ==
          static_cast<double>(survival_steps(*env, traj.states)) /
              static_cast<double>(traj.states.rows()));
    CHECK(row.value.at("reward_proxy") == env->reward_proxy(traj));
    ++index;
  }

  // The protocol pairs initial states: sample (j, k) of every cell starts
  // from the same s0.
  for (int j = 0; j < plan.n_initial_states; ++j) {
    char name[32];
    std::snprintf(name, sizeof name, "s%03d_k000.traj", j);
    const Trajectory a = load_trajectory(*env, dir + "/trajectories/proj/" + name);
    const Trajectory b = load_trajectory(*env, dir + "/trajectories/off/" + name);
    CHECK((a.states.row(0).array() == b.states.row(0).array()).all());
  }

  // summary.csv holds the population mean and std of the per-sample rows and
  // matches the returned summaries exactly.
  std::istringstream summary(slurp(dir + "/summary.csv"));
  REQUIRE(std::getline(summary, line));
  CHECK(line == "cell,metric,mean,std");
  int summary_rows = 0;
  while (std::getline(summary, line)) {
    const auto fields = split(line, ',');
    REQUIRE(fields.size() == 4);
    const CellSummary& cs = fields[0] == "proj" ? report.summaries[0] : report.summaries[1];
    CHECK(cs.value(fields[1]) == std::stod(fields[2]));

    double mean = 0.0, var = 0.0;
    int n = 0;
    for (const Row& row : rows)
      if (row.cell == fields[0]) {
        mean += row.value.at(fields[1]);
        ++n;
      }
    mean /= n;
    for (const Row& row : rows)
      if (row.cell == fields[0]) var += (row.value.at(fields[1]) - mean) * (row.value.at(fields[1]) - mean);
    var /= n;
    CHECK(std::stod(fields[2]) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(std::stod(fields[3]) == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    ++summary_rows;
  }
  CHECK(summary_rows == 2 * 6);

  CHECK_THROWS_WITH_AS(report.summaries[0].value("winrate"), doctest::Contains("no metric"),
                       std::invalid_argument);

  fs::remove_all(dir);
}

TEST_CASE("identical plans produce byte-identical bundles") {
  const auto env = make_env("double-integrator-2d");
  const ExperimentPlan plan = small_plan();
  const std::string dir_a = temp_dir("admplan_eval_rerun_a");
  const std::string dir_b = temp_dir("admplan_eval_rerun_b");
  run_experiment(*env, plan, dir_a);
  run_experiment(*env, plan, dir_b);

  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir_a)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir_a).generic_string();
    CAPTURE(rel);
    CHECK(slurp((fs::path(dir_b) / rel).string()) == slurp(entry.path().string()));
    ++compared;
  }
  CHECK(compared == 3 + 3 + 8);  // tables and echo, plots, trajectory files

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("experiments reject mismatched environments") {
  const auto env = make_env("unicycle");
  const ExperimentPlan plan = small_plan();
  CHECK_THROWS_WITH_AS(run_experiment(*env, plan, temp_dir("admplan_eval_bad")),
                       doctest::Contains("targets environment"), std::invalid_argument);
}
