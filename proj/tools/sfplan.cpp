// Command-line front end: plan one round, sweep a parameter, fit regression
// cost curves, or re-simulate saved plans.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sfplan/config.hpp"
#include "sfplan/harness.hpp"

namespace {

sfplan::ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sfplan::ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw sfplan::ConfigError("config parse error in " + path + ": " + e.what());
  }
  return sfplan::config_from_json(j);
}

void apply_overrides(sfplan::ExperimentConfig& cfg, const std::string& out_dir,
                     const std::string& strategies, const std::string& sweep,
                     std::uint64_t seed, bool seed_set, const std::string& mode) {
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (seed_set) cfg.seed = seed;
  if (!mode.empty()) {
    if (mode == "parallel") {
      cfg.mode = sfplan::ScheduleMode::Parallel;
    } else if (mode == "sequential") {
      cfg.mode = sfplan::ScheduleMode::Sequential;
    } else {
      throw sfplan::ConfigError("--mode must be parallel or sequential");
    }
  }
  if (!strategies.empty()) {
    cfg.strategies.clear();
    std::stringstream ss(strategies);
    std::string name;
    while (std::getline(ss, name, ',')) {
      const auto id = sfplan::parse_strategy(name);
      if (!id) throw sfplan::ConfigError("--strategies: unknown strategy \"" + name + "\"");
      cfg.strategies.push_back(*id);
    }
    if (cfg.strategies.empty()) throw sfplan::ConfigError("--strategies: empty list");
  }
  if (!sweep.empty()) {
    std::stringstream ss(sweep);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 4) {
      throw sfplan::ConfigError("--sweep must be param:from:to:step");
    }
    sfplan::SweepSpec spec;
    spec.parameter = parts[0];
    try {
      spec.from = std::stod(parts[1]);
      spec.to = std::stod(parts[2]);
      spec.step = std::stod(parts[3]);
    } catch (const std::exception&) {
      throw sfplan::ConfigError("--sweep: malformed numbers in \"" + sweep + "\"");
    }
    if (spec.parameter != "p_risk" && spec.parameter != "f_s" &&
        spec.parameter != "ul_bw" && spec.parameter != "dl_bw") {
      throw sfplan::ConfigError("--sweep parameter must be one of p_risk, f_s, ul_bw, dl_bw");
    }
    if (!(spec.step > 0.0) || spec.to < spec.from) {
      throw sfplan::ConfigError("--sweep bounds must be ordered with step > 0");
    }
    cfg.sweep = spec;
  }
}

std::vector<std::pair<double, double>> load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sfplan::ConfigError("cannot open samples file: " + path);
  std::vector<std::pair<double, double>> samples;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.find_first_not_of("0123456789+-.eE, \t") != std::string::npos) {
      continue;  // header row
    }
    std::stringstream ss(line);
    std::string xs, ys;
    if (!std::getline(ss, xs, ',') || !std::getline(ss, ys)) {
      throw sfplan::ConfigError(path + ":" + std::to_string(line_no) + ": expected x,y");
    }
    try {
      samples.emplace_back(std::stod(xs), std::stod(ys));
    } catch (const std::exception&) {
      throw sfplan::ConfigError(path + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  return samples;
}

int run_fit(const std::string& kind, const std::string& samples_path) {
  const auto samples = load_samples(samples_path);
  nlohmann::json out;
  if (kind == "qpr") {
    const auto fit = sfplan::fit_qpr(samples);
    out = {{"kind", "qpr"},
           {"coeffs", {fit.model.a2, fit.model.a1, fit.model.a0}},
           {"rmse", fit.rmse}};
  } else if (kind == "rr") {
    const auto fit = sfplan::fit_rr(samples);
    out = {{"kind", "rr"}, {"coeffs", {fit.model.num, fit.model.off}}, {"rmse", fit.rmse}};
  } else {
    throw sfplan::ConfigError("--kind must be qpr or rr");
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

// Rebuild plans from a plans.csv and re-run the schedule simulation, e.g. to
// compare sequential against parallel execution of the same decisions.
int run_simulate(const sfplan::ExperimentConfig& cfg, const std::string& plans_path) {
  std::ifstream in(plans_path);
  if (!in) throw sfplan::ConfigError("cannot open plans file: " + plans_path);
  const auto problem = cfg.problem();

  std::string line;
  if (!std::getline(in, line)) throw sfplan::ConfigError(plans_path + ": empty file");
  const auto header = sfplan::detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"strategy", "device_id", "x", "mu_dl", "mu_ul", "theta"}) {
    if (!col.count(need)) {
      throw sfplan::ConfigError(plans_path + ": missing column " + need);
    }
  }
  std::map<std::string, std::size_t> device_index;
  for (std::size_t n = 0; n < cfg.fleet.size(); ++n) device_index[cfg.fleet[n].id] = n;

  std::vector<std::string> order;
  std::map<std::string, sfplan::Plan> plans;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = sfplan::detail::split_csv_line(line);
    if (f.size() != header.size()) {
      throw sfplan::ConfigError(plans_path + ":" + std::to_string(line_no) +
                                ": wrong field count");
    }
    const std::string& strategy = f[col["strategy"]];
    auto it = plans.find(strategy);
    if (it == plans.end()) {
      order.push_back(strategy);
      sfplan::Plan empty;
      empty.decisions.resize(cfg.fleet.size());
      it = plans.emplace(strategy, std::move(empty)).first;
    }
    const auto dev = device_index.find(f[col["device_id"]]);
    if (dev == device_index.end()) {
      throw sfplan::ConfigError(plans_path + ":" + std::to_string(line_no) +
                                ": unknown device " + f[col["device_id"]]);
    }
    auto& d = it->second.decisions[dev->second];
    try {
      d.x = std::stod(f[col["x"]]);
      d.mu_dl = std::stod(f[col["mu_dl"]]);
      d.mu_ul = std::stod(f[col["mu_ul"]]);
      d.theta = std::stod(f[col["theta"]]);
    } catch (const std::exception&) {
      throw sfplan::ConfigError(plans_path + ":" + std::to_string(line_no) +
                                ": malformed number");
    }
  }

  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream wait_csv(std::filesystem::path(cfg.out_dir) / "waiting.csv",
                         std::ios::binary);
  wait_csv << "strategy,mode,device_id,finish_s,waiting_s\n";
  for (const auto& name : order) {
    const auto schedule = sfplan::simulate_round(problem, plans.at(name), cfg.mode);
    const auto stats = sfplan::waiting_stats(schedule);
    std::cout << name << " mode=" << to_string(cfg.mode)
              << " round_s=" << sfplan::fmt_double(schedule.round_latency_s)
              << " wait_var=" << sfplan::fmt_double(stats.variance_s2) << '\n';
    for (std::size_t n = 0; n < cfg.fleet.size(); ++n) {
      wait_csv << name << ',' << to_string(cfg.mode) << ',' << cfg.fleet[n].id << ','
               << sfplan::fmt_double(schedule.finish_s[n]) << ','
               << sfplan::fmt_double(schedule.waiting_s[n]) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split-training round planner and simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, strategies, sweep, mode, plans_path;
  std::string fit_kind, samples_path;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* cmd, bool need_config) {
    auto* opt = cmd->add_option("--config", config_path, "experiment config (JSON)");
    if (need_config) opt->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--strategies", strategies, "comma-separated strategy list");
    cmd->add_option("--seed", seed, "run seed recorded in all outputs")
        ->each([&](const std::string&) { seed_set = true; });
    cmd->add_option("--mode", mode, "schedule mode: parallel|sequential");
  };

  auto* plan_cmd = app.add_subcommand("plan", "solve and simulate one configuration");
  add_common(plan_cmd, true);

  auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--sweep", sweep, "param:from:to:step");

  auto* fit_cmd = app.add_subcommand("fit", "fit a regression cost curve to samples");
  fit_cmd->add_option("--kind", fit_kind, "qpr|rr")->required();
  fit_cmd->add_option("--samples", samples_path, "CSV file with x,y lines")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "re-simulate schedules from plans.csv");
  add_common(sim_cmd, true);
  sim_cmd->add_option("--plans", plans_path, "plans.csv from a previous run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return run_fit(fit_kind, samples_path);
    auto cfg = load_config(config_path);
    apply_overrides(cfg, out_dir, strategies, sweep, seed, seed_set, mode);
    if (plan_cmd->parsed()) return sfplan::run_plan(cfg, std::cout);
    if (sweep_cmd->parsed()) return sfplan::run_sweep(cfg, std::cout);
    if (sim_cmd->parsed()) return run_simulate(cfg, plans_path);
  } catch (const sfplan::SolverNonConvergence& e) {
    std::cerr << "solver failed to converge: " << e.what() << '\n';
    return 2;
  } catch (const sfplan::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
