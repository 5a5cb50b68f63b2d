#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sfplan/config.hpp"

namespace sfplan {

inline std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// One strategy evaluated at one configuration point. Infeasible instances
/// and per-strategy failures are carried in-band via `status`.
struct StrategyRun {
  StrategyId id = StrategyId::Faaf;
  std::string status = "ok";  // ok | infeasible
  std::string message;
  std::optional<BuiltPlan> built;
  std::optional<ScheduleResult> schedule;
  double q_s = 0.0;
  double round_s = 0.0;
  double total_s = 0.0;  // configured rounds, static channels
  WaitingStats waits;
};

struct PointResult {
  std::string sweep_label;  // empty for plain plan runs
  std::vector<StrategyRun> runs;
};

inline PointResult evaluate_point(const ExperimentConfig& cfg, std::string sweep_label) {
  PointResult out;
  out.sweep_label = std::move(sweep_label);
  std::optional<ProblemInstance> problem;
  std::string infeasible_reason;
  try {
    problem = cfg.problem();
  } catch (const InfeasibleRisk& e) {
    infeasible_reason = e.what();
  }
  for (StrategyId id : cfg.strategies) {
    StrategyRun run;
    run.id = id;
    if (!problem) {
      run.status = "infeasible";
      run.message = infeasible_reason;
      out.runs.push_back(std::move(run));
      continue;
    }
    run.built = build_plan(id, *problem, cfg.solver, cfg.pf_by_dataset);
    run.schedule = simulate_round(*problem, run.built->plan, run.built->schedule);
    run.q_s = objective(*problem, run.built->plan);
    run.round_s = run.schedule->round_latency_s;
    run.total_s =
        simulate_training(*problem, run.built->plan, cfg.rounds, run.built->schedule).back();
    run.waits = waiting_stats(*run.schedule);
    out.runs.push_back(std::move(run));
  }
  return out;
}

namespace detail {

struct CsvSink {
  std::ofstream file;
  explicit CsvSink(const std::filesystem::path& path) : file(path, std::ios::binary) {
    if (!file) throw std::runtime_error("cannot open " + path.string());
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

/// Writes plans/latency/waiting/trace CSVs for a list of evaluated points.
/// Every row carries the provenance tuple (strategy, sweep value, seed,
/// config hash). Returns the output directory used.
inline std::filesystem::path write_artifacts(const ExperimentConfig& cfg,
                                             const std::vector<PointResult>& points) {
  namespace fs = std::filesystem;
  const fs::path out_dir = cfg.out_dir;
  fs::create_directories(out_dir);
  const std::string hash = hash_hex(config_hash(cfg));
  const std::string seed = std::to_string(cfg.seed);

  detail::CsvSink plans(out_dir / "plans.csv");
  detail::CsvSink latency(out_dir / "latency.csv");
  detail::CsvSink waiting(out_dir / "waiting.csv");
  detail::CsvSink trace(out_dir / "trace.csv");
  plans.file << "strategy,sweep_value,seed,config_hash,device_id,x,cut_layer,mu_dl,mu_ul,theta\n";
  latency.file << "strategy,sweep_value,seed,config_hash,status,q_s,round_s,total_s,wait_mean_s,wait_var_s2\n";
  waiting.file << "strategy,sweep_value,seed,config_hash,device_id,finish_s,waiting_s\n";
  trace.file << "strategy,sweep_value,seed,config_hash,iteration,q_s,residual,messages\n";

  for (const auto& point : points) {
    for (const auto& run : point.runs) {
      const std::string prov = std::string(to_string(run.id)) + "," + point.sweep_label +
                               "," + seed + "," + hash;
      if (run.status != "ok") {
        latency.file << prov << ',' << run.status << ",,,,,\n";
        continue;
      }
      latency.file << prov << ",ok," << fmt_double(run.q_s) << ',' << fmt_double(run.round_s)
                   << ',' << fmt_double(run.total_s) << ',' << fmt_double(run.waits.mean_s)
                   << ',' << fmt_double(run.waits.variance_s2) << '\n';
      const auto& plan = run.built->plan;
      for (std::size_t n = 0; n < plan.decisions.size(); ++n) {
        const auto& d = plan.decisions[n];
        plans.file << prov << ',' << cfg.fleet[n].id << ',' << fmt_double(d.x) << ','
                   << static_cast<long>(std::lround(d.x)) << ',' << fmt_double(d.mu_dl)
                   << ',' << fmt_double(d.mu_ul) << ',' << fmt_double(d.theta) << '\n';
        waiting.file << prov << ',' << cfg.fleet[n].id << ','
                     << fmt_double(run.schedule->finish_s[n]) << ','
                     << fmt_double(run.schedule->waiting_s[n]) << '\n';
      }
      if (run.built->trace) {
        for (const auto& row : outer_summaries(*run.built->trace)) {
          trace.file << prov << ',' << row.iteration << ',' << fmt_double(row.q) << ','
                     << fmt_double(row.residual) << ',' << row.messages << '\n';
        }
      }
    }
  }
  return out_dir;
}

/// Splits a sweep latency.csv into one whitespace-delimited series file per
/// strategy plus an index, ready for gnuplot. No rendering happens here.
inline void emit_plot_data(const std::filesystem::path& latency_csv,
                           const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::ifstream in(latency_csv);
  if (!in) throw std::runtime_error("cannot open " + latency_csv.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(latency_csv.string() + ": empty file");
  const auto header = detail::split_csv_line(line);
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw std::runtime_error(latency_csv.string() + ": missing column " + name);
  };
  const std::size_t c_strategy = col("strategy");
  const std::size_t c_value = col("sweep_value");
  const std::size_t c_status = col("status");
  const std::size_t c_q = col("q_s");
  const std::size_t c_round = col("round_s");

  std::vector<std::string> order;
  std::map<std::string, std::string> series;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error(latency_csv.string() + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(header.size()) + " fields, got " +
                               std::to_string(fields.size()));
    }
    if (fields[c_status] != "ok") continue;
    for (std::size_t c : {c_value, c_q, c_round}) {
      char* end = nullptr;
      const std::string& f = fields[c];
      std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size()) {
        throw std::runtime_error(latency_csv.string() + ":" + std::to_string(line_no) +
                                 ": malformed number \"" + f + "\"");
      }
    }
    auto it = series.find(fields[c_strategy]);
    if (it == series.end()) {
      order.push_back(fields[c_strategy]);
      it = series.emplace(fields[c_strategy], std::string()).first;
    }
    it->second += fields[c_value] + " " + fields[c_q] + " " + fields[c_round] + "\n";
  }

  const fs::path plot_dir = out_dir / "plot";
  fs::create_directories(plot_dir);
  std::ofstream index(plot_dir / "index.txt", std::ios::binary);
  for (const auto& name : order) {
    const fs::path file = plot_dir / (name + ".dat");
    std::ofstream os(file, std::ios::binary);
    os << "# sweep_value q_s round_s\n" << series[name];
    index << name << ' ' << (fs::path("plot") / (name + ".dat")).generic_string() << '\n';
  }
}

/// Single-point run over the configured strategies.
inline int run_plan(const ExperimentConfig& cfg, std::ostream& log) {
  auto point = evaluate_point(cfg, "");
  write_artifacts(cfg, {point});
  for (const auto& run : point.runs) {
    log << to_string(run.id) << ": " << run.status;
    if (run.status == "ok") {
      log << " q_s=" << fmt_double(run.q_s) << " round_s=" << fmt_double(run.round_s);
    } else {
      log << " (" << run.message << ")";
    }
    log << '\n';
  }
  return 0;
}

/// Parameter sweep; points are independent and may be evaluated concurrently,
/// output rows are ordered by sweep value then strategy.
inline int run_sweep(const ExperimentConfig& cfg, std::ostream& log) {
  if (!cfg.sweep) throw ConfigError("sweep requested but config has no sweep block");
  const auto values = sweep_values(*cfg.sweep);
  std::vector<std::future<PointResult>> futures;
  futures.reserve(values.size());
  for (double v : values) {
    futures.push_back(std::async(std::launch::async, [&cfg, v]() {
      return evaluate_point(with_sweep_value(cfg, cfg.sweep->parameter, v), fmt_double(v));
    }));
  }
  std::vector<PointResult> points;
  points.reserve(values.size());
  for (auto& f : futures) points.push_back(f.get());
  const auto out_dir = write_artifacts(cfg, points);
  emit_plot_data(out_dir / "latency.csv", out_dir);
  for (const auto& point : points) {
    for (const auto& run : point.runs) {
      log << cfg.sweep->parameter << '=' << point.sweep_label << ' ' << to_string(run.id)
          << ": " << run.status;
      if (run.status == "ok") log << " q_s=" << fmt_double(run.q_s);
      log << '\n';
    }
  }
  return 0;
}

}  // namespace sfplan
