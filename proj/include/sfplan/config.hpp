#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfplan/baselines.hpp"
#include "sfplan/cost_models.hpp"
#include "sfplan/problem.hpp"
#include "sfplan/risk.hpp"
#include "sfplan/solver.hpp"

namespace sfplan {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SweepSpec {
  std::string parameter;  // p_risk | f_s | ul_bw | dl_bw
  double from = 0.0;
  double to = 0.0;
  double step = 0.0;
};

/// Fully resolved experiment description. Field names carry the unit:
/// *_gflops, *_hz, *_bps, *_w, sizes in samples, data sizes in Mbit.
struct ExperimentConfig {
  std::vector<DeviceProfile> fleet;
  ServerProfile server;
  LinkMode link;
  CostModel model;
  double kappa = 1.0;                       // device backward/forward workload ratio
  std::optional<RiskProfile> risk_profile;  // defaults to the synthetic profile
  double p_risk = 0.5;
  int epochs = 5;
  int rounds = 10;
  SolverConfig solver;
  std::vector<StrategyId> strategies;
  std::optional<SweepSpec> sweep;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  ScheduleMode mode = ScheduleMode::Parallel;
  bool pf_by_dataset = false;  // proportional-fair by dataset size instead of mini-batch

  RiskProfile resolved_risk() const {
    return risk_profile ? *risk_profile : synthetic_risk_profile(model.layers);
  }

  ProblemInstance problem() const {
    return make_problem(fleet, server, adapt(model, kappa), resolved_risk(), p_risk,
                        epochs, link);
  }
};

/// Demo fleet: four 3.62-GFLOPS, three 5.0-GFLOPS and three 9.69-GFLOPS
/// boards behind a 60-GFLOPS edge server with 50/100 Mbps down/up links.
/// Dataset sizes are synthetic placeholders.
inline ExperimentConfig default_config() {
  ExperimentConfig cfg;
  auto add = [&](const std::string& id, double gflops) {
    DeviceProfile d;
    d.id = id;
    d.gflops = gflops;
    d.tx_power_w = 0.5;
    d.channel_gain = 1.0;
    d.dataset_size = 5000;
    d.minibatch = 32;
    cfg.fleet.push_back(std::move(d));
  };
  for (int i = 0; i < 4; ++i) add("rpi3-" + std::to_string(i), 3.62);
  for (int i = 0; i < 3; ++i) add("rpi3a-" + std::to_string(i), 5.0);
  for (int i = 0; i < 3; ++i) add("rpi4b-" + std::to_string(i), 9.69);
  cfg.server = ServerProfile{60.0, 50e6, 100e6, 1.0, 1e-9};
  cfg.link = LinkMode::direct(50e6, 100e6);
  cfg.model = cost_model_preset("resnet18");
  cfg.strategies = all_strategies();
  return cfg;
}

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing field: " + path + "." + key);
  return *it;
}

inline double num_at(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number()) throw ConfigError("field must be a number: " + path + "." + key);
  return v.get<double>();
}

inline double num_or(const json& j, const std::string& key, const std::string& path,
                     double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ConfigError("field must be a number: " + path + "." + key);
  return it->get<double>();
}

inline void reject_unknown(const json& j, const std::vector<std::string>& known,
                           const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : known) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown field: " + path + "." + it.key());
  }
}

inline std::vector<double> rate_list(const json& v, const std::string& path) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("rates must be numbers: " + path);
      out.push_back(e.get<double>());
    }
  } else {
    throw ConfigError("field must be a number or array of numbers: " + path);
  }
  return out;
}

inline QprModel qpr_from_json(const json& j, const std::string& path) {
  if (require(j, "kind", path).get<std::string>() != "qpr") {
    throw ConfigError("expected kind \"qpr\" at " + path);
  }
  const json& c = require(j, "coeffs", path);
  if (!c.is_array() || c.size() != 3) {
    throw ConfigError("qpr coeffs must be [a2, a1, a0]: " + path + ".coeffs");
  }
  return QprModel{c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
}

inline RrModel rr_from_json(const json& j, const std::string& path) {
  if (require(j, "kind", path).get<std::string>() != "rr") {
    throw ConfigError("expected kind \"rr\" at " + path);
  }
  const json& c = require(j, "coeffs", path);
  if (!c.is_array() || c.size() != 2) {
    throw ConfigError("rr coeffs must be [num, off]: " + path + ".coeffs");
  }
  return RrModel{c[0].get<double>(), c[1].get<double>()};
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::num_at;
  using detail::num_or;
  using detail::require;
  ExperimentConfig cfg;

  const auto& fleet = require(j, "fleet", "config");
  if (!fleet.is_array() || fleet.empty()) {
    throw ConfigError("config.fleet must be a non-empty array");
  }
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    const std::string path = "config.fleet[" + std::to_string(i) + "]";
    const auto& d = fleet[i];
    detail::reject_unknown(
        d, {"id", "gflops", "tx_power_w", "channel_gain", "dataset_size", "minibatch"},
        path);
    DeviceProfile dev;
    dev.id = d.contains("id") ? d["id"].get<std::string>() : "dev" + std::to_string(i);
    dev.gflops = num_at(d, "gflops", path);
    dev.tx_power_w = num_or(d, "tx_power_w", path, 0.5);
    dev.channel_gain = num_or(d, "channel_gain", path, 1.0);
    dev.dataset_size = static_cast<std::int64_t>(num_at(d, "dataset_size", path));
    dev.minibatch = static_cast<std::int64_t>(num_at(d, "minibatch", path));
    try {
      dev.validate();
    } catch (const std::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    cfg.fleet.push_back(std::move(dev));
  }

  const auto& server = require(j, "server", "config");
  detail::reject_unknown(
      server, {"gflops", "bw_dl_hz", "bw_ul_hz", "tx_power_w", "noise_w_per_hz"},
      "config.server");
  cfg.server.gflops = num_at(server, "gflops", "config.server");
  cfg.server.bw_dl_hz = num_or(server, "bw_dl_hz", "config.server", 50e6);
  cfg.server.bw_ul_hz = num_or(server, "bw_ul_hz", "config.server", 100e6);
  cfg.server.tx_power_w = num_or(server, "tx_power_w", "config.server", 1.0);
  cfg.server.noise_w_per_hz = num_or(server, "noise_w_per_hz", "config.server", 1e-9);
  try {
    cfg.server.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config.server: ") + e.what());
  }

  const auto& link = require(j, "link", "config");
  detail::reject_unknown(link, {"mode", "rate_dl_bps", "rate_ul_bps"}, "config.link");
  const std::string mode = require(link, "mode", "config.link").get<std::string>();
  if (mode == "shannon") {
    cfg.link = LinkMode::shannon();
  } else if (mode == "direct") {
    cfg.link.kind = LinkKind::Direct;
    cfg.link.rate_dl_bps =
        detail::rate_list(require(link, "rate_dl_bps", "config.link"), "config.link.rate_dl_bps");
    cfg.link.rate_ul_bps =
        detail::rate_list(require(link, "rate_ul_bps", "config.link"), "config.link.rate_ul_bps");
  } else {
    throw ConfigError("config.link.mode must be \"shannon\" or \"direct\"");
  }
  try {
    cfg.link.validate(cfg.fleet.size());
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config.link: ") + e.what());
  }

  const auto& model = require(j, "model", "config");
  if (model.contains("preset")) {
    try {
      cfg.model = cost_model_preset(model["preset"].get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config.model.preset: ") + e.what());
    }
  } else if (model.contains("custom")) {
    const auto& c = model["custom"];
    const std::string path = "config.model.custom";
    CostModel cm;
    cm.name = c.contains("name") ? c["name"].get<std::string>() : "custom";
    cm.layers = static_cast<int>(num_at(c, "layers", path));
    cm.floor = num_or(c, "floor", path, 0.0);
    cm.model_size = detail::qpr_from_json(require(c, "model_size", path), path + ".model_size");
    cm.fwd_share = detail::qpr_from_json(require(c, "fwd_share", path), path + ".fwd_share");
    cm.bwd_share = detail::qpr_from_json(require(c, "bwd_share", path), path + ".bwd_share");
    cm.smashed_up = detail::rr_from_json(require(c, "smashed_up", path), path + ".smashed_up");
    cm.grad_down = detail::rr_from_json(require(c, "grad_down", path), path + ".grad_down");
    try {
      cm.validate();
    } catch (const std::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    cfg.model = std::move(cm);
  } else {
    throw ConfigError("config.model needs \"preset\" or \"custom\"");
  }

  cfg.kappa = num_or(j, "kappa", "config", 1.0);
  if (!(cfg.kappa > 0.0)) throw ConfigError("config.kappa must be > 0");

  if (j.contains("risk_profile")) {
    const auto& rp = j["risk_profile"];
    if (!rp.is_array()) throw ConfigError("config.risk_profile must be [[layer, risk], ...]");
    RiskProfile prof;
    for (const auto& e : rp) {
      if (!e.is_array() || e.size() != 2) {
        throw ConfigError("config.risk_profile entries must be [layer, risk]");
      }
      prof.points.emplace_back(e[0].get<int>(), e[1].get<double>());
    }
    try {
      prof.validate(cfg.model.layers);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config.risk_profile: ") + e.what());
    }
    cfg.risk_profile = std::move(prof);
  }

  cfg.p_risk = num_or(j, "p_risk", "config", 0.5);
  if (!(cfg.p_risk >= 0.0 && cfg.p_risk <= 1.0)) {
    throw ConfigError("config.p_risk must lie in [0, 1]");
  }
  cfg.epochs = static_cast<int>(num_or(j, "epochs", "config", 5));
  if (cfg.epochs < 1) throw ConfigError("config.epochs must be >= 1");
  cfg.rounds = static_cast<int>(num_or(j, "rounds", "config", 10));
  if (cfg.rounds < 1) throw ConfigError("config.rounds must be >= 1");

  if (j.contains("solver")) {
    const auto& s = j["solver"];
    detail::reject_unknown(s,
                           {"eta", "step_alpha", "sigma_outer", "sigma_inner", "max_outer",
                            "max_inner", "eps_margin", "topology"},
                           "config.solver");
    cfg.solver.eta = num_or(s, "eta", "config.solver", cfg.solver.eta);
    cfg.solver.step_alpha = num_or(s, "step_alpha", "config.solver", cfg.solver.step_alpha);
    cfg.solver.sigma_outer = num_or(s, "sigma_outer", "config.solver", cfg.solver.sigma_outer);
    cfg.solver.sigma_inner = num_or(s, "sigma_inner", "config.solver", cfg.solver.sigma_inner);
    cfg.solver.max_outer =
        static_cast<int>(num_or(s, "max_outer", "config.solver", cfg.solver.max_outer));
    cfg.solver.max_inner =
        static_cast<long>(num_or(s, "max_inner", "config.solver",
                                 static_cast<double>(cfg.solver.max_inner)));
    cfg.solver.eps_margin = num_or(s, "eps_margin", "config.solver", cfg.solver.eps_margin);
    for (double v : {cfg.solver.eta, cfg.solver.step_alpha, cfg.solver.sigma_outer,
                     cfg.solver.sigma_inner, cfg.solver.eps_margin}) {
      if (!(v > 0.0)) throw ConfigError("config.solver steps and thresholds must be > 0");
    }
    if (cfg.solver.max_outer < 1 || cfg.solver.max_inner < 1) {
      throw ConfigError("config.solver iteration caps must be >= 1");
    }
    if (s.contains("topology")) {
      const auto& t = s["topology"];
      if (t.is_string()) {
        const std::string name = t.get<std::string>();
        if (name == "complete") {
          cfg.solver.topology.kind = Topology::Kind::Complete;
        } else if (name == "ring") {
          cfg.solver.topology.kind = Topology::Kind::Ring;
        } else {
          throw ConfigError("config.solver.topology must be \"complete\", \"ring\" or an adjacency array");
        }
      } else if (t.is_array()) {
        cfg.solver.topology.kind = Topology::Kind::Custom;
        for (const auto& row : t) {
          std::vector<int> nbrs;
          for (const auto& v : row) nbrs.push_back(v.get<int>());
          cfg.solver.topology.custom.push_back(std::move(nbrs));
        }
      } else {
        throw ConfigError("config.solver.topology must be a string or adjacency array");
      }
    }
  }

  if (j.contains("strategies")) {
    for (const auto& s : j["strategies"]) {
      const std::string name = s.get<std::string>();
      const auto id = parse_strategy(name);
      if (!id) throw ConfigError("config.strategies: unknown strategy \"" + name + "\"");
      cfg.strategies.push_back(*id);
    }
  } else {
    cfg.strategies = all_strategies();
  }
  if (cfg.strategies.empty()) throw ConfigError("config.strategies must be non-empty");

  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    SweepSpec spec;
    spec.parameter = require(s, "parameter", "config.sweep").get<std::string>();
    if (spec.parameter != "p_risk" && spec.parameter != "f_s" &&
        spec.parameter != "ul_bw" && spec.parameter != "dl_bw") {
      throw ConfigError("config.sweep.parameter must be one of p_risk, f_s, ul_bw, dl_bw");
    }
    spec.from = num_at(s, "from", "config.sweep");
    spec.to = num_at(s, "to", "config.sweep");
    spec.step = num_at(s, "step", "config.sweep");
    if (!(spec.step > 0.0) || spec.to < spec.from) {
      throw ConfigError("config.sweep bounds must be ordered with step > 0");
    }
    cfg.sweep = spec;
  }

  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("mode")) {
    const std::string m = j["mode"].get<std::string>();
    if (m == "parallel") {
      cfg.mode = ScheduleMode::Parallel;
    } else if (m == "sequential") {
      cfg.mode = ScheduleMode::Sequential;
    } else {
      throw ConfigError("config.mode must be \"parallel\" or \"sequential\"");
    }
  }
  if (j.contains("pf_by_dataset")) cfg.pf_by_dataset = j["pf_by_dataset"].get<bool>();
  return cfg;
}

/// Canonical re-serialization of the resolved config; hashing this makes the
/// provenance hash independent of input formatting.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  for (const auto& d : cfg.fleet) {
    j["fleet"].push_back({{"id", d.id},
                          {"gflops", d.gflops},
                          {"tx_power_w", d.tx_power_w},
                          {"channel_gain", d.channel_gain},
                          {"dataset_size", d.dataset_size},
                          {"minibatch", d.minibatch}});
  }
  j["server"] = {{"gflops", cfg.server.gflops},
                 {"bw_dl_hz", cfg.server.bw_dl_hz},
                 {"bw_ul_hz", cfg.server.bw_ul_hz},
                 {"tx_power_w", cfg.server.tx_power_w},
                 {"noise_w_per_hz", cfg.server.noise_w_per_hz}};
  j["link"]["mode"] = cfg.link.kind == LinkKind::Shannon ? "shannon" : "direct";
  if (cfg.link.kind == LinkKind::Direct) {
    j["link"]["rate_dl_bps"] = cfg.link.rate_dl_bps;
    j["link"]["rate_ul_bps"] = cfg.link.rate_ul_bps;
  }
  j["model"] = {{"name", cfg.model.name},
                {"layers", cfg.model.layers},
                {"floor", cfg.model.floor},
                {"model_size", {cfg.model.model_size.a2, cfg.model.model_size.a1, cfg.model.model_size.a0}},
                {"fwd_share", {cfg.model.fwd_share.a2, cfg.model.fwd_share.a1, cfg.model.fwd_share.a0}},
                {"bwd_share", {cfg.model.bwd_share.a2, cfg.model.bwd_share.a1, cfg.model.bwd_share.a0}},
                {"smashed_up", {cfg.model.smashed_up.num, cfg.model.smashed_up.off}},
                {"grad_down", {cfg.model.grad_down.num, cfg.model.grad_down.off}}};
  j["kappa"] = cfg.kappa;
  nlohmann::json rp = nlohmann::json::array();
  for (const auto& [layer, risk] : cfg.resolved_risk().points) {
    rp.push_back({layer, risk});
  }
  j["risk_profile"] = std::move(rp);
  j["p_risk"] = cfg.p_risk;
  j["epochs"] = cfg.epochs;
  j["rounds"] = cfg.rounds;
  j["solver"] = {{"eta", cfg.solver.eta},
                 {"step_alpha", cfg.solver.step_alpha},
                 {"sigma_outer", cfg.solver.sigma_outer},
                 {"sigma_inner", cfg.solver.sigma_inner},
                 {"max_outer", cfg.solver.max_outer},
                 {"max_inner", cfg.solver.max_inner},
                 {"eps_margin", cfg.solver.eps_margin}};
  j["solver"]["topology"] = cfg.solver.topology.kind == Topology::Kind::Complete ? "complete"
                            : cfg.solver.topology.kind == Topology::Kind::Ring   ? "ring"
                                                                                 : "custom";
  if (cfg.solver.topology.kind == Topology::Kind::Custom) {
    j["solver"]["adjacency"] = cfg.solver.topology.custom;
  }
  for (auto s : cfg.strategies) j["strategies"].push_back(to_string(s));
  if (cfg.sweep) {
    j["sweep"] = {{"parameter", cfg.sweep->parameter},
                  {"from", cfg.sweep->from},
                  {"to", cfg.sweep->to},
                  {"step", cfg.sweep->step}};
  }
  j["seed"] = cfg.seed;
  j["mode"] = to_string(cfg.mode);
  j["pf_by_dataset"] = cfg.pf_by_dataset;
  return j;
}

inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Applies one sweep value to a copy of the base config.
inline ExperimentConfig with_sweep_value(const ExperimentConfig& base,
                                         const std::string& parameter, double value) {
  ExperimentConfig cfg = base;
  if (parameter == "p_risk") {
    cfg.p_risk = value;
  } else if (parameter == "f_s") {
    cfg.server.gflops = value;
  } else if (parameter == "ul_bw") {
    if (cfg.link.kind == LinkKind::Direct) {
      cfg.link.rate_ul_bps = {value};
    } else {
      cfg.server.bw_ul_hz = value;
    }
  } else if (parameter == "dl_bw") {
    if (cfg.link.kind == LinkKind::Direct) {
      cfg.link.rate_dl_bps = {value};
    } else {
      cfg.server.bw_dl_hz = value;
    }
  } else {
    throw ConfigError("unknown sweep parameter: " + parameter);
  }
  return cfg;
}

inline std::vector<double> sweep_values(const SweepSpec& s) {
  std::vector<double> out;
  for (double v = s.from; v <= s.to + 1e-9 * std::max(1.0, std::fabs(s.to)); v += s.step) {
    out.push_back(v);
  }
  return out;
}

}  // namespace sfplan
