#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sfplan/simulator.hpp"
#include "sfplan/solver.hpp"

namespace sfplan {

/// The comparison strategies: cut-selection rule x schedule x allocator,
/// plus the full joint optimizer.
enum class StrategyId {
  Faaf,    // full model on device, average-fair shares, parallel
  Sf1Af,   // common shallowest feasible cut, sequential, average-fair
  Sf1Pf,
  Sf2Af,   // optimized per-device cuts, sequential, average-fair
  Sf2Pf,
  Sf3Af,   // optimized per-device cuts, parallel, average-fair
  Sf3Pf,
  FsAf,    // common shallowest feasible cut, parallel, average-fair
  FsPf,
  Dpmora,  // joint cut + allocation optimization, parallel
};

inline const char* to_string(StrategyId s) {
  switch (s) {
    case StrategyId::Faaf: return "FAAF";
    case StrategyId::Sf1Af: return "SF1AF";
    case StrategyId::Sf1Pf: return "SF1PF";
    case StrategyId::Sf2Af: return "SF2AF";
    case StrategyId::Sf2Pf: return "SF2PF";
    case StrategyId::Sf3Af: return "SF3AF";
    case StrategyId::Sf3Pf: return "SF3PF";
    case StrategyId::FsAf: return "FSAF";
    case StrategyId::FsPf: return "FSPF";
    case StrategyId::Dpmora: return "DPMORA";
  }
  return "?";
}

inline std::optional<StrategyId> parse_strategy(std::string_view name) {
  for (StrategyId s : {StrategyId::Faaf, StrategyId::Sf1Af, StrategyId::Sf1Pf,
                       StrategyId::Sf2Af, StrategyId::Sf2Pf, StrategyId::Sf3Af,
                       StrategyId::Sf3Pf, StrategyId::FsAf, StrategyId::FsPf,
                       StrategyId::Dpmora}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

inline std::vector<StrategyId> all_strategies() {
  return {StrategyId::Faaf,  StrategyId::Sf1Af, StrategyId::Sf1Pf, StrategyId::Sf2Af,
          StrategyId::Sf2Pf, StrategyId::Sf3Af, StrategyId::Sf3Pf, StrategyId::FsAf,
          StrategyId::FsPf,  StrategyId::Dpmora};
}

enum class CutRule { FullLocal, FixedCommon, PerDevice };
enum class Allocator { Af, Pf };

struct Strategy {
  StrategyId id;
  CutRule cut;
  Allocator alloc;
  ScheduleMode schedule;
};

inline Strategy strategy_spec(StrategyId id) {
  switch (id) {
    case StrategyId::Faaf:
      return {id, CutRule::FullLocal, Allocator::Af, ScheduleMode::Parallel};
    case StrategyId::Sf1Af:
      return {id, CutRule::FixedCommon, Allocator::Af, ScheduleMode::Sequential};
    case StrategyId::Sf1Pf:
      return {id, CutRule::FixedCommon, Allocator::Pf, ScheduleMode::Sequential};
    case StrategyId::Sf2Af:
      return {id, CutRule::PerDevice, Allocator::Af, ScheduleMode::Sequential};
    case StrategyId::Sf2Pf:
      return {id, CutRule::PerDevice, Allocator::Pf, ScheduleMode::Sequential};
    case StrategyId::Sf3Af:
      return {id, CutRule::PerDevice, Allocator::Af, ScheduleMode::Parallel};
    case StrategyId::Sf3Pf:
      return {id, CutRule::PerDevice, Allocator::Pf, ScheduleMode::Parallel};
    case StrategyId::FsAf:
      return {id, CutRule::FixedCommon, Allocator::Af, ScheduleMode::Parallel};
    case StrategyId::FsPf:
      return {id, CutRule::FixedCommon, Allocator::Pf, ScheduleMode::Parallel};
    case StrategyId::Dpmora:
      return {id, CutRule::PerDevice, Allocator::Af, ScheduleMode::Parallel};
  }
  throw std::logic_error("unknown strategy");
}

inline std::vector<double> allocate_af(std::size_t n) {
  if (n < 1) throw std::invalid_argument("need at least one device");
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

inline std::vector<double> allocate_pf(const std::vector<std::int64_t>& minibatches) {
  if (minibatches.empty()) throw std::invalid_argument("need at least one device");
  double total = 0.0;
  for (auto b : minibatches) {
    if (b < 1) throw std::invalid_argument("mini-batch sizes must be >= 1");
    total += static_cast<double>(b);
  }
  std::vector<double> out(minibatches.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(minibatches[i]) / total;
  }
  return out;
}

struct BuiltPlan {
  StrategyId id;
  Plan plan;
  ScheduleMode schedule = ScheduleMode::Parallel;
  std::optional<SolverTrace> trace;  // populated by the joint optimizer only
};

namespace detail {

inline void apply_shares(Plan& plan, const std::vector<double>& shares, double eps) {
  for (std::size_t n = 0; n < plan.decisions.size(); ++n) {
    const double s = std::clamp(shares[n], eps, 1.0 - eps);
    plan.decisions[n].mu_dl = s;
    plan.decisions[n].mu_ul = s;
    plan.decisions[n].theta = s;
  }
}

inline std::vector<double> strategy_shares(const Strategy& st, const ProblemInstance& p,
                                           bool pf_by_dataset) {
  if (st.alloc == Allocator::Af) return allocate_af(p.size());
  std::vector<std::int64_t> weights(p.size());
  for (std::size_t n = 0; n < p.size(); ++n) {
    weights[n] = pf_by_dataset ? p.fleet[n].dataset_size : p.fleet[n].minibatch;
  }
  return allocate_pf(weights);
}

// Cut positions from the relaxed cut optimization under frozen average-fair
// shares, snapped to feasible integers.
inline std::vector<double> optimized_cuts(const ProblemInstance& p,
                                          const SolverConfig& cfg) {
  ProblemInstance pr = p;
  pr.relaxed = true;
  Plan plan;
  plan.decisions.resize(p.size());
  const double af = std::clamp(1.0 / static_cast<double>(p.size()), cfg.eps_margin,
                               1.0 - cfg.eps_margin);
  for (auto& d : plan.decisions) {
    d.x = std::clamp(0.5 * p.layers(), p.x_min, static_cast<double>(p.layers()));
    d.mu_dl = d.mu_ul = d.theta = af;
  }
  plan = update_alpha(pr, plan, cfg);
  plan = round_plan(p, plan);
  std::vector<double> cuts(p.size());
  for (std::size_t n = 0; n < p.size(); ++n) cuts[n] = plan.decisions[n].x;
  return cuts;
}

}  // namespace detail

inline BuiltPlan build_plan(StrategyId id, const ProblemInstance& p,
                            const SolverConfig& cfg, bool pf_by_dataset = false) {
  const Strategy st = strategy_spec(id);
  BuiltPlan out;
  out.id = id;
  out.schedule = st.schedule;

  if (id == StrategyId::Dpmora) {
    auto solved = solve(p, cfg);
    out.plan = std::move(solved.plan);
    out.trace = std::move(solved.trace);
    return out;
  }

  out.plan.decisions.resize(p.size());
  switch (st.cut) {
    case CutRule::FullLocal:
      for (auto& d : out.plan.decisions) d.x = static_cast<double>(p.layers());
      break;
    case CutRule::FixedCommon:
      for (auto& d : out.plan.decisions) d.x = static_cast<double>(p.min_cut);
      break;
    case CutRule::PerDevice: {
      const auto cuts = detail::optimized_cuts(p, cfg);
      for (std::size_t n = 0; n < p.size(); ++n) out.plan.decisions[n].x = cuts[n];
      break;
    }
  }
  detail::apply_shares(out.plan, detail::strategy_shares(st, p, pf_by_dataset),
                       cfg.eps_margin);
  return out;
}

}  // namespace sfplan
