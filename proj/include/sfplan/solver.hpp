#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfplan/consensus.hpp"
#include "sfplan/problem.hpp"

namespace sfplan {

struct SolverConfig {
  double eta = 0.05;          // multiplier-flow integration step
  double step_alpha = 0.01;   // cut-position gradient step (backtracked)
  double sigma_outer = 1e-4;  // stop when |dQ/Q| falls below
  double sigma_inner = 1e-5;  // per-block stop threshold
  int max_outer = 100;
  long max_inner = 20000;
  double eps_margin = 1e-6;
  Topology topology;
};

struct SolverNonConvergence : std::runtime_error {
  double residual;
  SolverNonConvergence(const std::string& what, double r)
      : std::runtime_error(what), residual(r) {}
};

enum class SolverBlock { Alpha, Downlink, Uplink, Compute };

inline const char* to_string(SolverBlock b) {
  switch (b) {
    case SolverBlock::Alpha: return "alpha";
    case SolverBlock::Downlink: return "downlink";
    case SolverBlock::Uplink: return "uplink";
    case SolverBlock::Compute: return "compute";
  }
  return "?";
}

/// One block update inside one outer pass. `outer` is -1 for the
/// post-rounding allocation passes.
struct BlockRecord {
  int outer = 0;
  SolverBlock block = SolverBlock::Alpha;
  long inner_iterations = 0;
  double final_residual = 0.0;
  long messages = 0;
  double wall_seconds = 0.0;
  std::vector<double> residuals;
};

struct SolverTrace {
  std::size_t n_devices = 0;
  std::vector<double> outer_q;  // Q_j after each outer pass
  std::vector<BlockRecord> blocks;
  double final_q = 0.0;       // after rounding and the final allocation passes
  bool converged = false;     // stopped by the relative-dQ rule

  long total_messages() const {
    long m = 0;
    for (const auto& b : blocks) m += b.messages;
    return m;
  }
  long consensus_iterations() const {
    long it = 0;
    for (const auto& b : blocks) {
      if (b.block != SolverBlock::Alpha) it += b.inner_iterations;
    }
    return it;
  }
};

struct OuterSummary {
  int iteration = 0;
  double q = 0.0;
  double residual = 0.0;
  long messages = 0;
};

inline std::vector<OuterSummary> outer_summaries(const SolverTrace& trace) {
  std::vector<OuterSummary> rows(trace.outer_q.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    rows[j].iteration = static_cast<int>(j) + 1;
    rows[j].q = trace.outer_q[j];
  }
  for (const auto& b : trace.blocks) {
    if (b.outer >= 1 && static_cast<std::size_t>(b.outer) <= rows.size()) {
      rows[b.outer - 1].residual += b.final_residual;
      rows[b.outer - 1].messages += b.messages;
    }
  }
  return rows;
}

namespace detail {

class BlockTimer {
 public:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

}  // namespace detail

/// Per-device projected-gradient refinement of the relative cut position
/// a = x/layers over [x_min/layers, 1]. The objective is separable in the
/// cut positions, so devices iterate independently with everything else
/// fixed. Steps start at cfg.step_alpha and are halved until they do not
/// increase the device's round latency (also covers non-finite trial steps).
inline Plan update_alpha(const ProblemInstance& p, const Plan& plan,
                         const SolverConfig& cfg, BlockRecord* record = nullptr) {
  Plan out = plan;
  const double top = static_cast<double>(p.layers());
  const double lo = p.x_min / top;
  long iters = 0;
  double worst_delta = 0.0;

  for (std::size_t n = 0; n < p.fleet.size(); ++n) {
    Decision d = out.decisions[n];
    const bool was_projected = d.x / top != std::clamp(d.x / top, lo, 1.0);
    const double a_in = std::clamp(d.x / top, lo, 1.0);
    double a = a_in;
    d.x = a * top;
    double f = round_latency(p.fleet[n], p.server, p.workload, d, p.epochs, p.link, n).round;
    double last_delta = 0.0;

    for (long it = 0; it < cfg.max_inner; ++it) {
      ++iters;
      const double g =
          top * round_latency_gradient(p.fleet[n], p.server, p.workload, d, p.epochs,
                                       p.link, n).d_x;
      if (g == 0.0 || !std::isfinite(g)) break;

      double step = cfg.step_alpha;
      bool accepted = false;
      double a_next = a, f_next = f;
      for (int half = 0; half < 60; ++half) {
        const double cand = std::clamp(a - step * g, lo, 1.0);
        if (cand == a) break;  // pinned at a box face
        Decision dc = d;
        dc.x = cand * top;
        const double fc =
            round_latency(p.fleet[n], p.server, p.workload, dc, p.epochs, p.link, n).round;
        if (std::isfinite(fc) && fc <= f) {
          a_next = cand;
          f_next = fc;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      last_delta = std::fabs(a_next - a);
      a = a_next;
      f = f_next;
      d.x = a * top;
      if (last_delta < cfg.sigma_inner) break;
    }
    worst_delta = std::max(worst_delta, last_delta);
    // untouched in-box devices stay bit-identical
    if (a != a_in || was_projected) out.decisions[n].x = a * top;
  }

  if (record) {
    record->block = SolverBlock::Alpha;
    record->inner_iterations = iters;
    record->final_residual = worst_delta;
    record->messages = 0;
  }
  return out;
}

struct AllocationOutcome {
  Plan plan;
  ConsensusState state;
};

/// Re-allocates one resource's shares with cuts and the other two resources
/// fixed, via the multiplier-consensus iteration. Each device contributes
/// only its own cost constant; neighbor multipliers arrive via the relay.
inline AllocationOutcome allocate_decentralized(ResourceKind kind,
                                                const ProblemInstance& p,
                                                const Plan& plan,
                                                const SolverConfig& cfg) {
  const std::size_t n = p.size();
  std::vector<double> costs(n), warm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = plan.decisions[i];
    costs[i] = resource_cost_constant(kind, p.fleet[i], p.server, p.workload, d.x,
                                      p.epochs, p.link, i);
    warm[i] = kind == ResourceKind::Downlink ? d.mu_dl
              : kind == ResourceKind::Uplink ? d.mu_ul
                                             : d.theta;
  }
  ConsensusOptions opt{cfg.eta, cfg.sigma_inner, cfg.max_inner, cfg.eps_margin};
  auto res = allocate_consensus(costs, cfg.topology, opt, &warm);

  // budget repair: the flow leaves |sum - 1| at residual scale
  double sum = 0.0;
  for (double s : res.shares) sum += s;
  if (sum > 1.0) {
    for (double& s : res.shares) s = std::max(cfg.eps_margin, s / sum);
  }

  AllocationOutcome out{plan, std::move(res.state)};
  for (std::size_t i = 0; i < n; ++i) {
    auto& d = out.plan.decisions[i];
    (kind == ResourceKind::Downlink   ? d.mu_dl
     : kind == ResourceKind::Uplink ? d.mu_ul
                                    : d.theta) = res.shares[i];
  }
  return out;
}

namespace detail {

inline void require_converged(const ConsensusState& st, ResourceKind kind) {
  if (!st.converged) {
    const char* name = kind == ResourceKind::Downlink ? "downlink"
                       : kind == ResourceKind::Uplink ? "uplink"
                                                      : "compute";
    throw SolverNonConvergence(std::string("consensus allocation for ") + name +
                                   " hit the iteration cap with residual " +
                                   std::to_string(st.final_residual),
                               st.final_residual);
  }
}

inline SolverBlock block_of(ResourceKind kind) {
  switch (kind) {
    case ResourceKind::Downlink: return SolverBlock::Downlink;
    case ResourceKind::Uplink: return SolverBlock::Uplink;
    case ResourceKind::Compute: return SolverBlock::Compute;
  }
  return SolverBlock::Downlink;
}

}  // namespace detail

/// Joint optimum of the three share vectors for fixed cuts (the blocks are
/// mutually independent, so one pass per resource solves them all).
inline Plan optimize_allocations(const ProblemInstance& p, const Plan& plan,
                                 const SolverConfig& cfg, SolverTrace* trace = nullptr,
                                 int outer = -1) {
  Plan cur = plan;
  for (ResourceKind kind :
       {ResourceKind::Downlink, ResourceKind::Uplink, ResourceKind::Compute}) {
    detail::BlockTimer timer;
    auto outcome = allocate_decentralized(kind, p, cur, cfg);
    detail::require_converged(outcome.state, kind);
    cur = std::move(outcome.plan);
    if (trace) {
      BlockRecord rec;
      rec.outer = outer;
      rec.block = detail::block_of(kind);
      rec.inner_iterations = outcome.state.iterations;
      rec.final_residual = outcome.state.final_residual;
      rec.messages = outcome.state.messages;
      rec.wall_seconds = timer.elapsed();
      rec.residuals = std::move(outcome.state.residuals);
      trace->blocks.push_back(std::move(rec));
    }
  }
  return cur;
}

struct SolveResult {
  Plan plan;
  SolverTrace trace;
};

/// Alternating block descent over (cuts, dl shares, ul shares, compute
/// shares), warm-starting every block from the previous pass. Cut positions
/// are relaxed to continuous values during the loop, snapped to feasible
/// integers afterwards, and the allocations re-solved for the snapped cuts.
/// Each block update is kept only if it does not increase the objective, so
/// the recorded Q_j sequence is non-increasing by construction. The cut
/// subproblem is non-convex; the result is a local optimum.
inline SolveResult solve(const ProblemInstance& p, const SolverConfig& cfg) {
  ProblemInstance pr = p;
  pr.relaxed = true;
  const double top = static_cast<double>(p.layers());
  const std::size_t n = p.size();

  Plan plan;
  plan.decisions.resize(n);
  const double share0 =
      std::clamp(1.0 / static_cast<double>(n), cfg.eps_margin, 1.0 - cfg.eps_margin);
  for (auto& d : plan.decisions) {
    d.x = std::clamp(0.5 * top, p.x_min, top);
    d.mu_dl = d.mu_ul = d.theta = share0;
  }

  SolverTrace trace;
  trace.n_devices = n;
  double q_cur = objective(pr, plan);
  double q_prev = q_cur;

  auto guarded_accept = [&](Plan&& cand) {
    const double q_cand = objective(pr, cand);
    if (q_cand <= q_cur) {
      plan = std::move(cand);
      q_cur = q_cand;
    }
  };

  for (int outer = 1; outer <= cfg.max_outer; ++outer) {
    {
      detail::BlockTimer timer;
      BlockRecord rec;
      rec.outer = outer;
      Plan cand = update_alpha(pr, plan, cfg, &rec);
      rec.wall_seconds = timer.elapsed();
      guarded_accept(std::move(cand));
      trace.blocks.push_back(std::move(rec));
    }
    for (ResourceKind kind :
         {ResourceKind::Downlink, ResourceKind::Uplink, ResourceKind::Compute}) {
      detail::BlockTimer timer;
      auto outcome = allocate_decentralized(kind, pr, plan, cfg);
      detail::require_converged(outcome.state, kind);
      BlockRecord rec;
      rec.outer = outer;
      rec.block = detail::block_of(kind);
      rec.inner_iterations = outcome.state.iterations;
      rec.final_residual = outcome.state.final_residual;
      rec.messages = outcome.state.messages;
      rec.residuals = std::move(outcome.state.residuals);
      rec.wall_seconds = timer.elapsed();
      guarded_accept(std::move(outcome.plan));
      trace.blocks.push_back(std::move(rec));
    }

    trace.outer_q.push_back(q_cur);
    if (std::fabs(q_cur - q_prev) / q_cur < cfg.sigma_outer) {
      trace.converged = true;
      break;
    }
    q_prev = q_cur;
  }

  Plan snapped = round_plan(p, plan);
  snapped = optimize_allocations(p, snapped, cfg, &trace, -1);
  trace.final_q = objective(p, snapped);
  return {std::move(snapped), std::move(trace)};
}

}  // namespace sfplan
