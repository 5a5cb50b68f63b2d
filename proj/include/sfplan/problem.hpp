#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfplan/latency.hpp"
#include "sfplan/risk.hpp"

namespace sfplan {

// Shares live in [kShareMargin, 1 - kShareMargin]; the open-interval
// constraint is realized as this closed box so projections are well defined.
constexpr double kShareMargin = 1e-6;
constexpr double kRiskSlack = 1e-12;
constexpr double kBudgetSlack = 1e-6;

struct InfeasibleRisk : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Immutable description of one planning problem: fleet, server, workload
/// curves, leakage-risk cap, and link model. `x_min` is the shallowest cut
/// position the risk cap admits; the per-device cut domain is [x_min, layers].
struct ProblemInstance {
  std::vector<DeviceProfile> fleet;
  ServerProfile server;
  WorkloadModel workload;
  RiskProfile risk;
  double p_risk = 1.0;
  int epochs = 1;
  LinkMode link;
  bool relaxed = false;

  double x_min = 1.0;
  int min_cut = 1;  // shallowest feasible integer cut

  int layers() const { return workload.layers; }
  std::size_t size() const { return fleet.size(); }
};

inline ProblemInstance make_problem(std::vector<DeviceProfile> fleet,
                                    ServerProfile server, WorkloadModel workload,
                                    RiskProfile risk, double p_risk, int epochs,
                                    LinkMode link, bool relaxed = false) {
  if (fleet.empty()) throw std::invalid_argument("fleet must be non-empty");
  for (const auto& d : fleet) d.validate();
  server.validate();
  link.validate(fleet.size());
  risk.validate(workload.layers);
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");

  const auto cut = min_feasible_cut(risk, p_risk);
  if (!cut) {
    throw InfeasibleRisk("risk cap " + std::to_string(p_risk) +
                         " is below the profile's deepest-cut risk");
  }
  ProblemInstance p;
  p.fleet = std::move(fleet);
  p.server = std::move(server);
  p.workload = std::move(workload);
  p.risk = std::move(risk);
  p.p_risk = p_risk;
  p.epochs = epochs;
  p.link = std::move(link);
  p.relaxed = relaxed;
  p.x_min = *cut;
  p.min_cut = static_cast<int>(std::ceil(p.x_min - 1e-12));
  return p;
}

/// Joint decision vector, one entry per fleet device.
struct Plan {
  std::vector<Decision> decisions;
};

inline LatencyBreakdown device_breakdown(const ProblemInstance& p, const Plan& plan,
                                         std::size_t n) {
  return round_latency(p.fleet[n], p.server, p.workload, plan.decisions[n], p.epochs,
                       p.link, n);
}

/// Total per-round latency over the fleet. Feasibility is not required; this
/// is also used as a bare diagnostic.
inline double objective(const ProblemInstance& p, const Plan& plan) {
  if (plan.decisions.size() != p.fleet.size()) {
    throw std::invalid_argument("plan size does not match fleet size");
  }
  double q = 0.0;
  for (std::size_t n = 0; n < p.fleet.size(); ++n) {
    q += device_breakdown(p, plan, n).round;
  }
  return q;
}

enum class Constraint {
  RiskCap,        // per-device leakage bound
  DlBudget,       // downlink shares sum to at most 1
  UlBudget,       // uplink shares sum to at most 1
  ComputeBudget,  // compute shares sum to at most 1
  IntegerCut,     // integral cut positions (skipped for relaxed instances)
  ShareBox,       // shares inside the margin box
  CutRange,       // cut position inside [1, layers]
};

inline const char* to_string(Constraint c) {
  switch (c) {
    case Constraint::RiskCap: return "risk_cap";
    case Constraint::DlBudget: return "dl_budget";
    case Constraint::UlBudget: return "ul_budget";
    case Constraint::ComputeBudget: return "compute_budget";
    case Constraint::IntegerCut: return "integer_cut";
    case Constraint::ShareBox: return "share_box";
    case Constraint::CutRange: return "cut_range";
  }
  return "?";
}

struct Violation {
  Constraint which;
  int device = -1;  // -1 for fleet-wide budget constraints
  double margin = 0.0;
};

inline std::vector<Violation> check_feasible(const ProblemInstance& p, const Plan& plan) {
  std::vector<Violation> out;
  if (plan.decisions.size() != p.fleet.size()) {
    throw std::invalid_argument("plan size does not match fleet size");
  }
  double sum_dl = 0.0, sum_ul = 0.0, sum_th = 0.0;
  for (std::size_t n = 0; n < plan.decisions.size(); ++n) {
    const auto& d = plan.decisions[n];
    const int dev = static_cast<int>(n);
    if (!(d.x >= 1.0 - kRiskSlack && d.x <= p.layers() + kRiskSlack)) {
      out.push_back({Constraint::CutRange, dev,
                     d.x < 1.0 ? 1.0 - d.x : d.x - p.layers()});
    } else {
      const double r = risk_at(p.risk, std::clamp(d.x, 1.0, static_cast<double>(p.layers())));
      if (r > p.p_risk + kRiskSlack) {
        out.push_back({Constraint::RiskCap, dev, r - p.p_risk});
      }
    }
    if (!p.relaxed) {
      const double frac = std::fabs(d.x - std::round(d.x));
      if (frac > 1e-9) out.push_back({Constraint::IntegerCut, dev, frac});
    }
    for (double f : {d.mu_dl, d.mu_ul, d.theta}) {
      if (f < kShareMargin - 1e-12 || f > 1.0 - kShareMargin + 1e-12) {
        out.push_back({Constraint::ShareBox, dev,
                       f < kShareMargin ? kShareMargin - f : f - (1.0 - kShareMargin)});
        break;
      }
    }
    sum_dl += d.mu_dl;
    sum_ul += d.mu_ul;
    sum_th += d.theta;
  }
  if (sum_dl > 1.0 + kBudgetSlack) out.push_back({Constraint::DlBudget, -1, sum_dl - 1.0});
  if (sum_ul > 1.0 + kBudgetSlack) out.push_back({Constraint::UlBudget, -1, sum_ul - 1.0});
  if (sum_th > 1.0 + kBudgetSlack) out.push_back({Constraint::ComputeBudget, -1, sum_th - 1.0});
  return out;
}

/// Snap relaxed cut positions to the nearest feasible integers, ties rounding
/// up (deeper cut, lower risk). Allocations are carried over unchanged; the
/// solver re-runs its allocation passes afterwards with the cuts fixed.
inline Plan round_plan(const ProblemInstance& p, const Plan& relaxed_plan) {
  Plan out = relaxed_plan;
  const double lo = static_cast<double>(p.min_cut);
  const double hi = static_cast<double>(p.layers());
  for (auto& d : out.decisions) {
    d.x = std::clamp(std::floor(d.x + 0.5), lo, hi);
  }
  return out;
}

}  // namespace sfplan
