// Acceptance suite: one checked criterion per section, one [PASS]/[FAIL]
// line each, nonzero exit if anything fails. Tolerances and bounds are
// pinned in code next to each check.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sfplan/baselines.hpp"
#include "sfplan/config.hpp"
#include "sfplan/harness.hpp"

using namespace sfplan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
  void note(const std::string& info) {
    if (detail.empty()) detail = info;
  }
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

double spread(const std::vector<double>& v) {
  return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
}

double rel_err(double got, double want) {
  return std::fabs(got - want) / std::max(std::fabs(want), 1e-30);
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1
Outcome consensus_oracle() {
  Outcome out;
  std::mt19937_64 gen(1234);
  std::uniform_int_distribution<int> n_dist(2, 20);
  std::uniform_real_distribution<double> c_dist(0.2, 3.0);
  ConsensusOptions opt;
  opt.sigma = 3e-8;
  opt.max_iterations = 400000;
  double worst_share = 0.0, worst_spread = 0.0, worst_time = 0.0;

  for (int trial = 0; trial < 200; ++trial) {
    const int n = n_dist(gen);
    std::vector<double> costs(static_cast<std::size_t>(n));
    for (auto& c : costs) c = c_dist(gen);
    Topology topo;
    topo.kind = trial % 2 == 0 ? Topology::Kind::Complete : Topology::Kind::Ring;

    const double t0 = now_seconds();
    const auto res = allocate_consensus(costs, topo, opt);
    const double elapsed = now_seconds() - t0;
    worst_time = std::max(worst_time, elapsed);
    if (!res.state.converged) {
      out.fail("instance " + std::to_string(trial) + " did not converge (residual " +
               fmt(res.state.final_residual) + ")");
      break;
    }
    if (elapsed >= 1.0) {
      out.fail("instance " + std::to_string(trial) + " took " + fmt(elapsed) + " s");
    }
    const auto want = closed_form_allocation(costs);
    for (int i = 0; i < n; ++i) {
      worst_share = std::max(worst_share,
                             std::fabs(res.shares[static_cast<std::size_t>(i)] -
                                       want[static_cast<std::size_t>(i)]));
    }
    worst_spread = std::max(worst_spread, spread(res.state.lambda));
  }
  if (worst_share >= 1e-3) out.fail("share error " + fmt(worst_share) + " >= 1e-3");
  if (worst_spread >= 1e-3) out.fail("lambda spread " + fmt(worst_spread) + " >= 1e-3");
  out.note("share err " + fmt(worst_share) + ", lambda spread " + fmt(worst_spread) +
           ", slowest " + fmt(worst_time) + " s");
  return out;
}

// ------------------------------------------------------------ criteria 2 & 3
struct DerivativeFixture {
  ProblemInstance p = default_config().problem();
  std::mt19937_64 gen{777};

  bool clamp_stable(double x, double h) const {
    const auto cm = cost_model_preset("resnet18");
    for (const QprModel* m : {&cm.model_size, &cm.fwd_share, &cm.bwd_share}) {
      if ((m->raw(x - h) < cm.floor) != (m->raw(x + h) < cm.floor)) return false;
    }
    for (const RrModel* m : {&cm.smashed_up, &cm.grad_down}) {
      if ((m->raw(x - h) < cm.floor) != (m->raw(x + h) < cm.floor)) return false;
    }
    return true;
  }

  Decision random_interior() {
    std::uniform_real_distribution<double> ux(p.x_min + 0.1, 10.8);
    std::uniform_real_distribution<double> us(0.05, 0.9);
    while (true) {
      Decision d{ux(gen), us(gen), us(gen), us(gen)};
      if (clamp_stable(d.x, 3e-6)) return d;
    }
  }
};

Outcome hessian_checks() {
  Outcome out;
  DerivativeFixture fx;
  double worst_diag = 0.0, worst_off = 0.0;
  std::uniform_int_distribution<std::size_t> pick(0, fx.p.size() - 1);

  for (int t = 0; t < 100; ++t) {
    Plan plan;
    plan.decisions.resize(fx.p.size());
    for (auto& d : plan.decisions) d = fx.random_interior();
    const std::size_t n = pick(fx.gen);
    const auto& dev = fx.p.fleet[n];
    const auto d = plan.decisions[n];
    const auto curv =
        round_latency_curvature(dev, fx.p.server, fx.p.workload, d, fx.p.epochs, fx.p.link, n);

    auto tau = [&](double v, double Decision::* member) {
      Decision dd = d;
      dd.*member = v;
      return round_latency(dev, fx.p.server, fx.p.workload, dd, fx.p.epochs, fx.p.link, n).round;
    };
    const double h = 1e-4;
    auto fd2 = [&](double at, double Decision::* member) {
      return (tau(at + h, member) - 2.0 * tau(at, member) + tau(at - h, member)) / (h * h);
    };
    worst_diag = std::max(worst_diag, rel_err(curv.d2_mu_dl, fd2(d.mu_dl, &Decision::mu_dl)));
    worst_diag = std::max(worst_diag, rel_err(curv.d2_mu_ul, fd2(d.mu_ul, &Decision::mu_ul)));
    worst_diag = std::max(worst_diag, rel_err(curv.d2_theta, fd2(d.theta, &Decision::theta)));

    // cross entry between two distinct devices, long-double accumulation
    std::size_t m = pick(fx.gen);
    while (m == n) m = pick(fx.gen);
    auto q_sum = [&](double vn, double vm, double Decision::* member) {
      long double q = 0.0L;
      Plan trial = plan;
      trial.decisions[n].*member = vn;
      trial.decisions[m].*member = vm;
      for (std::size_t k = 0; k < fx.p.size(); ++k) {
        q += static_cast<long double>(device_breakdown(fx.p, trial, k).round);
      }
      return q;
    };
    const double hc = 5e-3;
    for (double Decision::* member :
         {&Decision::mu_dl, &Decision::mu_ul, &Decision::theta}) {
      const double an = plan.decisions[n].*member;
      const double am = plan.decisions[m].*member;
      const long double cross = q_sum(an + hc, am + hc, member) -
                                q_sum(an + hc, am - hc, member) -
                                q_sum(an - hc, am + hc, member) +
                                q_sum(an - hc, am - hc, member);
      worst_off = std::max(worst_off,
                           std::fabs(static_cast<double>(cross / (4.0L * hc * hc))));
    }
  }
  if (worst_diag >= 1e-3) out.fail("diag rel err " + fmt(worst_diag) + " >= 1e-3");
  if (worst_off >= 1e-6) out.fail("off-diag magnitude " + fmt(worst_off) + " >= 1e-6");
  out.note("diag rel " + fmt(worst_diag) + ", off-diag " + fmt(worst_off));
  return out;
}

Outcome gradient_checks() {
  Outcome out;
  DerivativeFixture fx;
  std::uniform_int_distribution<std::size_t> pick(0, fx.p.size() - 1);
  const double h = 1e-6;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = pick(fx.gen);
    const auto& dev = fx.p.fleet[n];
    const Decision d = fx.random_interior();
    const auto g =
        round_latency_gradient(dev, fx.p.server, fx.p.workload, d, fx.p.epochs, fx.p.link, n);
    auto tau = [&](double v, double Decision::* member) {
      Decision dd = d;
      dd.*member = v;
      return round_latency(dev, fx.p.server, fx.p.workload, dd, fx.p.epochs, fx.p.link, n).round;
    };
    auto fd = [&](double at, double Decision::* member) {
      return (tau(at + h, member) - tau(at - h, member)) / (2.0 * h);
    };
    worst = std::max(worst, rel_err(g.d_x, fd(d.x, &Decision::x)));
    worst = std::max(worst, rel_err(g.d_mu_dl, fd(d.mu_dl, &Decision::mu_dl)));
    worst = std::max(worst, rel_err(g.d_mu_ul, fd(d.mu_ul, &Decision::mu_ul)));
    worst = std::max(worst, rel_err(g.d_theta, fd(d.theta, &Decision::theta)));
  }
  if (worst >= 1e-4) out.fail("gradient rel err " + fmt(worst) + " >= 1e-4");
  out.note("worst rel err " + fmt(worst));
  return out;
}

// ---------------------------------------------------------------- criterion 4
Outcome bcd_behavior(std::vector<std::pair<double, Plan>>& collected_plans) {
  Outcome out;
  const auto p = default_config().problem();
  const double t0 = now_seconds();
  const auto res = solve(p, SolverConfig{});
  const double elapsed = now_seconds() - t0;

  if (!res.trace.converged) out.fail("did not stop by the |dQ/Q| < 1e-4 rule");
  if (res.trace.outer_q.size() > 100) out.fail("needed more than 100 outer passes");
  for (std::size_t j = 1; j < res.trace.outer_q.size(); ++j) {
    if (res.trace.outer_q[j] > res.trace.outer_q[j - 1] + 1e-9) {
      out.fail("Q increased at outer pass " + std::to_string(j + 1));
      break;
    }
  }
  if (elapsed >= 10.0) out.fail("solve took " + fmt(elapsed) + " s (>= 10 s)");
  out.note(std::to_string(res.trace.outer_q.size()) + " outer passes, " + fmt(elapsed) +
           " s, Q " + fmt(res.trace.final_q));
  collected_plans.emplace_back(0.5, res.plan);
  return out;
}

// ---------------------------------------------------------------- criterion 5
Outcome dominance(std::vector<std::pair<double, Plan>>& collected_plans) {
  Outcome out;
  const auto p = default_config().problem();  // p_risk = 0.5
  SolverConfig cfg;
  const auto dp = build_plan(StrategyId::Dpmora, p, cfg);
  const double q_dp = objective(p, dp.plan);
  collected_plans.emplace_back(0.5, dp.plan);

  bool strictly_better_somewhere = false;
  std::string table = "Q(DPMORA)=" + fmt(q_dp);
  for (StrategyId id : all_strategies()) {
    if (id == StrategyId::Dpmora) continue;
    const auto built = build_plan(id, p, cfg);
    collected_plans.emplace_back(0.5, built.plan);
    const double q = objective(p, built.plan);
    table += std::string(" ") + to_string(id) + "=" + fmt(q);
    if (q_dp > q) {
      out.fail(std::string("Q(DPMORA) > Q(") + to_string(id) + "): " + fmt(q_dp) +
               " vs " + fmt(q));
    }
    if (q_dp < q) strictly_better_somewhere = true;
  }
  if (!strictly_better_somewhere) out.fail("no strictly dominated baseline");

  const auto sched_dp = simulate_round(p, dp.plan, ScheduleMode::Parallel);
  const auto sf3af = build_plan(StrategyId::Sf3Af, p, cfg);
  const auto sched_sf = simulate_round(p, sf3af.plan, ScheduleMode::Parallel);
  const double var_dp = waiting_stats(sched_dp).variance_s2;
  const double var_sf = waiting_stats(sched_sf).variance_s2;
  if (!(var_dp < var_sf)) {
    out.fail("wait variance " + fmt(var_dp) + " not below SF3AF's " + fmt(var_sf));
  }
  out.note(table + "; wait var " + fmt(var_dp) + " vs SF3AF " + fmt(var_sf));
  return out;
}

// ---------------------------------------------------------------- criterion 6
Outcome trends(std::vector<std::pair<double, Plan>>& collected_plans) {
  Outcome out;
  const auto base = default_config();
  SolverConfig cfg;

  auto solve_q = [&](const ExperimentConfig& c, double p_risk_for_plan,
                     std::vector<double>& qs) {
    const auto p = c.problem();
    const auto res = solve(p, cfg);
    qs.push_back(res.trace.final_q);
    collected_plans.emplace_back(p_risk_for_plan, res.plan);
  };
  auto check_monotone = [&](const std::vector<double>& qs, const std::string& name) {
    for (std::size_t i = 1; i < qs.size(); ++i) {
      if (qs[i] > qs[i - 1] + 1e-9) {
        out.fail(name + " not non-increasing at point " + std::to_string(i) + " (" +
                 fmt(qs[i - 1]) + " -> " + fmt(qs[i]) + ")");
      }
    }
  };

  {
    const double t0 = now_seconds();
    std::vector<double> qs;
    for (double pr = 0.1; pr <= 0.8 + 1e-9; pr += 0.1) {
      auto c = base;
      c.p_risk = pr;
      solve_q(c, pr, qs);
    }
    check_monotone(qs, "p_risk sweep");
    const double dt = now_seconds() - t0;
    if (dt >= 60.0) out.fail("p_risk sweep took " + fmt(dt) + " s");
    out.note("p_risk " + fmt(qs.front()) + " -> " + fmt(qs.back()));
  }
  {
    const double t0 = now_seconds();
    std::vector<double> qs;
    std::vector<double> faaf;
    for (double fsv = 50.0; fsv <= 150.0 + 1e-9; fsv += 50.0) {
      auto c = with_sweep_value(base, "f_s", fsv);
      solve_q(c, base.p_risk, qs);
      const auto p = c.problem();
      faaf.push_back(objective(p, build_plan(StrategyId::Faaf, p, cfg).plan));
    }
    check_monotone(qs, "f_s sweep");
    for (double q : faaf) {
      if (q != faaf.front()) out.fail("FAAF latency varies across f_s");
    }
    const double dt = now_seconds() - t0;
    if (dt >= 60.0) out.fail("f_s sweep took " + fmt(dt) + " s");
  }
  {
    const double t0 = now_seconds();
    std::vector<double> qs;
    for (double bw = 100e6; bw <= 400e6 + 1.0; bw += 100e6) {
      solve_q(with_sweep_value(base, "ul_bw", bw), base.p_risk, qs);
    }
    check_monotone(qs, "ul_bw sweep");
    const double dt = now_seconds() - t0;
    if (dt >= 60.0) out.fail("ul_bw sweep took " + fmt(dt) + " s");
  }
  {
    const double t0 = now_seconds();
    std::vector<double> qs;
    for (double bw = 50e6; bw <= 200e6 + 1.0; bw += 50e6) {
      solve_q(with_sweep_value(base, "dl_bw", bw), base.p_risk, qs);
    }
    check_monotone(qs, "dl_bw sweep");
    const double dt = now_seconds() - t0;
    if (dt >= 60.0) out.fail("dl_bw sweep took " + fmt(dt) + " s");
  }
  return out;
}

// ---------------------------------------------------------------- criterion 7
Outcome constraint_satisfaction(const std::vector<std::pair<double, Plan>>& plans) {
  Outcome out;
  const auto base = default_config();
  std::size_t checked = 0;
  for (const auto& [p_risk, plan] : plans) {
    auto c = base;
    c.p_risk = p_risk;
    const auto p = c.problem();
    if (plan.decisions.size() != p.size()) continue;
    const auto violations = check_feasible(p, plan);
    if (!violations.empty()) {
      out.fail("plan with p_risk " + fmt(p_risk) + " has " +
               std::to_string(violations.size()) + " violations (first: " +
               to_string(violations.front().which) + ")");
    }
    for (const auto& d : plan.decisions) {
      if (risk_at(p.risk, d.x) > p_risk + 1e-12) {
        out.fail("risk cap exceeded after rounding at x=" + fmt(d.x));
      }
    }
    ++checked;
  }
  out.note(std::to_string(checked) + " final plans checked");
  return out;
}

// ---------------------------------------------------------------- criterion 8
Outcome regression_fidelity() {
  Outcome out;
  const auto r18 = cost_model_preset("resnet18");
  const auto r34 = cost_model_preset("resnet34");
  // exact profiled coefficients
  const bool exact =
      r18.model_size.a2 == 0.9746 && r18.model_size.a1 == -5.58 &&
      r18.model_size.a0 == 6.528 && r18.fwd_share.a2 == -0.01597 &&
      r18.fwd_share.a1 == 0.7705 && r18.fwd_share.a0 == -0.4282 &&
      r18.bwd_share.a2 == 0.01597 && r18.bwd_share.a1 == -0.7705 &&
      r18.bwd_share.a0 == 5.8946 && r18.smashed_up.num == 3.2028 &&
      r18.smashed_up.off == -0.3443 && r18.grad_down.num == 3.2028 &&
      r18.grad_down.off == -0.3443 && r34.model_size.a2 == 0.4795 &&
      r34.model_size.a1 == -3.517 && r34.model_size.a0 == 5.001 &&
      r34.fwd_share.a2 == -0.00274 && r34.fwd_share.a1 == 0.7044 &&
      r34.fwd_share.a0 == -0.3718 && r34.bwd_share.a2 == 0.00274 &&
      r34.bwd_share.a1 == -0.7044 && r34.bwd_share.a0 == 11.3978 &&
      r34.smashed_up.num == 2.891 && r34.smashed_up.off == -0.0987 &&
      r34.grad_down.num == 2.891 && r34.grad_down.off == -0.0987 &&
      r18.layers == 11 && r34.layers == 19;
  if (!exact) out.fail("preset coefficients differ from the profiled table");

  for (const auto* cm : {&r18, &r34}) {
    const double want = cm->fwd_share.raw(1.0) + cm->bwd_share.raw(1.0);
    for (double x = 1.0; x <= cm->layers; x += 0.01) {
      if (std::fabs(cm->fwd_share.raw(x) + cm->bwd_share.raw(x) - want) > 1e-12) {
        out.fail("workload sum drifts at x=" + fmt(x) + " for " + cm->name);
        break;
      }
    }

    std::vector<std::pair<double, double>> samples;
    for (const QprModel* m : {&cm->model_size, &cm->fwd_share, &cm->bwd_share}) {
      samples.clear();
      for (int x = 1; x <= cm->layers; ++x) samples.emplace_back(x, m->raw(x));
      const auto fit = fit_qpr(samples);
      if (rel_err(fit.model.a2, m->a2) > 1e-9 || rel_err(fit.model.a1, m->a1) > 1e-9 ||
          rel_err(fit.model.a0, m->a0) > 1e-9) {
        out.fail("noiseless quadratic refit drifted for " + cm->name);
      }
    }
    for (const RrModel* m : {&cm->smashed_up, &cm->grad_down}) {
      samples.clear();
      for (int x = 1; x <= cm->layers; ++x) samples.emplace_back(x, m->raw(x));
      const auto fit = fit_rr(samples);
      if (rel_err(fit.model.num, m->num) > 1e-9 || rel_err(fit.model.off, m->off) > 1e-9) {
        out.fail("noiseless reciprocal refit drifted for " + cm->name);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- criterion 9
Outcome determinism() {
  Outcome out;
  auto cfg = default_config();
  cfg.strategies = {StrategyId::Dpmora, StrategyId::Faaf, StrategyId::Sf3Af};
  cfg.seed = 42;

  auto run_into = [&](const std::string& tag) {
    auto c = cfg;
    c.out_dir = (fs::temp_directory_path() / ("sfplan_accept_" + tag)).string();
    fs::remove_all(c.out_dir);
    std::ostringstream sink;
    run_plan(c, sink);
    return c.out_dir;
  };
  const auto a = run_into("a");
  const auto b = run_into("b");
  for (const char* name : {"plans.csv", "latency.csv", "waiting.csv", "trace.csv"}) {
    std::ifstream fa(fs::path(a) / name, std::ios::binary);
    std::ifstream fb(fs::path(b) / name, std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    if (sa.str() != sb.str()) out.fail(std::string(name) + " differs between runs");
    if (sa.str().empty() && std::string(name) != "trace.csv") {
      out.fail(std::string(name) + " is empty");
    }
  }
  return out;
}

}  // namespace

int main() {
  std::vector<std::pair<double, Plan>> plans;
  struct Row {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Row> rows{
      {"1 consensus allocation matches the closed form", [] { return consensus_oracle(); }},
      {"2 share curvature matches finite differences, cross terms vanish",
       [] { return hessian_checks(); }},
      {"3 latency gradients match finite differences", [] { return gradient_checks(); }},
      {"4 block descent is monotone, stops by rule, under 10 s",
       [&] { return bcd_behavior(plans); }},
      {"5 joint optimization dominates every baseline", [&] { return dominance(plans); }},
      {"6 sweep trends reproduce (risk cap, server GFLOPS, UL/DL bandwidth)",
       [&] { return trends(plans); }},
      {"7 every emitted plan is feasible", [&] { return constraint_satisfaction(plans); }},
      {"8 regression presets, constant sum, noiseless refit",
       [] { return regression_fidelity(); }},
      {"9 identical config and seed give byte-identical CSVs",
       [] { return determinism(); }},
  };

  int failures = 0;
  for (const auto& row : rows) {
    Outcome out;
    try {
      out = row.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    if (!out.pass) ++failures;
    std::cout << (out.pass ? "[PASS] " : "[FAIL] ") << row.name;
    if (!out.detail.empty()) std::cout << "  -- " << out.detail;
    std::cout << '\n';
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
