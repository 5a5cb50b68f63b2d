#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <vector>

namespace sfplan {

/// Communication graph between devices. Devices never talk directly; the
/// server relays multiplier bundles, so any connected graph can be emulated.
struct Topology {
  enum class Kind { Complete, Ring, Custom };
  Kind kind = Kind::Complete;
  std::vector<std::vector<int>> custom;  // adjacency lists, Custom only

  std::vector<std::vector<int>> adjacency(int n) const {
    if (n < 1) throw std::invalid_argument("topology needs >= 1 node");
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    switch (kind) {
      case Kind::Complete:
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            if (i != j) adj[i].push_back(j);
        break;
      case Kind::Ring:
        if (n == 2) {
          adj[0] = {1};
          adj[1] = {0};
        } else if (n > 2) {
          for (int i = 0; i < n; ++i) {
            adj[i].push_back((i + 1) % n);
            adj[i].push_back((i + n - 1) % n);
          }
        }
        break;
      case Kind::Custom: {
        if (custom.size() != static_cast<std::size_t>(n)) {
          throw std::invalid_argument("custom topology size does not match fleet");
        }
        adj = custom;
        for (int i = 0; i < n; ++i) {
          for (int j : adj[i]) {
            if (j < 0 || j >= n || j == i) {
              throw std::invalid_argument("custom topology has an invalid edge");
            }
          }
        }
        break;
      }
    }
    if (n > 1 && !connected(adj)) {
      throw std::invalid_argument("topology must be connected");
    }
    return adj;
  }

  static bool connected(const std::vector<std::vector<int>>& adj) {
    std::vector<char> seen(adj.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          ++reached;
          q.push(v);
        }
      }
    }
    return reached == adj.size();
  }
};

struct ConsensusOptions {
  double eta = 0.05;          // integration step for the multiplier flow
  double sigma = 1e-5;        // stop when the summed update norms fall below
  long max_iterations = 20000;
  double eps_margin = 1e-6;   // share box [eps, 1-eps]
};

/// Final iterate plus the run's trace. `messages` counts the relay pattern:
/// one upload and one broadcast per device per iteration.
struct ConsensusState {
  std::vector<double> shares;
  std::vector<double> lambda;  // per-device price multipliers (agree at convergence)
  std::vector<double> z;       // consensus correction multipliers
  std::vector<double> residuals;
  long iterations = 0;
  long messages = 0;
  bool converged = false;
  double final_residual = 0.0;
};

struct ConsensusResult {
  std::vector<double> shares;
  ConsensusState state;
};

/// Centralized stationarity solution of min sum c_n/mu_n s.t. sum mu_n <= 1:
/// shares proportional to sqrt(c_n). Zero-cost devices get the margin share
/// and the remainder is split over the rest; all-zero costs fall back to a
/// uniform split.
inline std::vector<double> closed_form_allocation(const std::vector<double>& costs,
                                                  double eps = 1e-6) {
  const std::size_t n = costs.size();
  if (n == 0) throw std::invalid_argument("empty cost vector");
  double root_sum = 0.0;
  std::size_t zeros = 0;
  for (double c : costs) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("costs must be finite and >= 0");
    }
    if (c == 0.0) {
      ++zeros;
    } else {
      root_sum += std::sqrt(c);
    }
  }
  std::vector<double> mu(n, 0.0);
  if (zeros == n) {
    std::fill(mu.begin(), mu.end(), 1.0 / static_cast<double>(n));
    return mu;
  }
  const double budget = 1.0 - static_cast<double>(zeros) * eps;
  for (std::size_t i = 0; i < n; ++i) {
    mu[i] = costs[i] == 0.0 ? eps : budget * std::sqrt(costs[i]) / root_sum;
  }
  return mu;
}

namespace detail {

struct DeviceNeighborView {
  double lambda = 0.0;
  double z = 0.0;
};

struct DeviceVars {
  double mu = 0.0;
  double lambda = 0.0;
  double z = 0.0;
};

struct DeviceStep {
  DeviceVars next;
  double g_mu = 0.0;
  double g_lambda = 0.0;
  double g_z = 0.0;
};

// One synchronous iteration for one device. Sees only its own (scaled) cost
// constant, its own variables, and the relayed neighbor multipliers. The
// share move targets the exact minimizer of c/mu - lambda*mu over the box
// (the inner minimization of the dual); a raw fixed-step projected-gradient
// inner move is unstable for reciprocal costs whose curvature spans many
// orders of magnitude across the box.
inline DeviceStep consensus_device_step(double scaled_cost, double inv_n,
                                        const DeviceVars& self,
                                        const std::vector<DeviceNeighborView>& neighbors,
                                        double eta, double eps) {
  double target;
  if (scaled_cost == 0.0 || self.lambda >= 0.0) {
    // lambda >= 0 makes the inner objective decreasing in mu
    target = scaled_cost == 0.0 ? eps : 1.0 - eps;
  } else {
    target = std::clamp(std::sqrt(scaled_cost / -self.lambda), eps, 1.0 - eps);
  }

  double lam_diff = 0.0, z_diff = 0.0;
  for (const auto& nb : neighbors) {
    lam_diff += self.lambda - nb.lambda;
    z_diff += self.z - nb.z;
  }

  DeviceStep step;
  step.g_mu = target - self.mu;
  step.g_lambda = -lam_diff - z_diff + (inv_n - self.mu);
  step.g_z = lam_diff;
  step.next.mu = self.mu + eta * step.g_mu;
  step.next.lambda = self.lambda + eta * step.g_lambda;
  step.next.z = self.z + eta * step.g_z;
  return step;
}

}  // namespace detail

/// Decentralized share allocation for one resource: per-device costs c_n with
/// round latency a_n + c_n/mu_n, coupled only through the unit budget.
/// Synchronous multiplier-consensus iterations; devices exchange (lambda, z)
/// bundles via the server relay each iteration. The registration exchange
/// also relays a common cost scale so the multiplier dynamics run at unit
/// magnitude regardless of the fleet's latency scale.
inline ConsensusResult allocate_consensus(const std::vector<double>& costs,
                                          const Topology& topo,
                                          const ConsensusOptions& opt,
                                          const std::vector<double>* warm_shares = nullptr) {
  const std::size_t n = costs.size();
  if (n == 0) throw std::invalid_argument("empty cost vector");
  const double eps = opt.eps_margin;

  ConsensusResult res;
  res.state.shares.assign(n, 0.0);
  res.state.lambda.assign(n, 0.0);
  res.state.z.assign(n, 0.0);

  if (n == 1) {
    res.state.shares[0] = 1.0 - eps;
    res.state.converged = true;
    res.shares = res.state.shares;
    return res;
  }

  double root_sum = 0.0;
  bool any_positive = false;
  for (double c : costs) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("costs must be finite and >= 0");
    }
    if (c > 0.0) {
      any_positive = true;
      root_sum += std::sqrt(c);
    }
  }
  if (!any_positive) {
    std::fill(res.state.shares.begin(), res.state.shares.end(),
              1.0 / static_cast<double>(n));
    res.state.converged = true;
    res.shares = res.state.shares;
    return res;
  }

  const auto adj = topo.adjacency(static_cast<int>(n));
  std::size_t max_deg = 0;
  for (const auto& a : adj) max_deg = std::max(max_deg, a.size());
  // Euler steps of the Laplacian flow go unstable near eta * 2*deg = 2; stay
  // well inside.
  const double eta = std::min(opt.eta, 0.9 / (2.0 * static_cast<double>(max_deg)));
  const double scale = root_sum * root_sum;  // relayed once at registration
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> scaled(n);
  for (std::size_t i = 0; i < n; ++i) scaled[i] = costs[i] / scale;

  std::vector<detail::DeviceVars> vars(n), next(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu0 = warm_shares ? (*warm_shares)[i] : inv_n;
    mu0 = std::clamp(mu0, eps, 1.0 - eps);
    vars[i].mu = mu0;
    vars[i].lambda = -scaled[i] / (mu0 * mu0);  // own marginal price at the start
    vars[i].z = 0.0;
  }

  auto& st = res.state;
  st.residuals.reserve(256);
  std::vector<detail::DeviceNeighborView> views;
  for (long iter = 1; iter <= opt.max_iterations; ++iter) {
    double nmu = 0.0, nlam = 0.0, nz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      views.clear();
      for (int m : adj[i]) {
        views.push_back({vars[static_cast<std::size_t>(m)].lambda,
                         vars[static_cast<std::size_t>(m)].z});
      }
      const auto step =
          detail::consensus_device_step(scaled[i], inv_n, vars[i], views, eta, eps);
      next[i] = step.next;
      nmu += step.g_mu * step.g_mu;
      nlam += step.g_lambda * step.g_lambda;
      nz += step.g_z * step.g_z;
    }
    vars.swap(next);
    st.iterations = iter;
    st.messages += 2 * static_cast<long>(n);
    const double residual = std::sqrt(nmu) + std::sqrt(nlam) + std::sqrt(nz);
    st.residuals.push_back(residual);
    st.final_residual = residual;
    if (residual < opt.sigma) {
      st.converged = true;
      break;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    st.shares[i] = vars[i].mu;
    st.lambda[i] = vars[i].lambda * scale;  // back to latency units
    st.z[i] = vars[i].z * scale;
  }
  res.shares = st.shares;
  return res;
}

}  // namespace sfplan
