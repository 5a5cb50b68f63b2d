#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfplan/cost_models.hpp"

namespace sfplan {

constexpr double kBitsPerMbit = 1e6;

struct DeviceProfile {
  std::string id;
  double gflops = 0.0;           // f_d
  double tx_power_w = 0.0;       // uplink transmit power
  double channel_gain = 0.0;     // |h|^2
  std::int64_t dataset_size = 0; // samples
  std::int64_t minibatch = 0;    // samples per batch

  void validate() const {
    if (!(gflops > 0.0)) throw std::invalid_argument("device " + id + ": gflops must be > 0");
    if (!(tx_power_w > 0.0)) throw std::invalid_argument("device " + id + ": tx_power_w must be > 0");
    if (!(channel_gain > 0.0)) throw std::invalid_argument("device " + id + ": channel_gain must be > 0");
    if (minibatch < 1) throw std::invalid_argument("device " + id + ": minibatch must be >= 1");
    if (dataset_size < minibatch) {
      throw std::invalid_argument("device " + id + ": dataset_size must be >= minibatch");
    }
  }

  std::int64_t batches_per_epoch() const {
    return (dataset_size + minibatch - 1) / minibatch;
  }
};

struct ServerProfile {
  double gflops = 0.0;          // f_s
  double bw_dl_hz = 0.0;        // downlink spectrum bandwidth
  double bw_ul_hz = 0.0;        // uplink spectrum bandwidth
  double tx_power_w = 0.0;      // P_s
  double noise_w_per_hz = 0.0;  // N0

  void validate() const {
    for (double v : {gflops, bw_dl_hz, bw_ul_hz, tx_power_w, noise_w_per_hz}) {
      if (!(v > 0.0)) throw std::invalid_argument("server profile fields must be > 0");
    }
  }
};

enum class LinkKind { Shannon, Direct };

/// Shannon mode derives rates from spectrum/power/noise; direct mode takes
/// link capacities in bit/s, either one shared value or one per device.
struct LinkMode {
  LinkKind kind = LinkKind::Direct;
  std::vector<double> rate_dl_bps;
  std::vector<double> rate_ul_bps;

  static LinkMode shannon() { return LinkMode{LinkKind::Shannon, {}, {}}; }
  static LinkMode direct(double rdl_bps, double rul_bps) {
    return LinkMode{LinkKind::Direct, {rdl_bps}, {rul_bps}};
  }

  double direct_dl(std::size_t device) const {
    return rate_dl_bps.size() == 1 ? rate_dl_bps[0] : rate_dl_bps.at(device);
  }
  double direct_ul(std::size_t device) const {
    return rate_ul_bps.size() == 1 ? rate_ul_bps[0] : rate_ul_bps.at(device);
  }

  void validate(std::size_t fleet_size) const {
    if (kind == LinkKind::Shannon) return;
    for (const auto* v : {&rate_dl_bps, &rate_ul_bps}) {
      if (v->size() != 1 && v->size() != fleet_size) {
        throw std::invalid_argument("direct link rates need 1 or fleet-size entries");
      }
      for (double r : *v) {
        if (!(r > 0.0)) throw std::invalid_argument("direct link rates must be > 0");
      }
    }
  }
};

enum class Direction { Downlink, Uplink };

/// Per-device decision: continuous cut position plus the three shares of
/// server-owned resources.
struct Decision {
  double x = 1.0;       // cut position in [1, layers]
  double mu_dl = 0.0;   // downlink share
  double mu_ul = 0.0;   // uplink share
  double theta = 0.0;   // server compute share
};

inline double link_rate(Direction dir, const ServerProfile& server,
                        const DeviceProfile& device, double mu,
                        const LinkMode& link, std::size_t device_index = 0) {
  if (!(mu > 0.0 && mu <= 1.0)) {
    throw std::invalid_argument("link share must be in (0, 1]");
  }
  if (link.kind == LinkKind::Direct) {
    return mu * (dir == Direction::Downlink ? link.direct_dl(device_index)
                                            : link.direct_ul(device_index));
  }
  const double w = dir == Direction::Downlink ? server.bw_dl_hz : server.bw_ul_hz;
  const double p = dir == Direction::Downlink ? server.tx_power_w : device.tx_power_w;
  const double snr = p * device.channel_gain / (w * server.noise_w_per_hz);
  return mu * w * std::log2(1.0 + snr);
}

/// One training round decomposed per the three phases: model distribution,
/// per-epoch batched execution/transfer, model upload. All times in seconds.
struct LatencyBreakdown {
  double start = 0.0;      // device-side model distribution
  double dev_fwd = 0.0;    // per batch
  double smash_up = 0.0;   // per batch
  double srv_fwd = 0.0;    // per batch
  double srv_bwd = 0.0;    // per batch
  double grad_down = 0.0;  // per batch
  double dev_bwd = 0.0;    // per batch
  double epoch = 0.0;      // batches * (six parts)
  double end = 0.0;        // device-side model upload (aggregation itself negligible)
  double round = 0.0;      // start + epochs * epoch + end
  int epochs = 0;
  std::int64_t batches = 0;
};

namespace detail {

inline void check_decision(const Decision& d, int layers) {
  if (!(d.x >= 1.0 && d.x <= static_cast<double>(layers))) {
    throw std::domain_error("cut position outside [1, layers]");
  }
  for (double f : {d.mu_dl, d.mu_ul, d.theta}) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw std::invalid_argument("resource shares must lie in (0, 1]; zero allocation is infeasible");
    }
  }
}

}  // namespace detail

inline LatencyBreakdown round_latency(const DeviceProfile& device,
                                      const ServerProfile& server,
                                      const WorkloadModel& wl, const Decision& d,
                                      int epochs, const LinkMode& link,
                                      std::size_t device_index = 0) {
  detail::check_decision(d, wl.layers);
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");

  const double r_dl = link_rate(Direction::Downlink, server, device, d.mu_dl, link, device_index);
  const double r_ul = link_rate(Direction::Uplink, server, device, d.mu_ul, link, device_index);
  const double batch = static_cast<double>(device.minibatch);
  const double model_bits = wl.model_size.value(d.x) * kBitsPerMbit;
  const double smashed_bits = wl.smashed_size.value(d.x) * kBitsPerMbit;
  const double grad_bits = wl.grad_size.value(d.x) * kBitsPerMbit;

  LatencyBreakdown out;
  out.epochs = epochs;
  out.batches = device.batches_per_epoch();
  out.start = model_bits / r_dl;
  out.dev_fwd = batch * wl.device_fwd.value(d.x) / device.gflops;
  out.smash_up = batch * smashed_bits / r_ul;
  out.srv_fwd = batch * wl.server_fwd.value(d.x) / (d.theta * server.gflops);
  out.srv_bwd = batch * wl.server_bwd.value(d.x) / (d.theta * server.gflops);
  out.grad_down = batch * grad_bits / r_dl;
  out.dev_bwd = batch * wl.device_bwd.value(d.x) / device.gflops;
  out.epoch = static_cast<double>(out.batches) *
              (out.dev_fwd + out.smash_up + out.srv_fwd + out.srv_bwd +
               out.grad_down + out.dev_bwd);
  out.end = model_bits / r_ul;
  out.round = out.start + static_cast<double>(epochs) * out.epoch + out.end;
  return out;
}

struct LatencyGradient {
  double d_x = 0.0;
  double d_mu_dl = 0.0;
  double d_mu_ul = 0.0;
  double d_theta = 0.0;
};

/// Diagonal second derivatives of the round latency w.r.t. the three shares
/// (cross-device terms are structurally zero: each device's latency touches
/// only its own shares).
struct LatencyCurvature {
  double d2_mu_dl = 0.0;
  double d2_mu_ul = 0.0;
  double d2_theta = 0.0;
};

enum class ResourceKind { Downlink, Uplink, Compute };

/// Round latency is a + c/share in each share; this returns c for one
/// resource, in seconds (the share-independent numerator over the full-rate
/// denominator).
inline double resource_cost_constant(ResourceKind kind, const DeviceProfile& device,
                                     const ServerProfile& server,
                                     const WorkloadModel& wl, double x, int epochs,
                                     const LinkMode& link, std::size_t device_index = 0) {
  const double per_round_samples = static_cast<double>(epochs) *
                                   static_cast<double>(device.batches_per_epoch()) *
                                   static_cast<double>(device.minibatch);
  switch (kind) {
    case ResourceKind::Downlink: {
      const double full = link_rate(Direction::Downlink, server, device, 1.0, link, device_index);
      const double bits = wl.model_size.value(x) * kBitsPerMbit +
                          per_round_samples * wl.grad_size.value(x) * kBitsPerMbit;
      return bits / full;
    }
    case ResourceKind::Uplink: {
      const double full = link_rate(Direction::Uplink, server, device, 1.0, link, device_index);
      const double bits = wl.model_size.value(x) * kBitsPerMbit +
                          per_round_samples * wl.smashed_size.value(x) * kBitsPerMbit;
      return bits / full;
    }
    case ResourceKind::Compute:
      return per_round_samples * (wl.server_fwd.value(x) + wl.server_bwd.value(x)) /
             server.gflops;
  }
  throw std::logic_error("unreachable");
}

inline LatencyGradient round_latency_gradient(const DeviceProfile& device,
                                              const ServerProfile& server,
                                              const WorkloadModel& wl,
                                              const Decision& d, int epochs,
                                              const LinkMode& link,
                                              std::size_t device_index = 0) {
  detail::check_decision(d, wl.layers);
  const double c_dl = resource_cost_constant(ResourceKind::Downlink, device, server, wl,
                                             d.x, epochs, link, device_index);
  const double c_ul = resource_cost_constant(ResourceKind::Uplink, device, server, wl,
                                             d.x, epochs, link, device_index);
  const double c_th = resource_cost_constant(ResourceKind::Compute, device, server, wl,
                                             d.x, epochs, link, device_index);

  LatencyGradient g;
  g.d_mu_dl = -c_dl / (d.mu_dl * d.mu_dl);
  g.d_mu_ul = -c_ul / (d.mu_ul * d.mu_ul);
  g.d_theta = -c_th / (d.theta * d.theta);

  const double r_dl = link_rate(Direction::Downlink, server, device, d.mu_dl, link, device_index);
  const double r_ul = link_rate(Direction::Uplink, server, device, d.mu_ul, link, device_index);
  const double batch = static_cast<double>(device.minibatch);
  const double per_epoch = static_cast<double>(epochs) *
                           static_cast<double>(device.batches_per_epoch());
  const double d_model_bits = wl.model_size.deriv(d.x) * kBitsPerMbit;
  const double d_sm_bits = wl.smashed_size.deriv(d.x) * kBitsPerMbit;
  const double d_gr_bits = wl.grad_size.deriv(d.x) * kBitsPerMbit;

  g.d_x = d_model_bits * (1.0 / r_dl + 1.0 / r_ul) +
          per_epoch * batch *
              ((wl.device_fwd.deriv(d.x) + wl.device_bwd.deriv(d.x)) / device.gflops +
               d_sm_bits / r_ul + d_gr_bits / r_dl +
               (wl.server_fwd.deriv(d.x) + wl.server_bwd.deriv(d.x)) /
                   (d.theta * server.gflops));
  return g;
}

inline LatencyCurvature round_latency_curvature(const DeviceProfile& device,
                                                const ServerProfile& server,
                                                const WorkloadModel& wl,
                                                const Decision& d, int epochs,
                                                const LinkMode& link,
                                                std::size_t device_index = 0) {
  detail::check_decision(d, wl.layers);
  LatencyCurvature h;
  h.d2_mu_dl = 2.0 *
               resource_cost_constant(ResourceKind::Downlink, device, server, wl, d.x,
                                      epochs, link, device_index) /
               (d.mu_dl * d.mu_dl * d.mu_dl);
  h.d2_mu_ul = 2.0 *
               resource_cost_constant(ResourceKind::Uplink, device, server, wl, d.x,
                                      epochs, link, device_index) /
               (d.mu_ul * d.mu_ul * d.mu_ul);
  h.d2_theta = 2.0 *
               resource_cost_constant(ResourceKind::Compute, device, server, wl, d.x,
                                      epochs, link, device_index) /
               (d.theta * d.theta * d.theta);
  return h;
}

}  // namespace sfplan
