#pragma once

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "sfplan/problem.hpp"
#include "sfplan/solver.hpp"

namespace sfplan {

enum class ScheduleMode { Parallel, Sequential };

inline const char* to_string(ScheduleMode m) {
  return m == ScheduleMode::Parallel ? "parallel" : "sequential";
}

/// Per-device finish times for one round and the idle time each device spends
/// waiting for the last finisher.
struct ScheduleResult {
  ScheduleMode mode = ScheduleMode::Parallel;
  std::vector<double> finish_s;
  std::vector<double> waiting_s;
  double round_latency_s = 0.0;
};

inline ScheduleResult simulate_round(const ProblemInstance& p, const Plan& plan,
                                     ScheduleMode mode) {
  ScheduleResult out;
  out.mode = mode;
  out.finish_s.resize(p.size());
  double cumulative = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    const double tau = device_breakdown(p, plan, n).round;
    if (mode == ScheduleMode::Parallel) {
      out.finish_s[n] = tau;
    } else {
      cumulative += tau;  // fleet declaration order
      out.finish_s[n] = cumulative;
    }
  }
  const double last = *std::max_element(out.finish_s.begin(), out.finish_s.end());
  out.waiting_s.resize(p.size());
  for (std::size_t n = 0; n < p.size(); ++n) out.waiting_s[n] = last - out.finish_s[n];
  out.round_latency_s = last;
  return out;
}

struct WaitingStats {
  double mean_s = 0.0;
  double variance_s2 = 0.0;  // population variance
};

inline WaitingStats waiting_stats(const ScheduleResult& s) {
  WaitingStats w;
  if (s.waiting_s.empty()) return w;
  for (double v : s.waiting_s) w.mean_s += v;
  w.mean_s /= static_cast<double>(s.waiting_s.size());
  for (double v : s.waiting_s) {
    w.variance_s2 += (v - w.mean_s) * (v - w.mean_s);
  }
  w.variance_s2 /= static_cast<double>(s.waiting_s.size());
  return w;
}

/// Cumulative time after each round. Channels and capacities are static, so
/// the timeline is linear in the round count.
inline std::vector<double> simulate_training(const ProblemInstance& p, const Plan& plan,
                                             int rounds, ScheduleMode mode) {
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  const double per_round = simulate_round(p, plan, mode).round_latency_s;
  std::vector<double> timeline(static_cast<std::size_t>(rounds));
  for (int r = 0; r < rounds; ++r) {
    timeline[static_cast<std::size_t>(r)] = per_round * static_cast<double>(r + 1);
  }
  return timeline;
}

struct MessageCounts {
  long uplinks = 0;
  long broadcasts = 0;
  long total = 0;
};

/// Relay traffic implied by a solver run: per consensus iteration every
/// device uploads its multipliers and receives one broadcast bundle.
inline MessageCounts message_overhead(const SolverTrace& trace) {
  MessageCounts m;
  const long iters = trace.consensus_iterations();
  m.uplinks = static_cast<long>(trace.n_devices) * iters;
  m.broadcasts = static_cast<long>(trace.n_devices) * iters;
  m.total = m.uplinks + m.broadcasts;
  return m;
}

inline void write_schedule_csv(const ScheduleResult& s,
                               const std::vector<DeviceProfile>& fleet,
                               std::ostream& os) {
  os << "device_id,finish_s,waiting_s\n";
  for (std::size_t n = 0; n < s.finish_s.size(); ++n) {
    os << fleet[n].id << ',' << s.finish_s[n] << ',' << s.waiting_s[n] << '\n';
  }
}

}  // namespace sfplan
