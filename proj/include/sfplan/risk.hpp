#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace sfplan {

/// Leakage risk versus cut layer, as a table of (layer, risk) points with
/// risk non-increasing in depth. Values between table points interpolate
/// linearly so the relaxed problem sees a continuous constraint.
struct RiskProfile {
  std::vector<std::pair<int, double>> points;

  void validate(int layers) const {
    if (points.empty()) throw std::invalid_argument("risk profile is empty");
    if (points.front().first != 1 || points.back().first != layers) {
      throw std::invalid_argument("risk profile must cover layers 1.." +
                                  std::to_string(layers));
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& [layer, risk] = points[i];
      if (!(risk >= 0.0 && risk <= 1.0)) {
        throw std::invalid_argument("risk values must lie in [0, 1]");
      }
      if (i > 0) {
        if (layer <= points[i - 1].first) {
          throw std::invalid_argument("risk profile layers must strictly increase");
        }
        if (risk > points[i - 1].second) {
          throw std::invalid_argument("risk must be non-increasing in the cut layer");
        }
      }
    }
  }
};

/// Synthetic demo profile: risk(l) = max(0, 0.95 - 0.85*(l-1)/(L-1)).
/// A stand-in for measured reconstruction-attack data, not a measurement.
inline RiskProfile synthetic_risk_profile(int layers) {
  if (layers < 1) throw std::invalid_argument("layers must be >= 1");
  RiskProfile p;
  for (int l = 1; l <= layers; ++l) {
    const double t = layers == 1 ? 0.0
                                 : static_cast<double>(l - 1) / static_cast<double>(layers - 1);
    p.points.emplace_back(l, std::max(0.0, 0.95 - 0.85 * t));
  }
  return p;
}

/// Cosine similarity of two equally-shaped real matrices under the Frobenius
/// inner product. Used to score reconstructed sample batches against the
/// originals.
inline double cosine_similarity(const std::vector<std::vector<double>>& a,
                                const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("matrix shape mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r].size() != b[r].size()) throw std::invalid_argument("matrix shape mismatch");
    for (std::size_t c = 0; c < a[r].size(); ++c) {
      dot += a[r][c] * b[r][c];
      na += a[r][c] * a[r][c];
      nb += b[r][c] * b[r][c];
    }
  }
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("zero-norm matrix");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double risk_at(const RiskProfile& profile, double x) {
  if (profile.points.empty()) throw std::invalid_argument("risk profile is empty");
  const double lo = profile.points.front().first;
  const double hi = profile.points.back().first;
  if (!(x >= lo && x <= hi)) {
    throw std::domain_error("cut position outside risk profile domain");
  }
  for (std::size_t i = 1; i < profile.points.size(); ++i) {
    const auto& [l0, r0] = profile.points[i - 1];
    const auto& [l1, r1] = profile.points[i];
    if (x <= static_cast<double>(l1)) {
      const double t = (x - l0) / static_cast<double>(l1 - l0);
      return r0 + t * (r1 - r0);
    }
  }
  return profile.points.back().second;
}

/// Smallest cut position whose interpolated risk is within the cap, found by
/// inverting the monotone piecewise-linear profile. Empty when even the
/// deepest cut leaks too much; the feasible set is then empty.
inline std::optional<double> min_feasible_cut(const RiskProfile& profile, double p_risk) {
  if (!(p_risk >= 0.0 && p_risk <= 1.0)) {
    throw std::invalid_argument("risk cap must lie in [0, 1]");
  }
  if (profile.points.back().second > p_risk) return std::nullopt;
  if (profile.points.front().second <= p_risk) {
    return static_cast<double>(profile.points.front().first);
  }
  for (std::size_t i = 1; i < profile.points.size(); ++i) {
    const auto& [l0, r0] = profile.points[i - 1];
    const auto& [l1, r1] = profile.points[i];
    if (r1 <= p_risk) {
      // first crossing: r0 > p_risk >= r1, so the segment strictly decreases
      const double t = (r0 - p_risk) / (r0 - r1);
      return static_cast<double>(l0) + t * static_cast<double>(l1 - l0);
    }
  }
  return static_cast<double>(profile.points.back().first);
}

}  // namespace sfplan
