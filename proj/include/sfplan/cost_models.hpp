#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sfplan {

/// Quadratic profile a2*x^2 + a1*x + a0. Units depend on the quantity it
/// models: Mbit for data sizes, GFLOPs per sample for workloads.
struct QprModel {
  double a2 = 0.0;
  double a1 = 0.0;
  double a0 = 0.0;

  double raw(double x) const { return (a2 * x + a1) * x + a0; }
  double raw_derivative(double x) const { return 2.0 * a2 * x + a1; }
};

/// Reciprocal profile num/x + off (Mbit). Domain excludes x = 0.
struct RrModel {
  double num = 0.0;
  double off = 0.0;

  double raw(double x) const { return num / x + off; }
  double raw_derivative(double x) const { return -num / (x * x); }
};

/// One DNN architecture profiled as five regression curves over the cut
/// position x in [1, layers]. Outputs below `floor` are clamped to `floor`
/// (negative sizes/workloads are regression artifacts, not physics).
struct CostModel {
  std::string name;
  int layers = 0;        // number of candidate cut positions
  QprModel model_size;   // device-side model size, Mbit
  QprModel fwd_share;    // device-side forward workload, GFLOPs/sample
  QprModel bwd_share;    // server-side backward workload, GFLOPs/sample
  RrModel smashed_up;    // per-sample smashed-data size, Mbit
  RrModel grad_down;     // per-sample activation-gradient size, Mbit
  double floor = 0.0;

  void check_domain(double x) const {
    if (!(x >= 1.0 && x <= static_cast<double>(layers))) {
      throw std::domain_error("cut position " + std::to_string(x) +
                              " outside [1, " + std::to_string(layers) + "]");
    }
  }

  double eval(const QprModel& m, double x) const {
    check_domain(x);
    return std::max(m.raw(x), floor);
  }
  double eval(const RrModel& m, double x) const {
    check_domain(x);
    return std::max(m.raw(x), floor);
  }

  // Derivative of the clamped curve; identically 0 on clamped stretches.
  double eval_derivative(const QprModel& m, double x) const {
    check_domain(x);
    return m.raw(x) < floor ? 0.0 : m.raw_derivative(x);
  }
  double eval_derivative(const RrModel& m, double x) const {
    check_domain(x);
    return m.raw(x) < floor ? 0.0 : m.raw_derivative(x);
  }

  void validate() const {
    if (layers < 1) throw std::invalid_argument("cost model needs layers >= 1");
    if (floor < 0.0) throw std::invalid_argument("cost model floor must be >= 0");
    for (double v : {model_size.a2, model_size.a1, model_size.a0, fwd_share.a2,
                     fwd_share.a1, fwd_share.a0, bwd_share.a2, bwd_share.a1,
                     bwd_share.a0, smashed_up.num, smashed_up.off,
                     grad_down.num, grad_down.off}) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite cost model coefficient");
    }
  }
};

/// Coefficients measured for ResNet-style architectures; layer counts follow
/// the CONV + POOL + BasicBlocks + FC decomposition (11 and 19 cut positions).
inline CostModel cost_model_preset(const std::string& name) {
  if (name == "resnet18") {
    return CostModel{"resnet18",
                     11,
                     {0.9746, -5.58, 6.528},
                     {-0.01597, 0.7705, -0.4282},
                     {0.01597, -0.7705, 5.8946},
                     {3.2028, -0.3443},
                     {3.2028, -0.3443},
                     0.0};
  }
  if (name == "resnet34") {
    return CostModel{"resnet34",
                     19,
                     {0.4795, -3.517, 5.001},
                     {-0.00274, 0.7044, -0.3718},
                     {0.00274, -0.7044, 11.3978},
                     {2.891, -0.0987},
                     {2.891, -0.0987},
                     0.0};
  }
  throw std::invalid_argument("unknown cost model preset: " + name);
}

struct QprFit {
  QprModel model;
  double rmse = 0.0;
};

struct RrFit {
  RrModel model;
  double rmse = 0.0;
};

enum class RegressionKind { Qpr, Rr };

namespace detail {

// Gaussian elimination with partial pivoting; systems here are 2x2/3x3.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    if (std::fabs(a[pivot][col]) < 1e-300) {
      throw std::runtime_error("rank-deficient design matrix");
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

inline std::size_t count_distinct(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return static_cast<std::size_t>(std::unique(xs.begin(), xs.end()) - xs.begin());
}

// Normal equations for y ~ basis(x); basis values supplied per sample.
inline std::vector<double> least_squares(
    const std::vector<std::pair<double, double>>& samples,
    const std::function<void(double, double*)>& basis, std::size_t terms) {
  std::vector<std::vector<double>> ata(terms, std::vector<double>(terms, 0.0));
  std::vector<double> aty(terms, 0.0);
  std::vector<double> row(terms);
  for (const auto& [x, y] : samples) {
    basis(x, row.data());
    for (std::size_t i = 0; i < terms; ++i) {
      aty[i] += row[i] * y;
      for (std::size_t j = 0; j < terms; ++j) ata[i][j] += row[i] * row[j];
    }
  }
  return solve_dense(std::move(ata), std::move(aty));
}

}  // namespace detail

/// Ordinary least squares for the quadratic family. The abscissa is scaled
/// internally so the normal equations stay well conditioned, then the
/// coefficients are mapped back.
inline QprFit fit_qpr(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 3) throw std::invalid_argument("qpr fit needs >= 3 samples");
  std::vector<double> xs;
  double scale = 0.0;
  for (const auto& [x, y] : samples) {
    xs.push_back(x);
    scale = std::max(scale, std::fabs(x));
  }
  if (detail::count_distinct(xs) < 3) {
    throw std::runtime_error("qpr fit needs >= 3 distinct x values");
  }
  if (scale == 0.0) scale = 1.0;
  const double s = scale;
  std::vector<std::pair<double, double>> scaled;
  scaled.reserve(samples.size());
  for (const auto& [x, y] : samples) scaled.emplace_back(x / s, y);
  auto c = detail::least_squares(
      scaled, [](double t, double* row) { row[0] = t * t; row[1] = t; row[2] = 1.0; }, 3);
  QprFit out;
  out.model = QprModel{c[0] / (s * s), c[1] / s, c[2]};
  double sq = 0.0;
  for (const auto& [x, y] : samples) {
    const double r = y - out.model.raw(x);
    sq += r * r;
  }
  out.rmse = std::sqrt(sq / static_cast<double>(samples.size()));
  return out;
}

/// Least squares for num/x + off; linear in the basis (1/x, 1).
inline RrFit fit_rr(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 2) throw std::invalid_argument("rr fit needs >= 2 samples");
  std::vector<double> xs;
  for (const auto& [x, y] : samples) {
    if (x == 0.0) throw std::domain_error("rr fit sample at x = 0");
    xs.push_back(x);
  }
  if (detail::count_distinct(xs) < 2) {
    throw std::runtime_error("rr fit needs >= 2 distinct x values");
  }
  auto c = detail::least_squares(
      samples, [](double x, double* row) { row[0] = 1.0 / x; row[1] = 1.0; }, 2);
  RrFit out;
  out.model = RrModel{c[0], c[1]};
  double sq = 0.0;
  for (const auto& [x, y] : samples) {
    const double r = y - out.model.raw(x);
    sq += r * r;
  }
  out.rmse = std::sqrt(sq / static_cast<double>(samples.size()));
  return out;
}

/// One quantity as a function of the continuous cut position.
struct Curve {
  std::function<double(double)> value;
  std::function<double(double)> deriv;
};

/// The seven per-device quantities the latency model consumes. All values
/// are >= 0 on [1, layers]; at x = layers the server-side model is empty, so
/// the four server/transfer quantities are exactly 0 there.
struct WorkloadModel {
  int layers = 0;
  Curve device_fwd;    // GFLOPs/sample
  Curve device_bwd;    // GFLOPs/sample
  Curve server_fwd;    // GFLOPs/sample
  Curve server_bwd;    // GFLOPs/sample
  Curve smashed_size;  // Mbit/sample
  Curve grad_size;     // Mbit/sample
  Curve model_size;    // Mbit
};

/// Bridge from the two profiled workload curves to the four the latency model
/// needs: kappa is the backward/forward workload ratio on the device side
/// (and its inverse on the server side, so the profiled backward curve is
/// kept verbatim).
inline WorkloadModel adapt(const CostModel& cost, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be > 0");
  cost.validate();
  auto cm = std::make_shared<const CostModel>(cost);
  const double top = static_cast<double>(cm->layers);

  auto qpr_curve = [cm](const QprModel CostModel::* member, double factor) {
    return Curve{[cm, member, factor](double x) {
                   return factor * cm->eval((*cm).*member, x);
                 },
                 [cm, member, factor](double x) {
                   return factor * cm->eval_derivative((*cm).*member, x);
                 }};
  };
  auto qpr_server_curve = [cm, top](const QprModel CostModel::* member, double factor) {
    // value drops to exactly 0 at the deepest cut (empty server-side model);
    // the derivative stays the clamped-curve derivative so gradient flows
    // remain defined at the boundary.
    return Curve{[cm, member, factor, top](double x) {
                   return x >= top ? 0.0 : factor * cm->eval((*cm).*member, x);
                 },
                 [cm, member, factor](double x) {
                   return factor * cm->eval_derivative((*cm).*member, x);
                 }};
  };
  auto rr_edge_curve = [cm, top](const RrModel CostModel::* member) {
    return Curve{[cm, member, top](double x) {
                   return x >= top ? 0.0 : cm->eval((*cm).*member, x);
                 },
                 [cm, member](double x) { return cm->eval_derivative((*cm).*member, x); }};
  };

  WorkloadModel wl;
  wl.layers = cm->layers;
  wl.device_fwd = qpr_curve(&CostModel::fwd_share, 1.0);
  wl.device_bwd = qpr_curve(&CostModel::fwd_share, kappa);
  wl.server_bwd = qpr_server_curve(&CostModel::bwd_share, 1.0);
  wl.server_fwd = qpr_server_curve(&CostModel::bwd_share, 1.0 / kappa);
  wl.smashed_size = rr_edge_curve(&CostModel::smashed_up);
  wl.grad_size = rr_edge_curve(&CostModel::grad_down);
  wl.model_size = qpr_curve(&CostModel::model_size, 1.0);
  return wl;
}

}  // namespace sfplan
