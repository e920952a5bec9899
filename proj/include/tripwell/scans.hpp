#ifndef TRIPWELL_SCANS_HPP
#define TRIPWELL_SCANS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tripwell/errors.hpp"
#include "tripwell/metrology.hpp"
#include "tripwell/parallel.hpp"

namespace tripwell {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One grid axis. With include_end the points are linspace(start, end, count);
/// otherwise the end point is dropped, as for a half-open periodic window.
struct GridAxis {
  std::string name;
  double start = 0.0;
  double end = 1.0;
  std::size_t count = 2;
  bool include_end = true;

  void validate() const {
    if (count < 2) throw std::invalid_argument("axis '" + name + "' needs count >= 2");
    if (!(end > start)) throw std::invalid_argument("axis '" + name + "' needs end > start");
  }
  double step() const {
    return (end - start) / static_cast<double>(include_end ? count - 1 : count);
  }
  double value(std::size_t k) const {
    if (include_end && k + 1 == count) return end;
    return start + step() * static_cast<double>(k);
  }
  std::vector<double> values() const {
    std::vector<double> v(count);
    for (std::size_t k = 0; k < count; ++k) v[k] = value(k);
    return v;
  }
};

/// Row-major product of axes (last axis fastest).
struct GridSpec {
  std::vector<GridAxis> axes;

  void validate() const {
    if (axes.empty()) throw std::invalid_argument("grid has no axes");
    for (const auto& a : axes) a.validate();
  }
  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.count;
    return n;
  }
  std::vector<std::size_t> unravel(std::size_t flat) const {
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t d = axes.size(); d-- > 0;) {
      idx[d] = flat % axes[d].count;
      flat /= axes[d].count;
    }
    return idx;
  }
  std::vector<double> point(std::size_t flat) const {
    const auto idx = unravel(flat);
    std::vector<double> p(axes.size());
    for (std::size_t d = 0; d < axes.size(); ++d) p[d] = axes[d].value(idx[d]);
    return p;
  }
};

/// Square grid over the effective phases (N theta_1, N theta_2) in [0, 2 pi].
inline GridSpec effective_phase_grid(std::size_t count) {
  return {{{"Theta1", 0.0, kTwoPi, count, true}, {"Theta2", 0.0, kTwoPi, count, true}}};
}

struct GuardStats {
  std::size_t points = 0;
  std::size_t min = 0;
  std::size_t max = 0;
  std::size_t total = 0;

  void add(std::size_t g) {
    min = points == 0 ? g : std::min(min, g);
    max = std::max(max, g);
    total += g;
    ++points;
  }
};

/// Exact first minimum over finite entries; ties go to the lowest index.
inline std::optional<std::size_t> argmin_finite(const std::vector<double>& v) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) continue;
    if (!best || v[i] < v[*best]) best = i;
  }
  return best;
}

struct ScanResult {
  GridSpec grid;
  std::string payload_name;
  std::vector<double> payload;
  std::vector<std::pair<std::string, std::vector<double>>> extra_columns;
  nlohmann::json metadata = nlohmann::json::object();
  GuardStats guarded;
  std::optional<std::size_t> argmin;

  void finalize() { argmin = argmin_finite(payload); }
  double min_value() const { return argmin ? payload[*argmin] : kInf; }
};

/// Indices i (0 < i < n-1) where v[i] is finite and strictly below both neighbours.
inline std::vector<std::size_t> interior_local_minima(const std::vector<double>& v) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (std::isfinite(v[i]) && v[i] < v[i - 1] && v[i] < v[i + 1]) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct PhaseOptimum {
  double trace_inverse = kInf;  // tr[(F^c)^-1]
  double eff1 = 0.0;
  double eff2 = 0.0;
  std::vector<double> round_minima;  // coarse grid first, then each refinement
};

/// Minimizes tr[(F^c)^-1] over effective phases: a full grid pass, then `rounds`
/// passes of a (2 factor + 1)^2 window of half-width one previous step around
/// the incumbent, each with step reduced by `factor`. The incumbent is always
/// on the refined window, so each round's minimum never exceeds the previous.
inline PhaseOptimum minimize_trace_inverse(const RotatedNoonKernel& kernel, const GridSpec& grid,
                                           std::size_t rounds = 2, std::size_t factor = 10) {
  grid.validate();
  if (grid.axes.size() != 2) throw std::invalid_argument("phase grid must have two axes");
  PhaseOptimum best;
  auto consider = [&](double e1, double e2) {
    const double v = precision(kernel.cfim_effective(e1, e2));
    if (v < best.trace_inverse) {
      best.trace_inverse = v;
      best.eff1 = e1;
      best.eff2 = e2;
    }
  };
  const GridAxis& a1 = grid.axes[0];
  const GridAxis& a2 = grid.axes[1];
  for (std::size_t i = 0; i < a1.count; ++i)
    for (std::size_t j = 0; j < a2.count; ++j) consider(a1.value(i), a2.value(j));
  best.round_minima.push_back(best.trace_inverse);
  if (!std::isfinite(best.trace_inverse)) return best;
  double h1 = a1.step(), h2 = a2.step();
  for (std::size_t r = 0; r < rounds; ++r) {
    const double c1 = best.eff1, c2 = best.eff2;
    const double s1 = h1 / static_cast<double>(factor);
    const double s2 = h2 / static_cast<double>(factor);
    const auto f = static_cast<long>(factor);
    for (long i = -f; i <= f; ++i)
      for (long j = -f; j <= f; ++j) consider(c1 + s1 * static_cast<double>(i), c2 + s2 * static_cast<double>(j));
    best.round_minima.push_back(best.trace_inverse);
    h1 = s1;
    h2 = s2;
  }
  return best;
}

inline double log_gap(double trace_inverse, int N) {
  if (!std::isfinite(trace_inverse)) return kInf;
  return std::log(trace_inverse - qfim_bound(N));
}

inline nlohmann::json effective_point_json(double e1, double e2, int N) {
  return {{"Theta1", e1}, {"Theta2", e2}, {"theta1", e1 / N}, {"theta2", e2 / N}};
}

/// ln Delta over a grid of effective phases for one rotation kernel.
inline ScanResult landscape_from_kernel(const RotatedNoonKernel& kernel, const GridSpec& grid,
                                        unsigned workers = 1) {
  grid.validate();
  if (grid.axes.size() != 2) throw std::invalid_argument("landscape grid must have two axes");
  const int N = kernel.particles();
  ScanResult out;
  out.grid = grid;
  out.payload_name = "ln_Delta";
  out.payload.assign(grid.size(), kInf);
  std::vector<std::size_t> guards(grid.size(), 0);
  parallel_for(grid.size(), workers, [&](std::size_t k) {
    const auto p = grid.point(k);
    const FisherMatrix f = kernel.cfim_effective(p[0], p[1]);
    guards[k] = f.guarded;
    out.payload[k] = log_gap(precision(f), N);
  });
  for (auto g : guards) out.guarded.add(g);
  out.finalize();
  return out;
}

/// ln Delta(Theta_1, Theta_2) at fixed tau under the ideal rotation.
inline ScanResult theta_landscape(double tau, int N, const GridSpec& grid, unsigned workers = 1) {
  if (is_singular_tau(tau)) {
    throw NumericalError("singular rotation time: tau is a multiple of 2 pi / 3");
  }
  const auto kernel = RotatedNoonKernel::ideal(make_basis(N), tau);
  ScanResult out = landscape_from_kernel(kernel, grid, workers);
  if (!out.argmin) throw NumericalError("landscape has no finite point");
  const PhasePair g = g_point(N);
  const double g_eff = std::fmod(N * g.theta1, kTwoPi);
  // The figure label (2 pi / 3, 2 pi / 3) is in theta, so its effective phase is N times that.
  const double label_eff = std::fmod(N * kTwoPi / 3.0, kTwoPi);
  out.metadata["N"] = N;
  out.metadata["tau"] = tau;
  out.metadata["point_G"] = effective_point_json(g_eff, g_eff, N);
  out.metadata["point_G"]["ln_Delta"] = log_gap(precision(kernel.cfim_effective(g_eff, g_eff)), N);
  out.metadata["point_figure_label"] = effective_point_json(label_eff, label_eff, N);
  out.metadata["point_figure_label"]["ln_Delta"] =
      log_gap(precision(kernel.cfim_effective(label_eff, label_eff)), N);
  const auto p = grid.point(*out.argmin);
  out.metadata["argmin"] = effective_point_json(p[0], p[1], N);
  out.metadata["argmin"]["ln_Delta"] = out.min_value();
  return out;
}

/// delta(tau) = min over the phase grid of ln Delta, per tau.
inline ScanResult delta_of_tau(int N, const GridAxis& tau_axis, const GridSpec& theta_grid,
                               unsigned workers = 1, std::size_t refine_rounds = 0) {
  tau_axis.validate();
  theta_grid.validate();
  const BasisPtr basis = make_basis(N);
  ScanResult out;
  out.grid = GridSpec{{tau_axis}};
  out.payload_name = "delta";
  out.payload.assign(tau_axis.count, kInf);
  std::vector<double> best1(tau_axis.count, 0.0), best2(tau_axis.count, 0.0);
  parallel_for(tau_axis.count, workers, [&](std::size_t k) {
    const double tau = tau_axis.value(k);
    if (is_singular_tau(tau)) return;
    const auto kernel = RotatedNoonKernel::ideal(basis, tau);
    const PhaseOptimum opt = minimize_trace_inverse(kernel, theta_grid, refine_rounds);
    out.payload[k] = log_gap(opt.trace_inverse, N);
    best1[k] = opt.eff1;
    best2[k] = opt.eff2;
  });
  out.extra_columns = {{"argmin_Theta1", std::move(best1)}, {"argmin_Theta2", std::move(best2)}};
  out.finalize();
  out.metadata["N"] = N;
  out.metadata["refine_rounds"] = refine_rounds;
  nlohmann::json minima = nlohmann::json::array();
  for (auto i : interior_local_minima(out.payload)) {
    minima.push_back({{"tau", tau_axis.value(i)}, {"delta", out.payload[i]}});
  }
  out.metadata["interior_minima"] = minima;
  return out;
}

inline double optimal_log_gap(const RotatedNoonKernel& kernel, const GridSpec& grid,
                              std::size_t rounds) {
  if (kernel.singular()) return kInf;
  return log_gap(minimize_trace_inverse(kernel, grid, rounds).trace_inverse, kernel.particles());
}

struct LambdaRow {
  double dtau = 0.0;
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;
};

/// Lambda_+-(dtau) = delta(tau_O +- dtau) - delta(tau_O), with delta minimized
/// by grid search plus refinement.
inline std::vector<LambdaRow> lambda_convergence(int N, const std::vector<double>& dtaus,
                                                 const GridSpec& theta_grid,
                                                 double tau_opt = kOptimalTau,
                                                 std::size_t refine_rounds = 2,
                                                 unsigned workers = 1) {
  const BasisPtr basis = make_basis(N);
  const double base =
      optimal_log_gap(RotatedNoonKernel::ideal(basis, tau_opt), theta_grid, refine_rounds);
  std::vector<LambdaRow> rows(dtaus.size());
  parallel_for(dtaus.size(), workers, [&](std::size_t k) {
    const double d = dtaus[k];
    rows[k].dtau = d;
    if (d == 0.0) return;
    rows[k].lambda_plus =
        optimal_log_gap(RotatedNoonKernel::ideal(basis, tau_opt + d), theta_grid, refine_rounds) - base;
    rows[k].lambda_minus =
        optimal_log_gap(RotatedNoonKernel::ideal(basis, tau_opt - d), theta_grid, refine_rounds) - base;
  });
  return rows;
}

struct ScalingRow {
  int N = 0;
  double min_trace_inverse = kInf;
  double argmin_eff1 = 0.0;
  double argmin_eff2 = 0.0;
  double trace_inverse_at_g = kInf;
  std::vector<double> round_minima;
  std::string error;

  double scaled_min() const { return min_trace_inverse * N * N; }
};

inline std::vector<ScalingRow> scaling_study(const std::vector<int>& particle_numbers, double tau,
                                             const GridSpec& theta_grid,
                                             std::size_t refine_rounds = 2,
                                             unsigned workers = 1) {
  if (particle_numbers.empty()) throw std::invalid_argument("particle number list is empty");
  std::vector<ScalingRow> rows(particle_numbers.size());
  parallel_for(particle_numbers.size(), workers, [&](std::size_t k) {
    ScalingRow& row = rows[k];
    row.N = particle_numbers[k];
    try {
      const auto kernel = RotatedNoonKernel::ideal(make_basis(row.N), tau);
      const PhaseOptimum opt = minimize_trace_inverse(kernel, theta_grid, refine_rounds);
      row.min_trace_inverse = opt.trace_inverse;
      row.argmin_eff1 = opt.eff1;
      row.argmin_eff2 = opt.eff2;
      row.round_minima = opt.round_minima;
      row.trace_inverse_at_g = precision(kernel.cfim(g_point(row.N)));
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

struct RobustnessRow {
  double U_res = 0.0;
  double scaled_interaction = 0.0;  // N U_res / J
  double delta = kInf;              // optimal ln Delta under the imperfect rotation
  double min_trace_inverse = kInf;
  double precision_ratio = 0.0;     // tr_0 / tr_U
  double delta_ratio = 0.0;         // delta_U / delta_0
  std::string error;
};

/// Optimal precision at fixed tau as the residual interaction is varied. Both
/// the log-gap ratio and the raw precision ratio are reported.
inline std::vector<RobustnessRow> robustness_sweep(int N, double J, double tau,
                                                   const std::vector<double>& residuals,
                                                   const GridSpec& theta_grid,
                                                   std::size_t refine_rounds = 2,
                                                   unsigned workers = 1) {
  if (!(J > 0.0)) throw std::invalid_argument("robustness sweep requires J > 0");
  const BasisPtr basis = make_basis(N);
  const PhaseOptimum ideal =
      minimize_trace_inverse(RotatedNoonKernel::ideal(basis, tau), theta_grid, refine_rounds);
  const double delta0 = log_gap(ideal.trace_inverse, N);
  std::vector<RobustnessRow> rows(residuals.size());
  parallel_for(residuals.size(), workers, [&](std::size_t k) {
    RobustnessRow& row = rows[k];
    row.U_res = residuals[k];
    row.scaled_interaction = N * residuals[k] / J;
    try {
      const auto kernel = ImperfectRotation(basis, J, residuals[k]).kernel(tau);
      const PhaseOptimum opt = minimize_trace_inverse(kernel, theta_grid, refine_rounds);
      row.min_trace_inverse = opt.trace_inverse;
      row.delta = log_gap(opt.trace_inverse, N);
      row.precision_ratio = ideal.trace_inverse / opt.trace_inverse;
      row.delta_ratio = row.delta / delta0;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

/// Least-squares slope of y against x over rows with lo <= x <= hi.
inline double fitted_slope(const std::vector<double>& x, const std::vector<double>& y, double lo,
                           double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lo - 1e-12 || x[i] > hi + 1e-12 || !std::isfinite(y[i])) continue;
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    ++n;
  }
  if (n < 2) throw std::invalid_argument("slope fit needs at least two points in range");
  const double m = static_cast<double>(n);
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace tripwell

#endif  // TRIPWELL_SCANS_HPP
