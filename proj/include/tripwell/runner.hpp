#ifndef TRIPWELL_RUNNER_HPP
#define TRIPWELL_RUNNER_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "tripwell/config.hpp"
#include "tripwell/dynamics.hpp"
#include "tripwell/errors.hpp"
#include "tripwell/io.hpp"
#include "tripwell/metrology.hpp"
#include "tripwell/scans.hpp"

#ifndef TRIPWELL_VERSION
#define TRIPWELL_VERSION "0.1.0"
#endif

namespace tripwell {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitIo = 4,
};

/// One comparison of a computed number against its expected value.
struct Check {
  std::string name;
  std::string expected;
  double got = 0.0;
  std::string tolerance;
  bool passed = false;
};

struct Artifact {
  std::string file;
  std::string content;
};

struct RunOutput {
  std::vector<Artifact> artifacts;
  std::vector<Check> checks;
  nlohmann::json summary = nlohmann::json::object();

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
};

namespace detail {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

inline Check rel_check(std::string name, double want, double got, double tol, std::string expected = {}) {
  if (expected.empty()) expected = format_double(want);
  std::ostringstream t;
  t << tol << " rel";
  return {std::move(name), std::move(expected), got, t.str(), rel_err(got, want) <= tol};
}

inline Check bound_check(std::string name, std::string expected, double got, bool ok,
                         std::string tolerance = "-") {
  return {std::move(name), std::move(expected), got, std::move(tolerance), ok};
}

inline nlohmann::json checks_json(const std::vector<Check>& checks) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : checks) {
    a.push_back({{"name", c.name}, {"expected", c.expected}, {"got", json_number(c.got)},
                 {"tolerance", c.tolerance}, {"passed", c.passed}});
  }
  return a;
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline GridSpec theta_grid_spec(std::size_t count) { return effective_phase_grid(count); }

// ---------------------------------------------------------------------------

inline RunOutput run_spectrum(const ExperimentConfig& c) {
  const auto couplings = c.J_grid.values();
  const SpectrumScan scan = spectrum_scan(c.N, c.U, couplings, c.levels, c.workers);
  const auto count = static_cast<std::size_t>(scan.levels.cols());
  std::vector<std::string> header{"J"};
  for (std::size_t l = 0; l < count; ++l) header.push_back("E" + std::to_string(l));
  CsvTable csv(header);
  for (std::size_t i = 0; i < couplings.size(); ++i) {
    std::vector<double> row{couplings[i]};
    for (std::size_t l = 0; l < count; ++l)
      row.push_back(scan.levels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)));
    csv.add_row(row);
  }
  RunOutput out;
  out.artifacts.push_back({"spectrum.csv", csv.str()});

  const BasisPtr basis = make_basis(c.N);
  std::vector<SectorStructure> sectors(couplings.size());
  parallel_for(couplings.size(), c.workers, [&](std::size_t i) {
    sectors[i] = sector_structure(build_bose_hubbard(basis, {couplings[i], c.U}));
  });
  CsvTable sec({"J", "sector0_ground", "sector0_first", "sector1_ground", "sector2_ground",
                "pair_splitting", "unique_ground"});
  double worst_pair = 0.0;
  bool all_unique = true;
  bool pair_is_first = true;
  std::size_t positive = 0;
  for (std::size_t i = 0; i < couplings.size(); ++i) {
    const auto& s = sectors[i];
    sec.add_row({couplings[i], s.sector0_ground, s.sector0_first, s.sector1_ground, s.sector2_ground,
                 s.pair_splitting(), s.unique_ground() ? 1.0 : 0.0});
    if (couplings[i] <= 0.0) continue;
    ++positive;
    worst_pair = std::max(worst_pair, s.pair_splitting());
    all_unique = all_unique && s.unique_ground();
    const double pair = std::min(s.sector1_ground, s.sector2_ground);
    pair_is_first = pair_is_first && pair >= s.sector0_ground - 1e-9 && pair <= s.sector0_first;
  }
  out.artifacts.push_back({"sectors.csv", sec.str()});

  out.summary = {{"N", c.N}, {"U", c.U}, {"levels", count}, {"couplings", couplings.size()}};
  for (std::size_t i = 0; i < couplings.size(); ++i) {
    if (couplings[i] != 0.0 || count < 3) continue;
    const double e0 = scan.levels(static_cast<Eigen::Index>(i), 0);
    const double spread = scan.levels(static_cast<Eigen::Index>(i), 2) - e0;
    out.summary["J0_ground"] = e0;
    out.summary["J0_triplet_spread"] = spread;
    if (c.U < 0.0) {
      const double want = c.U * c.N * (c.N - 1.0);
      out.checks.push_back(bound_check("J=0 ground triplet spread", "<= 1e-9", spread, spread <= 1e-9));
      out.checks.push_back(bound_check("J=0 ground energy U N (N-1)", format_double(want), e0,
                                       std::abs(e0 - want) <= 1e-9, "1e-9 abs"));
    }
  }
  if (positive > 0) {
    out.summary["max_pair_splitting"] = worst_pair;
    out.checks.push_back(bound_check("J>0 unique ground state (sign structure, connected)", "true",
                                     all_unique ? 1.0 : 0.0, all_unique));
    out.checks.push_back(bound_check("J>0 first excited level two-fold, splitting", "<= 1e-9",
                                     worst_pair, worst_pair <= 1e-9));
    out.checks.push_back(bound_check("J>0 degenerate pair lies directly above the ground level",
                                     "true", pair_is_first ? 1.0 : 0.0, pair_is_first));
  }
  return out;
}

inline SweepSchedule schedule_of(const ExperimentConfig& c) {
  SweepSchedule s;
  s.J0 = c.J0;
  s.v = c.v;
  s.U = c.U;
  s.dt = c.dt;
  s.record_stride = c.record_stride;
  return s;
}

inline RunOutput run_prepare(const ExperimentConfig& c) {
  const Trajectory tr = adiabatic_sweep(schedule_of(c), c.N);
  double fid1 = 0.0, fid2 = 0.0;
  for (const auto& s : tr.samples) {
    fid1 = std::max(fid1, s.fid[1]);
    fid2 = std::max(fid2, s.fid[2]);
  }
  RunOutput out;
  out.artifacts.push_back({"trajectory.csv", trajectory_to_csv(tr).str()});
  const double fid0 = tr.last().fid[0];
  out.summary = {{"N", c.N},         {"J0", c.J0},           {"v", c.v},
                 {"U", c.U},         {"dt", tr.dt},          {"steps", tr.steps},
                 {"final_Fid0", fid0}, {"max_Fid1", fid1},   {"max_Fid2", fid2},
                 {"max_norm_drift", tr.max_norm_drift()},     {"start_gap", tr.start_gap}};
  out.checks.push_back(bound_check("final Fid0 at J=0", ">= 0.95", fid0, fid0 >= 0.95));
  out.checks.push_back(bound_check("max Fid1 along sweep", "<= 1e-4", fid1, fid1 <= 1e-4));
  out.checks.push_back(bound_check("max Fid2 along sweep", "<= 1e-4", fid2, fid2 <= 1e-4));
  out.checks.push_back(bound_check("max norm drift", "<= 1e-8", tr.max_norm_drift(),
                                   tr.max_norm_drift() <= kSweepNormTolerance));
  return out;
}

inline RunOutput run_ramp_study(const ExperimentConfig& c) {
  const auto rows = ramp_speed_study(c.J0, c.U, c.N, c.v_list, c.dt, c.workers);
  CsvTable csv({"v", "final_Fid0", "error"});
  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : rows) {
    const double f = r.final_fid0 ? *r.final_fid0 : std::nan("");
    csv.add_row({format_double(r.v), format_double(f), r.error.empty() ? "" : "\"" + r.error + "\""});
    table.push_back({{"v", r.v}, {"final_Fid0", json_number(f)}, {"error", r.error}});
  }
  RunOutput out;
  out.artifacts.push_back({"ramp.csv", csv.str()});
  out.summary = {{"N", c.N}, {"J0", c.J0}, {"U", c.U}, {"rows", table}};
  std::vector<std::pair<double, double>> ok;
  for (const auto& r : rows) {
    if (!r.final_fid0) continue;
    ok.emplace_back(r.v, *r.final_fid0);
    if (std::abs(r.v - 0.2) < 1e-12) {
      out.checks.push_back(bound_check("final Fid0 at v=0.2", ">= 0.95", *r.final_fid0, *r.final_fid0 >= 0.95));
    }
  }
  std::sort(ok.begin(), ok.end());
  double worst_rise = 0.0;
  for (std::size_t i = 1; i < ok.size(); ++i) worst_rise = std::max(worst_rise, ok[i].second - ok[i - 1].second);
  if (ok.size() >= 2) {
    out.checks.push_back(bound_check("Fid0 non-increasing in v (largest rise between neighbours)",
                                     "<= 0.01", worst_rise, worst_rise <= 0.01));
  }
  const bool all_rows = ok.size() == rows.size();
  out.checks.push_back(bound_check("every ramp speed integrated", std::to_string(rows.size()),
                                   static_cast<double>(ok.size()), all_rows));
  return out;
}

inline RunOutput run_landscape(const ExperimentConfig& c) {
  const GridSpec grid = theta_grid_spec(c.theta_grid);
  const ScanResult scan = theta_landscape(c.tau, c.N, grid, c.workers);
  RunOutput out;
  out.artifacts.push_back({"landscape.csv", scan_to_csv(scan).str()});
  out.summary = scan_summary(scan);

  const auto kernel = RotatedNoonKernel::ideal(make_basis(c.N), c.tau);
  const FisherMatrix probe = kernel.cfim(c.theta);
  out.summary["probe"] = {{"theta1", c.theta.theta1}, {"theta2", c.theta.theta2},
                          {"F11", probe.f11}, {"F12", probe.f12}, {"F22", probe.f22},
                          {"trace_inverse", json_number(precision(probe))}};

  const std::size_t n = c.theta_grid;
  double asym = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = scan.payload[i * n + j];
      const double b = scan.payload[j * n + i];
      if (std::isfinite(a) && std::isfinite(b)) asym = std::max(asym, std::abs(a - b));
      else if (std::isfinite(a) != std::isfinite(b)) asym = kInf;
    }
  }
  out.checks.push_back(bound_check("Theta1 <-> Theta2 symmetry of ln Delta", "<= 1e-9", asym, asym <= 1e-9));
  const double g = scan.metadata["point_G"]["ln_Delta"].get<double>();
  out.checks.push_back(bound_check("grid minimum not above ln Delta at G", format_double(g),
                                   scan.min_value(), scan.min_value() <= g + 1e-9));
  return out;
}

inline RunOutput run_delta_tau(const ExperimentConfig& c) {
  const GridAxis tau_axis = c.tau_grid.axis("tau");
  const GridSpec theta = theta_grid_spec(c.theta_grid);
  const ScanResult scan = delta_of_tau(c.N, tau_axis, theta, c.workers, 0);
  RunOutput out;
  out.artifacts.push_back({"delta_tau.csv", scan_to_csv(scan).str()});
  out.summary = scan_summary(scan);

  const auto minima = interior_local_minima(scan.payload);
  const double step = tau_axis.step();
  out.checks.push_back(bound_check("number of interior minima of delta(tau)", "2",
                                   static_cast<double>(minima.size()), minima.size() == 2));
  const double want[2] = {2.0 * std::numbers::pi / 9.0, 4.0 * std::numbers::pi / 9.0};
  const char* labels[2] = {"2pi/9", "4pi/9"};
  for (int m = 0; m < 2; ++m) {
    double best = kInf;
    for (auto i : minima) {
      const double t = tau_axis.value(i);
      if (std::abs(t - want[m]) < std::abs(best - want[m])) best = t;
    }
    out.checks.push_back(bound_check(std::string("delta(tau) minimum near ") + labels[m],
                                     format_double(want[m]), best,
                                     std::abs(best - want[m]) <= step + 1e-12,
                                     "one grid step (" + format_double(step) + ")"));
  }
  // Period 2 pi / 3 in tau, sampled on a handful of grid points.
  const BasisPtr basis = make_basis(c.N);
  double worst = 0.0;
  const std::size_t stride = std::max<std::size_t>(1, tau_axis.count / 6);
  for (std::size_t k = stride / 2; k < tau_axis.count; k += stride) {
    if (!std::isfinite(scan.payload[k])) continue;
    const double shifted = optimal_log_gap(
        RotatedNoonKernel::ideal(basis, tau_axis.value(k) + kRotationPeriod), theta, 0);
    worst = std::max(worst, std::abs(shifted - scan.payload[k]));
  }
  out.checks.push_back(bound_check("delta(tau + 2pi/3) - delta(tau)", "<= 1e-9", worst, worst <= 1e-9));
  return out;
}

inline RunOutput run_lambda(const ExperimentConfig& c) {
  const auto dtaus = c.dtau_grid.values();
  const auto rows = lambda_convergence(c.N, dtaus, theta_grid_spec(c.theta_grid), c.tau,
                                       c.refine_rounds, c.workers);
  CsvTable csv({"dtau", "Lambda_plus", "Lambda_minus"});
  double lowest = kInf;
  for (const auto& r : rows) {
    csv.add_row({r.dtau, r.lambda_plus, r.lambda_minus});
    lowest = std::min({lowest, r.lambda_plus, r.lambda_minus});
  }
  RunOutput out;
  out.artifacts.push_back({"lambda.csv", csv.str()});
  out.summary = {{"N", c.N}, {"tau", c.tau}, {"refine_rounds", c.refine_rounds},
                 {"min_Lambda", json_number(lowest)}, {"points", rows.size()}};
  out.checks.push_back(bound_check("Lambda_+- >= 0 (tau is a local minimum)", ">= -1e-9", lowest,
                                   lowest >= -1e-9));
  const auto smallest = std::min_element(rows.begin(), rows.end(),
                                         [](const LambdaRow& a, const LambdaRow& b) { return a.dtau < b.dtau; });
  if (smallest != rows.end()) {
    const double v = std::max(std::abs(smallest->lambda_plus), std::abs(smallest->lambda_minus));
    out.checks.push_back(bound_check("|Lambda| at smallest dtau", "<= 1e-3", v, v <= 1e-3));
  }
  return out;
}

inline RunOutput run_scaling(const ExperimentConfig& c) {
  const auto rows = scaling_study(c.N_list, c.tau, theta_grid_spec(c.theta_grid), c.refine_rounds, c.workers);
  CsvTable csv({"N", "min_trace_inverse", "N2_min_trace_inverse", "trace_inverse_at_G",
                "qfim_bound", "argmin_Theta1", "argmin_Theta2"});
  RunOutput out;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : rows) {
    if (!r.error.empty()) throw NumericalError("scaling at N=" + std::to_string(r.N) + ": " + r.error);
    csv.add_row({static_cast<double>(r.N), r.min_trace_inverse, r.scaled_min(), r.trace_inverse_at_g,
                 qfim_bound(r.N), r.argmin_eff1, r.argmin_eff2});
    table.push_back({{"N", r.N}, {"N2_min_trace_inverse", r.scaled_min()},
                     {"round_minima", r.round_minima}});
    const std::string n = std::to_string(r.N);
    out.checks.push_back(bound_check("N^2 min tr[(Fc)^-1], N=" + n, "in [3.6, 3.95]", r.scaled_min(),
                                     r.scaled_min() >= 3.6 && r.scaled_min() <= 3.95));
    out.checks.push_back(bound_check("min tr[(Fc)^-1] <= 4/N^2, N=" + n, format_double(4.0 / (r.N * r.N)),
                                     r.min_trace_inverse, r.min_trace_inverse <= 4.0 / (r.N * r.N)));
  }
  out.artifacts.push_back({"scaling.csv", csv.str()});
  out.summary = {{"tau", c.tau}, {"refine_rounds", c.refine_rounds}, {"rows", table}};

  // Closed forms at the largest particle number of the study.
  const int N = *std::max_element(c.N_list.begin(), c.N_list.end());
  const std::string n = std::to_string(N);
  const double N2 = static_cast<double>(N) * N;
  const FisherMatrix q = qfim(g_point(N), N);
  out.checks.push_back(rel_check("QFIM F11, N=" + n, 8.0 * N2 / 9.0, q.f11, 1e-9));
  out.checks.push_back(rel_check("QFIM F12, N=" + n, -4.0 * N2 / 9.0, q.f12, 1e-9));
  out.checks.push_back(rel_check("tr[(Fq)^-1] = 3/N^2, N=" + n, 3.0 / N2, precision(q), 1e-12));
  if (std::abs(c.tau - kOptimalTau) < 1e-12) {
    const FisherMatrix f = cfim(g_point(N), c.tau, N);
    out.checks.push_back(rel_check("CFIM F11 at G, N=" + n, 2.0 * N2 / 3.0, f.f11, 1e-6));
    out.checks.push_back(rel_check("CFIM F12 at G, N=" + n, -N2 / 3.0, f.f12, 1e-6));
    out.checks.push_back(rel_check("CFIM F22 at G, N=" + n, 2.0 * N2 / 3.0, f.f22, 1e-6));
    out.checks.push_back(rel_check("tr[(Fc)^-1] at G, N=" + n, 4.0 / N2, precision(f), 1e-6));
  }
  return out;
}

inline RunOutput run_robustness(const ExperimentConfig& c) {
  const auto residuals = c.U_res_grid.values();
  const GridSpec grid = theta_grid_spec(c.theta_grid);
  const auto rows = robustness_sweep(c.N, c.J, c.tau, residuals, grid, c.refine_rounds, c.workers);
  CsvTable csv({"U_res", "NU_over_J", "delta", "min_trace_inverse", "precision_ratio", "delta_ratio"});
  std::vector<double> ax, dy;
  for (const auto& r : rows) {
    if (!r.error.empty()) throw NumericalError("robustness at U_res=" + format_double(r.U_res) + ": " + r.error);
    csv.add_row({r.U_res, r.scaled_interaction, r.delta, r.min_trace_inverse, r.precision_ratio, r.delta_ratio});
    ax.push_back(std::abs(r.scaled_interaction));
    dy.push_back(r.delta);
  }
  RunOutput out;
  out.artifacts.push_back({"robustness.csv", csv.str()});

  const BasisPtr basis = make_basis(c.N);
  const auto ideal = RotatedNoonKernel::ideal(basis, c.tau);
  const auto reduced = ImperfectRotation(basis, c.J, 0.0).kernel(c.tau);
  double worst = 0.0;
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  for (int s = 0; s < 10; ++s) {
    const PhasePair th = PhasePair::from_effective(phase(rng), phase(rng), c.N);
    const FisherMatrix a = ideal.cfim(th), b = reduced.cfim(th);
    const double scale = std::max({std::abs(a.f11), std::abs(a.f22), 1.0});
    worst = std::max({worst, std::abs(a.f11 - b.f11) / scale, std::abs(a.f12 - b.f12) / scale,
                      std::abs(a.f22 - b.f22) / scale});
  }
  out.checks.push_back(bound_check("U_res=0 reduces to the ideal CFIM", "<= 1e-9", worst, worst <= 1e-9));

  // Degradation at |N U/J| = 0.1 on the sign side of the configured sweep.
  const double sign = (c.U_res_grid.start + c.U_res_grid.end) <= 0.0 ? -1.0 : 1.0;
  const double u01 = sign * 0.1 * c.J / c.N;
  const PhaseOptimum base = minimize_trace_inverse(ideal, grid, c.refine_rounds);
  const PhaseOptimum at01 =
      minimize_trace_inverse(ImperfectRotation(basis, c.J, u01).kernel(c.tau), grid, c.refine_rounds);
  const double degradation = at01.trace_inverse / base.trace_inverse - 1.0;
  out.checks.push_back(bound_check("optimal precision degradation at |NU/J|=0.1", "<= 5%", degradation,
                                   degradation <= 0.05));

  double initial = std::nan(""), plateau = std::nan("");
  try {
    initial = fitted_slope(ax, dy, 0.1, 0.5);
    plateau = fitted_slope(ax, dy, 0.8, 1.2);
  } catch (const std::invalid_argument&) {
  }
  const bool flat = std::isfinite(initial) && std::isfinite(plateau) &&
                    std::abs(plateau) <= 0.25 * std::abs(initial);
  out.checks.push_back(bound_check("plateau: |slope| on [0.8,1.2] <= 0.25 |slope| on [0.1,0.5]",
                                   format_double(0.25 * std::abs(initial)), std::abs(plateau), flat));

  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : rows) {
    table.push_back({{"NU_over_J", r.scaled_interaction}, {"delta", json_number(r.delta)},
                     {"delta_ratio", json_number(r.delta_ratio)},
                     {"precision_ratio", json_number(r.precision_ratio)}});
  }
  out.summary = {{"N", c.N}, {"J", c.J}, {"tau", c.tau}, {"delta_ideal", log_gap(base.trace_inverse, c.N)},
                 {"degradation_at_0.1", degradation}, {"slope_initial", json_number(initial)},
                 {"slope_plateau", json_number(plateau)}, {"rows", table}};
  return out;
}

}  // namespace detail

/// Built-in consistency suite: closed-form QFIM, CFIM at G, analytic final
/// state against exact evolution, and the f table.
inline std::vector<Check> builtin_checks(std::size_t samples, unsigned seed) {
  using detail::bound_check;
  std::vector<Check> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::uniform_real_distribution<double> rot(0.0, kRotationPeriod);

  double q_worst = 0.0, t_worst = 0.0;
  for (int N = 1; N <= 30; ++N) {
    const double s = 4.0 * N * N / 9.0;
    for (std::size_t k = 0; k < samples; ++k) {
      const FisherMatrix q = qfim({phase(rng), phase(rng)}, N);
      q_worst = std::max({q_worst, detail::rel_err(q.f11, 2 * s), detail::rel_err(q.f12, -s),
                          detail::rel_err(q.f22, 2 * s)});
      t_worst = std::max(t_worst, detail::rel_err(precision(q), 3.0 / (N * N)));
    }
  }
  out.push_back(bound_check("QFIM closed form, N=1..30", "<= 1e-9 rel", q_worst, q_worst <= 1e-9));
  out.push_back(bound_check("tr[(Fq)^-1] = 3/N^2, N=1..30", "<= 1e-12 rel", t_worst, t_worst <= 1e-12));

  double g_worst = 0.0, p_worst = 0.0;
  for (int N : {3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 30}) {
    const double s = N * N / 3.0;
    const FisherMatrix f = cfim(g_point(N), kOptimalTau, N);
    g_worst = std::max({g_worst, detail::rel_err(f.f11, 2 * s), detail::rel_err(f.f12, -s),
                        detail::rel_err(f.f22, 2 * s)});
    p_worst = std::max(p_worst, detail::rel_err(precision(f), 4.0 / (N * N)));
  }
  out.push_back(bound_check("CFIM at G = (N^2/3)[[2,-1],[-1,2]]", "<= 1e-6 rel", g_worst, g_worst <= 1e-6));
  out.push_back(bound_check("tr[(Fc)^-1] at G = 4/N^2", "<= 1e-9 rel", p_worst, p_worst <= 1e-9));

  double infid = 0.0;
  for (int N = 1; N <= 6; ++N) {
    const BasisPtr basis = make_basis(N);
    const Propagator u(build_rotation_generator(basis, 1.0));
    for (std::size_t k = 0; k < samples; ++k) {
      const PhasePair th{phase(rng), phase(rng)};
      const double tau = rot(rng);
      const StateVector exact = u.apply(tau, output_state(th, basis));
      infid = std::max(infid, 1.0 - fidelity(exact, final_state_analytic(th, tau, basis)));
    }
  }
  out.push_back(bound_check("analytic final state vs exact evolution, N<=6", "infidelity <= 1e-10",
                            infid, infid <= 1e-10));

  struct Row {
    FockTriple n;
    FTableEntry want;
  };
  const std::vector<Row> table{
      {{3, 3, 0}, {1, 1, 1}},   {{4, 1, 1}, {1, 1, 1}},   {{0, 1, 2}, {4, -2, 1}},
      {{0, 2, 1}, {1, -2, 4}},  {{1, 0, 2}, {1, -2, 4}},  {{1, 2, 0}, {4, -2, 1}},
      {{2, 0, 1}, {4, -2, 1}},  {{2, 1, 0}, {1, -2, 4}},  {{3, 4, 2}, {4, -2, 1}},
      {{6, 2, 4}, {1, -2, 4}},  {{4, 4, 4}, {1, 1, 1}},   {{9, 15, 6}, {1, 1, 1}},
  };
  double f_worst = 0.0;
  for (const auto& r : table) {
    const FTableEntry f = appendix_b_f_table(r.n);
    f_worst = std::max({f_worst, std::abs(f.f11 - r.want.f11), std::abs(f.f12 - r.want.f12),
                        std::abs(f.f22 - r.want.f22)});
  }
  out.push_back(bound_check("f table by residue class", "<= 1e-9 abs", f_worst, f_worst <= 1e-9));
  return out;
}

inline RunOutput execute(const ExperimentConfig& c) {
  validate(c);
  switch (c.kind) {
    case ExperimentKind::kSpectrum: return detail::run_spectrum(c);
    case ExperimentKind::kPrepare: return detail::run_prepare(c);
    case ExperimentKind::kRampStudy: return detail::run_ramp_study(c);
    case ExperimentKind::kLandscape: return detail::run_landscape(c);
    case ExperimentKind::kDeltaTau: return detail::run_delta_tau(c);
    case ExperimentKind::kLambda: return detail::run_lambda(c);
    case ExperimentKind::kScaling: return detail::run_scaling(c);
    case ExperimentKind::kRobustness: return detail::run_robustness(c);
    case ExperimentKind::kVerify: {
      RunOutput out;
      out.checks = builtin_checks(c.verify_samples, c.seed);
      CsvTable csv({"check", "expected", "got", "passed"});
      for (const auto& k : out.checks)
        csv.add_row({"\"" + k.name + "\"", "\"" + k.expected + "\"", format_double(k.got), k.passed ? "1" : "0"});
      out.artifacts.push_back({"verify.csv", csv.str()});
      out.summary = {{"samples", c.verify_samples}, {"seed", c.seed}};
      return out;
    }
  }
  throw ConfigError("kind", "unhandled experiment kind");
}

inline void print_checks(std::ostream& os, const std::vector<Check>& checks) {
  for (const auto& c : checks) {
    os << (c.passed ? "PASS  " : "FAIL  ") << c.name << ": expected " << c.expected << ", got "
       << format_double(c.got) << ", tol " << c.tolerance << '\n';
  }
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline nlohmann::json build_manifest(const ExperimentConfig& c, const RunOutput& r, double seconds) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& a : r.artifacts) {
    files.push_back({{"file", a.file}, {"bytes", a.content.size()}, {"hash", content_hash(a.content)}});
  }
  return {
      {"config", to_json(c)},
      {"artifacts", files},
      {"versions",
       {{"tripwell", TRIPWELL_VERSION},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"compiler", __VERSION__}}},
      {"checks", detail::checks_json(r.checks)},
      {"all_checks_passed", r.all_passed()},
      {"started_at", utc_timestamp()},
      {"wall_clock_seconds", seconds},
  };
}

/// Runs one experiment, writes its artifacts, summary.json and manifest.json to
/// `out_dir`, and maps failures to exit codes. `checks` receives the check list.
inline int run(const ExperimentConfig& c, const std::filesystem::path& out_dir, std::ostream& log,
               std::ostream& err, std::vector<Check>* checks = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput r;
  try {
    r = execute(c);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (checks) *checks = r.checks;

  nlohmann::json summary = r.summary;
  summary["kind"] = to_string(c.kind);
  summary["checks"] = detail::checks_json(r.checks);
  r.artifacts.push_back({"summary.json", detail::dump(summary)});
  try {
    for (const auto& a : r.artifacts) write_text_file(out_dir / a.file, a.content);
    write_text_file(out_dir / "manifest.json", detail::dump(build_manifest(c, r, seconds)));
  } catch (const std::exception& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  }
  log << to_string(c.kind) << (c.label.empty() ? "" : " [" + c.label + "]") << ": " << r.artifacts.size()
      << " artifacts in " << out_dir.string() << '\n';
  print_checks(log, r.checks);
  if (c.kind == ExperimentKind::kVerify && !r.all_passed()) return kExitCheckFailed;
  return kExitOk;
}

/// Parses a config file; the overrides replace the file's workers / seed when set.
inline ExperimentConfig load_config(const std::filesystem::path& path, std::optional<unsigned> workers = {},
                                    std::optional<unsigned> seed = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig c = parse_config(j);
  if (workers) c.workers = *workers;
  if (seed) c.seed = *seed;
  validate(c);
  return c;
}

/// Every *.json config in `config_dir`, each into its own subdirectory, plus a
/// combined comparison table. Keeps going past failing figures.
inline int reproduce_all(const std::filesystem::path& config_dir, const std::filesystem::path& out_dir,
                         unsigned workers, std::ostream& log, std::ostream& err) {
  std::vector<std::filesystem::path> configs;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(config_dir, ec)) {
    if (e.path().extension() == ".json") configs.push_back(e.path());
  }
  if (ec) {
    err << "I/O error: cannot list " << config_dir.string() << ": " << ec.message() << '\n';
    return kExitIo;
  }
  std::sort(configs.begin(), configs.end());

  CsvTable table({"figure", "quantity", "expected", "got", "tolerance", "passed"});
  nlohmann::json rows = nlohmann::json::array();
  bool ok = !configs.empty();
  for (const auto& path : configs) {
    const std::string fig = path.stem().string();
    std::vector<Check> checks;
    int code = kExitOk;
    try {
      code = run(load_config(path, workers), out_dir / fig, log, err, &checks);
    } catch (const ConfigError& e) {
      err << fig << ": config error: " << e.what() << '\n';
      code = kExitConfig;
    } catch (const IoError& e) {
      err << fig << ": I/O error: " << e.what() << '\n';
      code = kExitIo;
    }
    if (code != kExitOk && code != kExitCheckFailed) {
      checks.push_back(detail::bound_check("run completed", "exit 0", code, false));
    }
    for (const auto& c : checks) {
      ok = ok && c.passed;
      table.add_row({fig, "\"" + c.name + "\"", "\"" + c.expected + "\"", format_double(c.got),
                     "\"" + c.tolerance + "\"", c.passed ? "1" : "0"});
      rows.push_back({{"figure", fig}, {"quantity", c.name}, {"expected", c.expected},
                      {"got", json_number(c.got)}, {"tolerance", c.tolerance}, {"passed", c.passed}});
    }
  }
  try {
    write_text_file(out_dir / "reproduction_summary.csv", table.str());
    write_text_file(out_dir / "reproduction_summary.json",
                    detail::dump({{"all_passed", ok}, {"comparisons", rows}}));
  } catch (const std::exception& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  }
  log << (ok ? "reproduction: all comparisons passed\n" : "reproduction: some comparisons FAILED\n");
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace tripwell

#endif  // TRIPWELL_RUNNER_HPP
