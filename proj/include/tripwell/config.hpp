#ifndef TRIPWELL_CONFIG_HPP
#define TRIPWELL_CONFIG_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tripwell/fock.hpp"
#include "tripwell/metrology.hpp"
#include "tripwell/scans.hpp"

namespace tripwell {

/// Rejected configuration; `field` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class ExperimentKind {
  kSpectrum,
  kPrepare,
  kRampStudy,
  kLandscape,
  kDeltaTau,
  kLambda,
  kScaling,
  kRobustness,
  kVerify,
};

inline constexpr std::array<std::pair<ExperimentKind, const char*>, 9> kKindNames{{
    {ExperimentKind::kSpectrum, "spectrum"},
    {ExperimentKind::kPrepare, "prepare"},
    {ExperimentKind::kRampStudy, "ramp-study"},
    {ExperimentKind::kLandscape, "landscape"},
    {ExperimentKind::kDeltaTau, "delta-tau"},
    {ExperimentKind::kLambda, "lambda"},
    {ExperimentKind::kScaling, "scaling"},
    {ExperimentKind::kRobustness, "robustness"},
    {ExperimentKind::kVerify, "verify"},
}};

inline std::string to_string(ExperimentKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "unknown";
}

inline ExperimentKind parse_kind(const std::string& s) {
  for (const auto& [kind, name] : kKindNames)
    if (s == name) return kind;
  throw ConfigError("kind", "unknown experiment kind '" + s + "'");
}

/// Accepts a JSON number or a string of the form "[c]pi[/d]" or a plain decimal
/// (e.g. "2pi/9", "pi/3", "0.2pi", "-1.5").
inline double parse_number(const nlohmann::json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) throw ConfigError(field, "expected a number or a pi expression");
  static const std::regex re(R"(^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+])?\s*\*?\s*(pi)?\s*(?:/\s*(\d+\.?\d*))?\s*$)");
  const std::string s = j.get<std::string>();
  std::smatch m;
  if (!std::regex_match(s, m, re) || (!m[1].matched && !m[2].matched) ||
      ((m[1].str() == "+" || m[1].str() == "-") && !m[2].matched)) {
    throw ConfigError(field, "cannot parse '" + s + "'");
  }
  double v = 1.0;
  if (m[1].matched) {
    const std::string c = m[1].str();
    v = (c == "+" || c == "-") ? (c == "-" ? -1.0 : 1.0) : std::stod(c);
  }
  if (m[2].matched) v *= std::numbers::pi;
  if (m[3].matched) {
    const double d = std::stod(m[3].str());
    if (d == 0.0) throw ConfigError(field, "division by zero");
    v /= d;
  }
  return v;
}

struct AxisConfig {
  double start = 0.0;
  double end = 1.0;
  std::size_t count = 2;
  bool include_end = true;
  bool log_spacing = false;

  std::vector<double> values() const {
    std::vector<double> v(count);
    const std::size_t div = include_end ? count - 1 : count;
    for (std::size_t k = 0; k < count; ++k) {
      const double f = static_cast<double>(k) / static_cast<double>(div);
      v[k] = log_spacing ? std::exp(std::log(start) + f * (std::log(end) - std::log(start)))
                         : start + f * (end - start);
    }
    if (include_end && count >= 2) v.back() = end;
    return v;
  }

  GridAxis axis(const std::string& name) const { return {name, start, end, count, include_end}; }
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kVerify;
  std::string label;

  int N = 30;
  double J = 10.0;     // rotation tunneling
  double J0 = 10.0;    // sweep start
  double v = 0.2;      // sweep speed
  double U = -0.5;     // interaction during preparation / spectrum
  double U_res = 0.0;  // residual interaction during rotation
  double tau = kOptimalTau;
  PhasePair theta{};
  double dt = 1e-3;
  std::size_t record_stride = 100;
  std::size_t levels = 30;
  std::size_t theta_grid = 181;
  std::size_t refine_rounds = 2;

  AxisConfig J_grid{0.0, 10.0, 100, true, false};
  AxisConfig tau_grid{0.0, kRotationPeriod, 600, false, false};
  AxisConfig dtau_grid{1e-4, 5e-2, 50, true, true};
  AxisConfig U_res_grid{-0.5, 0.0, 31, true, false};
  std::vector<int> N_list{};
  std::vector<double> v_list{};

  std::size_t verify_samples = 20;
  unsigned workers = 1;
  unsigned seed = 0;
};

namespace detail {

inline AxisConfig parse_axis(const nlohmann::json& j, const std::string& field, AxisConfig d) {
  if (!j.is_object()) throw ConfigError(field, "expected an object with start/end/count");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "start") d.start = parse_number(*it, field + ".start");
    else if (k == "end") d.end = parse_number(*it, field + ".end");
    else if (k == "count") {
      if (!it->is_number_integer() || it->get<long>() < 2) throw ConfigError(field + ".count", "must be an integer >= 2");
      d.count = it->get<std::size_t>();
    } else if (k == "include_end") {
      if (!it->is_boolean()) throw ConfigError(field + ".include_end", "must be boolean");
      d.include_end = it->get<bool>();
    } else if (k == "spacing") {
      const std::string s = it->is_string() ? it->get<std::string>() : "";
      if (s != "linear" && s != "log") throw ConfigError(field + ".spacing", "must be 'linear' or 'log'");
      d.log_spacing = s == "log";
    } else {
      throw ConfigError(field + "." + k, "unknown key");
    }
  }
  if (!(d.end > d.start)) throw ConfigError(field, "end must exceed start");
  if (d.log_spacing && !(d.start > 0.0)) throw ConfigError(field, "log spacing needs start > 0");
  return d;
}

inline nlohmann::json axis_json(const AxisConfig& a) {
  return {{"start", a.start}, {"end", a.end}, {"count", a.count}, {"include_end", a.include_end},
          {"spacing", a.log_spacing ? "log" : "linear"}};
}

template <typename T>
T parse_int(const nlohmann::json& j, const std::string& field, long lo) {
  if (!j.is_number_integer()) throw ConfigError(field, "expected an integer");
  const long v = j.get<long>();
  if (v < lo) throw ConfigError(field, "must be >= " + std::to_string(lo));
  return static_cast<T>(v);
}

}  // namespace detail

/// Checks every field the chosen experiment consumes.
inline void validate(const ExperimentConfig& c) {
  using K = ExperimentKind;
  auto need = [](bool ok, const char* field, const std::string& msg) {
    if (!ok) throw ConfigError(field, msg);
  };
  const bool uses_N = c.kind != K::kScaling && c.kind != K::kVerify;
  if (uses_N) {
    need(c.N >= 1 && c.N <= kDefaultMaxParticles, "N",
         "must be in [1, " + std::to_string(kDefaultMaxParticles) + "]");
  }
  need(c.workers >= 1, "workers", "must be >= 1");
  switch (c.kind) {
    case K::kSpectrum:
      need(std::isfinite(c.U), "U", "must be finite");
      need(c.levels >= 1, "levels", "must be >= 1");
      need(c.J_grid.start >= 0.0, "J_grid.start", "must be >= 0");
      break;
    case K::kPrepare:
    case K::kRampStudy:
      need(c.J0 > 0.0, "J0", "must be > 0");
      need(c.dt > 0.0, "dt", "must be > 0");
      need(std::isfinite(c.U), "U", "must be finite");
      need(c.record_stride >= 1, "record_stride", "must be >= 1");
      if (c.kind == K::kPrepare) need(c.v > 0.0, "v", "must be > 0");
      if (c.kind == K::kRampStudy) {
        need(!c.v_list.empty(), "v_list", "must be non-empty");
        for (double s : c.v_list) need(s > 0.0, "v_list", "speeds must be > 0");
      }
      break;
    case K::kLandscape:
    case K::kDeltaTau:
    case K::kLambda:
      need(std::isfinite(c.tau), "tau", "must be finite");
      need(c.theta_grid >= 2, "theta_grid", "must be >= 2");
      break;
    case K::kScaling:
      need(!c.N_list.empty(), "N_list", "must be non-empty");
      for (int n : c.N_list) need(n >= 1 && n <= kDefaultMaxParticles, "N_list", "entries must be in [1, 200]");
      need(c.theta_grid >= 2, "theta_grid", "must be >= 2");
      break;
    case K::kRobustness:
      need(c.J > 0.0, "J", "must be > 0");
      need(c.theta_grid >= 2, "theta_grid", "must be >= 2");
      break;
    case K::kVerify:
      need(c.verify_samples >= 1, "verify_samples", "must be >= 1");
      break;
  }
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  if (!j.contains("kind")) throw ConfigError("kind", "missing");
  ExperimentConfig c;
  if (!j["kind"].is_string()) throw ConfigError("kind", "must be a string");
  c.kind = parse_kind(j["kind"].get<std::string>());
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const nlohmann::json& v = *it;
    if (k == "kind") continue;
    if (k == "label") {
      if (!v.is_string()) throw ConfigError(k, "must be a string");
      c.label = v.get<std::string>();
    } else if (k == "N") c.N = detail::parse_int<int>(v, k, 1);
    else if (k == "J") c.J = parse_number(v, k);
    else if (k == "J0") c.J0 = parse_number(v, k);
    else if (k == "v") c.v = parse_number(v, k);
    else if (k == "U") c.U = parse_number(v, k);
    else if (k == "U_res") c.U_res = parse_number(v, k);
    else if (k == "tau") c.tau = parse_number(v, k);
    else if (k == "theta") {
      if (!v.is_array() || v.size() != 2) throw ConfigError(k, "expected [theta1, theta2]");
      c.theta = {parse_number(v[0], "theta[0]"), parse_number(v[1], "theta[1]")};
    } else if (k == "dt") c.dt = parse_number(v, k);
    else if (k == "record_stride") c.record_stride = detail::parse_int<std::size_t>(v, k, 1);
    else if (k == "levels") c.levels = detail::parse_int<std::size_t>(v, k, 1);
    else if (k == "theta_grid") c.theta_grid = detail::parse_int<std::size_t>(v, k, 2);
    else if (k == "refine_rounds") c.refine_rounds = detail::parse_int<std::size_t>(v, k, 0);
    else if (k == "J_grid") c.J_grid = detail::parse_axis(v, k, c.J_grid);
    else if (k == "tau_grid") c.tau_grid = detail::parse_axis(v, k, c.tau_grid);
    else if (k == "dtau_grid") c.dtau_grid = detail::parse_axis(v, k, c.dtau_grid);
    else if (k == "U_res_grid") c.U_res_grid = detail::parse_axis(v, k, c.U_res_grid);
    else if (k == "N_list") {
      if (!v.is_array()) throw ConfigError(k, "expected an array");
      c.N_list.clear();
      for (const auto& e : v) c.N_list.push_back(detail::parse_int<int>(e, k, 1));
    } else if (k == "v_list") {
      if (!v.is_array()) throw ConfigError(k, "expected an array");
      c.v_list.clear();
      for (const auto& e : v) c.v_list.push_back(parse_number(e, k));
    } else if (k == "verify_samples") c.verify_samples = detail::parse_int<std::size_t>(v, k, 1);
    else if (k == "workers") c.workers = detail::parse_int<unsigned>(v, k, 1);
    else if (k == "seed") c.seed = detail::parse_int<unsigned>(v, k, 0);
    else throw ConfigError(k, "unknown key");
  }
  validate(c);
  return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {
      {"kind", to_string(c.kind)},
      {"label", c.label},
      {"N", c.N},
      {"J", c.J},
      {"J0", c.J0},
      {"v", c.v},
      {"U", c.U},
      {"U_res", c.U_res},
      {"tau", c.tau},
      {"theta", {c.theta.theta1, c.theta.theta2}},
      {"dt", c.dt},
      {"record_stride", c.record_stride},
      {"levels", c.levels},
      {"theta_grid", c.theta_grid},
      {"refine_rounds", c.refine_rounds},
      {"J_grid", detail::axis_json(c.J_grid)},
      {"tau_grid", detail::axis_json(c.tau_grid)},
      {"dtau_grid", detail::axis_json(c.dtau_grid)},
      {"U_res_grid", detail::axis_json(c.U_res_grid)},
      {"N_list", c.N_list},
      {"v_list", c.v_list},
      {"verify_samples", c.verify_samples},
      {"workers", c.workers},
      {"seed", c.seed},
  };
}

inline bool operator==(const AxisConfig& a, const AxisConfig& b) {
  return a.start == b.start && a.end == b.end && a.count == b.count &&
         a.include_end == b.include_end && a.log_spacing == b.log_spacing;
}

inline bool equivalent(const ExperimentConfig& a, const ExperimentConfig& b) {
  return to_json(a) == to_json(b);
}

}  // namespace tripwell

#endif  // TRIPWELL_CONFIG_HPP
