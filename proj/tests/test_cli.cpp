#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "tripwell/runner.hpp"

using namespace tripwell;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tripwell_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string field_of(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

int run_quiet(const ExperimentConfig& c, const fs::path& out, std::string* err_text = nullptr) {
  std::ostringstream log, err;
  const int code = run(c, out, log, err);
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST(ConfigNumbers, PiExpressions) {
  EXPECT_DOUBLE_EQ(parse_number(0.25, "x"), 0.25);
  EXPECT_DOUBLE_EQ(parse_number("2pi/9", "x"), 2 * kPi / 9);
  EXPECT_DOUBLE_EQ(parse_number("0.2pi", "x"), 0.2 * kPi);
  EXPECT_DOUBLE_EQ(parse_number("pi/3", "x"), kPi / 3);
  EXPECT_DOUBLE_EQ(parse_number("-pi", "x"), -kPi);
  EXPECT_DOUBLE_EQ(parse_number("2 * pi / 3", "x"), 2 * kPi / 3);
  EXPECT_DOUBLE_EQ(parse_number("1e-3", "x"), 1e-3);
  EXPECT_DOUBLE_EQ(parse_number("3/4", "x"), 0.75);
  for (const char* bad : {"", "-", "pie", "2pi/0", "x"}) {
    EXPECT_THROW(parse_number(bad, "x"), ConfigError) << bad;
  }
  EXPECT_THROW(parse_number(json::array(), "x"), ConfigError);
}

TEST(Config, FieldLevelErrors) {
  EXPECT_EQ(field_of(json::array()), "<root>");
  EXPECT_EQ(field_of({{"N", 3}}), "kind");
  EXPECT_EQ(field_of({{"kind", "nonsense"}}), "kind");
  EXPECT_EQ(field_of({{"kind", "landscape"}, {"N", 0}}), "N");
  EXPECT_EQ(field_of({{"kind", "landscape"}, {"N", 2.5}}), "N");
  EXPECT_EQ(field_of({{"kind", "landscape"}, {"tau", "abc"}}), "tau");
  EXPECT_EQ(field_of({{"kind", "landscape"}, {"theta", {1.0}}}), "theta");
  EXPECT_EQ(field_of({{"kind", "landscape"}, {"theta_grid", 1}}), "theta_grid");
  EXPECT_EQ(field_of({{"kind", "prepare"}, {"dt", -1}}), "dt");
  EXPECT_EQ(field_of({{"kind", "prepare"}, {"v", 0}}), "v");
  EXPECT_EQ(field_of({{"kind", "ramp-study"}}), "v_list");
  EXPECT_EQ(field_of({{"kind", "scaling"}}), "N_list");
  EXPECT_EQ(field_of({{"kind", "scaling"}, {"N_list", {3, 0}}}), "N_list");
  EXPECT_EQ(field_of({{"kind", "robustness"}, {"J", 0}}), "J");
  EXPECT_EQ(field_of({{"kind", "spectrum"}, {"J_grid", {{"start", 1}, {"end", 0}, {"count", 5}}}}), "J_grid");
  EXPECT_EQ(field_of({{"kind", "lambda"}, {"dtau_grid", {{"start", 0}, {"end", 1}, {"count", 5}, {"spacing", "log"}}}}),
            "dtau_grid");
  EXPECT_EQ(field_of({{"kind", "lambda"}, {"dtau_grid", {{"start", 1}, {"end", 2}, {"log", true}}}}), "dtau_grid.log");
  EXPECT_EQ(field_of({{"kind", "verify"}, {"speling", 1}}), "speling");
  EXPECT_EQ(field_of({{"kind", "verify"}}), "<accepted>");
}

TEST(Config, RoundTrip) {
  for (const auto& e : fs::directory_iterator(TRIPWELL_CONFIG_DIR)) {
    const ExperimentConfig c = load_config(e.path());
    const ExperimentConfig back = parse_config(to_json(c));
    EXPECT_TRUE(equivalent(c, back)) << e.path();
  }
  ExperimentConfig c;
  c.kind = ExperimentKind::kRobustness;
  c.tau = 0.1;
  c.U_res_grid = {-0.3, 0.2, 7, true, false};
  EXPECT_TRUE(equivalent(c, parse_config(to_json(c))));
  EXPECT_EQ(parse_kind(to_string(ExperimentKind::kDeltaTau)), ExperimentKind::kDeltaTau);
}

TEST(Config, AxisSpacing) {
  const AxisConfig lin{0.0, 1.0, 5, true, false};
  EXPECT_EQ(lin.values(), (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  const AxisConfig lg{1e-4, 1e-2, 3, true, true};
  const auto v = lg.values();
  EXPECT_NEAR(v[1], 1e-3, 1e-15);
  EXPECT_EQ(v[2], 1e-2);
  const AxisConfig open{0.0, 1.0, 4, false, false};
  EXPECT_EQ(open.values().back(), 0.75);
}

TEST(Csv, FullPrecisionAndHeader) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(kInf), "inf");
  EXPECT_EQ(std::stod(format_double(kPi)), kPi);
  CsvTable t({"a", "b"});
  t.add_row(std::vector<double>{1.0, 2.5});
  EXPECT_EQ(t.str(), "a,b\n1,2.5\n");
  EXPECT_THROW(t.add_row(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Hash, Sha256) {
  EXPECT_EQ(content_hash(""), "sha256:e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(content_hash("abc"), "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Run, LandscapeIsIdempotent) {
  ExperimentConfig c = parse_config({{"kind", "landscape"}, {"N", 5}, {"theta_grid", 21}});
  const fs::path a = scratch("idem_a"), b = scratch("idem_b");
  ASSERT_EQ(run_quiet(c, a), kExitOk);
  c.workers = 3;
  ASSERT_EQ(run_quiet(c, b), kExitOk);
  for (const char* f : {"landscape.csv", "summary.json"}) {
    EXPECT_EQ(read_text_file(a / f), read_text_file(b / f)) << f;
  }
  const json ma = json::parse(read_text_file(a / "manifest.json"));
  const json mb = json::parse(read_text_file(b / "manifest.json"));
  EXPECT_EQ(ma["artifacts"], mb["artifacts"]);
  EXPECT_TRUE(ma["all_checks_passed"].get<bool>());
  for (const auto& art : ma["artifacts"]) {
    EXPECT_EQ(art["hash"], content_hash(read_text_file(a / art["file"].get<std::string>())));
  }
  EXPECT_TRUE(ma.contains("started_at"));
  EXPECT_EQ(ma["config"]["N"], 5);
}

TEST(Run, SpectrumWritesRequestedLevels) {
  const ExperimentConfig c = parse_config(
      {{"kind", "spectrum"}, {"N", 30}, {"levels", 30}, {"J_grid", {{"start", 0}, {"end", 1}, {"count", 3}}}});
  const fs::path out = scratch("spectrum");
  ASSERT_EQ(run_quiet(c, out), kExitOk);
  std::istringstream csv(read_text_file(out / "spectrum.csv"));
  std::string header, row;
  std::getline(csv, header);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 30);
  EXPECT_EQ(header.substr(0, 6), "J,E0,E");
  int rows = 0;
  while (std::getline(csv, row)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(Run, ExitCodes) {
  std::string err;
  const ExperimentConfig singular = parse_config({{"kind", "landscape"}, {"N", 4}, {"tau", "2pi/3"}, {"theta_grid", 5}});
  EXPECT_EQ(run_quiet(singular, scratch("singular"), &err), kExitNumerical);
  EXPECT_NE(err.find("singular rotation time"), std::string::npos) << err;

  ExperimentConfig bad;
  bad.kind = ExperimentKind::kLandscape;
  bad.N = 0;
  EXPECT_EQ(run_quiet(bad, scratch("bad"), &err), kExitConfig);
  EXPECT_NE(err.find("N"), std::string::npos);

  const fs::path blocker = scratch("blocker");
  write_text_file(blocker, "not a directory");
  const ExperimentConfig ok = parse_config({{"kind", "landscape"}, {"N", 3}, {"theta_grid", 5}});
  EXPECT_EQ(run_quiet(ok, blocker / "sub", &err), kExitIo);
  EXPECT_NE(err.find("I/O"), std::string::npos);
}

TEST(Run, VerifyPasses) {
  const ExperimentConfig c = parse_config({{"kind", "verify"}, {"verify_samples", 5}, {"seed", 3}});
  const fs::path out = scratch("verify");
  std::ostringstream log, err;
  std::vector<Check> checks;
  EXPECT_EQ(run(c, out, log, err, &checks), kExitOk) << log.str();
  EXPECT_FALSE(checks.empty());
  EXPECT_TRUE(fs::exists(out / "verify.csv"));
}

TEST(LoadConfig, FileErrors) {
  EXPECT_THROW(load_config(scratch("missing.json")), IoError);
  const fs::path p = scratch("broken.json");
  write_text_file(p, "{\"kind\": ");
  EXPECT_THROW(load_config(p), ConfigError);
  write_text_file(p, R"({"kind": "verify", "workers": 1})");
  EXPECT_EQ(load_config(p, 4u, 9u).workers, 4u);
  EXPECT_EQ(load_config(p, 4u, 9u).seed, 9u);
}

#ifdef TRIPWELL_CLI_PATH
namespace {
int cli(const std::string& args) {
  const int status = std::system((std::string(TRIPWELL_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST(Cli, ExitStatuses) {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  write_text_file(dir / "ok.json", R"({"kind": "landscape", "N": 3, "theta_grid": 7})");
  write_text_file(dir / "bad.json", R"({"kind": "landscape", "N": -1})");
  write_text_file(dir / "singular.json", R"({"kind": "landscape", "N": 3, "tau": "2pi/3", "theta_grid": 7})");
  EXPECT_EQ(cli("run --config " + (dir / "ok.json").string() + " --out " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "landscape.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
  EXPECT_EQ(cli("run --config " + (dir / "bad.json").string() + " --out " + (dir / "o2").string()), 2);
  EXPECT_EQ(cli("run --config " + (dir / "singular.json").string() + " --out " + (dir / "o3").string()), 3);
  EXPECT_EQ(cli("run --config " + (dir / "absent.json").string()), 4);
  EXPECT_EQ(cli("run --config " + (dir / "ok.json").string() + " --out " + (dir / "ok.json" / "x").string()), 4);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("run"), 2);
  EXPECT_EQ(cli("--help"), 0);
}
#endif
