#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "run.hpp"

using namespace subdiff;
using namespace subdiff::cli;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("subdiff_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* small_forward = R"({
  "command": "forward",
  "problem": {"T": 1.0, "rho": 0.5, "N": 64, "M": 32, "K": 8},
  "sigma": {"kind": "affine", "a": 1.0, "b": 0.5},
  "q": {"kind": "constant", "value": 0.1},
  "phi": {"kind": "sine-modes", "modes": [{"k": 1, "amplitude": 1.0}, {"k": 3, "amplitude": 0.2}]},
  "f": {"kind": "sine-modes", "modes": [{"k": 2, "time": {"kind": "sinusoidal-offset", "offset": 1.0, "amplitude": 0.5}}]}
})";

std::string expect_config_error(const std::string& text, const std::string& command = "") {
  try {
    parse_config(text, "run.json", command);
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected a config error";
  return {};
}

int run_cli(const std::string& command, const fs::path& config, const fs::path& out, std::string* log = nullptr) {
  std::ostringstream os, err;
  RunOptions opt;
  opt.out_dir = out;
  const int code = run(command, config, opt, os, err);
  if (log) *log = os.str() + err.str();
  return code;
}

} // namespace

TEST(Config, UnknownKeyIsRejectedWithItsLine) {
  const std::string text = "{\n  \"command\": \"forward\",\n  \"problem\": {\"rho\": 0.5, \"N\": 8, \"M\": 8, \"K\": 2,\n"
                           "    \"speed\": 3},\n  \"sigma\": {\"kind\": \"constant\", \"value\": 1},\n"
                           "  \"q\": {\"kind\": \"constant\", \"value\": 0}\n}";
  const auto msg = expect_config_error(text);
  EXPECT_NE(msg.find("run.json:4:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("unknown key 'speed'"), std::string::npos) << msg;
}

TEST(Config, SyntaxErrorNamesTheLine) {
  const auto msg = expect_config_error("{\n  \"command\": \"forward\",\n  \"problem\": {,}\n}");
  EXPECT_NE(msg.find("run.json:3:"), std::string::npos) << msg;
}

TEST(Config, RangesAndTypes) {
  auto with_problem = [](const std::string& problem) {
    return std::string(R"({"command": "forward", "problem": )") + problem +
           R"(, "sigma": {"kind": "constant", "value": 1}, "q": {"kind": "constant", "value": 0}})";
  };
  EXPECT_NE(expect_config_error(with_problem(R"({"rho": 1.0, "N": 8, "M": 8, "K": 2})")).find("/problem/rho"),
            std::string::npos);
  EXPECT_NE(expect_config_error(with_problem(R"({"rho": 0.5, "N": 8, "M": 9, "K": 2})")).find("even"),
            std::string::npos);
  EXPECT_NE(expect_config_error(with_problem(R"({"rho": 0.5, "N": 8, "M": 8, "K": 5})")).find("/problem/K"),
            std::string::npos);
  EXPECT_NE(expect_config_error(with_problem(R"({"rho": 0.5, "N": -3, "M": 8, "K": 2})")).find("nonnegative integer"),
            std::string::npos);
  EXPECT_NE(expect_config_error(with_problem(R"({"rho": "half", "N": 8, "M": 8, "K": 2})")).find("expected a number"),
            std::string::npos);
  EXPECT_NE(expect_config_error(with_problem(R"({"N": 8, "M": 8, "K": 2})")).find("missing required key 'rho'"),
            std::string::npos);
}

TEST(Config, ProfileKindsAreChecked) {
  const auto msg = expect_config_error(
      R"({"command": "forward", "problem": {"rho": 0.5, "N": 8, "M": 8, "K": 2},
          "sigma": {"kind": "cubic", "value": 1}, "q": {"kind": "constant", "value": 0}})");
  EXPECT_NE(msg.find("/sigma/kind"), std::string::npos) << msg;
  const auto missing = expect_config_error(
      R"({"command": "forward", "problem": {"rho": 0.5, "N": 8, "M": 8, "K": 2},
          "sigma": {"kind": "affine", "a": 1}, "q": {"kind": "constant", "value": 0}})");
  EXPECT_NE(missing.find("missing required key 'b'"), std::string::npos) << missing;
}

TEST(Config, CommandMismatchAndMissingBlocks) {
  EXPECT_NE(expect_config_error(small_forward, "inverse").find("asks for 'inverse'"), std::string::npos);
  const auto msg = expect_config_error(R"({"command": "forward", "problem": {"rho": 0.5, "N": 8, "M": 8, "K": 2},
      "sigma": {"kind": "constant", "value": 1}})");
  EXPECT_NE(msg.find("missing required block 'q'"), std::string::npos) << msg;
}

TEST(Config, ResolvedDocumentMaterializesDefaults) {
  const auto cfg = parse_config(small_forward, "run.json");
  const auto& r = cfg.resolved;
  EXPECT_EQ(r["problem"]["length"], 1.0);
  EXPECT_EQ(r["solver"]["tol"], 1e-10);
  EXPECT_EQ(r["solver"]["max_iter"], 200);
  EXPECT_EQ(r["f"]["modes"][0]["time"]["frequency"], 1.0);
  EXPECT_EQ(r["f"]["modes"][0]["time"]["phase"], 0.0);
  EXPECT_TRUE(r["checks"]["max_residual"].is_null());
  EXPECT_EQ(r["output"]["dir"], "subdiff_out");
  // the resolved document is itself a valid config that resolves to itself
  const auto again = parse_config(r.dump(), "resolved.json");
  EXPECT_EQ(again.resolved, r);
}

TEST(Build, AnalyticProfilesAndModes) {
  const auto cfg = parse_config(small_forward, "run.json");
  const auto spec = build_problem(cfg);
  EXPECT_EQ(spec.tgrid.n_steps(), 64u);
  EXPECT_DOUBLE_EQ(spec.sigma[64], 1.5);
  const double x = spec.sgrid.node(5), l = 1.0, pi = std::numbers::pi;
  EXPECT_NEAR(spec.phi[5], std::sqrt(2.0) * (std::sin(pi * x) + 0.2 * std::sin(3 * pi * x)), 1e-15);
  EXPECT_EQ(spec.phi.back(), 0.0);
  const double t = spec.tgrid.node(10);
  EXPECT_NEAR(spec.f(10, 5), (1.0 + 0.5 * std::sin(t)) * std::sqrt(2.0 / l) * std::sin(2 * pi * x), 1e-15);

  const json power{{"kind", "power-sum"}, {"terms", {{{"coefficient", 2.0}, {"power", 0.5}}, {{"coefficient", 1.0}, {"power", 0.0}}}}};
  EXPECT_DOUBLE_EQ(eval_time(power, 0.25), 2.0);
}

TEST(Build, CsvProfilesMustMatchTheGrid) {
  TempDir dir("csv");
  std::string good = "t,value\n", bad = "t,value\n";
  for (int n = 0; n <= 4; ++n) {
    good += std::to_string(n * 0.25) + "," + std::to_string(1.0 + n) + "\n";
    bad += std::to_string(n * 0.3) + ",1\n";
  }
  write_file(dir.path() / "good.csv", good);
  write_file(dir.path() / "bad.csv", bad);
  write_file(dir.path() / "junk.csv", "t,value\n0,1\n0.5,abc\n");
  RunConfig cfg;
  cfg.base_dir = dir.path();
  const TimeGrid tg(1.0, 4);
  const auto p = build_profile(cfg, json{{"kind", "csv"}, {"path", "good.csv"}}, tg);
  EXPECT_EQ(p[3], 4.0);
  EXPECT_THROW(build_profile(cfg, json{{"kind", "csv"}, {"path", "bad.csv"}}, tg), ConfigError);
  try {
    build_profile(cfg, json{{"kind", "csv"}, {"path", "junk.csv"}}, tg);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("junk.csv:3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(build_profile(cfg, json{{"kind", "csv"}, {"path", "absent.csv"}}, tg), IoError);
}

TEST(Build, FieldCsvRoundTrip) {
  TempDir dir("field");
  const auto cfg0 = parse_config(small_forward, "run.json");
  const auto spec = build_problem(cfg0);
  write_field_csv(dir.path() / "f.csv", spec.tgrid, spec.sgrid, spec.f);
  RunConfig cfg = cfg0;
  cfg.base_dir = dir.path();
  const auto f = build_field(cfg, json{{"kind", "csv"}, {"path", "f.csv"}}, spec.tgrid, spec.sgrid);
  EXPECT_EQ(max_abs_difference(f, spec.f), 0.0);
}

TEST(Run, ForwardWritesArtifactsAndIsDeterministic) {
  TempDir dir("fwd");
  write_file(dir.path() / "run.json", small_forward);
  ASSERT_EQ(run_cli("forward", dir.path() / "run.json", dir.path() / "a"), exit_ok);
  ASSERT_EQ(run_cli("forward", dir.path() / "run.json", dir.path() / "b"), exit_ok);
  for (const char* name : {"solution.csv", "diagnostics.json", "metadata.json"}) {
    const auto a = read_file(dir.path() / "a" / name);
    EXPECT_FALSE(a.empty()) << name;
    EXPECT_EQ(a, read_file(dir.path() / "b" / name)) << name;
  }
  const auto meta = json::parse(read_file(dir.path() / "a" / "metadata.json"));
  EXPECT_EQ(meta["config"]["solver"]["max_iter"], 200);
  const auto csv = read_csv(dir.path() / "a" / "solution.csv");
  EXPECT_EQ(csv.rows.size(), 65u);
  EXPECT_EQ(csv.header.size(), 34u);
}

TEST(Run, ShippedConfigsParse) {
  for (const auto& entry : fs::directory_iterator(SUBDIFF_CONFIG_DIR)) {
    const auto cfg = load_config(entry.path());
    EXPECT_TRUE(commands.count(cfg.command)) << entry.path();
    EXPECT_NO_THROW(build_problem(cfg)) << entry.path();
  }
}

TEST(Run, ExitStatuses) {
  TempDir dir("codes");
  std::string log;
  write_file(dir.path() / "syntax.json", "{ \"command\": ");
  EXPECT_EQ(run_cli("forward", dir.path() / "syntax.json", dir.path() / "o", &log), exit_config) << log;

  std::string neg = small_forward;
  neg.replace(neg.find("\"a\": 1.0"), 8, "\"a\": -1.0");
  write_file(dir.path() / "neg.json", neg);
  EXPECT_EQ(run_cli("forward", dir.path() / "neg.json", dir.path() / "o", &log), exit_admissibility) << log;

  std::string stiff = small_forward;
  stiff.insert(stiff.rfind('}'), R"(, "solver": {"tol": 1e-16, "max_iter": 1})");
  write_file(dir.path() / "stiff.json", stiff);
  EXPECT_EQ(run_cli("forward", dir.path() / "stiff.json", dir.path() / "o", &log), exit_convergence) << log;

  write_file(dir.path() / "run.json", small_forward);
  write_file(dir.path() / "blocker", "");
  EXPECT_EQ(run_cli("forward", dir.path() / "run.json", dir.path() / "blocker" / "o", &log), exit_io) << log;
  EXPECT_EQ(run_cli("forward", dir.path() / "missing.json", dir.path() / "o", &log), exit_io) << log;

  std::string strict = small_forward;
  strict.insert(strict.rfind('}'), R"(, "checks": {"max_residual": 1e-30})");
  write_file(dir.path() / "strict.json", strict);
  EXPECT_EQ(run_cli("forward", dir.path() / "strict.json", dir.path() / "o", &log), exit_check_failed) << log;
  EXPECT_NE(log.find("check residual"), std::string::npos);
}

TEST(Run, InverseOnSyntheticDataIsDeterministic) {
  TempDir dir("inv");
  const char* cfg = R"({
    "command": "inverse",
    "problem": {"T": 0.5, "rho": 0.5, "N": 128, "M": 32, "K": 8},
    "sigma": {"kind": "sinusoidal-offset", "offset": 2.0, "amplitude": 1.0},
    "q": {"kind": "constant", "value": 0.3},
    "phi": {"kind": "sine-modes", "modes": [{"k": 1, "amplitude": 0.1}]},
    "f": {"kind": "sine-modes", "modes": [{"k": 1, "time": {"kind": "affine", "a": 2.0039208802035361, "b": 1.0}}]},
    "data": {"psi": "synthetic", "noise": 1e-4, "seed": 7},
    "checks": {"max_recovery_error": 0.05}
  })";
  write_file(dir.path() / "inv.json", cfg);
  std::string log;
  ASSERT_EQ(run_cli("inverse", dir.path() / "inv.json", dir.path() / "a", &log), exit_ok) << log;
  ASSERT_EQ(run_cli("inverse", dir.path() / "inv.json", dir.path() / "b"), exit_ok);
  for (const char* name : {"q.csv", "psi.csv", "condition_report.json", "iterates.json", "metadata.json"})
    EXPECT_EQ(read_file(dir.path() / "a" / name), read_file(dir.path() / "b" / name)) << name;
  const auto report = json::parse(read_file(dir.path() / "a" / "condition_report.json"));
  EXPECT_FALSE(report["data_size"]["pass"].get<bool>());
  const auto q = read_csv(dir.path() / "a" / "q.csv");
  EXPECT_EQ(q.header, (std::vector<std::string>{"t", "q", "q_true"}));

  // the recorded flux feeds a CSV-driven run of the same problem
  std::string from_csv = cfg;
  const std::string synthetic = R"("psi": "synthetic", "noise": 1e-4, "seed": 7)";
  from_csv.replace(from_csv.find(synthetic), synthetic.size(), R"("psi": "csv", "path": "a/psi.csv")");
  write_file(dir.path() / "csv.json", from_csv);
  ASSERT_EQ(run_cli("inverse", dir.path() / "csv.json", dir.path() / "c", &log), exit_ok) << log;
  EXPECT_EQ(read_file(dir.path() / "a" / "q.csv"), read_file(dir.path() / "c" / "q.csv"));
}

TEST(Run, VerifyAndSelftest) {
  TempDir dir("verify");
  std::string log;
  const fs::path shipped = fs::path(SUBDIFF_CONFIG_DIR) / "manufactured_verify.json";
  EXPECT_EQ(run_cli("verify", shipped, dir.path() / "v", &log), exit_ok) << log;
  const auto report = json::parse(read_file(dir.path() / "v" / "verify.json"));
  EXPECT_LE(report["cross_difference"].get<double>(), 5e-3);
  EXPECT_LE(report["fd"]["exact_error"].get<double>(), 1e-2);

  std::ostringstream os, err;
  RunOptions opt;
  opt.out_dir = dir.path() / "s";
  EXPECT_EQ(run("selftest", std::nullopt, opt, os, err), exit_ok) << err.str();
  EXPECT_NE(os.str().find("mlf: 6/6"), std::string::npos) << os.str();
  EXPECT_TRUE(fs::exists(dir.path() / "s" / "selftest.json"));
}
