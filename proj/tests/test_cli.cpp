#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("membrane_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Run run(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = std::string(MEMBRANE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  const auto dir = scratch("usage");
  EXPECT_EQ(run("frobnicate", dir).code, 2);
  EXPECT_EQ(run("", dir).code, 2);
  EXPECT_EQ(run("green --n banana", dir).code, 2);

  const auto large = run("sample --n 64 --out " + (dir / "r").string(), dir);
  EXPECT_EQ(large.code, 2);
  EXPECT_NE(large.output.find("--allow-large-grids"), std::string::npos) << large.output;

  // closeness also solves at 2n
  EXPECT_EQ(run("closeness --n 32 --out " + (dir / "r").string(), dir).code, 2);

  std::ofstream(dir / "bad.cfg") << "bogus_key=3\n";
  EXPECT_EQ(run("green --config " + (dir / "bad.cfg").string(), dir).code, 2);

  EXPECT_EQ(run("--help", dir).code, 0);
}

TEST(Cli, GreenColumnWithDenseCheck) {
  const auto dir = scratch("green");
  const auto r = run("green --n 6 --source 3,3,3,3 --check-dense --out " + (dir / "out").string() +
                         " --cache-dir " + (dir / "cache").string(),
                     dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "green.json"));
  const auto& col = report["columns"][0];
  EXPECT_LE(col["dense_max_relative_error"].get<double>(), 1e-8);
  EXPECT_TRUE(fs::exists(dir / "out" / col["file"].get<std::string>()));
  EXPECT_TRUE(fs::exists(dir / "out" / "green.meta.json"));
  EXPECT_EQ(report["provenance"]["grids"][0], 6);
  EXPECT_EQ(report["provenance"]["cache_hashes"]["n6"].size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "cache" / "n6" / "index.json"));
}

TEST(Cli, ReportsAreDeterministic) {
  const auto dir = scratch("determinism");
  const std::string common = " --n 4 --n 6 --samples 5 --seed 3 --keep-fields";
  ASSERT_EQ(run("sample" + common + " --out " + (dir / "a").string(), dir).code, 0);
  ASSERT_EQ(run("sample" + common + " --threads 1 --out " + (dir / "b").string(), dir).code, 0);
  for (const char* f : {"sample.json", "samples_n4.csv", "samples_n6.csv", "field_n6_4.mbf"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  EXPECT_EQ(slurp(dir / "a" / "samples_n4.csv").substr(0, 6), "index,");
}

TEST(Cli, ConfigFileHasLowerPrecedence) {
  const auto dir = scratch("config");
  std::ofstream(dir / "run.cfg") << "samples=4\nseed=9\nn=4\n";
  ASSERT_EQ(run("sample --config " + (dir / "run.cfg").string() + " --seed 2 --out " + (dir / "o").string(), dir).code,
            0);
  const auto report = nlohmann::json::parse(slurp(dir / "o" / "sample.json"));
  EXPECT_EQ(report["batches"][0]["count"], 4);
  EXPECT_EQ(report["batches"][0]["n"], 4);
  EXPECT_EQ(report["provenance"]["seed"], 2);
}

TEST(Cli, SchemeRateForZeroSolution) {
  const auto dir = scratch("scheme");
  const auto r = run("scheme-rate --sol zero --n 4 --n 6 --n 8 --out " + (dir / "o").string(), dir);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("undefined"), std::string::npos);
  const auto report = nlohmann::json::parse(slurp(dir / "o" / "scheme_rate_zero.json"));
  EXPECT_TRUE(report["rate"].is_null());
  EXPECT_EQ(slurp(dir / "o" / "scheme_rate_zero.csv").substr(0, 2), "n,");
}

TEST(Cli, UnsatisfiablePreconditionExitsOne) {
  const auto dir = scratch("closeness");
  const auto r = run("closeness --n 8 --out " + (dir / "o").string() + " --cache-dir " + (dir / "c").string(), dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("unsatisfiable"), std::string::npos) << r.output;
}
