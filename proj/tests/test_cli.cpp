#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rcnet/cli.hpp"
#include "rcnet/serialize.hpp"

namespace fs = std::filesystem;

namespace {

// Runs rcnet::dispatch with captured stdout/stderr so test logs stay clean
// and assertions can inspect the output.
struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("rcnet");
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out_buf, err_buf;
  std::streambuf* old_out = std::cout.rdbuf(out_buf.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(err_buf.rdbuf());
  CliResult result;
  try {
    result.code = rcnet::dispatch(static_cast<int>(argv.size()), argv.data());
  } catch (...) {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    throw;
  }
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  result.out = out_buf.str();
  result.err = err_buf.str();
  return result;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("cli: help exits cleanly") {
  const CliResult top = run_cli({"--help"});
  CHECK(top.code == 0);
  CHECK(top.out.find("floor") != std::string::npos);
  const CliResult sub = run_cli({"construct", "--help"});
  CHECK(sub.code == 0);
  CHECK(sub.out.find("--target") != std::string::npos);
}

TEST_CASE("cli: no subcommand prints usage and fails") {
  const CliResult r = run_cli({});
  CHECK(r.code == 1);
}

TEST_CASE("cli: unknown option is a usage error") {
  const CliResult r = run_cli({"floor", "--n", "3", "--frobnicate"});
  CHECK(r.code == 1);
}

TEST_CASE("cli: floor build then eval round trip") {
  const fs::path path = temp_file("cli_floor.json");
  std::error_code ec;
  fs::remove(path, ec);

  const CliResult build = run_cli({"floor", "--n", "3", "--m", "4", "--delta",
                                   "0.25", "--out", path.string(), "--probe", "1.5"});
  CHECK(build.code == 0);
  CHECK(build.out.find("saved") != std::string::npos);
  REQUIRE(fs::exists(path));

  const CliResult eval = run_cli({"eval", "--net", path.string(), "--x", "2.5"});
  CHECK(eval.code == 0);
  CHECK(eval.out.find("2") != std::string::npos);

  // Wrong input arity is a usage error (exit 1).
  const CliResult bad = run_cli({"eval", "--net", path.string(), "--x", "0.5,0.5"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("error:") != std::string::npos);
  fs::remove(path, ec);
}

TEST_CASE("cli: point fit build carries interpolation metadata") {
  const fs::path path = temp_file("cli_pointfit.json");
  std::error_code ec;
  fs::remove(path, ec);
  const CliResult build =
      run_cli({"pointfit", "--values", "0.5,0.625,0.5", "--epsilon", "0.125",
               "--out", path.string()});
  CHECK(build.code == 0);
  REQUIRE(fs::exists(path));

  const CliResult eval = run_cli({"eval", "--net", path.string(), "--x", "1"});
  CHECK(eval.code == 0);
  CHECK(eval.out.find("0.625") != std::string::npos);

  rcnet::NetMeta meta;
  rcnet::load_rcnet(path.string(), &meta);
  CHECK(meta.strings.at("kind") == "pointfit");
  CHECK(meta.numbers.at("epsilon") == 0.125);
  fs::remove(path, ec);
}

TEST_CASE("cli: construct + verify stays within the stored bound") {
  const fs::path path = temp_file("cli_gap_sinpi.json");
  std::error_code ec;
  fs::remove(path, ec);
  const CliResult build = run_cli({"construct", "--target", "sinpi", "--mode",
                                   "gap", "--reps", "4", "--out", path.string()});
  CHECK(build.code == 0);
  REQUIRE(fs::exists(path));

  const CliResult verify = run_cli({"verify", "--net", path.string(), "--grid",
                                    "201", "--mc", "0"});
  CHECK(verify.code == 0);
  CHECK(verify.out.find("within_bound yes") != std::string::npos);

  // Tampering with the stored certificate must be caught (exit 2).
  rcnet::NetMeta meta;
  const rcnet::RCNet net = rcnet::load_rcnet(path.string(), &meta);
  meta.numbers["bound"] = 1e-9;
  rcnet::save_rcnet(net, path.string(), &meta);
  const CliResult tampered = run_cli({"verify", "--net", path.string(), "--grid",
                                      "201", "--mc", "0"});
  CHECK(tampered.code == 2);
  CHECK(tampered.err.find("error:") != std::string::npos);
  fs::remove(path, ec);
}

TEST_CASE("cli: merge composes two staircase nets") {
  const fs::path a = temp_file("cli_merge_a.json");
  const fs::path b = temp_file("cli_merge_b.json");
  const fs::path out = temp_file("cli_merge_out.json");
  std::error_code ec;
  fs::remove(a, ec);
  fs::remove(b, ec);
  fs::remove(out, ec);

  CHECK(run_cli({"floor", "--n", "3", "--m", "3", "--delta", "0.5", "--out",
                 a.string()}).code == 0);
  CHECK(run_cli({"floor", "--n", "4", "--m", "4", "--delta", "0.5", "--out",
                 b.string()}).code == 0);
  const CliResult merged = run_cli({"merge", "--first", a.string(), "--second",
                                    b.string(), "--out", out.string(), "--bound",
                                    "4"});
  CHECK(merged.code == 0);
  REQUIRE(fs::exists(out));

  // floor(floor(1.2)) = 1 on the composed staircase plateaus.
  const CliResult eval = run_cli({"eval", "--net", out.string(), "--x", "1.2"});
  CHECK(eval.code == 0);
  CHECK(eval.out.find("1") != std::string::npos);
  fs::remove(a, ec);
  fs::remove(b, ec);
  fs::remove(out, ec);
}

TEST_CASE("cli: config file drives defaults and --show-config reports them") {
  const fs::path cfg = temp_file("cli_config.toml");
  {
    std::ofstream f(cfg);
    REQUIRE(f.good());
    f << "[floor]\nm = 4\ndelta = 0.25\n";
  }
  const fs::path path = temp_file("cli_cfg_floor.json");
  std::error_code ec;
  fs::remove(path, ec);
  const CliResult r = run_cli({"--config", cfg.string(), "floor", "--n", "3",
                               "--out", path.string()});
  CHECK(r.code == 0);
  REQUIRE(fs::exists(path));
  rcnet::NetMeta meta;
  rcnet::load_rcnet(path.string(), &meta);
  CHECK(meta.numbers.at("m") == 4.0);
  CHECK(meta.numbers.at("delta") == 0.25);

  const CliResult show = run_cli({"--show-config", "floor", "--n", "2", "--m",
                                  "2", "--delta", "0.5", "--out", path.string()});
  CHECK(show.code == 0);
  CHECK(show.out.find("delta") != std::string::npos);
  fs::remove(path, ec);
  fs::remove(cfg, ec);
}

TEST_CASE("cli: invalid construct arguments are usage errors") {
  const fs::path a = temp_file("cli_err_a.json");
  std::error_code ec;
  fs::remove(a, ec);
  // trig2d is a two-dimensional target; forcing --dim 1 must be rejected.
  const CliResult bad = run_cli({"construct", "--target", "trig2d", "--mode",
                                 "gap", "--reps", "4", "--dim", "1", "--out",
                                 a.string()});
  CHECK(bad.code == 1);
  CHECK_FALSE(fs::exists(a));
  fs::remove(a, ec);
}
