#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string err;
};

fs::path tmp(const std::string& name) {
  const fs::path d = fs::path(MOGP_TEST_TMP) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliRun run(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + MOGP_CLI + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                          "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

const char* kConfig = R"({
  "data": {"file": "data.csv", "x_col": "time", "y_cols": ["ch0", "ch1", "ch2"]},
  "preprocess": [
    {"op": "remove_relative_range", "channel": 0, "start": 0.5, "end": 0.7},
    {"op": "transform", "name": "whiten"}
  ],
  "model": {"kernel": "MOSM", "Q": 2},
  "train": {"method": "lbfgs", "max_iters": 20},
  "output": {"model": "out/model.json", "report": "out/report.json", "plot": "out/fit.svg"}
})";

fs::path setup(const std::string& name) {
  const fs::path d = tmp(name);
  EXPECT_EQ(run("simulate --channels 3 --points 40 --components 2 --seed 3 --out \"" + (d / "data.csv").string() + "\"", d).code, 0);
  write(d / "config.json", kConfig);
  return d;
}

std::size_t lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST(Cli, VersionAndUsage) {
  const fs::path d = tmp("version");
  EXPECT_EQ(run("--version", d).code, 0);
  EXPECT_FALSE(slurp(d / "stdout.txt").empty());
  EXPECT_NE(run("", d).code, 0);
  EXPECT_NE(run("bogus", d).code, 0);
}

TEST(Cli, SimulateIsSeeded) {
  const fs::path d = tmp("simulate");
  ASSERT_EQ(run("simulate --channels 4 --points 150 --seed 11 --out \"" + (d / "a.csv").string() + "\"", d).code, 0);
  ASSERT_EQ(run("simulate --channels 4 --points 150 --seed 11 --out \"" + (d / "b.csv").string() + "\"", d).code, 0);
  ASSERT_EQ(run("simulate --channels 4 --points 150 --seed 12 --out \"" + (d / "c.csv").string() + "\"", d).code, 0);
  const std::string a = slurp(d / "a.csv");
  EXPECT_EQ(a, slurp(d / "b.csv"));
  EXPECT_NE(a, slurp(d / "c.csv"));
  EXPECT_EQ(lines(a), 151u);
  EXPECT_EQ(a.substr(0, a.find('\n')), "time,ch0,ch1,ch2,ch3");
}

TEST(Cli, FitPredictMetricsCrossSpectrum) {
  const fs::path d = setup("fit");
  const CliRun fit = run("fit \"" + (d / "config.json").string() + "\"", d);
  ASSERT_EQ(fit.code, 0) << fit.err;
  EXPECT_TRUE(fs::exists(d / "out/model.json"));
  EXPECT_TRUE(fs::exists(d / "out/report.json"));
  EXPECT_TRUE(fs::exists(d / "out/report.timing.json"));
  EXPECT_TRUE(fs::exists(d / "out/fit.svg"));

  const std::string model = "\"" + (d / "out/model.json").string() + "\"";
  ASSERT_EQ(run("predict " + model + " --grid 0:39:100 --out \"" + (d / "grid.csv").string() + "\"", d).code, 0);
  EXPECT_EQ(lines(slurp(d / "grid.csv")), 301u);
  ASSERT_EQ(run("predict " + model + " --removed --no-noise --out \"" + (d / "removed.csv").string() + "\"", d).code, 0);
  EXPECT_EQ(lines(slurp(d / "removed.csv")), 1u + 8u);
  ASSERT_EQ(run("predict " + model + " --span 25 --svg \"" + (d / "span.svg").string() + "\"", d).code, 0);
  EXPECT_EQ(lines(slurp(d / "stdout.txt")), 76u);
  EXPECT_NE(slurp(d / "span.svg").find("<svg"), std::string::npos);

  ASSERT_EQ(run("metrics " + model + " --removed --out \"" + (d / "metrics.json").string() + "\"", d).code, 0);
  EXPECT_NE(slurp(d / "metrics.json").find("\"mae\""), std::string::npos);
  ASSERT_EQ(run("cross-spectrum " + model + " --out \"" + (d / "cross.json").string() + "\"", d).code, 0);
  EXPECT_NE(slurp(d / "cross.json").find("\"pairs\""), std::string::npos);

  EXPECT_NE(run("predict " + model + " --grid 5:1:10", d).code, 0);
  EXPECT_NE(run("predict " + model + " --grid 0:1", d).code, 0);
}

TEST(Cli, FitOutputsAreByteIdentical) {
  const fs::path a = setup("repeat_a");
  const fs::path b = setup("repeat_b");
  ASSERT_EQ(run("fit \"" + (a / "config.json").string() + "\"", a).code, 0);
  ASSERT_EQ(run("fit \"" + (b / "config.json").string() + "\"", b).code, 0);
  EXPECT_EQ(slurp(a / "out/report.json"), slurp(b / "out/report.json"));
  EXPECT_EQ(slurp(a / "out/fit.svg"), slurp(b / "out/fit.svg"));
}

TEST(Cli, PeriodogramWritesOneFilePerChannel) {
  const fs::path d = setup("periodogram");
  const fs::path out = d / "spectra";
  ASSERT_EQ(run("periodogram \"" + (d / "config.json").string() + "\" --out-dir \"" + out.string() + "\" --svg \"" +
                    (d / "p.svg").string() + "\"",
                d)
                .code,
            0);
  for (int m = 0; m < 3; ++m) {
    EXPECT_TRUE(fs::exists(out / ("periodogram_" + std::to_string(m) + ".csv")));
    EXPECT_TRUE(fs::exists(out / ("periodogram_" + std::to_string(m) + ".peaks.json")));
  }
  EXPECT_FALSE(fs::exists(out / "periodogram_3.csv"));
  EXPECT_TRUE(fs::exists(d / "p.svg"));
}

TEST(Cli, ErrorsNameStageAndPath) {
  const fs::path d = tmp("errors");
  CliRun r = run("fit \"" + (d / "nope.json").string() + "\"", d);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nope.json"), std::string::npos) << r.err;

  write(d / "config.json", kConfig);
  r = run("fit \"" + (d / "config.json").string() + "\"", d);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("load"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("data.csv"), std::string::npos) << r.err;

  r = run("predict \"" + (d / "missing_model.json").string() + "\" --removed", d);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing_model.json"), std::string::npos) << r.err;
}
