#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "vortexlab/error.hpp"

using namespace vltool;
namespace fs = std::filesystem;

namespace {

using Entries = std::map<std::string, std::string>;

// Benchmark setup on a small grid; `over` replaces or adds "section.key" entries
// and an empty value drops the key.
std::string ini(const Entries& over = {}) {
  Entries e{{"metric.name", "warped"}, {"metric.a1", "39.5"}, {"metric.a2", "19.7"}, {"metric.r0", "0.25"},
            {"grid.dims", "8 32 32"},   {"loop.samples", "64"}, {"field.epsilon", "0.125"}};
  for (const auto& [k, v] : over) e[k] = v;
  std::map<std::string, std::vector<std::string>> sections;
  for (const auto& [k, v] : e) {
    if (v.empty()) continue;
    const auto dot = k.find('.');
    sections[k.substr(0, dot)].push_back(k.substr(dot + 1) + " = " + v);
  }
  std::string text;
  for (const auto& [name, lines] : sections) {
    text += "[" + name + "]\n";
    for (const auto& l : lines) text += l + "\n";
  }
  return text;
}

std::string temp_dir(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string write_config(const std::string& dir, const std::string& text) {
  const std::string path = (fs::path(dir) / "config.ini").string();
  std::ofstream(path) << text;
  return path;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

std::string validation_message(const std::string& text) {
  try {
    validate(parse_config_string(text), {false});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Validation);
    return e.what();
  }
  ADD_FAILURE() << "config accepted";
  return {};
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

double kv_value(const std::string& path, const std::string& key) {
  std::ifstream is(path);
  std::string line;
  const std::string prefix = key + " = ";
  while (std::getline(is, line))
    if (line.rfind(prefix, 0) == 0) return std::stod(line.substr(prefix.size()));
  ADD_FAILURE() << key << " missing in " << path;
  return std::nan("");
}

std::string first_line(const std::string& path) {
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  return line;
}

int run(const std::string& cmd, const std::string& config, const std::string& out, const std::string& resume = {}) {
  std::ostringstream log;
  CommandOptions o;
  o.config = config;
  o.out = out;
  o.resume = resume;
  const int rc = run_command(cmd, o, log);
  if (rc != 0) std::cerr << log.str();
  return rc;
}

}  // namespace

TEST(CliConfig, ShippedConfigsValidate) {
  for (const char* name : {"criticalpoint.ini", "good_trajectory.ini", "benchmark_geodesic.ini", "evolve_vortex.ini"}) {
    const ExperimentConfig c = parse_config_file(std::string(VORTEXLAB_CONFIG_DIR) + "/" + name);
    EXPECT_NO_THROW(validate(c, {false})) << name;
  }
  const ExperimentConfig c = parse_config_file(std::string(VORTEXLAB_CONFIG_DIR) + "/criticalpoint.ini");
  EXPECT_EQ(c.dims, (std::array<int, 3>{32, 80, 80}));
  EXPECT_EQ(c.k_max, 4);
  EXPECT_DOUBLE_EQ(c.tol_res, 1e-4);
  const Derived d = validate(c);
  EXPECT_EQ(d.spectrum->index, 1);
  EXPECT_DOUBLE_EQ(d.cross_spacing, 1.0 / 80);
  EXPECT_DOUBLE_EQ(d.dt_max[0], 0.4 * 0.05 * 0.05);
}

TEST(CliConfig, ResolutionRule) {
  const std::string msg = validation_message(ini({{"field.epsilon", "0.1"}, {"grid.dims", "16 16 16"}}));
  EXPECT_NE(msg.find("field.epsilon"), std::string::npos) << msg;
  // Only the cross-sectional spacing counts: a coarse loop axis is fine.
  EXPECT_NO_THROW(validate(parse_config_string(ini({{"grid.dims", "4 32 32"}})), {false}));
}

TEST(CliConfig, InvariantViolationsNameTheField) {
  EXPECT_NE(validation_message(ini({{"chart.r0", "0.25"}, {"chart.R", "0.04"}})).find("chart.r"),
            std::string::npos);
  EXPECT_NE(validation_message(ini({{"criticalpoint.tol_res", "-1"}})).find("criticalpoint.tol_res"),
            std::string::npos);
  EXPECT_NE(validation_message(ini({{"loop.tol_geo", "0"}})).find("loop.tol_geo"), std::string::npos);
  EXPECT_NE(validation_message(ini({{"grid.lengths", "1 0.4 0.4"}})).find("chart.r0"),
            std::string::npos);
  EXPECT_NE(validation_message(ini({{"metric.name", ""}})).find("metric.name"),
            std::string::npos);
  EXPECT_EQ(code_of([] { parse_config_string(ini({{"minmax.taux", "1"}})); }), ErrorCode::Validation);
  EXPECT_EQ(code_of([] { parse_config_string(ini({{"minmax.tau", "fast"}})); }),
            ErrorCode::Validation);
  EXPECT_EQ(code_of([] { validate(parse_config_string(ini({{"metric.name", "nosuch"}})), {false}); }),
            ErrorCode::Validation);
}

TEST(CliConfig, FlatMetricIsDegenerate) {
  const std::string text = ini({{"metric.name", "euclidean"}, {"metric.a1", ""}, {"metric.a2", ""}, {"metric.r0", ""}});
  try {
    validate(parse_config_string(text));
    FAIL() << "flat benchmark accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Degeneracy);
    EXPECT_EQ(exit_code(e), 2);
  }
  const std::string dir = temp_dir("flat");
  EXPECT_EQ(run("geodesic", write_config(dir, text), dir), 2);
}

TEST(CliConfig, HashIsNormalizedAndStable) {
  const ExperimentConfig a = parse_config_string("[grid]\ndims = 8 32 32\n[metric]\nname = warped\n");
  const ExperimentConfig b = parse_config_string("[Metric]\nName =   warped \n[grid]\ndims = 8  32   32\n[output]\ndir = x\n");
  const ExperimentConfig c = parse_config_string("[grid]\ndims = 8 32 33\n[metric]\nname = warped\n");
  EXPECT_EQ(a.hash.size(), 16u);
  EXPECT_EQ(a.hash, b.hash);
  EXPECT_NE(a.hash, c.hash);
  // FNV-1a 64 of the empty input is the offset basis.
  EXPECT_EQ(config_hash({}), "cbf29ce484222325");
  EXPECT_EQ(config_hash({{"a.b", "c"}}), config_hash({{"a.b", "c"}, {"output.dir", "elsewhere"}}));
}

TEST(CliCommands, ExitCodes) {
  EXPECT_EQ(exit_code(Error(ErrorCode::Validation, "")), 2);
  EXPECT_EQ(exit_code(Error(ErrorCode::Resolution, "")), 2);
  EXPECT_EQ(exit_code(Error(ErrorCode::Convergence, "")), 3);
  EXPECT_EQ(exit_code(Error(ErrorCode::BlowUp, "")), 4);
  EXPECT_EQ(exit_code(Error(ErrorCode::Resume, "")), 1);
  const std::string dir = temp_dir("exit");
  EXPECT_EQ(run("nosuch", write_config(dir, ini()), dir), 2);
  EXPECT_EQ(run("geodesic", (fs::path(dir) / "missing.ini").string(), dir), 2);
}

TEST(CliCommands, GeodesicWritesHeaderedFiles) {
  const std::string dir = temp_dir("geodesic");
  const std::string cfg = write_config(dir, ini());
  ASSERT_EQ(run("geodesic", cfg, dir), 0);
  const std::string header = header_line(parse_config_file(cfg), "geodesic");
  EXPECT_NE(header.find(artifact_version()), std::string::npos);
  for (const char* f : {"loop.csv", "spectrum.csv", "geodesic.txt"}) EXPECT_EQ(first_line(dir + "/" + f), header) << f;
  EXPECT_EQ(kv_value(dir + "/geodesic.txt", "index"), 1.0);
  EXPECT_NEAR(kv_value(dir + "/geodesic.txt", "length"), 1.0, 1e-9);
}

TEST(CliCommands, EvolveResumeIsBitIdentical) {
  const std::string text = ini({{"evolve.initial", "vortex"}, {"evolve.horizon", "0.1"}, {"evolve.trace_period", "5"},
                                {"evolve.checkpoint_period", "8"}});
  const std::string a = temp_dir("evolve_a"), b = temp_dir("evolve_b"), c = temp_dir("evolve_c");
  const std::string cfg = write_config(a, text);
  ASSERT_EQ(run("evolve", cfg, a), 0);
  ASSERT_TRUE(fs::exists(a + "/checkpoint_8.bin"));
  ASSERT_EQ(run("evolve", cfg, b, a + "/checkpoint_8.bin"), 0);
  EXPECT_EQ(slurp(a + "/final.bin"), slurp(b + "/final.bin"));
  EXPECT_EQ(slurp(a + "/final.bin.meta"), slurp(b + "/final.bin.meta"));
  // The resumed trace is the tail of the uninterrupted one.
  const std::string ta = slurp(a + "/trace.csv"), tb = slurp(b + "/trace.csv");
  const std::string tail = tb.substr(tb.find("\n10,"));
  EXPECT_NE(ta.find(tail), std::string::npos);
  // Repeated runs are bit-identical.
  ASSERT_EQ(run("evolve", cfg, c), 0);
  for (const char* f : {"final.bin", "final.bin.meta", "trace.csv", "checkpoint_8.bin"})
    EXPECT_EQ(slurp(a + "/" + f), slurp(c + "/" + f)) << f;
}

TEST(CliCommands, EvolveEdgeCases) {
  const std::string dir = temp_dir("evolve_edge");
  const std::string zero = write_config(dir, ini({{"evolve.initial", "vortex"}, {"evolve.horizon", "0"}}));
  ASSERT_EQ(run("evolve", zero, dir), 0);
  EXPECT_EQ(kv_value(dir + "/final.bin.meta", "step"), 0.0);

  const std::string other = temp_dir("evolve_stiff");
  const std::string stiff =
      write_config(other, ini({{"evolve.initial", "vortex"}, {"evolve.horizon", "1"}, {"evolve.dt", "0.5"}}));
  EXPECT_EQ(run("evolve", stiff, other), 4);

  std::ofstream(dir + "/corrupt.bin") << "not a checkpoint";
  EXPECT_EQ(run("evolve", zero, dir, dir + "/corrupt.bin"), 1);
  const std::string wide = temp_dir("evolve_wide");
  ASSERT_EQ(run("evolve", write_config(wide, ini({{"grid.dims", "8 36 36"}, {"evolve.initial", "vortex"}})), wide), 0);
  EXPECT_EQ(run("evolve", zero, dir, wide + "/final.bin"), 1);
}

TEST(CliCommands, CriticalPointWithoutLevelsIsConvergenceError) {
  const std::string dir = temp_dir("critical");
  EXPECT_EQ(run("criticalpoint", write_config(dir, ini({{"criticalpoint.k_max", "0"}})), dir), 3);
}

TEST(CliCommands, FlatNormOfSavedFilament) {
  const std::string dir = temp_dir("flatnorm");
  ASSERT_EQ(run("evolve", write_config(dir, ini({{"evolve.initial", "vortex"}, {"evolve.horizon", "0.02"}})), dir), 0);
  const std::string cfg =
      write_config(dir, ini({{"flatnorm.a", dir + "/final.bin"}, {"flatnorm.b", "geodesic"}}));
  ASSERT_EQ(run("flatnorm", cfg, dir), 0);
  EXPECT_LT(kv_value(dir + "/flatnorm.txt", "value"), 0.02);

  const std::string diag = write_config(dir, ini({{"diagnose.field", dir + "/final.bin"}}));
  ASSERT_EQ(run("diagnose", diag, dir), 0);
  EXPECT_GE(kv_value(dir + "/diagnostics.txt", "single_intersection_fraction"), 0.9);
  EXPECT_LT(kv_value(dir + "/diagnostics.txt", "misalignment_fraction"), 0.1);
}
