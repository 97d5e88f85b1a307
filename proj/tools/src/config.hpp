#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vortexlab/error.hpp"
#include "vortexlab/field.hpp"
#include "vortexlab/geometry.hpp"
#include "vortexlab/jacobi.hpp"
#include "vortexlab/metric.hpp"
#include "vortexlab/varifold.hpp"

namespace vltool {

using namespace vortexlab;

struct ExperimentConfig {
  // [metric]
  std::string metric_name;
  ParamMap metric_params;
  // [grid]
  std::array<int, 3> dims{64, 64, 64};
  std::array<double, 3> lengths{1.0, 1.0, 1.0};
  std::array<Boundary, 3> boundary{Boundary::Periodic, Boundary::Reflecting, Boundary::Reflecting};
  // [loop] straight loop along x1 through the cross-section centre plus offset
  std::size_t loop_samples = 256;
  Vec2 loop_offset = Vec2::Zero();
  double tol_geo = 1e-6;
  // [field]
  std::vector<double> epsilons{0.05};
  double amp_min = kAmpMin;
  // [chart]
  double r0 = 0.25;
  double R = 0.0;  // 0 selects r0 / 8
  // [evolve]
  double horizon = 0.0;
  double dt = 0.0;  // 0 selects dt_max
  bool enforce_dt = true;
  std::string initial = "saddle";  // saddle | vortex
  std::vector<double> w;           // saddle parameter, empty means 0
  long trace_period = 10;
  long checkpoint_period = 0;
  // [minmax]
  double tau = 0.2;
  double tol_proj = 1e-3;  // in units of R
  int endpoint_samples = 9;
  long observer_period = 10;
  // [criticalpoint]
  double tau0 = 0.05;
  int k_max = 4;
  double tol_res = 1e-3;
  double target_r = 0.1;
  // [flatnorm] current CSV, field checkpoint, or "geodesic"
  std::string flat_a, flat_b;
  // [diagnose]
  std::string diagnose_field;
  DiagnosticOptions diag;
  // [output]
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  // Normalized "section.key = value" entries the hash is computed from.
  std::map<std::string, std::string> entries;
  std::string hash;  // 16 hex digits
};

// Filled by validate.
struct Derived {
  std::array<double, 3> spacing{};
  double cross_spacing = 0.0;  // largest spacing over cross-sectional axes
  std::vector<double> dt_max;  // per epsilon
  std::optional<GeodesicLoop> loop;
  std::optional<JacobiSpectrum> spectrum;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_string(const std::string& text);

// FNV-1a 64 over "key=value\n" of the sorted entries, excluding output.dir.
std::string config_hash(const std::map<std::string, std::string>& entries);

Grid make_grid(const ExperimentConfig& c);
// Straight axis loop (plus offset) used to seed the geodesic relaxation.
ClosedPolyline initial_polyline(const ExperimentConfig& c, const Grid& g);

struct ValidateOptions {
  bool geodesic = true;  // relax the loop and check nondegeneracy of its Jacobi spectrum
};
// Checks every invariant; violations raise a validation error naming the
// field. A degenerate geodesic raises the jacobi module's degeneracy error.
Derived validate(const ExperimentConfig& c, const ValidateOptions& opts = {});

std::string artifact_version();
// "# vortexlab <version> config_hash=<hash> command=<command>"
std::string header_line(const ExperimentConfig& c, const std::string& command);

}  // namespace vltool
