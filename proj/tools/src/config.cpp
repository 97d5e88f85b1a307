#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "vortexlab/error.hpp"
#include "vortexlab/flow.hpp"

#ifndef VORTEXLAB_VERSION
#define VORTEXLAB_VERSION "0.0.0"
#endif

namespace vltool {

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  fail(ErrorCode::Validation, "field '" + field + "': " + what);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string normalize_value(const std::string& v) {
  std::istringstream is(v);
  std::string tok, out;
  while (is >> tok) out += (out.empty() ? "" : " ") + tok;
  return out;
}

std::vector<std::string> tokens(const std::string& v) {
  std::istringstream is(v);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double to_double(const std::string& field, const std::string& s) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) invalid(field, "'" + s + "' is not a number");
  return x;
}

long to_long(const std::string& field, const std::string& s) {
  long x = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) invalid(field, "'" + s + "' is not an integer");
  return x;
}

std::vector<double> to_doubles(const std::string& field, const std::string& v) {
  std::vector<double> out;
  for (const auto& t : tokens(v)) out.push_back(to_double(field, t));
  return out;
}

bool to_bool(const std::string& field, const std::string& v) {
  const std::string s = lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  invalid(field, "'" + v + "' is not a boolean");
}

template <std::size_t N>
std::array<double, N> fixed_doubles(const std::string& field, const std::string& v) {
  const auto xs = to_doubles(field, v);
  if (xs.size() != N) invalid(field, "expected " + std::to_string(N) + " values");
  std::array<double, N> out;
  std::copy(xs.begin(), xs.end(), out.begin());
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& field, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> s = {
      {"metric.name", [](auto& c, auto&, auto& v) { c.metric_name = v; }},
      {"grid.dims",
       [](auto& c, auto& f, auto& v) {
         const auto xs = fixed_doubles<3>(f, v);
         for (int d = 0; d < 3; ++d) {
           if (xs[d] != std::floor(xs[d])) invalid(f, "dims must be integers");
           c.dims[d] = static_cast<int>(xs[d]);
         }
       }},
      {"grid.lengths", [](auto& c, auto& f, auto& v) { c.lengths = fixed_doubles<3>(f, v); }},
      {"grid.boundary",
       [](auto& c, auto& f, auto& v) {
         const auto ts = tokens(v);
         if (ts.size() != 3) invalid(f, "expected 3 boundary kinds");
         for (int d = 0; d < 3; ++d) {
           try {
             c.boundary[d] = parse_boundary(ts[d]);
           } catch (const Error& e) {
             invalid(f, e.what());
           }
         }
       }},
      {"loop.samples", [](auto& c, auto& f, auto& v) { c.loop_samples = static_cast<std::size_t>(std::max(0L, to_long(f, v))); }},
      {"loop.offset",
       [](auto& c, auto& f, auto& v) {
         const auto xs = fixed_doubles<2>(f, v);
         c.loop_offset = Vec2(xs[0], xs[1]);
       }},
      {"loop.tol_geo", [](auto& c, auto& f, auto& v) { c.tol_geo = to_double(f, v); }},
      {"field.epsilon", [](auto& c, auto& f, auto& v) { c.epsilons = to_doubles(f, v); }},
      {"field.amp_min", [](auto& c, auto& f, auto& v) { c.amp_min = to_double(f, v); }},
      {"chart.r0", [](auto& c, auto& f, auto& v) { c.r0 = to_double(f, v); }},
      {"chart.r", [](auto& c, auto& f, auto& v) { c.R = to_double(f, v); }},
      {"evolve.horizon", [](auto& c, auto& f, auto& v) { c.horizon = to_double(f, v); }},
      {"evolve.dt", [](auto& c, auto& f, auto& v) { c.dt = to_double(f, v); }},
      {"evolve.enforce_dt", [](auto& c, auto& f, auto& v) { c.enforce_dt = to_bool(f, v); }},
      {"evolve.initial", [](auto& c, auto&, auto& v) { c.initial = lower(v); }},
      {"evolve.w", [](auto& c, auto& f, auto& v) { c.w = to_doubles(f, v); }},
      {"evolve.trace_period", [](auto& c, auto& f, auto& v) { c.trace_period = to_long(f, v); }},
      {"evolve.checkpoint_period", [](auto& c, auto& f, auto& v) { c.checkpoint_period = to_long(f, v); }},
      {"minmax.tau", [](auto& c, auto& f, auto& v) { c.tau = to_double(f, v); }},
      {"minmax.tol_proj", [](auto& c, auto& f, auto& v) { c.tol_proj = to_double(f, v); }},
      {"minmax.endpoint_samples", [](auto& c, auto& f, auto& v) { c.endpoint_samples = static_cast<int>(to_long(f, v)); }},
      {"minmax.observer_period", [](auto& c, auto& f, auto& v) { c.observer_period = to_long(f, v); }},
      {"criticalpoint.tau0", [](auto& c, auto& f, auto& v) { c.tau0 = to_double(f, v); }},
      {"criticalpoint.k_max", [](auto& c, auto& f, auto& v) { c.k_max = static_cast<int>(to_long(f, v)); }},
      {"criticalpoint.tol_res", [](auto& c, auto& f, auto& v) { c.tol_res = to_double(f, v); }},
      {"criticalpoint.r", [](auto& c, auto& f, auto& v) { c.target_r = to_double(f, v); }},
      {"flatnorm.a", [](auto& c, auto&, auto& v) { c.flat_a = v; }},
      {"flatnorm.b", [](auto& c, auto&, auto& v) { c.flat_b = v; }},
      {"diagnose.field", [](auto& c, auto&, auto& v) { c.diagnose_field = v; }},
      {"diagnose.delta", [](auto& c, auto& f, auto& v) { c.diag.delta = to_double(f, v); }},
      {"diagnose.density_radius", [](auto& c, auto& f, auto& v) { c.diag.density_radius = to_double(f, v); }},
      {"diagnose.density_samples", [](auto& c, auto& f, auto& v) { c.diag.density_samples = static_cast<int>(to_long(f, v)); }},
      {"diagnose.slices", [](auto& c, auto& f, auto& v) { c.diag.slices = static_cast<int>(to_long(f, v)); }},
      {"diagnose.slope_bins", [](auto& c, auto& f, auto& v) { c.diag.slope_bins = static_cast<int>(to_long(f, v)); }},
      {"output.dir", [](auto& c, auto&, auto& v) { c.out_dir = v; }},
      {"output.seed",
       [](auto& c, auto& f, auto& v) {
         const long s = to_long(f, v);
         if (s < 0) invalid(f, "seed must be nonnegative");
         c.seed = static_cast<std::uint64_t>(s);
       }},
  };
  return s;
}

ExperimentConfig from_tree(const boost::property_tree::ptree& tree) {
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) invalid(section, "keys must belong to a section");
    for (const auto& [key, value] : body) {
      const std::string field = lower(section) + "." + lower(key);
      const std::string v = normalize_value(value.data());
      c.entries[field] = v;
    }
  }
  c.diag.seed = 0;
  for (const auto& [field, v] : c.entries) {
    const auto it = setters().find(field);
    if (it != setters().end()) {
      it->second(c, field, v);
    } else if (field.rfind("metric.", 0) == 0) {
      c.metric_params[field.substr(7)] = to_double(field, v);
    } else {
      invalid(field, "unknown key");
    }
  }
  c.diag.seed = c.seed;
  c.hash = config_hash(c.entries);
  return c;
}

}  // namespace

ExperimentConfig parse_config_file(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorCode::Validation, std::string("cannot parse config: ") + e.what());
  }
  return from_tree(tree);
}

ExperimentConfig parse_config_string(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorCode::Validation, std::string("cannot parse config: ") + e.what());
  }
  return from_tree(tree);
}

std::string config_hash(const std::map<std::string, std::string>& entries) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : entries) {
    if (k == "output.dir") continue;
    feed(k + "=" + v + "\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Grid make_grid(const ExperimentConfig& c) {
  Grid g;
  g.dims = c.dims;
  g.lengths = c.lengths;
  g.boundary = c.boundary;
  return g;
}

ClosedPolyline initial_polyline(const ExperimentConfig& c, const Grid& g) {
  std::vector<Vec3> pts;
  const std::size_t n = std::max<std::size_t>(c.loop_samples, 8);
  for (std::size_t k = 0; k < n; ++k)
    pts.emplace_back(g.lengths[0] * static_cast<double>(k) / static_cast<double>(n),
                     0.5 * g.lengths[1] + c.loop_offset[0], 0.5 * g.lengths[2] + c.loop_offset[1]);
  return close_polyline(pts, g);
}

Derived validate(const ExperimentConfig& c, const ValidateOptions& opts) {
  if (c.metric_name.empty()) invalid("metric.name", "missing");
  for (int d = 0; d < 3; ++d) {
    if (c.dims[d] < 2) invalid("grid.dims", "every axis needs at least 2 nodes");
    if (!(c.lengths[d] > 0.0)) invalid("grid.lengths", "box lengths must be positive");
  }
  if (c.boundary[0] != Boundary::Periodic) invalid("grid.boundary", "the loop axis x1 must be periodic");
  if (c.loop_samples < 16) invalid("loop.samples", "need at least 16 samples");

  const Grid g = make_grid(c);
  Derived d;
  for (int a = 0; a < 3; ++a) d.spacing[a] = g.spacing(a);
  // The loop winds along x1, so x2 and x3 are the cross-sectional axes.
  d.cross_spacing = std::max(d.spacing[1], d.spacing[2]);

  if (c.epsilons.empty()) invalid("field.epsilon", "missing");
  for (double eps : c.epsilons) {
    if (!(eps > 0.0)) invalid("field.epsilon", "must be positive");
    if (eps / d.cross_spacing < 4.0) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "eps/h = %.3g is below 4 for eps = %g", eps / d.cross_spacing, eps);
      invalid("field.epsilon", buf);
    }
  }
  auto positive = [](const char* field, double v) {
    if (!(v > 0.0)) invalid(field, "must be positive");
  };
  positive("loop.tol_geo", c.tol_geo);
  positive("field.amp_min", c.amp_min);
  positive("chart.r0", c.r0);
  positive("minmax.tau", c.tau);
  positive("minmax.tol_proj", c.tol_proj);
  positive("criticalpoint.tau0", c.tau0);
  positive("criticalpoint.tol_res", c.tol_res);
  positive("criticalpoint.r", c.target_r);
  if (!(c.diag.delta > 0.0 && c.diag.delta < 1.0)) invalid("diagnose.delta", "must lie in (0, 1)");
  if (c.R < 0.0) invalid("chart.r", "must be nonnegative");
  if (c.R > c.r0 / 8.0 * (1.0 + 1e-12)) invalid("chart.r", "must not exceed r0 / 8");
  for (int a = 1; a < 3; ++a) {
    if (g.periodic(a)) continue;
    const double centre = 0.5 * g.lengths[a] + c.loop_offset[a - 1];
    if (centre - c.r0 <= 0.0 || centre + c.r0 >= g.lengths[a]) invalid("chart.r0", "the tube must fit between the walls");
  }
  if (c.horizon < 0.0) invalid("evolve.horizon", "must be nonnegative");
  if (c.dt < 0.0) invalid("evolve.dt", "must be nonnegative");
  if (c.initial != "saddle" && c.initial != "vortex") invalid("evolve.initial", "must be saddle or vortex");
  if (c.trace_period < 0) invalid("evolve.trace_period", "must be nonnegative");
  if (c.checkpoint_period < 0) invalid("evolve.checkpoint_period", "must be nonnegative");
  if (c.observer_period < 1) invalid("minmax.observer_period", "must be at least 1");
  if (c.endpoint_samples < 3) invalid("minmax.endpoint_samples", "need at least 3 samples");
  if (c.k_max < 0) invalid("criticalpoint.k_max", "must be nonnegative");
  if (c.diag.density_samples < 1) invalid("diagnose.density_samples", "must be at least 1");
  if (c.diag.slices < 1) invalid("diagnose.slices", "must be at least 1");
  if (c.diag.slope_bins < 1) invalid("diagnose.slope_bins", "must be at least 1");

  // Constructing the metric checks its name and parameters.
  MetricField m = make_metric_field(g, c.metric_name, c.metric_params);
  const DiscreteMetric dm(m);
  for (double eps : c.epsilons) d.dt_max.push_back(dt_max(dm, eps));

  if (opts.geodesic) {
    RelaxOptions ro;
    ro.samples = c.loop_samples;
    ro.tol_geo = c.tol_geo;
    d.loop = geodesic_relax(m, initial_polyline(c, g), ro);
    d.spectrum = spectrum(assemble_jacobi(*d.loop, m));
  }
  return d;
}

std::string artifact_version() { return VORTEXLAB_VERSION; }

std::string header_line(const ExperimentConfig& c, const std::string& command) {
  return "# vortexlab " + artifact_version() + " config_hash=" + c.hash + " command=" + command;
}

}  // namespace vltool
