#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "vortexlab/currents.hpp"
#include "vortexlab/error.hpp"
#include "vortexlab/flow.hpp"
#include "vortexlab/minmax.hpp"
#include "vortexlab/parallel.hpp"
#include "vortexlab/varifold.hpp"

namespace vltool {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<const DiscreteMetric> discrete_metric(const ExperimentConfig& c) {
  return std::make_shared<const DiscreteMetric>(make_metric_field(make_grid(c), c.metric_name, c.metric_params));
}

std::shared_ptr<const SaddleChart> saddle_chart(const ExperimentConfig& c, const Derived& d,
                                                std::shared_ptr<const DiscreteMetric> metric) {
  const double R = c.R > 0.0 ? c.R : c.r0 / 8.0;
  return std::make_shared<const SaddleChart>(std::move(metric), *d.loop, *d.spectrum, c.r0, R);
}

std::string out_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

std::string fmt(const Eigen::VectorXd& v) {
  std::string s;
  for (long i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

void write_kv(const std::string& path, const std::string& header, const KeyValues& kv) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path);
  os << header << "\n";
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
}

std::map<std::string, std::string> read_kv(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::Resume, "missing metadata " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) fail(ErrorCode::Resume, "malformed metadata line in " + path);
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key, const std::string& path) {
  const auto it = kv.find(key);
  if (it == kv.end()) fail(ErrorCode::Resume, "metadata " + path + " lacks '" + key + "'");
  try {
    std::size_t pos = 0;
    const double x = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return x;
  } catch (const std::logic_error&) {
    fail(ErrorCode::Resume, "metadata " + path + " has a malformed '" + key + "'");
  }
}

Eigen::VectorXd saddle_w(const ExperimentConfig& c, int ell) {
  if (c.w.empty()) return Eigen::VectorXd::Zero(ell);
  if (static_cast<int>(c.w.size()) != ell)
    fail(ErrorCode::Validation, "field 'evolve.w': expected " + std::to_string(ell) + " values");
  return Eigen::Map<const Eigen::VectorXd>(c.w.data(), ell);
}

OneCurrent load_current(const std::string& spec, const ExperimentConfig& c, const Derived& d,
                        std::shared_ptr<const DiscreteMetric> metric, std::shared_ptr<const CubicalComplex> complex) {
  if (spec == "geodesic") return rasterize(d.loop->polyline(), complex);
  if (fs::path(spec).extension() == ".csv") return read_current_csv(spec, complex);
  return extract_filament(load_field(spec, metric), complex, c.amp_min);
}

}  // namespace

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Validation:
    case ErrorCode::Degeneracy:
    case ErrorCode::Resolution:
      return 2;
    case ErrorCode::Convergence:
    case ErrorCode::DegreeCondition:
      return 3;
    case ErrorCode::BlowUp:
    case ErrorCode::Stability:
      return 4;
    default:
      return 1;
  }
}

int cmd_geodesic(const ExperimentConfig& c, const std::string& out, std::ostream& log) {
  const Derived d = validate(c);
  const std::string header = header_line(c, "geodesic");
  write_loop_csv(out_path(out, "loop.csv"), *d.loop, header);
  write_spectrum_csv(out_path(out, "spectrum.csv"), *d.spectrum, header);
  write_kv(out_path(out, "geodesic.txt"), header,
           {{"length", fmt(d.loop->length)},
            {"index", std::to_string(d.spectrum->index)},
            {"nondegeneracy_margin", fmt(d.spectrum->nondegeneracy_margin)},
            {"residual", fmt(d.loop->residual)},
            {"iterations", std::to_string(d.loop->iterations)}});
  log << "geodesic: L = " << d.loop->length << ", index = " << d.spectrum->index << "\n";
  return 0;
}

int cmd_evolve(const ExperimentConfig& c, const std::string& out, const std::string& resume, std::ostream& log) {
  const Derived d = validate(c, {c.initial == "saddle"});
  const auto metric = discrete_metric(c);
  const double eps = c.epsilons.front();
  const double dt = c.dt > 0.0 ? c.dt : d.dt_max.front();
  FlowOptions fo;
  fo.enforce_dt = c.enforce_dt;
  const FlowSolver solver(metric, eps, dt, fo);
  const std::string header = header_line(c, "evolve");

  FlowState s;
  bool partial_done = false;
  if (!resume.empty()) {
    const Checkpoint ck = read_checkpoint(resume);
    if (std::abs(ck.epsilon - eps) > 1e-15 * eps) fail(ErrorCode::Resume, "checkpoint epsilon does not match the config");
    double t = 0.0;
    s = solver.start(load_field(resume, metric, &t));
    const auto kv = read_kv(resume + ".meta");
    s.time = t;
    s.step = static_cast<long>(kv_double(kv, "step", resume + ".meta"));
    s.dissipation = kv_double(kv, "dissipation", resume + ".meta");
    partial_done = kv_double(kv, "partial", resume + ".meta") != 0.0;
    log << "evolve: resumed at step " << s.step << ", t = " << s.time << "\n";
  } else if (c.initial == "saddle") {
    const auto chart = saddle_chart(c, d, metric);
    s = solver.start(initial_data(*chart, saddle_w(c, chart->ell()), eps));
  } else {
    const Grid& g = metric->grid();
    const Vec2 centre(0.5 * g.lengths[1] + c.loop_offset[0], 0.5 * g.lengths[2] + c.loop_offset[1]);
    s = solver.start(make_field(metric, eps, [&](const Vec3& x) {
      const double y1 = x[1] - centre[0], y2 = x[2] - centre[1];
      return std::polar(core_profile(std::hypot(y1, y2) / eps), std::atan2(y2, y1));
    }));
  }

  auto checkpoint = [&](const std::string& name, bool partial) {
    const std::string path = out_path(out, name);
    write_checkpoint(path, s.field, s.time);
    write_kv(path + ".meta", header,
             {{"step", std::to_string(s.step)},
              {"time", fmt(s.time)},
              {"dissipation", fmt(s.dissipation)},
              {"epsilon", fmt(eps)},
              {"dt", fmt(dt)},
              {"partial", partial ? "1" : "0"}});
  };

  const long full = static_cast<long>(std::floor(c.horizon / dt + 1e-9));
  const double rest = c.horizon - full * dt;
  auto trace_now = [&] { return c.trace_period > 0 && s.step % c.trace_period == 0; };
  if (resume.empty() && c.trace_period > 0) solver.record(s);
  while (s.step < full) {
    solver.step(s);
    if (trace_now()) solver.record(s);
    if (c.checkpoint_period > 0 && s.step % c.checkpoint_period == 0)
      checkpoint("checkpoint_" + std::to_string(s.step) + ".bin", false);
  }
  if (rest > 1e-9 * dt && !partial_done) {
    solver.step(s, rest);
    partial_done = true;
    if (c.trace_period > 0) solver.record(s);
  }
  checkpoint("final.bin", partial_done);
  write_trace_csv(out_path(out, "trace.csv"), s.trace, header);
  log << "evolve: " << s.step << " steps, t = " << s.time << ", E = " << normalized_energy(s.field) << "\n";
  return 0;
}

int cmd_minmax(const ExperimentConfig& c, const std::string& out, std::ostream& log) {
  const Derived d = validate(c);
  const auto metric = discrete_metric(c);
  const auto chart = saddle_chart(c, d, metric);
  const double eps = c.epsilons.front();
  const std::string header = header_line(c, "minmax");

  const MinmaxEndpoints ends = minmax_endpoints(*chart, eps, c.endpoint_samples);
  TrajectoryOptions o;
  o.tol = c.tol_proj * chart->R();
  o.family.dt = c.dt;
  o.family.observer_period = c.observer_period;
  const GoodTrajectory gt = good_trajectory(*chart, eps, c.tau, o);

  write_session_csv(out_path(out, "session.csv"), gt.log, header);
  write_trajectory_csv(out_path(out, "trajectory.csv"), gt.trace, header);
  write_kv(out_path(out, "minmax.txt"), header,
           {{"ell", std::to_string(chart->ell())},
            {"R", fmt(chart->R())},
            {"length", fmt(chart->length())},
            {"a_eps", fmt(ends.a)},
            {"d_eps", fmt(ends.d)},
            {"w_star", fmt(gt.w)},
            {"projection", fmt(gt.projection)},
            {"converged", gt.converged ? "1" : "0"},
            {"energy0", fmt(gt.energy0)},
            {"energy_min", fmt(gt.energy_min)},
            {"delta", fmt(gt.delta)}});
  log << "minmax: w* = " << fmt(gt.w) << ", |P| = " << gt.projection.norm() << ", delta = " << gt.delta << "\n";
  if (!gt.converged) fail(ErrorCode::Convergence, "good-trajectory root finding did not converge");
  return 0;
}

namespace {

void write_critical_artifacts(const ExperimentConfig& c, const SaddleChart& chart, const CriticalResult& r,
                              double eps, const std::string& out, std::ostream& log) {
  const std::string header = header_line(c, "criticalpoint");
  write_snapshot(out_path(out, "snapshot.bin"), r, eps, header);
  {
    std::ofstream os(out_path(out, "levels.csv"));
    if (!os) fail(ErrorCode::Io, "cannot write levels.csv");
    os.precision(17);
    os << header << "\nk,tau,best_residual\n";
    for (std::size_t k = 0; k < r.best_residuals.size(); ++k)
      os << k + 1 << "," << r.taus[k] << "," << r.best_residuals[k] << "\n";
  }
  OneCurrent filament;
  try {
    filament = extract_filament(r.snapshot, chart.complex(), c.amp_min);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Extraction) throw;
    log << "criticalpoint: no filament diagnostics (" << e.what() << ")\n";
    return;
  }
  write_current_csv(out_path(out, "filament.csv"), filament, header);
  const DiscreteVarifold V = from_current(filament, chart.metric()->field());
  DiagnosticOptions dopt = c.diag;
  dopt.seed = c.seed;
  try {
    write_diagnostics(out_path(out, "diagnostics.txt"), diagnose(V, chart.tube(), dopt), header);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::OutOfChart && e.code() != ErrorCode::Domain) throw;
    log << "criticalpoint: varifold diagnostics skipped (" << e.what() << ")\n";
  }
}

}  // namespace

int cmd_criticalpoint(const ExperimentConfig& c, const std::string& out, std::ostream& log) {
  const Derived d = validate(c);
  if (d.spectrum->index != 1) fail(ErrorCode::Validation, "criticalpoint needs an index-1 geodesic");
  const auto metric = discrete_metric(c);
  const auto chart = saddle_chart(c, d, metric);
  const double eps = c.epsilons.front();

  CriticalOptions o;
  o.k_max = c.k_max;
  o.tau0 = c.tau0;
  o.tol_res = c.tol_res;
  o.r = c.target_r;
  o.trajectory.tol = c.tol_proj * chart->R();
  o.trajectory.family.dt = c.dt;
  o.trajectory.family.observer_period = c.observer_period;
  CriticalResult r;
  try {
    r = extract_critical(*chart, eps, o);
  } catch (const ConvergenceFailure& f) {
    if (f.best().snapshot.metric) write_critical_artifacts(c, *chart, f.best(), eps, out, log);
    throw;
  }
  write_critical_artifacts(c, *chart, r, eps, out, log);
  log << "criticalpoint: k = " << r.k << ", residual = " << r.residual << ", flat = " << r.flat_norm
      << ", |E - L| = " << r.energy_gap << ", targets " << (r.targets_met ? "met" : "not met") << "\n";
  return r.targets_met ? 0 : 3;
}

int cmd_flatnorm(const ExperimentConfig& c, const std::string& out, std::ostream& log) {
  if (c.flat_a.empty() || c.flat_b.empty()) fail(ErrorCode::Validation, "field 'flatnorm.a'/'flatnorm.b': missing");
  const bool need_loop = c.flat_a == "geodesic" || c.flat_b == "geodesic";
  const Derived d = validate(c, {need_loop});
  const auto metric = discrete_metric(c);
  const auto complex = std::make_shared<const CubicalComplex>(metric->grid());
  const OneCurrent a = load_current(c.flat_a, c, d, metric, complex);
  const OneCurrent b = load_current(c.flat_b, c, d, metric, complex);
  const FlatNormResult fn = flat_norm(a, b, metric->field());
  write_kv(out_path(out, "flatnorm.txt"), header_line(c, "flatnorm"),
           {{"value", fmt(fn.value)},
            {"mass_a", fmt(mass(a, metric->field()))},
            {"mass_b", fmt(mass(b, metric->field()))},
            {"full_box", fn.full_box ? "1" : "0"},
            {"steps", std::to_string(fn.steps)}});
  log << "flatnorm: " << fn.value << "\n";
  return 0;
}

int cmd_diagnose(const ExperimentConfig& c, const std::string& out, std::ostream& log) {
  if (c.diagnose_field.empty()) fail(ErrorCode::Validation, "field 'diagnose.field': missing");
  const Derived d = validate(c);
  const auto metric = discrete_metric(c);
  const auto complex = std::make_shared<const CubicalComplex>(metric->grid());
  const OneCurrent T = extract_filament(load_field(c.diagnose_field, metric), complex, c.amp_min);
  const TubularChart chart(metric->field(), *d.loop, c.r0, table_exp_options());
  const VarifoldDiagnostics diag = diagnose(from_current(T, metric->field()), chart, c.diag);
  write_diagnostics(out_path(out, "diagnostics.txt"), diag, header_line(c, "diagnose"));
  log << "diagnose: mass = " << diag.mass << ", misaligned = " << diag.misalignment_fraction
      << ", single slices = " << diag.single_intersection_fraction << "\n";
  return 0;
}

int run_command(const std::string& command, const CommandOptions& opts, std::ostream& log) {
  try {
    set_thread_count(std::max(1, opts.threads));
    if (opts.config.empty()) fail(ErrorCode::Validation, "--config is required");
    const ExperimentConfig c = parse_config_file(opts.config);
    const std::string out = opts.out.empty() ? c.out_dir : opts.out;
    fs::create_directories(out);
    if (!opts.resume.empty() && command != "evolve") fail(ErrorCode::Validation, "--resume applies to evolve only");
    if (command == "geodesic") return cmd_geodesic(c, out, log);
    if (command == "evolve") return cmd_evolve(c, out, opts.resume, log);
    if (command == "minmax") return cmd_minmax(c, out, log);
    if (command == "criticalpoint") return cmd_criticalpoint(c, out, log);
    if (command == "flatnorm") return cmd_flatnorm(c, out, log);
    if (command == "diagnose") return cmd_diagnose(c, out, log);
    fail(ErrorCode::Validation, "unknown command '" + command + "'");
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace vltool
