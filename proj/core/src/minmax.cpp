#include "vortexlab/minmax.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "vortexlab/parallel.hpp"

namespace vortexlab {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

// 0 at r <= a, 1 at r >= b.
double ramp(double r, double a, double b) { return smoothstep5((r - a) / (b - a)); }

// Periodic Catmull-Rom interpolation of per-sample frame coefficients.
Vec2 interpolate_section(const std::vector<Vec2>& s, double t, double dt) {
  const long n = static_cast<long>(s.size());
  const double u = t / dt;
  const long k = static_cast<long>(std::floor(u));
  const double a = u - static_cast<double>(k);
  auto at = [&](long i) -> const Vec2& { return s[static_cast<std::size_t>(((i % n) + n) % n)]; };
  const Vec2 &p0 = at(k - 1), &p1 = at(k), &p2 = at(k + 1), &p3 = at(k + 2);
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * a + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * a * a +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * a * a * a);
}

double nearest_sample_distance(const GeodesicLoop& loop, const Grid& g, const Vec3& x, std::size_t* k_out) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t kb = 0;
  for (std::size_t k = 0; k < loop.size(); ++k) {
    const double d = g.minimal_image(x - loop.samples[k]).squaredNorm();
    if (d < best) {
      best = d;
      kb = k;
    }
  }
  if (k_out) *k_out = kb;
  return std::sqrt(best);
}

double radical_inverse(int base, long i) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};

}  // namespace

SaddleChart::SaddleChart(std::shared_ptr<const DiscreteMetric> metric, GeodesicLoop loop, JacobiSpectrum spec,
                         double r0, double R)
    : metric_(std::move(metric)), loop_(std::move(loop)), spec_(std::move(spec)), r0_(r0), R_(R) {
  if (!(r0_ > 0.0)) fail(ErrorCode::Domain, "r0 must be positive");
  if (!(R_ > 0.0) || R_ > r0_ / 8.0 * (1.0 + 1e-12)) fail(ErrorCode::Domain, "R must lie in (0, r0/8]");
  if (spec_.index < 1) fail(ErrorCode::Domain, "saddle chart needs a geodesic of index >= 1");
  const MetricField& mf = metric_->field();
  const Grid& g = mf.grid;
  if (!g.periodic(0) || std::abs(std::abs(loop_.winding[0]) - g.lengths[0]) > 1e-9 ||
      loop_.winding.tail<2>().norm() > 1e-9)
    fail(ErrorCode::Domain, "saddle chart expects a loop winding once along x1");
  // The outer phase needs the loop as a graph over x1.
  const double s0 = loop_.winding[0] > 0 ? 1.0 : -1.0;
  for (std::size_t k = 0; k < loop_.size(); ++k) {
    const Vec3 d = loop_.sample(static_cast<long>(k) + 1) - loop_.samples[k];
    if (s0 * d[0] <= 0.0) fail(ErrorCode::Domain, "loop is not monotone in x1");
  }
  tube_ = std::make_unique<TubularChart>(mf, loop_, r0_, table_exp_options());
  complex_ = std::make_shared<const CubicalComplex>(g);
  T_gamma_ = rasterize(loop_.polyline(), complex_);
  {
    const Vec3 c = loop_.frame1[0].cross(loop_.frame2[0]);
    orientation_ = c.dot(loop_.tangents[0]) >= 0.0 ? 1 : -1;
  }

  Eigen::SelfAdjointEigenSolver<Mat3> es(mf.at(loop_.samples[0]), Eigen::EigenvaluesOnly);
  const double reach = 1.3 * r0_ / std::sqrt(std::max(es.eigenvalues()[0], 1e-12));
  auto locate = [&](const Vec3& x, Vec2& y, double& t) {
    if (nearest_sample_distance(loop_, g, x, nullptr) > reach) return false;
    try {
      const TubularPoint tp = tube_->coords(x);
      y = tp.y;
      t = tp.t;
      return y.norm() < r0_;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::OutOfChart || e.code() == ErrorCode::Ambiguity) return false;
      throw;
    }
  };

  // TODO: seed each coords() solve with the neighbouring node's (y, t) instead
  // of a fresh nearest-sample search, to cut table build time on fine grids.
  nodes_.resize(g.size());
  parallel_for(g.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const auto q = g.unindex(p);
      const Vec3 x = g.node(q[0], q[1], q[2]);
      NodeCoords& nc = nodes_[p];
      nc.inside = locate(x, nc.y, nc.t);
      nc.outer_phase = outer_phase(x);
    }
  });

  // Tubular coordinates of dual vertices, for the test forms.
  const std::size_t V = complex_->vertex_count();
  std::vector<char> in(V, 0);
  std::vector<Vec2> vy(V, Vec2::Zero());
  std::vector<double> vt(V, 0.0);
  parallel_for(V, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t v = lo; v < hi; ++v) in[v] = locate(complex_->position(v), vy[v], vt[v]) ? 1 : 0;
  });

  const int ell = spec_.index;
  const double L = loop_.length, dts = spec_.dt;
  phi_.assign(static_cast<std::size_t>(ell), std::vector<double>(3 * g.size(), 0.0));
  for (std::size_t f = 0; f < 3 * g.size(); ++f) {
    const std::int64_t e = complex_->dual_edge(f);
    if (e < 0) continue;
    const std::size_t a = complex_->edge_tail(static_cast<std::size_t>(e));
    const std::size_t b = complex_->edge_head(static_cast<std::size_t>(e));
    if (!in[a] || !in[b]) continue;
    const double dtau = std::remainder(vt[b] - vt[a], L);
    const Vec2 ym = 0.5 * (vy[a] + vy[b]);
    const double tm = vt[a] + 0.5 * dtau;
    const double c = 1.0 - ramp(ym.norm(), 0.5 * r0_, 0.9 * r0_);
    if (c == 0.0) continue;
    for (int j = 0; j < ell; ++j) {
      const Vec2 xi = interpolate_section(spec_.eigensections[j], std::fmod(tm + L, L), dts);
      phi_[j][f] = c * xi.dot(ym) * dtau;
    }
  }
}

double SaddleChart::outer_phase(const Vec3& x) const {
  // Transverse position of the loop in the x1-slice through x.
  const Grid& g = metric_->grid();
  const double L0 = g.lengths[0];
  const std::size_t n = loop_.size();
  const double s0 = loop_.winding[0] > 0 ? 1.0 : -1.0;
  // Unwrapped x1 of the samples increases (or decreases) by L0 over the loop.
  double x1 = x[0];
  const double base = loop_.samples[0][0];
  double rel = s0 * (x1 - base);
  rel = std::fmod(rel, L0);
  if (rel < 0) rel += L0;
  std::size_t lo = 0, hi = n;  // find k with s0*(x_k - base) <= rel < s0*(x_{k+1} - base)
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (s0 * (loop_.sample(static_cast<long>(mid))[0] - base) <= rel)
      lo = mid;
    else
      hi = mid;
  }
  const Vec3 a = loop_.sample(static_cast<long>(lo)), b = loop_.sample(static_cast<long>(lo) + 1);
  const double ra = s0 * (a[0] - base), rb = s0 * (b[0] - base);
  const double s = (rb > ra) ? (rel - ra) / (rb - ra) : 0.0;
  const Vec3 c = a + s * (b - a);
  Vec3 d = x - c;
  d[0] = 0.0;
  d = g.minimal_image(d);
  return s0 * std::atan2(d[2], d[1]);
}

double SaddleChart::time_cutoff(const Eigen::VectorXd& w) const {
  return 1.0 - ramp(w.norm(), 0.5 * R_, 0.9 * R_);
}

double SaddleChart::bump(double r) const { return 1.0 - ramp(r, 0.25 * r0_, 0.5 * r0_); }

double SaddleChart::bump_derivative(double r) const {
  const double w = 0.25 * r0_;
  return -smoothstep5_derivative((r - w) / w) / w;
}

Vec2 SaddleChart::displacement(const Eigen::VectorXd& w, double t) const {
  Vec2 d = Vec2::Zero();
  const double L = loop_.length;
  double tt = std::fmod(t, L);
  if (tt < 0) tt += L;
  for (int j = 0; j < w.size(); ++j) d += w[j] * interpolate_section(spec_.eigensections[j], tt, spec_.dt);
  return d;
}

Vec2 SaddleChart::inverse_shift(const Vec2& y, const Vec2& d) const {
  if (d.norm() == 0.0) return y;
  Vec2 z = y - bump(y.norm()) * d;
  for (int it = 0; it < 30; ++it) {
    const double r = z.norm();
    const Vec2 F = z + bump(r) * d - y;
    if (F.norm() <= 1e-14 * (1.0 + y.norm())) return z;
    Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
    if (r > 0.0) J += d * (bump_derivative(r) / r) * z.transpose();
    Vec2 step = J.partialPivLu().solve(F);
    if (!step.allFinite()) step = F;  // plain fixed-point step
    z -= step;
  }
  const Vec2 F = z + bump(z.norm()) * d - y;
  if (F.norm() > 1e-10 * (1.0 + y.norm())) fail(ErrorCode::Domain, "O_w inversion did not converge");
  return z;
}

std::shared_ptr<const SaddleChart> build_saddle_chart(std::shared_ptr<const DiscreteMetric> metric,
                                                      const ClosedPolyline& initial, std::size_t samples, double r0,
                                                      double R, double tol_geo) {
  RelaxOptions ro;
  ro.samples = samples;
  ro.tol_geo = tol_geo;
  GeodesicLoop loop = geodesic_relax(metric->field(), initial, ro);
  JacobiSpectrum spec = spectrum(assemble_jacobi(loop, metric->field()));
  if (R <= 0.0) R = r0 / 8.0;
  return std::make_shared<const SaddleChart>(std::move(metric), std::move(loop), std::move(spec), r0, R);
}

ComplexField initial_data(const SaddleChart& chart, const Eigen::VectorXd& w, double eps) {
  if (w.size() != chart.ell()) fail(ErrorCode::Domain, "w has the wrong dimension");
  if (w.norm() > chart.R() * (1.0 + 1e-12)) fail(ErrorCode::Domain, "w lies outside the saddle ball");
  const auto& nodes = chart.node_coords();
  ComplexField u = make_field(chart.metric(), eps);
  const double r0 = chart.r0();
  const int s = chart.frame_orientation();
  parallel_for(u.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const auto& nc = nodes[p];
      if (!nc.inside) {
        u[p] = std::polar(1.0, nc.outer_phase);
        continue;
      }
      const Vec2 yp = chart.inverse_shift(nc.y, chart.displacement(w, nc.t));
      const double rho = yp.norm();
      const double inner = std::atan2(s * yp[1], yp[0]);
      const double blend = ramp(nc.y.norm(), 0.5 * r0, 0.9 * r0);
      const double theta = inner + blend * wrap_angle(nc.outer_phase - inner);
      u[p] = rho > 0.0 ? std::polar(core_profile(rho / eps), theta) : Complex(0.0);
    }
  });
  return u;
}

Eigen::VectorXd saddle_projection(const SaddleChart& chart, const ComplexField& u) {
  const std::vector<double> J = jacobian_2form(u);
  Eigen::VectorXd P(chart.ell());
  for (int j = 0; j < chart.ell(); ++j) P[j] = pair_current(J, chart.test_form(j)) / kPi;
  return P;
}

double perturbed_length(const SaddleChart& chart, const Eigen::VectorXd& w) {
  const MetricField& m = chart.metric()->field();
  return arclength(m, perturbed_loop(m, chart.loop(), chart.spectrum(), w, chart.r0()));
}

double flat_norm_to_geodesic(const SaddleChart& chart, const ComplexField& u) {
  const OneCurrent T = extract_filament(u, chart.complex());
  return flat_norm(T, chart.geodesic_current(), chart.metric()->field()).value;
}

FamilyRun family_flow(const SaddleChart& chart, double eps, const Eigen::VectorXd& w, double t,
                      const FamilyOptions& opts) {
  if (!(t >= 0.0)) fail(ErrorCode::Domain, "family time must be nonnegative");
  const auto metric = chart.metric();
  const double dt = opts.dt > 0.0 ? opts.dt : dt_max(*metric, eps);
  const FlowSolver solver(metric, eps, dt);
  FamilyRun out;
  out.flow_time = chart.time_cutoff(w) * t;
  FlowState s = solver.start(initial_data(chart, w, eps));

  auto observe = [&](FlowState& st) {
    TrajectoryRow r;
    r.step = st.step;
    r.time = st.time;
    r.energy = normalized_energy(st.field);
    r.max_modulus = max_modulus(st.field);
    if (opts.residual) {
      r.residual = residual(st.field);
      if (r.residual < out.best_residual) {
        out.best_residual = r.residual;
        out.best_field = st.field;
        out.best_time = st.time;
      }
    }
    if (opts.flat_norm) {
      try {
        r.flat_norm = flat_norm_to_geodesic(chart, st.field);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Extraction && e.code() != ErrorCode::Homology) throw;
      }
    }
    out.trace.push_back(r);
  };
  std::vector<Observer> obs;
  if (opts.observer_period > 0) obs.push_back({opts.observer_period, observe});
  solver.run(s, out.flow_time, obs);
  if (opts.observer_period > 0 && (out.trace.empty() || out.trace.back().step != s.step)) observe(s);
  out.field = std::move(s.field);
  return out;
}

std::vector<Eigen::VectorXd> ball_samples(int ell, double R, int count) {
  if (ell > static_cast<int>(std::size(kPrimes))) fail(ErrorCode::Domain, "too many saddle dimensions");
  std::vector<Eigen::VectorXd> out;
  for (long i = 1; static_cast<int>(out.size()) < count; ++i) {
    // Index 1 of every radical inverse is 1/base; shift so that sample 0 is w = 0.
    Eigen::VectorXd w(ell);
    for (int a = 0; a < ell; ++a) w[a] = 2.0 * radical_inverse(kPrimes[a], i) - 1.0;
    if (i == 1) w.setZero();
    if (w.norm() <= 1.0) out.push_back(R * w);
  }
  return out;
}

std::vector<Eigen::VectorXd> sphere_samples(int ell, double R, int count) {
  // The 0-sphere has exactly two points.
  if (ell == 1) return {Eigen::VectorXd::Constant(1, R), Eigen::VectorXd::Constant(1, -R)};
  std::vector<Eigen::VectorXd> out;
  for (long i = 1; static_cast<int>(out.size()) < count; ++i) {
    Eigen::VectorXd w(ell);
    for (int a = 0; a < ell; ++a) w[a] = 2.0 * radical_inverse(kPrimes[a], i) - 1.0;
    const double n = w.norm();
    if (n > 1e-3 && n <= 1.0) out.push_back(R * w / n);
  }
  return out;
}

MinmaxEndpoints minmax_endpoints(const SaddleChart& chart, double eps, int sample_count) {
  const int ell = chart.ell();
  if (sample_count < 2 * ell + 1) fail(ErrorCode::Domain, "sample_count must be at least 2 ell + 1");
  MinmaxEndpoints r;
  r.a = r.d = -std::numeric_limits<double>::infinity();
  for (const auto& w : sphere_samples(ell, chart.R(), sample_count)) {
    const double E = normalized_energy(initial_data(chart, w, eps));
    if (E > r.a) {
      r.a = E;
      r.w_a = w;
    }
  }
  r.ball_samples = ball_samples(ell, chart.R(), sample_count);
  for (const auto& w : r.ball_samples) {
    const double E = normalized_energy(initial_data(chart, w, eps));
    r.ball_energies.push_back(E);
    if (E > r.d) {
      r.d = E;
      r.w_d = w;
    }
  }
  return r;
}

RootResult bisect_root(const std::function<double(double)>& f, double lo, double hi, double f_lo, double f_hi,
                       double tol, int max_iter) {
  RootResult r;
  auto done = [&](double w, double v, bool ok) {
    r.w = Eigen::VectorXd::Constant(1, w);
    r.value = Eigen::VectorXd::Constant(1, v);
    r.converged = ok;
    return r;
  };
  if (std::abs(f_lo) <= tol) return done(lo, f_lo, true);
  if (std::abs(f_hi) <= tol) return done(hi, f_hi, true);
  if ((f_lo > 0) == (f_hi > 0))
    fail(ErrorCode::DegreeCondition, "projection has no sign change over the saddle ball");
  double best_w = std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
  double best_v = std::abs(f_lo) < std::abs(f_hi) ? f_lo : f_hi;
  for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::abs(fm) < std::abs(best_v)) {
      best_w = mid;
      best_v = fm;
    }
    if (std::abs(fm) <= tol) return done(mid, fm, true);
    if ((fm > 0) == (f_lo > 0)) {
      lo = mid;
      f_lo = fm;
    } else {
      hi = mid;
    }
  }
  r.iterations = max_iter;
  return done(best_w, best_v, false);
}

RootResult broyden_root(const std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>& F, int ell, double R,
                        double tau, double tol, int stages, int max_iter) {
  RootResult r;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(ell);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(ell, ell);  // P(initial_data(w)) ~ w at tau = 0
  Eigen::VectorXd Fw;
  for (int st = 1; st <= stages; ++st) {
    const double t = tau * st / stages;
    Fw = F(w, t);
    ++r.iterations;
    for (int it = 0; it < max_iter && Fw.norm() > tol; ++it) {
      Eigen::VectorXd step = -B.fullPivLu().solve(Fw);
      if (!step.allFinite()) step = -Fw;
      const double cap = 0.25 * R;
      if (step.norm() > cap) step *= cap / step.norm();
      Eigen::VectorXd wn = w + step;
      if (wn.norm() > R) wn *= R / wn.norm();
      const Eigen::VectorXd s = wn - w;
      if (s.norm() == 0.0) break;
      const Eigen::VectorXd Fn = F(wn, t);
      ++r.iterations;
      B += (Fn - Fw - B * s) * s.transpose() / s.squaredNorm();
      w = wn;
      Fw = Fn;
    }
  }
  r.w = w;
  r.value = Fw;
  r.converged = Fw.norm() <= tol;
  return r;
}

GoodTrajectory good_trajectory(const SaddleChart& chart, double eps, double tau, const TrajectoryOptions& opts) {
  if (!(tau > 0.0)) fail(ErrorCode::Domain, "tau must be positive");
  const double tol = opts.tol > 0.0 ? opts.tol : 1e-3 * chart.R();
  const int ell = chart.ell();
  GoodTrajectory out;
  std::vector<std::pair<Eigen::VectorXd, FamilyRun>> runs;
  auto evaluate = [&](const Eigen::VectorXd& w, double t) {
    FamilyRun run = family_flow(chart, eps, w, t, opts.family);
    SessionRow row;
    row.iteration = static_cast<int>(out.log.size());
    row.w = w;
    row.projection = saddle_projection(chart, run.field);
    row.energy_tau = normalized_energy(run.field);
    if (!run.trace.empty() && run.trace.back().step > 0) {
      row.flat_norm_tau = run.trace.back().flat_norm;
    } else if (opts.family.flat_norm) {
      try {
        row.flat_norm_tau = flat_norm_to_geodesic(chart, run.field);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Extraction && e.code() != ErrorCode::Homology) throw;
      }
    }
    out.log.push_back(row);
    runs.emplace_back(w, std::move(run));
    return row.projection;
  };

  RootResult root;
  if (ell == 1) {
    const double R = chart.R();
    const double p_lo = evaluate(Eigen::VectorXd::Constant(1, -R), tau)[0];
    const double p_hi = evaluate(Eigen::VectorXd::Constant(1, R), tau)[0];
    root = bisect_root([&](double w) { return evaluate(Eigen::VectorXd::Constant(1, w), tau)[0]; }, -R, R, p_lo,
                       p_hi, tol, opts.max_iter);
  } else {
    root = broyden_root([&](const Eigen::VectorXd& w, double t) { return evaluate(w, t); }, ell, chart.R(), tau, tol,
                        4, opts.max_iter);
  }
  out.w = root.w;
  out.projection = root.value;
  out.converged = root.converged;
  // The accepted run is the last one evaluated at w* and the full tau.
  for (auto it = runs.rbegin(); it != runs.rend(); ++it) {
    if ((it->first - root.w).norm() == 0.0) {
      out.run = std::move(it->second);
      break;
    }
  }
  out.trace = out.run.trace;
  if (!out.trace.empty()) {
    out.energy0 = out.trace.front().energy;
    out.energy_min = out.energy0;
    for (const auto& r : out.trace) out.energy_min = std::min(out.energy_min, r.energy);
    const double L = chart.length();
    out.delta = std::max(out.energy0 - L, L - out.energy_min);
  }
  return out;
}

CriticalResult extract_critical(const SaddleChart& chart, double eps, const CriticalOptions& opts) {
  if (opts.k_max < 1) fail(ErrorCode::Convergence, "k_max must be at least 1");
  CriticalResult best;
  TrajectoryOptions topts = opts.trajectory;
  topts.family.residual = true;
  for (int k = 1; k <= opts.k_max; ++k) {
    const double tau = std::ldexp(opts.tau0, k);
    GoodTrajectory gt = good_trajectory(chart, eps, tau, topts);
    best.taus.push_back(tau);
    best.best_residuals.push_back(gt.run.best_residual);
    if (gt.run.best_residual < best.residual) {
      best.residual = gt.run.best_residual;
      best.snapshot = std::move(gt.run.best_field);
      best.time = gt.run.best_time;
      best.k = k;
      best.w = gt.w;
    }
    if (best.residual <= opts.tol_res) {
      best.residual_met = true;
      break;
    }
  }
  if (best.snapshot.metric) {
    best.energy = normalized_energy(best.snapshot);
    best.energy_gap = std::abs(best.energy - chart.length());
    try {
      best.flat_norm = flat_norm_to_geodesic(chart, best.snapshot);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Extraction && e.code() != ErrorCode::Homology) throw;
    }
  }
  best.targets_met = best.residual_met && best.flat_norm <= opts.r && best.energy_gap < opts.r;
  if (!best.residual_met)
    throw ConvergenceFailure("residual target " + std::to_string(opts.tol_res) + " not met by k_max = " +
                                 std::to_string(opts.k_max) + " (best " + std::to_string(best.residual) + ")",
                             std::move(best));
  return best;
}

void write_session_csv(const std::string& path, const std::vector<SessionRow>& log, const std::string& header) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path);
  os << header << "\n";
  const long ell = log.empty() ? 0 : log.front().w.size();
  os << "iteration";
  for (long a = 0; a < ell; ++a) os << ",w" << a;
  for (long a = 0; a < ell; ++a) os << ",P" << a;
  os << ",E_tau,flat_norm_tau\n";
  os.precision(17);
  for (const auto& r : log) {
    os << r.iteration;
    for (long a = 0; a < ell; ++a) os << "," << r.w[a];
    for (long a = 0; a < ell; ++a) os << "," << r.projection[a];
    os << "," << r.energy_tau << ",";
    if (std::isnan(r.flat_norm_tau))
      os << "nan";
    else
      os << r.flat_norm_tau;
    os << "\n";
  }
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& trace,
                          const std::string& header) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path);
  os << header << "\n";
  os << "step,time,E,max_u,residual,flat_norm_to_gamma\n";
  os.precision(17);
  for (const auto& r : trace) {
    os << r.step << "," << r.time << "," << r.energy << "," << r.max_modulus << "," << r.residual << ",";
    if (std::isnan(r.flat_norm))
      os << "nan";
    else
      os << r.flat_norm;
    os << "\n";
  }
}

void write_snapshot(const std::string& path, const CriticalResult& r, double eps, const std::string& header) {
  if (!r.snapshot.metric) fail(ErrorCode::Io, "no snapshot to write");
  write_checkpoint(path, r.snapshot, r.time);
  std::ofstream os(path + ".meta");
  if (!os) fail(ErrorCode::Io, "cannot write " + path + ".meta");
  os.precision(17);
  os << header << "\n";
  os << "epsilon = " << eps << "\n";
  os << "time = " << r.time << "\n";
  os << "level = " << r.k << "\n";
  os << "tau_schedule =";
  for (double t : r.taus) os << " " << t;
  os << "\nbest_residuals =";
  for (double v : r.best_residuals) os << " " << v;
  os << "\nresidual = " << r.residual << "\n";
  os << "flat_norm = " << r.flat_norm << "\n";
  os << "energy = " << r.energy << "\n";
  os << "energy_gap = " << r.energy_gap << "\n";
  os << "w =";
  for (long a = 0; a < r.w.size(); ++a) os << " " << r.w[a];
  os << "\nresidual_met = " << (r.residual_met ? 1 : 0) << "\n";
  os << "targets_met = " << (r.targets_met ? 1 : 0) << "\n";
}

}  // namespace vortexlab
