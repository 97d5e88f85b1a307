#include "vortexlab/flow.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>

#include "vortexlab/error.hpp"
#include "vortexlab/parallel.hpp"

namespace vortexlab {

namespace {

// FFTW planning is not thread-safe; execution with new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

double log_scale(double eps) { return std::numbers::pi * std::abs(std::log(eps)); }

}  // namespace

struct FlatSolver::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

FlatSolver::FlatSolver(const Grid& g) : g_(g), plans_(std::make_unique<Plans>()) {
  fftw_r2r_kind fwd[3], bwd[3];
  for (int d = 0; d < 3; ++d) {
    const int n = g.dims[d];
    const double h = g.spacing(d);
    lam_[d].resize(n);
    if (g.periodic(d)) {
      fwd[d] = FFTW_R2HC;
      bwd[d] = FFTW_HC2R;
      norm_ *= n;
      for (int k = 0; k < n; ++k) lam_[d][k] = 4.0 / (h * h) * std::pow(std::sin(std::numbers::pi * k / n), 2);
    } else {
      fwd[d] = FFTW_REDFT10;
      bwd[d] = FFTW_REDFT01;
      norm_ *= 2.0 * n;
      for (int k = 0; k < n; ++k) lam_[d][k] = 4.0 / (h * h) * std::pow(std::sin(std::numbers::pi * k / (2.0 * n)), 2);
    }
  }
  std::lock_guard<std::mutex> lock(planner_mutex());
  double* buf = fftw_alloc_real(g.size());
  plans_->forward = fftw_plan_r2r_3d(g.dims[0], g.dims[1], g.dims[2], buf, buf, fwd[0], fwd[1], fwd[2], FFTW_ESTIMATE);
  plans_->backward = fftw_plan_r2r_3d(g.dims[0], g.dims[1], g.dims[2], buf, buf, bwd[0], bwd[1], bwd[2], FFTW_ESTIMATE);
  fftw_free(buf);
  if (!plans_->forward || !plans_->backward) fail(ErrorCode::Solver, "FFTW planning failed");
}

FlatSolver::~FlatSolver() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

double FlatSolver::eigenvalue(int d, int k) const { return lam_[d][k]; }

void FlatSolver::solve(std::vector<Complex>& x, double alpha, double beta) const {
  const std::size_t n = g_.size();
  double* re = fftw_alloc_real(n);
  double* im = fftw_alloc_real(n);
  for (std::size_t p = 0; p < n; ++p) {
    re[p] = x[p].real();
    im[p] = x[p].imag();
  }
  fftw_execute_r2r(plans_->forward, re, re);
  fftw_execute_r2r(plans_->forward, im, im);
  const int n1 = g_.dims[1], n2 = g_.dims[2];
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const int k2 = static_cast<int>(p % n2);
      const std::size_t r = p / n2;
      const int k1 = static_cast<int>(r % n1), k0 = static_cast<int>(r / n1);
      const double s = 1.0 / ((alpha + beta * (lam_[0][k0] + lam_[1][k1] + lam_[2][k2])) * norm_);
      re[p] *= s;
      im[p] *= s;
    }
  });
  fftw_execute_r2r(plans_->backward, re, re);
  fftw_execute_r2r(plans_->backward, im, im);
  for (std::size_t p = 0; p < n; ++p) x[p] = {re[p], im[p]};
  fftw_free(re);
  fftw_free(im);
}

void FlatSolver::apply(std::vector<Complex>& x, double alpha, double beta) const {
  const Grid& g = g_;
  std::vector<Complex> out(x.size());
  parallel_for(x.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const auto ijk = g.unindex(p);
      Complex lap = 0.0;
      for (int d = 0; d < 3; ++d) {
        const double ih2 = 1.0 / (g.spacing(d) * g.spacing(d));
        for (int s : {-1, 1}) {
          auto q = ijk;
          q[d] += s;
          if (q[d] < 0 || q[d] >= g.dims[d]) {
            if (!g.periodic(d)) continue;
            q[d] = (q[d] + g.dims[d]) % g.dims[d];
          }
          lap += (x[g.index(q[0], q[1], q[2])] - x[p]) * ih2;
        }
      }
      out[p] = alpha * x[p] - beta * lap;
    }
  });
  x.swap(out);
}

double dt_max(const DiscreteMetric& m, double eps) {
  const double lam = m.lambda_max_inverse();
  double dt = 0.4 * eps * eps;
  if (lam > 1.8) {
    const double h = std::min({m.grid().spacing(0), m.grid().spacing(1), m.grid().spacing(2)});
    dt = std::min(dt, 0.4 * h * h / (6.0 * (lam - 1.0)));
  }
  return dt;
}

FlowSolver::FlowSolver(std::shared_ptr<const DiscreteMetric> metric, double eps, double dt, FlowOptions opts)
    : metric_(std::move(metric)), eps_(eps), dt_(dt), opts_(opts), flat_(metric_->grid()), scale_(log_scale(eps)) {
  if (!(dt > 0.0)) fail(ErrorCode::Stability, "time step must be positive");
  if (opts_.enforce_dt && dt > dt_max(*metric_, eps) * (1.0 + 1e-12))
    fail(ErrorCode::Stability, "dt = " + std::to_string(dt) + " exceeds dt_max = " + std::to_string(dt_max(*metric_, eps)));
}

int FlowSolver::add_cutoff(std::vector<double> chi) {
  if (chi.size() != metric_->size()) fail(ErrorCode::Domain, "cutoff size does not match the grid");
  cutoffs_.push_back(std::move(chi));
  return static_cast<int>(cutoffs_.size()) - 1;
}

FlowState FlowSolver::start(ComplexField u) const {
  FlowState s;
  u.epsilon = eps_;
  s.field = std::move(u);
  s.local_dissipation.assign(cutoffs_.size(), 0.0);
  s.local_cross.assign(cutoffs_.size(), 0.0);
  return s;
}

void FlowSolver::step(FlowState& s, double dt) const {
  if (opts_.enforce_dt && dt > dt_max(*metric_, eps_) * (1.0 + 1e-12)) fail(ErrorCode::Stability, "dt exceeds dt_max");
  ComplexField& u = s.field;
  const DiscreteMetric& m = *metric_;
  std::vector<Complex> delta;
  gl_rhs(u, delta);
  for (auto& z : delta) z *= dt;
  flat_.solve(delta, 1.0 + kStabilization * dt / (eps_ * eps_), dt);

  const std::size_t n = u.size();
  const double inv_dt = 1.0 / dt;
  // Dissipation bookkeeping with u_t = delta / dt.
  s.dissipation += dt * parallel_sum(n, [&](std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t p = lo; p < hi; ++p) acc += m.mass(p) * std::norm(delta[p] * inv_dt);
    return acc;
  }) / scale_;
  if (s.local_dissipation.size() < cutoffs_.size()) {
    s.local_dissipation.resize(cutoffs_.size(), 0.0);
    s.local_cross.resize(cutoffs_.size(), 0.0);
  }
  const Grid& g = m.grid();
  for (std::size_t c = 0; c < cutoffs_.size(); ++c) {
    const auto& chi = cutoffs_[c];
    s.local_dissipation[c] += dt * parallel_sum(n, [&](std::size_t lo, std::size_t hi) {
      double acc = 0.0;
      for (std::size_t p = lo; p < hi; ++p) acc += chi[p] * m.mass(p) * std::norm(delta[p] * inv_dt);
      return acc;
    }) / scale_;
    s.local_cross[c] += dt * parallel_sum(n, [&](std::size_t lo, std::size_t hi) {
      double acc = 0.0;
      for (std::size_t p = lo; p < hi; ++p)
        for (int d = 0; d < 3; ++d) {
          const std::int64_t q = m.neighbor(p, d, +1);
          if (q == kNoNode) continue;
          const std::size_t qq = static_cast<std::size_t>(q);
          // Midpoint-in-time u on the edge, edge-averaged u_t.
          const Complex du = (u[qq] + 0.5 * delta[qq]) - (u[p] + 0.5 * delta[p]);
          const Complex ut = 0.5 * (delta[p] + delta[qq]) * inv_dt;
          acc += m.edge_weight(d, p) * (chi[qq] - chi[p]) * std::real(std::conj(du) * ut) /
                 (g.spacing(d) * g.spacing(d));
        }
      return acc * m.cell_volume();
    }) / scale_;
  }

  bool bad = false;
  for (std::size_t p = 0; p < n; ++p) {
    u[p] += delta[p];
    if (!std::isfinite(u[p].real()) || !std::isfinite(u[p].imag()) || std::norm(u[p]) > 1e12) bad = true;
  }
  if (bad) fail(ErrorCode::BlowUp, "non-finite or exploding field at step " + std::to_string(s.step + 1));
  s.time += dt;
  s.step += 1;
}

void FlowSolver::record(FlowState& s) const {
  if (!s.trace.empty() && s.trace.back().step == s.step) return;
  TraceRow r;
  r.step = s.step;
  r.time = s.time;
  r.energy = normalized_energy(s.field);
  r.dissipation = s.dissipation;
  r.max_modulus = max_modulus(s.field);
  r.residual = opts_.trace_residual ? residual(s.field) : 0.0;
  for (std::size_t c = 0; c < cutoffs_.size(); ++c) {
    r.local_energy.push_back(measure_pairing(s.field, cutoffs_[c]));
    r.local_dissipation.push_back(c < s.local_dissipation.size() ? s.local_dissipation[c] : 0.0);
    r.local_cross.push_back(c < s.local_cross.size() ? s.local_cross[c] : 0.0);
  }
  s.trace.push_back(std::move(r));
}

void FlowSolver::run(FlowState& s, double horizon, const std::vector<Observer>& observers) const {
  if (!(horizon >= 0.0)) fail(ErrorCode::Domain, "horizon must be nonnegative");
  const long full = static_cast<long>(std::floor(horizon / dt_ + 1e-9));
  const double rest = horizon - full * dt_;
  auto notify = [&](bool force) {
    if (opts_.trace_period > 0 && (force || s.step % opts_.trace_period == 0)) record(s);
    for (const Observer& o : observers)
      if (o.period > 0 && s.step % o.period == 0) o.callback(s);
  };
  if (s.step == 0 && s.trace.empty()) notify(false);
  for (long i = 0; i < full; ++i) {
    step(s, dt_);
    notify(false);
  }
  if (rest > 1e-9 * dt_) {
    step(s, rest);
    notify(true);
  }
}

double residual(const ComplexField& u) {
  std::vector<Complex> r;
  gl_rhs(u, r);
  const DiscreteMetric& m = *u.metric;
  return std::sqrt(parallel_sum(u.size(), [&](std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t p = lo; p < hi; ++p) acc += m.mass(p) * std::norm(r[p]);
    return acc;
  }));
}

BalanceResult dissipation_balance(const std::vector<TraceRow>& trace, long step_a, long step_b, int cutoff) {
  auto find = [&](long step) -> const TraceRow& {
    auto it = std::find_if(trace.begin(), trace.end(), [&](const TraceRow& r) { return r.step == step; });
    if (it == trace.end()) fail(ErrorCode::Trace, "no trace row at step " + std::to_string(step));
    return *it;
  };
  const TraceRow& a = find(step_a);
  const TraceRow& b = find(step_b);
  BalanceResult out;
  if (cutoff < 0) {
    out.lhs = a.energy - b.energy;
    out.rhs = b.dissipation - a.dissipation;
  } else {
    const auto c = static_cast<std::size_t>(cutoff);
    if (c >= a.local_energy.size() || c >= b.local_energy.size())
      fail(ErrorCode::Trace, "cutoff was not recorded in the trace");
    out.lhs = a.local_energy[c] - b.local_energy[c];
    out.rhs = (b.local_dissipation[c] - a.local_dissipation[c]) + (b.local_cross[c] - a.local_cross[c]);
  }
  out.residual = out.lhs - out.rhs;
  return out;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace, const std::string& header) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path);
  os << header << "\n";
  os << "step,time,E,dissipation,max_u,residual,flat_norm_to_gamma";
  const std::size_t nc = trace.empty() ? 0 : trace.front().local_energy.size();
  for (std::size_t c = 0; c < nc; ++c) os << ",E_chi" << c << ",D_chi" << c << ",X_chi" << c;
  os << "\n";
  os.precision(17);
  for (const TraceRow& r : trace) {
    os << r.step << "," << r.time << "," << r.energy << "," << r.dissipation << "," << r.max_modulus << ","
       << r.residual << ",";
    if (std::isnan(r.flat_norm))
      os << "nan";
    else
      os << r.flat_norm;
    for (std::size_t c = 0; c < nc && c < r.local_energy.size(); ++c)
      os << "," << r.local_energy[c] << "," << r.local_dissipation[c] << "," << r.local_cross[c];
    os << "\n";
  }
}

}  // namespace vortexlab
