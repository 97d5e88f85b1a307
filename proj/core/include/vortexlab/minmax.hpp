#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vortexlab/currents.hpp"
#include "vortexlab/error.hpp"
#include "vortexlab/field.hpp"
#include "vortexlab/flow.hpp"
#include "vortexlab/geometry.hpp"
#include "vortexlab/jacobi.hpp"

namespace vortexlab {

// Exp-map stepping for the per-grid coordinate tables. The tables only feed
// initial data and the test forms, so a coarser integrator than the chart
// default is enough.
inline ExpMapOptions table_exp_options() { return {2e-2, 4, 1e-5}; }

// Finite-dimensional saddle chart around an index-ell geodesic, bound to one
// grid. Owns the tubular coordinates of every node and dual vertex inside
// the tube of radius r0 and the test forms Phi^j.
class SaddleChart {
 public:
  SaddleChart(std::shared_ptr<const DiscreteMetric> metric, GeodesicLoop loop, JacobiSpectrum spec, double r0,
              double R);

  int ell() const { return spec_.index; }
  double r0() const { return r0_; }
  double R() const { return R_; }
  double length() const { return loop_.length; }
  const GeodesicLoop& loop() const { return loop_; }
  const JacobiSpectrum& spectrum() const { return spec_; }
  const TubularChart& tube() const { return *tube_; }
  std::shared_ptr<const DiscreteMetric> metric() const { return metric_; }
  std::shared_ptr<const CubicalComplex> complex() const { return complex_; }
  // Integral current of the (rasterized) geodesic.
  const OneCurrent& geodesic_current() const { return T_gamma_; }

  // chi(|w|): 1 on B_{R/2}, 0 for |w| >= 0.9 R.
  double time_cutoff(const Eigen::VectorXd& w) const;
  // beta(r): 1 on [0, r0/4], 0 beyond r0/2.
  double bump(double r) const;
  double bump_derivative(double r) const;
  // Frame coefficients of xi(w) = sum_j w_j xi_j at loop parameter t.
  Vec2 displacement(const Eigen::VectorXd& w, double t) const;
  // Solves y' + beta(|y'|) d = y for y'. Throws a domain error if it fails.
  Vec2 inverse_shift(const Vec2& y, const Vec2& d) const;

  // Test form j as a face 1-cochain (see pair_current).
  const std::vector<double>& test_form(int j) const { return phi_[j]; }

  struct NodeCoords {
    bool inside = false;  // |y| < r0
    Vec2 y = Vec2::Zero();
    double t = 0.0;
    double outer_phase = 0.0;  // winding angle of the node about the loop, in box coordinates
  };
  const std::vector<NodeCoords>& node_coords() const { return nodes_; }
  // +1 if (xi1, xi2, T) is positively oriented, -1 otherwise.
  int frame_orientation() const { return orientation_; }

 private:
  std::shared_ptr<const DiscreteMetric> metric_;
  GeodesicLoop loop_;
  JacobiSpectrum spec_;
  double r0_, R_;
  std::unique_ptr<TubularChart> tube_;
  std::shared_ptr<const CubicalComplex> complex_;
  OneCurrent T_gamma_;
  std::vector<NodeCoords> nodes_;
  std::vector<std::vector<double>> phi_;
  int orientation_ = 1;

  double outer_phase(const Vec3& x) const;
};

// Relaxes the polyline to a geodesic, computes its Jacobi spectrum and
// builds the chart. R = 0 selects r0 / 8.
std::shared_ptr<const SaddleChart> build_saddle_chart(std::shared_ptr<const DiscreteMetric> metric,
                                                      const ClosedPolyline& initial, std::size_t samples,
                                                      double r0, double R = 0.0, double tol_geo = 1e-6);

// U_w^{eps,0}: the vortex profile around gamma pushed forward by O_w.
ComplexField initial_data(const SaddleChart& chart, const Eigen::VectorXd& w, double eps);

// (1/pi) (Ju)(Phi^j) for j < ell, with the shoelace 2-form.
Eigen::VectorXd saddle_projection(const SaddleChart& chart, const ComplexField& u);

// Arclength of gamma_w = exp(xi(w)). Here w may address any retained mode,
// not only the unstable ones.
double perturbed_length(const SaddleChart& chart, const Eigen::VectorXd& w);

struct FamilyOptions {
  double dt = 0.0;            // 0 selects dt_max
  long observer_period = 0;   // steps; 0 disables observers
  bool flat_norm = true;      // evaluate flat_norm(filament, T_gamma) at observer times
  bool residual = true;
};

struct TrajectoryRow {
  long step = 0;
  double time = 0.0;     // flow time, i.e. chi(w) t
  double energy = 0.0;   // normalized
  double flat_norm = std::numeric_limits<double>::quiet_NaN();
  double residual = 0.0;
  double max_modulus = 0.0;
};

struct FamilyRun {
  ComplexField field;
  double flow_time = 0.0;
  std::vector<TrajectoryRow> trace;
  // Field at the observer time of smallest residual (empty when not tracked).
  ComplexField best_field;
  double best_residual = std::numeric_limits<double>::infinity();
  double best_time = 0.0;
};

// U_eps(t, w): the flow of initial_data(w) up to time chi(w) t.
FamilyRun family_flow(const SaddleChart& chart, double eps, const Eigen::VectorXd& w, double t,
                      const FamilyOptions& opts = {});

struct MinmaxEndpoints {
  double a = 0.0;  // max energy over the sphere samples
  double d = 0.0;  // max energy over the ball samples
  Eigen::VectorXd w_a, w_d;
  std::vector<Eigen::VectorXd> ball_samples;
  std::vector<double> ball_energies;
};
// Halton samples (the first ball sample is w = 0). Requires sample_count >= 2 ell + 1.
MinmaxEndpoints minmax_endpoints(const SaddleChart& chart, double eps, int sample_count);
std::vector<Eigen::VectorXd> ball_samples(int ell, double R, int count);
std::vector<Eigen::VectorXd> sphere_samples(int ell, double R, int count);

// One-dimensional bisection on [lo, hi] given the endpoint values. Throws a
// degree-condition error without a sign change.
struct RootResult {
  Eigen::VectorXd w;
  Eigen::VectorXd value;
  int iterations = 0;
  bool converged = false;
};
RootResult bisect_root(const std::function<double(double)>& f, double lo, double hi, double f_lo, double f_hi,
                       double tol, int max_iter = 60);
// Damped Broyden iteration for F(w, tau) = 0 with continuation in tau
// (tau_i = tau * i / stages), iterates kept in the ball of radius R.
// Experimental.
RootResult broyden_root(const std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>& F, int ell, double R,
                        double tau, double tol, int stages = 4, int max_iter = 40);

struct SessionRow {
  int iteration = 0;
  Eigen::VectorXd w;
  Eigen::VectorXd projection;
  double energy_tau = 0.0;
  double flat_norm_tau = std::numeric_limits<double>::quiet_NaN();
};

struct GoodTrajectory {
  Eigen::VectorXd w;
  Eigen::VectorXd projection;
  bool converged = false;
  std::vector<TrajectoryRow> trace;  // along the accepted trajectory
  std::vector<SessionRow> log;
  FamilyRun run;
  double energy0 = 0.0, energy_min = 0.0;
  double delta = 0.0;  // max(E(0) - L, L - min_t E(t))
};

struct TrajectoryOptions {
  double tol = 0.0;  // 0 selects 1e-3 R
  int max_iter = 60;
  FamilyOptions family;
};

// Good trajectory: w* with |P(U_eps(tau, w*))| <= tol. Bisection for ell = 1,
// Broyden with continuation otherwise.
GoodTrajectory good_trajectory(const SaddleChart& chart, double eps, double tau, const TrajectoryOptions& opts = {});

struct CriticalOptions {
  int k_max = 4;
  double tau0 = 0.05;
  double tol_res = 1e-3;
  double r = 0.1;  // target radius for flat norm and |E - L|
  TrajectoryOptions trajectory;
};

struct CriticalResult {
  ComplexField snapshot;
  double time = 0.0;
  int k = 0;  // level that produced the snapshot
  double residual = std::numeric_limits<double>::infinity();
  double flat_norm = std::numeric_limits<double>::quiet_NaN();
  double energy = 0.0;
  double energy_gap = 0.0;  // |E - L|
  std::vector<double> taus;
  std::vector<double> best_residuals;  // per level
  Eigen::VectorXd w;
  bool residual_met = false;
  bool targets_met = false;  // residual, flat norm <= r and |E - L| < r
};

class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, CriticalResult best)
      : Error(ErrorCode::Convergence, what), best_(std::move(best)) {}
  const CriticalResult& best() const { return best_; }

 private:
  CriticalResult best_;
};

// Runs good trajectories at tau_k = 2^k tau0 and keeps the observer snapshot
// of smallest residual. Throws ConvergenceFailure if tol_res is not met by k_max.
CriticalResult extract_critical(const SaddleChart& chart, double eps, const CriticalOptions& opts = {});

double flat_norm_to_geodesic(const SaddleChart& chart, const ComplexField& u);

void write_session_csv(const std::string& path, const std::vector<SessionRow>& log, const std::string& header);
void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& trace, const std::string& header);
// Snapshot checkpoint plus "<path>.meta" with key = value lines.
void write_snapshot(const std::string& path, const CriticalResult& r, double eps, const std::string& header);

}  // namespace vortexlab
