#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "vortexlab/field.hpp"

namespace vortexlab {

// Solves (alpha - beta * Lap_f) x = b for the flat 7-point Laplacian of the
// grid, diagonalized by real-to-real transforms: the periodic DFT in
// halfcomplex form on periodic axes and DCT-II/DCT-III on reflecting axes.
class FlatSolver {
 public:
  explicit FlatSolver(const Grid& g);
  ~FlatSolver();
  FlatSolver(const FlatSolver&) = delete;
  FlatSolver& operator=(const FlatSolver&) = delete;

  void solve(std::vector<Complex>& x, double alpha, double beta) const;
  // x <- (alpha - beta * Lap_f) x by the stencil.
  void apply(std::vector<Complex>& x, double alpha, double beta) const;
  // Eigenvalue of -Lap_f for transform index k on axis d.
  double eigenvalue(int d, int k) const;

 private:
  Grid g_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
  std::array<std::vector<double>, 3> lam_;
  double norm_ = 1.0;
};

constexpr double kStabilization = 1.0;  // kappa in the semi-implicit reaction

// Largest admissible step: 0.4 eps^2 while sup lambda_max(g^{-1}) <= 1.8,
// otherwise additionally limited by the explicit metric correction.
double dt_max(const DiscreteMetric& m, double eps);

struct TraceRow {
  long step = 0;
  double time = 0.0;
  double energy = 0.0;          // normalized
  double dissipation = 0.0;     // cumulative, normalized
  double max_modulus = 0.0;
  double residual = 0.0;
  double flat_norm = std::numeric_limits<double>::quiet_NaN();
  // Per registered cutoff chi: localized energy, cumulative sum chi |u_t|^2
  // and cumulative cross term (grad chi, u_t . grad u)_g, all normalized.
  std::vector<double> local_energy, local_dissipation, local_cross;
};

struct FlowState {
  ComplexField field;
  double time = 0.0;
  long step = 0;
  double dissipation = 0.0;
  std::vector<double> local_dissipation, local_cross;
  std::vector<TraceRow> trace;
};

struct Observer {
  long period = 1;  // in steps
  std::function<void(FlowState&)> callback;
};

struct FlowOptions {
  bool enforce_dt = true;
  long trace_period = 0;   // 0 disables the built-in trace observer
  bool trace_residual = true;
};

class FlowSolver {
 public:
  FlowSolver(std::shared_ptr<const DiscreteMetric> metric, double eps, double dt, FlowOptions opts = {});

  double dt() const { return dt_; }
  double epsilon() const { return eps_; }
  const DiscreteMetric& metric() const { return *metric_; }
  const FlatSolver& flat() const { return flat_; }

  // Registers a cutoff whose localized energy balance is accumulated every step.
  int add_cutoff(std::vector<double> chi);
  std::size_t cutoff_count() const { return cutoffs_.size(); }

  FlowState start(ComplexField u) const;
  // One semi-implicit step of length dt (or the given shorter one).
  void step(FlowState& s) const { step(s, dt_); }
  void step(FlowState& s, double dt) const;
  // Steps until time + horizon, with a shorter final step if needed. Built-in
  // trace rows are recorded before user observers run.
  void run(FlowState& s, double horizon, const std::vector<Observer>& observers = {}) const;
  void record(FlowState& s) const;

 private:
  std::shared_ptr<const DiscreteMetric> metric_;
  double eps_, dt_;
  FlowOptions opts_;
  FlatSolver flat_;
  std::vector<std::vector<double>> cutoffs_;
  double scale_;
};

// L2 norm sqrt(sum mass |A_g u - (|u|^2 - 1) u / eps^2|^2).
double residual(const ComplexField& u);

struct BalanceResult {
  double lhs = 0.0;       // energy decrease between the two rows
  double rhs = 0.0;       // dissipation plus cross term over the segment
  double residual = 0.0;  // lhs - rhs
};
// cutoff = -1 uses chi = 1. Rows are looked up by step count; a missing
// row or cutoff raises a trace error.
BalanceResult dissipation_balance(const std::vector<TraceRow>& trace, long step_a, long step_b, int cutoff = -1);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace, const std::string& header);

}  // namespace vortexlab
