#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vortexlab/currents.hpp"
#include "vortexlab/geometry.hpp"

namespace vortexlab {

// Straight segment of a 1-varifold. The tangent line is stored as a g-unit
// vector at the midpoint; its sign carries no meaning.
struct VarifoldSegment {
  Vec3 midpoint;
  Vec3 half;        // coordinate half-chord, endpoints are midpoint -+ half
  Vec3 tangent;     // half / |half|_g(midpoint)
  double length = 0.0;  // g-length, midpoint rule
  double theta = 1.0;   // multiplicity
};

struct DiscreteVarifold {
  std::vector<VarifoldSegment> segments;

  bool empty() const { return segments.empty(); }
  double mass() const;
  double max_segment_length() const;
};

VarifoldSegment make_segment(const MetricField& m, const Vec3& a, const Vec3& b, double theta = 1.0);

// One segment per edge, theta = |multiplicity|, tangent along the edge axis.
DiscreteVarifold from_current(const OneCurrent& T, const MetricField& m);
// Closed polyline including its closing segment.
DiscreteVarifold from_polyline(const ClosedPolyline& p, const MetricField& m, double theta = 1.0);

using VectorField = std::function<Vec3(const Vec3&)>;
// Several fields evaluated together (they may share expensive lookups).
using FieldFamily = std::function<std::vector<Vec3>(const Vec3&)>;

struct FirstVariationOptions {
  double step = kChristoffelStep;  // central-difference step for the directional derivative
};

// delta V(X) = sum_seg theta int (tau, nabla_tau X)_g dH^1 with two-point
// Gauss quadrature per segment.
double first_variation(const DiscreteVarifold& V, const MetricField& m, const VectorField& X,
                       const FirstVariationOptions& opts = {});
std::vector<double> first_variation(const DiscreteVarifold& V, const MetricField& m, const FieldFamily& X,
                                    const FirstVariationOptions& opts = {});

// Smoothed slab profile: 0 outside (a, b), 1 on [a + s, b - s], quintic ramps
// of width s in between.
double slab_profile(double t, double a, double b, double s);

// Six test fields for stationarity: beta(|y|) e_k for k = 0, 1, 2 and
// beta(|y|) H_{a,b;s}(tau) grad tau on three windows of the loop, with beta a
// radial bump that is 1 on half the chart radius. Zero outside the chart.
FieldFamily stationarity_basis(const TubularChart& chart, double s);

// V(B_r(x)) / (2r). Metric balls are the ellipsoids v^T g(x) v < r^2.
// Throws a resolution error unless r > 2 max segment length.
double density(const DiscreteVarifold& V, const MetricField& m, const Vec3& x, double r);
// Densities at `count` support points drawn with probability proportional to mass.
std::vector<double> density_samples(const DiscreteVarifold& V, const MetricField& m, double r, int count,
                                    std::uint64_t seed);

// Segment data in tubular coordinates. The segment's tau runs linearly from
// t0 to t1 (unwrapped, |t1 - t0| < L/2). alignment = |nabla_xi tau|^2,
// estimated as ((t1 - t0) / length)^2.
struct ChartedSegment {
  double t0 = 0.0, t1 = 0.0;
  double alignment = 0.0;
  double weight = 0.0;   // theta * length
  double rho = 0.0;      // max |y| over the endpoints
};
// Throws out-of-chart if an endpoint leaves the tube.
std::vector<ChartedSegment> chart_segments(const DiscreteVarifold& V, const TubularChart& chart);

// h(t) = int over {0 <= tau <= t} of |nabla_xi tau|^2 dV, for t in [0, L].
std::vector<double> slice_function(const DiscreteVarifold& V, const TubularChart& chart,
                                   const std::vector<double>& ts);
std::vector<double> slice_function(const std::vector<ChartedSegment>& segs, double L, const std::vector<double>& ts);

// Mass fraction with |nabla_xi tau|^2 <= (1 - delta)^2.
double alignment_stats(const DiscreteVarifold& V, const TubularChart& chart, double delta);
double alignment_stats(const std::vector<ChartedSegment>& segs, double delta);

// Number of support points on the slice {tau = t}, counting segments whose
// half-open tau interval contains t.
std::vector<int> slice_counts(const std::vector<ChartedSegment>& segs, double L, const std::vector<double>& ts);

struct DiagnosticOptions {
  double delta = 0.1;         // misalignment threshold
  double density_radius = 0;  // 0 selects 2.5 max segment length
  int density_samples = 64;
  int slices = 256;
  int slope_bins = 16;
  double slab_width = 0;      // 0 selects 4 times the largest grid spacing, capped at L / 8
  std::uint64_t seed = 1;
};

struct VarifoldDiagnostics {
  double mass = 0.0;
  double length = 0.0;  // L of the chart's loop
  double max_support_distance = 0.0;
  double density_q05 = 0.0, density_q50 = 0.0, density_q95 = 0.0;
  double density_min = 0.0, density_max = 0.0;
  double misalignment_fraction = 0.0;
  double h_total = 0.0;
  double h_slope_min = 0.0, h_slope_max = 0.0;
  std::vector<int> slice_histogram;  // slices with 0, 1, 2 and >= 3 support points
  double single_intersection_fraction = 0.0;
  std::vector<double> first_variation;  // on stationarity_basis
};

VarifoldDiagnostics diagnose(const DiscreteVarifold& V, const TubularChart& chart,
                             const DiagnosticOptions& opts = {});
// Flat key = value text, one header line first.
void write_diagnostics(const std::string& path, const VarifoldDiagnostics& d, const std::string& header);

}  // namespace vortexlab
