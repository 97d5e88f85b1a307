#pragma once

#include <array>
#include <string>
#include <vector>

#include "vortexlab/metric.hpp"

namespace vortexlab {

constexpr double kChristoffelStep = 1e-4;

// Gamma^k_ij stored as G[k](i, j).
struct Christoffel {
  std::array<Mat3, 3> G;

  // (Gamma(u, v))^k = Gamma^k_ij u^i v^j
  Vec3 contract(const Vec3& u, const Vec3& v) const {
    return {u.dot(G[0] * v), u.dot(G[1] * v), u.dot(G[2] * v)};
  }
  double max_abs() const;
};

// Partial derivatives d_l g, returned as dg[l]. Central differences with
// steps h and h/2 combined by Richardson extrapolation.
std::array<Mat3, 3> metric_gradient(const MetricField& m, const Vec3& x,
                                    double h = kChristoffelStep);
Christoffel christoffel(const MetricField& m, const Vec3& x, double h = kChristoffelStep);

// Riemann tensor R^r_{s,m,n} = d_m Gamma^r_{ns} - d_n Gamma^r_{ms}
//   + Gamma^r_{m l} Gamma^l_{ns} - Gamma^r_{n l} Gamma^l_{ms}.
// Returned as R(X, Y) Z with components R^r_{s m n} Z^s X^m Y^n.
Vec3 curvature_apply(const MetricField& m, const Vec3& x, const Vec3& X, const Vec3& Y,
                     const Vec3& Z, double h = kChristoffelStep);

inline double g_dot(const Mat3& g, const Vec3& a, const Vec3& b) { return a.dot(g * b); }
inline double g_norm(const Mat3& g, const Vec3& a) { return std::sqrt(a.dot(g * a)); }

struct ExpMapOptions {
  double step = 5e-4;        // maximal Euclidean displacement per RK4 step
  int min_steps = 8;
  double drift_tol = 1e-7;   // relative change of |v|_g that counts as failure
};

struct GeodesicState {
  Vec3 x;
  Vec3 v;
};

// Geodesic ODE x'' + Gamma(x', x') = 0 integrated for the given time with RK4.
GeodesicState geodesic_flow(const MetricField& m, const Vec3& x, const Vec3& v, double time,
                            const ExpMapOptions& opts = {});
Vec3 exp_map(const MetricField& m, const Vec3& x, const Vec3& v, const ExpMapOptions& opts = {});

// Closed polyline in unwrapped coordinates; point k + N equals point k + winding,
// where winding is a lattice vector of the periodic axes.
struct ClosedPolyline {
  std::vector<Vec3> points;
  Vec3 winding = Vec3::Zero();

  std::size_t size() const { return points.size(); }
  Vec3 point(long k) const;
};

// Unwraps consecutive points by minimal image, including the closing segment.
ClosedPolyline close_polyline(const std::vector<Vec3>& pts, const Grid& grid);
// Uniform resampling by Euclidean arclength.
ClosedPolyline resample(const ClosedPolyline& p, std::size_t n);
double euclidean_length(const ClosedPolyline& p);

struct GeodesicLoop {
  std::vector<Vec3> samples;
  std::vector<Vec3> tangents;
  std::vector<Vec3> frame1;
  std::vector<Vec3> frame2;
  double length = 0.0;
  Vec3 winding = Vec3::Zero();
  double holonomy = 0.0;        // rotation angle of parallel transport around the loop
  double residual = 0.0;        // discrete Euler-Lagrange residual at exit
  int iterations = 0;

  std::size_t size() const { return samples.size(); }
  double dt() const { return length / static_cast<double>(samples.size()); }
  double param(std::size_t k) const { return dt() * static_cast<double>(k); }
  Vec3 sample(long k) const;
  ClosedPolyline polyline() const { return {samples, winding}; }
};

struct RelaxOptions {
  std::size_t samples = 0;     // 0 keeps the input sample count
  double tol_geo = 1e-6;
  int max_iter = 200;
  double min_length = 0.05;    // collapse threshold
};

// Critical point of the discrete energy sum_k g(mid)(dx, dx) / (2 ds), i.e. a
// constant-speed discrete geodesic, found by damped Newton. Works for loops of
// any Morse index.
GeodesicLoop geodesic_relax(const MetricField& m, const ClosedPolyline& init,
                            const RelaxOptions& opts = {});

// Attaches tangents and a single-valued parallel normal frame to a polyline
// that is already (close to) a geodesic.
GeodesicLoop attach_parallel_frame(const MetricField& m, const ClosedPolyline& p);

// Parallel transport of xi along the straight segment x0 + s d, s in [0, 1].
Vec3 transport_along_segment(const MetricField& m, const Vec3& x0, const Vec3& d, Vec3 xi);

// Sum of g-lengths of the segments, metric evaluated at segment midpoints.
double arclength(const MetricField& m, const ClosedPolyline& p);

// Discrete Euler-Lagrange residual, in units of curvature (1/length).
double discrete_geodesic_residual(const MetricField& m, const ClosedPolyline& p);
// max_k |nabla_T T|_g with centered differences on the samples.
double geodesic_curvature_residual(const MetricField& m, const GeodesicLoop& loop);

struct TubularPoint {
  Vec2 y = Vec2::Zero();
  double t = 0.0;
};

struct NormalFrame {
  Vec3 point;
  Vec3 tangent;
  Vec3 xi1;
  Vec3 xi2;
};

class TubularChart {
 public:
  TubularChart(MetricField m, GeodesicLoop loop, double radius, ExpMapOptions exp_opts = chart_exp_options());

  // Coarser exp-map stepping than the default; psi and its inverse use the
  // same integrator, so the round trip stays exact to Newton tolerance.
  static ExpMapOptions chart_exp_options() { return {2e-3, 8, 1e-6}; }

  const MetricField& metric() const { return m_; }
  const GeodesicLoop& loop() const { return loop_; }
  double radius() const { return radius_; }

  // Loop point, unit tangent and frame at an arbitrary parameter t (any real).
  NormalFrame frame(double t) const;
  Vec3 psi(const Vec2& y, double t) const;
  // Inverse chart. Throws out-of-chart when |y| >= radius, ambiguity when two
  // distant loop points are equally near.
  TubularPoint coords(const Vec3& x) const;

 private:
  MetricField m_;
  GeodesicLoop loop_;
  double radius_;
  ExpMapOptions exp_opts_;
  std::vector<Vec3> dframe1_, dframe2_;
  double wrap_t(double t) const;
};

inline TubularPoint tubular_coords(const TubularChart& c, const Vec3& x) { return c.coords(x); }

double dist_to_loop(const TubularChart& chart, const Vec3& x);
double dist_to_loop(const MetricField& m, const GeodesicLoop& loop, const Vec3& x);

void write_loop_csv(const std::string& path, const GeodesicLoop& loop, const std::string& header);
GeodesicLoop read_loop_csv(const std::string& path, const MetricField& m);

}  // namespace vortexlab
