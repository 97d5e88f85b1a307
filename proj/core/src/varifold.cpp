#include "vortexlab/varifold.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "vortexlab/error.hpp"
#include "vortexlab/parallel.hpp"

namespace vortexlab {

double DiscreteVarifold::mass() const {
  double s = 0.0;
  for (const auto& seg : segments) s += seg.theta * seg.length;
  return s;
}

double DiscreteVarifold::max_segment_length() const {
  double s = 0.0;
  for (const auto& seg : segments) s = std::max(s, seg.length);
  return s;
}

VarifoldSegment make_segment(const MetricField& m, const Vec3& a, const Vec3& b, double theta) {
  VarifoldSegment s;
  s.midpoint = 0.5 * (a + b);
  s.half = 0.5 * (b - a);
  const Mat3 g = m.at(s.midpoint);
  const double n = g_norm(g, s.half);
  if (!(n > 0.0)) fail(ErrorCode::Domain, "degenerate varifold segment");
  s.tangent = s.half / n;
  s.length = 2.0 * n;
  s.theta = theta;
  return s;
}

DiscreteVarifold from_current(const OneCurrent& T, const MetricField& m) {
  DiscreteVarifold V;
  if (T.empty()) return V;
  const CubicalComplex& C = *T.complex;
  V.segments.reserve(T.edges.size());
  for (const auto& [e, mult] : T.edges) {
    if (mult == 0) continue;
    const int d = C.edge_axis(e);
    const Vec3 a = C.position(C.edge_tail(e));
    Vec3 b = a;
    b[d] += C.spacing(d);
    V.segments.push_back(make_segment(m, a, b, static_cast<double>(std::abs(mult))));
  }
  return V;
}

DiscreteVarifold from_polyline(const ClosedPolyline& p, const MetricField& m, double theta) {
  DiscreteVarifold V;
  const long n = static_cast<long>(p.size());
  V.segments.reserve(p.size());
  for (long k = 0; k < n; ++k) V.segments.push_back(make_segment(m, p.point(k), p.point(k + 1), theta));
  return V;
}

std::vector<double> first_variation(const DiscreteVarifold& V, const MetricField& m, const FieldFamily& X,
                                    const FirstVariationOptions& opts) {
  const std::size_t n = V.segments.size();
  if (n == 0) return {};
  const double h = opts.step;
  const double c = 1.0 / std::sqrt(3.0);
  // Per-segment contributions, reduced in segment order below.
  std::vector<std::vector<double>> part(n);
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const VarifoldSegment& s = V.segments[i];
      std::vector<double> acc;
      for (double q : {-c, c}) {
        const Vec3 x = s.midpoint + q * s.half;
        const Mat3 g = m.at(x);
        const double w = g_norm(g, s.half);  // half the local g-length, Gauss weight 1
        const Vec3 tau = s.half / w;
        const Christoffel G = christoffel(m, x);
        const std::vector<Vec3> Xp = X(x + h * tau), Xm = X(x - h * tau), X0 = X(x);
        if (acc.empty()) acc.assign(X0.size(), 0.0);
        for (std::size_t j = 0; j < X0.size(); ++j) {
          const Vec3 cov = (Xp[j] - Xm[j]) / (2.0 * h) + G.contract(tau, X0[j]);
          acc[j] += s.theta * w * g_dot(g, tau, cov);
        }
      }
      part[i] = std::move(acc);
    }
  });
  std::vector<double> out(part[0].size(), 0.0);
  for (const auto& p : part)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += p[j];
  return out;
}

double first_variation(const DiscreteVarifold& V, const MetricField& m, const VectorField& X,
                       const FirstVariationOptions& opts) {
  if (V.empty()) return 0.0;
  return first_variation(V, m, FieldFamily([&](const Vec3& x) { return std::vector<Vec3>{X(x)}; }), opts)[0];
}

double slab_profile(double t, double a, double b, double s) {
  if (t <= a || t >= b) return 0.0;
  return smoothstep5((t - a) / s) * smoothstep5((b - t) / s);
}

FieldFamily stationarity_basis(const TubularChart& chart, double s) {
  const double L = chart.loop().length;
  const double R = chart.radius();
  static const double windows[3][2] = {{0.1, 0.4}, {0.35, 0.65}, {0.6, 0.9}};
  for (const auto& w : windows)
    if (!(s > 0.0) || 2.0 * s >= (w[1] - w[0]) * L) fail(ErrorCode::Domain, "slab width too large for the loop");
  const double hg = 1e-3;  // step for grad tau

  return [&chart, L, R, s, hg](const Vec3& x) {
    std::vector<Vec3> out(6, Vec3::Zero());
    TubularPoint p;
    try {
      p = chart.coords(x);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::OutOfChart) return out;
      throw;
    }
    const double beta = 1.0 - smoothstep5((p.y.norm() - 0.5 * R) / (0.5 * R));
    if (beta == 0.0) return out;
    for (int k = 0; k < 3; ++k) out[k][k] = beta;

    double H[3];
    bool any = false;
    for (int j = 0; j < 3; ++j) {
      H[j] = slab_profile(p.t, windows[j][0] * L, windows[j][1] * L, s);
      any |= H[j] != 0.0;
    }
    if (!any) return out;
    Vec3 dtau;
    for (int d = 0; d < 3; ++d) {
      Vec3 xp = x, xm = x;
      xp[d] += hg;
      xm[d] -= hg;
      double dt = chart.coords(xp).t - chart.coords(xm).t;
      dt -= L * std::round(dt / L);
      dtau[d] = dt / (2.0 * hg);
    }
    const Vec3 grad = chart.metric().at(x).ldlt().solve(dtau);
    for (int j = 0; j < 3; ++j) out[3 + j] = beta * H[j] * grad;
    return out;
  };
}

namespace {

// Length fraction of s -> d0 + (2 s - 1) half, s in [0, 1], inside v^T g v < r^2.
double inside_fraction(const Mat3& g, const Vec3& d0, const Vec3& half, double r) {
  // p(s) = (d0 - half) + 2 s half
  const Vec3 p0 = d0 - half, v = 2.0 * half;
  const double A = g_dot(g, v, v), B = 2.0 * g_dot(g, p0, v), C = g_dot(g, p0, p0) - r * r;
  const double disc = B * B - 4.0 * A * C;
  if (disc <= 0.0) return 0.0;
  const double sq = std::sqrt(disc);
  const double s0 = (-B - sq) / (2.0 * A), s1 = (-B + sq) / (2.0 * A);
  return std::max(0.0, std::min(1.0, s1) - std::max(0.0, s0));
}

}  // namespace

double density(const DiscreteVarifold& V, const MetricField& m, const Vec3& x, double r) {
  if (!(r > 2.0 * V.max_segment_length())) {
    fail(ErrorCode::Resolution, "density radius must exceed twice the largest segment length");
  }
  const Mat3 g = m.at(x);
  double mass = 0.0;
  for (const auto& s : V.segments) {
    const Vec3 d0 = m.grid.minimal_image(s.midpoint - x);
    mass += s.theta * s.length * inside_fraction(g, d0, s.half, r);
  }
  return mass / (2.0 * r);
}

std::vector<double> density_samples(const DiscreteVarifold& V, const MetricField& m, double r, int count,
                                    std::uint64_t seed) {
  if (V.empty() || count <= 0) return {};
  std::vector<double> w;
  w.reserve(V.segments.size());
  for (const auto& s : V.segments) w.push_back(s.theta * s.length);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<Vec3> pts(count);
  for (auto& p : pts) {
    const VarifoldSegment& s = V.segments[pick(rng)];
    p = s.midpoint + U(rng) * s.half;
  }
  std::vector<double> out(count);
  parallel_for(pts.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) out[i] = density(V, m, pts[i], r);
  });
  return out;
}

std::vector<ChartedSegment> chart_segments(const DiscreteVarifold& V, const TubularChart& chart) {
  const double L = chart.loop().length;
  std::vector<ChartedSegment> out(V.segments.size());
  parallel_for(out.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const VarifoldSegment& s = V.segments[i];
      const TubularPoint a = chart.coords(s.midpoint - s.half);
      const TubularPoint b = chart.coords(s.midpoint + s.half);
      double dt = b.t - a.t;
      dt -= L * std::round(dt / L);
      ChartedSegment& c = out[i];
      c.t0 = a.t;
      c.t1 = a.t + dt;
      c.alignment = (dt / s.length) * (dt / s.length);
      c.weight = s.theta * s.length;
      c.rho = std::max(a.y.norm(), b.y.norm());
    }
  });
  return out;
}

namespace {

struct Piece {
  double lo, hi, share;  // share of the segment weight
};

// Splits a segment's tau interval into pieces inside [0, L).
int pieces(const ChartedSegment& c, double L, Piece out[2]) {
  double lo = std::min(c.t0, c.t1), hi = std::max(c.t0, c.t1);
  const double k = std::floor(lo / L);
  lo -= k * L;
  hi -= k * L;
  const double span = hi - lo;
  if (hi <= L) {
    out[0] = {lo, hi, 1.0};
    return 1;
  }
  out[0] = {lo, L, (L - lo) / span};
  out[1] = {0.0, hi - L, (hi - L) / span};
  return 2;
}

}  // namespace

std::vector<double> slice_function(const std::vector<ChartedSegment>& segs, double L, const std::vector<double>& ts) {
  std::vector<double> h(ts.size(), 0.0);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double t = ts[i];
    double acc = 0.0;
    for (const auto& c : segs) {
      Piece p[2];
      const int np = pieces(c, L, p);
      const double w = c.weight * c.alignment;
      for (int j = 0; j < np; ++j) {
        double f;
        if (p[j].hi > p[j].lo)
          f = std::clamp((t - p[j].lo) / (p[j].hi - p[j].lo), 0.0, 1.0);
        else
          f = t >= p[j].lo ? 1.0 : 0.0;
        acc += w * p[j].share * f;
      }
    }
    h[i] = acc;
  }
  return h;
}

std::vector<double> slice_function(const DiscreteVarifold& V, const TubularChart& chart,
                                   const std::vector<double>& ts) {
  return slice_function(chart_segments(V, chart), chart.loop().length, ts);
}

double alignment_stats(const std::vector<ChartedSegment>& segs, double delta) {
  const double thr = (1.0 - delta) * (1.0 - delta);
  double bad = 0.0, total = 0.0;
  for (const auto& c : segs) {
    total += c.weight;
    if (c.alignment <= thr) bad += c.weight;
  }
  return total > 0.0 ? bad / total : 0.0;
}

double alignment_stats(const DiscreteVarifold& V, const TubularChart& chart, double delta) {
  return alignment_stats(chart_segments(V, chart), delta);
}

std::vector<int> slice_counts(const std::vector<ChartedSegment>& segs, double L, const std::vector<double>& ts) {
  std::vector<int> n(ts.size(), 0);
  for (const auto& c : segs) {
    Piece p[2];
    const int np = pieces(c, L, p);
    for (int j = 0; j < np; ++j)
      for (std::size_t i = 0; i < ts.size(); ++i)
        if (ts[i] >= p[j].lo && ts[i] < p[j].hi) ++n[i];
  }
  return n;
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, sorted.size() - 1);
  return sorted[i] + (pos - static_cast<double>(i)) * (sorted[j] - sorted[i]);
}

}  // namespace

VarifoldDiagnostics diagnose(const DiscreteVarifold& V, const TubularChart& chart, const DiagnosticOptions& opts) {
  VarifoldDiagnostics d;
  const MetricField& m = chart.metric();
  const double L = chart.loop().length;
  d.mass = V.mass();
  d.length = L;
  if (V.empty()) fail(ErrorCode::Domain, "empty varifold");

  const auto segs = chart_segments(V, chart);
  for (const auto& c : segs) d.max_support_distance = std::max(d.max_support_distance, c.rho);

  const double r = opts.density_radius > 0.0 ? opts.density_radius : 2.5 * V.max_segment_length();
  std::vector<double> dens = density_samples(V, m, r, opts.density_samples, opts.seed);
  std::sort(dens.begin(), dens.end());
  d.density_min = dens.front();
  d.density_max = dens.back();
  d.density_q05 = quantile(dens, 0.05);
  d.density_q50 = quantile(dens, 0.5);
  d.density_q95 = quantile(dens, 0.95);

  d.misalignment_fraction = alignment_stats(segs, opts.delta);

  std::vector<double> ts(opts.slope_bins + 1);
  for (int i = 0; i <= opts.slope_bins; ++i) ts[i] = L * i / opts.slope_bins;
  const std::vector<double> h = slice_function(segs, L, ts);
  d.h_total = h.back();
  d.h_slope_min = std::numeric_limits<double>::infinity();
  d.h_slope_max = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < opts.slope_bins; ++i) {
    const double slope = (h[i + 1] - h[i]) / (ts[i + 1] - ts[i]);
    d.h_slope_min = std::min(d.h_slope_min, slope);
    d.h_slope_max = std::max(d.h_slope_max, slope);
  }

  std::vector<double> st(opts.slices);
  for (int i = 0; i < opts.slices; ++i) st[i] = L * (i + 0.5) / opts.slices;
  const std::vector<int> counts = slice_counts(segs, L, st);
  d.slice_histogram.assign(4, 0);
  for (int c : counts) ++d.slice_histogram[std::min(c, 3)];
  d.single_intersection_fraction = static_cast<double>(d.slice_histogram[1]) / opts.slices;

  double s = opts.slab_width;
  if (!(s > 0.0)) {
    const Grid& G = m.grid;
    s = std::min(4.0 * std::max({G.spacing(0), G.spacing(1), G.spacing(2)}), 0.125 * L);
  }
  d.first_variation = first_variation(V, m, stationarity_basis(chart, s));
  return d;
}

void write_diagnostics(const std::string& path, const VarifoldDiagnostics& d, const std::string& header) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path);
  os.precision(12);
  os << header << "\n";
  os << "mass = " << d.mass << "\n";
  os << "length = " << d.length << "\n";
  os << "max_support_distance = " << d.max_support_distance << "\n";
  os << "density_min = " << d.density_min << "\n";
  os << "density_q05 = " << d.density_q05 << "\n";
  os << "density_q50 = " << d.density_q50 << "\n";
  os << "density_q95 = " << d.density_q95 << "\n";
  os << "density_max = " << d.density_max << "\n";
  os << "misalignment_fraction = " << d.misalignment_fraction << "\n";
  os << "h_total = " << d.h_total << "\n";
  os << "h_slope_min = " << d.h_slope_min << "\n";
  os << "h_slope_max = " << d.h_slope_max << "\n";
  os << "h_slope_range = " << d.h_slope_max - d.h_slope_min << "\n";
  for (std::size_t i = 0; i < d.slice_histogram.size(); ++i)
    os << "slice_count_" << i << (i + 1 == d.slice_histogram.size() ? "_plus" : "") << " = " << d.slice_histogram[i]
       << "\n";
  os << "single_intersection_fraction = " << d.single_intersection_fraction << "\n";
  double fv = 0.0;
  for (std::size_t j = 0; j < d.first_variation.size(); ++j) {
    os << "first_variation_" << j << " = " << d.first_variation[j] << "\n";
    fv = std::max(fv, std::abs(d.first_variation[j]));
  }
  os << "first_variation_max = " << fv << "\n";
}

}  // namespace vortexlab
