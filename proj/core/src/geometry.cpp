#include "vortexlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "vortexlab/error.hpp"

namespace vortexlab {

double Christoffel::max_abs() const {
  double m = 0.0;
  for (const auto& g : G) m = std::max(m, g.cwiseAbs().maxCoeff());
  return m;
}

std::array<Mat3, 3> metric_gradient(const MetricField& m, const Vec3& x, double h) {
  std::array<Mat3, 3> dg;
  for (int l = 0; l < 3; ++l) {
    Vec3 e = Vec3::Zero();
    e[l] = h;
    // Richardson combination of steps h and h/2: fourth-order accurate.
    const Mat3 coarse = (m.at(x + e) - m.at(x - e)) / (2.0 * h);
    const Mat3 fine = (m.at(x + 0.5 * e) - m.at(x - 0.5 * e)) / h;
    dg[l] = (4.0 * fine - coarse) / 3.0;
  }
  return dg;
}

Christoffel christoffel(const MetricField& m, const Vec3& x, double h) {
  const Mat3 g = m.at(x);
  Eigen::LDLT<Mat3> ldlt(g);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(g.determinant() > 1e-14)) {
    fail(ErrorCode::DegenerateMetric, "metric not invertible");
  }
  const Mat3 ginv = g.inverse();
  const auto dg = metric_gradient(m, x, h);
  // lower[l](i,j) = (d_i g_jl + d_j g_il - d_l g_ij) / 2
  std::array<Mat3, 3> lower;
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        lower[l](i, j) = 0.5 * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
  Christoffel c;
  for (int k = 0; k < 3; ++k) {
    c.G[k].setZero();
    for (int l = 0; l < 3; ++l) c.G[k] += ginv(k, l) * lower[l];
  }
  return c;
}

Vec3 curvature_apply(const MetricField& m, const Vec3& x, const Vec3& X, const Vec3& Y,
                     const Vec3& Z, double h) {
  // Derivatives of Gamma by central differences with a step larger than the
  // inner metric step so that nested differencing stays above round-off.
  const double hd = 10.0 * h;
  std::array<Christoffel, 3> dG;
  for (int l = 0; l < 3; ++l) {
    Vec3 e = Vec3::Zero();
    e[l] = hd;
    const Christoffel p = christoffel(m, x + e, h);
    const Christoffel q = christoffel(m, x - e, h);
    for (int k = 0; k < 3; ++k) dG[l].G[k] = (p.G[k] - q.G[k]) / (2.0 * hd);
  }
  const Christoffel G = christoffel(m, x, h);
  Vec3 out = Vec3::Zero();
  for (int r = 0; r < 3; ++r) {
    double acc = 0.0;
    for (int s = 0; s < 3; ++s)
      for (int mu = 0; mu < 3; ++mu)
        for (int nu = 0; nu < 3; ++nu) {
          double R = dG[mu].G[r](nu, s) - dG[nu].G[r](mu, s);
          for (int l = 0; l < 3; ++l) R += G.G[r](mu, l) * G.G[l](nu, s) - G.G[r](nu, l) * G.G[l](mu, s);
          acc += R * Z[s] * X[mu] * Y[nu];
        }
    out[r] = acc;
  }
  return out;
}

GeodesicState geodesic_flow(const MetricField& m, const Vec3& x0, const Vec3& v0, double time,
                            const ExpMapOptions& opts) {
  const double span = v0.norm() * std::abs(time);
  if (span == 0.0) return {x0, v0};
  const int n = std::max(opts.min_steps, static_cast<int>(std::ceil(span / opts.step)));
  const double dt = time / n;
  auto accel = [&](const Vec3& x, const Vec3& v) { return Vec3(-christoffel(m, x).contract(v, v)); };
  Vec3 x = x0, v = v0;
  for (int s = 0; s < n; ++s) {
    const Vec3 k1x = v, k1v = accel(x, v);
    const Vec3 k2x = v + 0.5 * dt * k1v, k2v = accel(x + 0.5 * dt * k1x, k2x);
    const Vec3 k3x = v + 0.5 * dt * k2v, k3v = accel(x + 0.5 * dt * k2x, k3x);
    const Vec3 k4x = v + dt * k3v, k4v = accel(x + dt * k3x, k4x);
    x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }
  if (!x.allFinite() || !v.allFinite()) fail(ErrorCode::Integration, "non-finite geodesic state");
  const double s0 = g_norm(m.at(x0), v0), s1 = g_norm(m.at(x), v);
  if (std::abs(s1 - s0) > opts.drift_tol * std::max(s0, 1e-300)) {
    std::ostringstream os;
    os << "speed drift " << std::abs(s1 - s0) / s0 << " exceeds tolerance";
    fail(ErrorCode::Integration, os.str());
  }
  return {x, v};
}

Vec3 exp_map(const MetricField& m, const Vec3& x, const Vec3& v, const ExpMapOptions& opts) {
  return geodesic_flow(m, x, v, 1.0, opts).x;
}

// ---------------------------------------------------------------------------
// Polylines

Vec3 ClosedPolyline::point(long k) const {
  const long n = static_cast<long>(points.size());
  long q = k / n, r = k % n;
  if (r < 0) {
    r += n;
    q -= 1;
  }
  return points[r] + static_cast<double>(q) * winding;
}

ClosedPolyline close_polyline(const std::vector<Vec3>& pts, const Grid& grid) {
  if (pts.size() < 3) fail(ErrorCode::Domain, "closed polyline needs at least 3 points");
  ClosedPolyline p;
  p.points.reserve(pts.size());
  p.points.push_back(pts[0]);
  for (std::size_t k = 1; k < pts.size(); ++k)
    p.points.push_back(p.points.back() + grid.minimal_image(pts[k] - pts[k - 1]));
  const Vec3 closing = grid.minimal_image(pts[0] - pts.back());
  p.winding = p.points.back() + closing - p.points[0];
  for (int a = 0; a < 3; ++a) {
    if (std::abs(p.winding[a]) < 1e-9 * grid.lengths[a]) p.winding[a] = 0.0;
    p.winding[a] = grid.lengths[a] * std::round(p.winding[a] / grid.lengths[a]);
  }
  return p;
}

double euclidean_length(const ClosedPolyline& p) {
  double L = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) L += (p.point(k + 1) - p.point(k)).norm();
  return L;
}

ClosedPolyline resample(const ClosedPolyline& p, std::size_t n) {
  const std::size_t m = p.size();
  std::vector<double> cum(m + 1, 0.0);
  for (std::size_t k = 0; k < m; ++k) cum[k + 1] = cum[k] + (p.point(k + 1) - p.point(k)).norm();
  const double total = cum[m];
  ClosedPolyline out;
  out.winding = p.winding;
  out.points.reserve(n);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = total * static_cast<double>(i) / static_cast<double>(n);
    while (seg + 1 < m && cum[seg + 1] <= s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double a = len > 0.0 ? (s - cum[seg]) / len : 0.0;
    out.points.push_back((1.0 - a) * p.point(seg) + a * p.point(seg + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discrete geodesic energy

namespace {

// Gradient of e(a, b) = (b-a)^T g((a+b)/2) (b-a) / 2 with respect to (a, b).
Eigen::Matrix<double, 6, 1> segment_gradient(const MetricField& m, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const Vec3 mid = 0.5 * (a + b);
  const Mat3 g = m.at(mid);
  const auto dg = metric_gradient(m, mid);
  Vec3 q;
  for (int l = 0; l < 3; ++l) q[l] = 0.25 * d.dot(dg[l] * d);
  const Vec3 gd = g * d;
  Eigen::Matrix<double, 6, 1> out;
  out.head<3>() = -gd + q;
  out.tail<3>() = gd + q;
  return out;
}

Eigen::Matrix<double, 6, 6> segment_hessian(const MetricField& m, const Vec3& a, const Vec3& b) {
  const double eta = 1e-6 * std::max(1.0, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
  Eigen::Matrix<double, 6, 6> H;
  for (int c = 0; c < 6; ++c) {
    Vec3 ap = a, am = a, bp = b, bm = b;
    if (c < 3) {
      ap[c] += eta;
      am[c] -= eta;
    } else {
      bp[c - 3] += eta;
      bm[c - 3] -= eta;
    }
    H.col(c) = (segment_gradient(m, ap, bp) - segment_gradient(m, am, bm)) / (2.0 * eta);
  }
  return 0.5 * (H + H.transpose());
}

Eigen::VectorXd energy_gradient(const MetricField& m, const ClosedPolyline& p) {
  const std::size_t n = p.size();
  const double N = static_cast<double>(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(3 * n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto sg = segment_gradient(m, p.point(k), p.point(k + 1));
    grad.segment<3>(3 * k) += N * sg.head<3>();
    grad.segment<3>(3 * ((k + 1) % n)) += N * sg.tail<3>();
  }
  return grad;
}

}  // namespace

double arclength(const MetricField& m, const ClosedPolyline& p) {
  double L = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Vec3 a = p.point(k), b = p.point(k + 1);
    L += g_norm(m.at(0.5 * (a + b)), b - a);
  }
  return L;
}

namespace {

double residual_from_gradient(const MetricField& m, const ClosedPolyline& p, const Eigen::VectorXd& grad,
                              double length) {
  const double ds = 1.0 / static_cast<double>(p.size());
  double r = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Mat3 g = m.at(p.points[k]);
    const Vec3 gk = grad.segment<3>(3 * k);
    r = std::max(r, std::sqrt(std::max(0.0, gk.dot(g.ldlt().solve(gk)))));
  }
  return r / (ds * length * length);
}

}  // namespace

double discrete_geodesic_residual(const MetricField& m, const ClosedPolyline& p) {
  return residual_from_gradient(m, p, energy_gradient(m, p), arclength(m, p));
}

GeodesicLoop geodesic_relax(const MetricField& m, const ClosedPolyline& init, const RelaxOptions& opts) {
  ClosedPolyline p = (opts.samples == 0 || opts.samples == init.size()) ? init : resample(init, opts.samples);
  const std::size_t n = p.size();
  const double N = static_cast<double>(n);
  double length = arclength(m, p);
  if (length < opts.min_length) fail(ErrorCode::Collapse, "initial loop shorter than the collapse threshold");

  Eigen::VectorXd grad = energy_gradient(m, p);
  double res = residual_from_gradient(m, p, grad, length);
  double mu = 1e-8 * N;
  int it = 0;
  for (; it < opts.max_iter && res > opts.tol_geo; ++it) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(36 * 4 * n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto H = segment_hessian(m, p.point(k), p.point(k + 1));
      const std::size_t ia = 3 * k, ib = 3 * ((k + 1) % n);
      for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
          const std::size_t R = (r < 3 ? ia + r : ib + r - 3);
          const std::size_t C = (c < 3 ? ia + c : ib + c - 3);
          trip.emplace_back(static_cast<int>(R), static_cast<int>(C), N * H(r, c));
        }
    }
    Eigen::SparseMatrix<double> H(3 * n, 3 * n);
    H.setFromTriplets(trip.begin(), trip.end());
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      Eigen::SparseMatrix<double> A = H;
      for (std::size_t i = 0; i < 3 * n; ++i) A.coeffRef(i, i) += mu;
      A.makeCompressed();
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(A);
      if (lu.info() != Eigen::Success) {
        mu = std::max(mu * 10.0, 1e-10);
        continue;
      }
      const Eigen::VectorXd step = lu.solve(-grad);
      ClosedPolyline trial = p;
      for (std::size_t k = 0; k < n; ++k) trial.points[k] += step.segment<3>(3 * k);
      const double trial_len = arclength(m, trial);
      const Eigen::VectorXd trial_grad = energy_gradient(m, trial);
      const double trial_res = residual_from_gradient(m, trial, trial_grad, trial_len);
      if (std::isfinite(trial_res) && trial_res < res) {
        p = std::move(trial);
        grad = trial_grad;
        res = trial_res;
        length = trial_len;
        mu = std::max(mu / 3.0, 1e-12 * N);
        accepted = true;
      } else {
        mu = std::max(mu * 10.0, 1e-10);
      }
    }
    if (length < opts.min_length) fail(ErrorCode::Collapse, "loop length fell below the collapse threshold");
    if (!accepted) break;
  }
  if (res > opts.tol_geo) {
    std::ostringstream os;
    os << "residual " << res << " above tolerance " << opts.tol_geo << " after " << it << " iterations";
    fail(ErrorCode::Relaxation, os.str());
  }
  GeodesicLoop loop = attach_parallel_frame(m, p);
  loop.residual = res;
  loop.iterations = it;
  return loop;
}

namespace {

void g_orthonormalize(const Mat3& g, const Vec3& T, Vec3& a, Vec3& b) {
  a -= g_dot(g, a, T) * T;
  a /= g_norm(g, a);
  b -= g_dot(g, b, T) * T + g_dot(g, b, a) * a;
  b /= g_norm(g, b);
}

}  // namespace

Vec3 transport_along_segment(const MetricField& m, const Vec3& x0, const Vec3& d, Vec3 xi) {
  // d xi / ds = -Gamma(x(s))(d, xi) along x(s) = x0 + s d, s in [0, 1].
  const int sub = 4;
  const double h = 1.0 / sub;
  auto f = [&](double s, const Vec3& z) { return Vec3(-christoffel(m, x0 + s * d).contract(d, z)); };
  for (int i = 0; i < sub; ++i) {
    const double s = i * h;
    const Vec3 k1 = f(s, xi);
    const Vec3 k2 = f(s + 0.5 * h, xi + 0.5 * h * k1);
    const Vec3 k3 = f(s + 0.5 * h, xi + 0.5 * h * k2);
    const Vec3 k4 = f(s + h, xi + h * k3);
    xi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return xi;
}

Vec3 GeodesicLoop::sample(long k) const {
  const long n = static_cast<long>(samples.size());
  long q = k / n, r = k % n;
  if (r < 0) {
    r += n;
    q -= 1;
  }
  return samples[r] + static_cast<double>(q) * winding;
}

GeodesicLoop attach_parallel_frame(const MetricField& m, const ClosedPolyline& p) {
  const std::size_t n = p.size();
  GeodesicLoop loop;
  loop.samples = p.points;
  loop.winding = p.winding;
  loop.length = arclength(m, p);
  loop.tangents.resize(n);
  loop.frame1.resize(n);
  loop.frame2.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 v = p.point(static_cast<long>(k) + 1) - p.point(static_cast<long>(k) - 1);
    loop.tangents[k] = v / g_norm(m.at(p.points[k]), v);
  }

  // Initial frame: coordinate axis least aligned with the tangent.
  const Mat3 g0 = m.at(p.points[0]);
  const Vec3 T0 = loop.tangents[0];
  int best = 0;
  double best_cos = 2.0;
  for (int a = 0; a < 3; ++a) {
    const Vec3 e = Vec3::Unit(a);
    const double c = std::abs(g_dot(g0, e, T0)) / g_norm(g0, e);
    if (c < best_cos - 1e-12) {
      best_cos = c;
      best = a;
    }
  }
  Vec3 xi1 = Vec3::Unit(best);
  Vec3 xi2 = g0.ldlt().solve(Vec3(T0.cross(xi1)));
  g_orthonormalize(g0, T0, xi1, xi2);

  std::vector<Vec3> f1(n + 1), f2(n + 1);
  f1[0] = xi1;
  f2[0] = xi2;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 a = p.point(static_cast<long>(k)), b = p.point(static_cast<long>(k) + 1);
    Vec3 u1 = transport_along_segment(m, a, b - a, f1[k]);
    Vec3 u2 = transport_along_segment(m, a, b - a, f2[k]);
    const std::size_t kn = (k + 1) % n;
    g_orthonormalize(m.at(p.points[kn]), loop.tangents[kn], u1, u2);
    f1[k + 1] = u1;
    f2[k + 1] = u2;
  }
  const double c = g_dot(g0, f1[n], f1[0]);
  const double s = g_dot(g0, f1[n], f2[0]);
  // Transport returned the frame rotated by theta; undo it gradually.
  loop.holonomy = std::atan2(s, c);
  for (std::size_t k = 0; k < n; ++k) {
    const double phi = loop.holonomy * static_cast<double>(k) / static_cast<double>(n);
    const double cp = std::cos(phi), sp = std::sin(phi);
    loop.frame1[k] = cp * f1[k] - sp * f2[k];
    loop.frame2[k] = sp * f1[k] + cp * f2[k];
  }
  loop.residual = discrete_geodesic_residual(m, p);
  return loop;
}

double geodesic_curvature_residual(const MetricField& m, const GeodesicLoop& loop) {
  const std::size_t n = loop.size();
  const double dt = loop.dt();
  double r = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const long K = static_cast<long>(k);
    const Vec3 xm = loop.sample(K - 1), x = loop.sample(K), xp = loop.sample(K + 1);
    const Vec3 v = (xp - xm) / (2.0 * dt);
    Vec3 a = (xp - 2.0 * x + xm) / (dt * dt) + christoffel(m, x).contract(v, v);
    const Mat3 g = m.at(x);
    const Vec3 T = v / g_norm(g, v);
    a -= g_dot(g, a, T) * T;
    r = std::max(r, g_norm(g, a));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Tubular chart

TubularChart::TubularChart(MetricField m, GeodesicLoop loop, double radius, ExpMapOptions exp_opts)
    : m_(std::move(m)), loop_(std::move(loop)), radius_(radius), exp_opts_(exp_opts) {
  const std::size_t n = loop_.size();
  dframe1_.resize(n);
  dframe2_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t kp = (k + 1) % n, km = (k + n - 1) % n;
    dframe1_[k] = 0.5 * (loop_.frame1[kp] - loop_.frame1[km]);
    dframe2_[k] = 0.5 * (loop_.frame2[kp] - loop_.frame2[km]);
  }
}

double TubularChart::wrap_t(double t) const {
  const double L = loop_.length;
  double r = std::fmod(t, L);
  if (r < 0) r += L;
  if (r >= L) r -= L;
  return r;
}

NormalFrame TubularChart::frame(double t) const {
  const std::size_t n = loop_.size();
  const double dt = loop_.dt();
  const double tt = t / dt;
  const double fl = std::floor(tt);
  const long k = static_cast<long>(fl);
  const double s = tt - fl;
  const std::size_t i0 = static_cast<std::size_t>(((k % static_cast<long>(n)) + n) % n);
  const std::size_t i1 = (i0 + 1) % n;
  const double h00 = 2 * s * s * s - 3 * s * s + 1, h10 = s * s * s - 2 * s * s + s;
  const double h01 = -2 * s * s * s + 3 * s * s, h11 = s * s * s - s * s;
  const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
  const double d01 = -6 * s * s + 6 * s, d11 = 3 * s * s - 2 * s;
  const Vec3 p0 = loop_.sample(k), p1 = loop_.sample(k + 1);
  const Vec3 m0 = loop_.tangents[i0] * dt, m1 = loop_.tangents[i1] * dt;
  NormalFrame f;
  f.point = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1;
  const Vec3 vel = d00 * p0 + d10 * m0 + d01 * p1 + d11 * m1;
  const Mat3 g = m_.at(f.point);
  f.tangent = vel / g_norm(g, vel);
  f.xi1 = h00 * loop_.frame1[i0] + h10 * dframe1_[i0] + h01 * loop_.frame1[i1] + h11 * dframe1_[i1];
  f.xi2 = h00 * loop_.frame2[i0] + h10 * dframe2_[i0] + h01 * loop_.frame2[i1] + h11 * dframe2_[i1];
  g_orthonormalize(g, f.tangent, f.xi1, f.xi2);
  return f;
}

Vec3 TubularChart::psi(const Vec2& y, double t) const {
  const NormalFrame f = frame(t);
  return exp_map(m_, f.point, y[0] * f.xi1 + y[1] * f.xi2, exp_opts_);
}

TubularPoint TubularChart::coords(const Vec3& x) const {
  const Grid& G = m_.grid;
  const std::size_t n = loop_.size();
  const double dt = loop_.dt();
  std::vector<double> dist(n);
  std::size_t kmin = 0;
  for (std::size_t k = 0; k < n; ++k) {
    dist[k] = G.minimal_image(x - loop_.samples[k]).norm();
    if (dist[k] < dist[kmin]) kmin = k;
  }
  const Mat3 gk = m_.at(loop_.samples[kmin]);
  Eigen::SelfAdjointEigenSolver<Mat3> es(gk, Eigen::EigenvaluesOnly);
  if (dist[kmin] * std::sqrt(es.eigenvalues()[0]) > 3.0 * radius_) {
    fail(ErrorCode::OutOfChart, "point far outside the tubular neighbourhood");
  }

  auto refine = [&](std::size_t k0) {
    double a = (static_cast<double>(k0) - 1.0) * dt, b = (static_cast<double>(k0) + 1.0) * dt;
    auto sq = [&](double t) { return G.minimal_image(x - frame(t).point).squaredNorm(); };
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = sq(c), fd = sq(d);
    for (int i = 0; i < 40; ++i) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = sq(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = sq(d);
      }
    }
    const double t = 0.5 * (a + b);
    return std::pair<double, double>(t, std::sqrt(sq(t)));
  };

  auto [t0, d0] = refine(kmin);
  // Distinct local minimum of the sample distance far along the loop?
  const std::size_t far = std::max<std::size_t>(2, n / 8);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t sep = std::min((k + n - kmin) % n, (kmin + n - k) % n);
    if (sep < far) continue;
    const double dl = dist[(k + n - 1) % n], dr = dist[(k + 1) % n];
    if (dist[k] > dl || dist[k] > dr) continue;
    if (dist[k] - dist[kmin] > 1e-3 * (dist[kmin] + dt)) continue;
    const auto [t1, d1] = refine(k);
    if (std::abs(d1 - d0) <= 1e-9 * std::max(1.0, d0)) {
      fail(ErrorCode::Ambiguity, "two nearest loop points within tolerance");
    }
    if (d1 < d0) {
      t0 = t1;
      d0 = d1;
    }
  }

  const NormalFrame f0 = frame(t0);
  const Vec3 target = f0.point + G.minimal_image(x - f0.point);
  const Mat3 g0 = m_.at(f0.point);
  const Vec3 d = target - f0.point;
  Eigen::Vector3d z(g_dot(g0, d, f0.xi1), g_dot(g0, d, f0.xi2), t0);

  auto F = [&](const Eigen::Vector3d& q) { return Vec3(psi(Vec2(q[0], q[1]), q[2]) - target); };
  Mat3 J;
  J.col(0) = f0.xi1;
  J.col(1) = f0.xi2;
  J.col(2) = f0.tangent;
  Eigen::PartialPivLU<Mat3> lu(J);
  Vec3 r = F(z);
  const double tol = 1e-12 * std::max(1.0, target.cwiseAbs().maxCoeff());
  bool fd_jacobian = false;
  int it = 0;
  for (; it < 60 && r.norm() > tol; ++it) {
    if (it == 8 && !fd_jacobian) {
      const double eta = 1e-7;
      for (int c = 0; c < 3; ++c) {
        Eigen::Vector3d zp = z, zm = z;
        zp[c] += eta;
        zm[c] -= eta;
        J.col(c) = (F(zp) - F(zm)) / (2.0 * eta);
      }
      lu.compute(J);
      fd_jacobian = true;
    }
    z -= lu.solve(r);
    if (Vec2(z[0], z[1]).norm() > 2.0 * radius_) break;
    r = F(z);
  }
  const Vec2 y(z[0], z[1]);
  if (y.norm() >= radius_) fail(ErrorCode::OutOfChart, "point outside the chart radius");
  if (r.norm() > 1e-9 * std::max(1.0, target.cwiseAbs().maxCoeff())) {
    fail(ErrorCode::OutOfChart, "tubular inverse did not converge");
  }
  return {y, wrap_t(z[2])};
}

double dist_to_loop(const TubularChart& chart, const Vec3& x) {
  try {
    return chart.coords(x).y.norm();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::OutOfChart) throw;
  }
  // Outside the chart: shortest g-length of a straight segment to a sample.
  const MetricField& m = chart.metric();
  const GeodesicLoop& loop = chart.loop();
  static const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& s : loop.samples) {
    const Vec3 d = m.grid.minimal_image(x - s);
    double len = 0.0;
    for (int q = 0; q < 3; ++q) {
      const double u = 0.5 * (1.0 + gx[q]);
      len += 0.5 * gw[q] * g_norm(m.at(s + u * d), d);
    }
    best = std::min(best, len);
  }
  return best;
}

double dist_to_loop(const MetricField& m, const GeodesicLoop& loop, const Vec3& x) {
  const auto& L = m.grid.lengths;
  const double radius = 0.25 * std::min({L[0], L[1], L[2]});
  return dist_to_loop(TubularChart(m, loop, radius), x);
}

// ---------------------------------------------------------------------------
// CSV

void write_loop_csv(const std::string& path, const GeodesicLoop& loop, const std::string& header) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path);
  os << header << "\n";
  os << "# length=" << std::setprecision(17) << loop.length << " winding=" << loop.winding[0] << ","
     << loop.winding[1] << "," << loop.winding[2] << " holonomy=" << loop.holonomy << "\n";
  os << "t,x1,x2,x3,xi1_1,xi1_2,xi1_3,xi2_1,xi2_2,xi2_3\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < loop.size(); ++k) {
    const Vec3& x = loop.samples[k];
    const Vec3& a = loop.frame1[k];
    const Vec3& b = loop.frame2[k];
    os << loop.param(k) << "," << x[0] << "," << x[1] << "," << x[2] << "," << a[0] << "," << a[1] << ","
       << a[2] << "," << b[0] << "," << b[1] << "," << b[2] << "\n";
  }
}

GeodesicLoop read_loop_csv(const std::string& path, const MetricField& m) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::Io, "cannot read " + path);
  std::string line;
  GeodesicLoop loop;
  double length = -1.0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("length=");
      if (pos != std::string::npos) length = std::stod(line.substr(pos + 7));
      continue;
    }
    if (line[0] == 't') continue;
    std::stringstream ss(line);
    std::string cell;
    double v[10];
    for (double& c : v) {
      if (!std::getline(ss, cell, ',')) fail(ErrorCode::Io, "malformed loop row in " + path);
      c = std::stod(cell);
    }
    loop.samples.emplace_back(v[1], v[2], v[3]);
    loop.frame1.emplace_back(v[4], v[5], v[6]);
    loop.frame2.emplace_back(v[7], v[8], v[9]);
  }
  if (loop.samples.size() < 3 || length <= 0.0) fail(ErrorCode::Io, "incomplete loop file " + path);
  const ClosedPolyline p = close_polyline(loop.samples, m.grid);
  loop.samples = p.points;
  loop.winding = p.winding;
  loop.length = length;
  const std::size_t n = loop.size();
  loop.tangents.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 v = p.point(static_cast<long>(k) + 1) - p.point(static_cast<long>(k) - 1);
    loop.tangents[k] = v / g_norm(m.at(p.points[k]), v);
  }
  return loop;
}

}  // namespace vortexlab
