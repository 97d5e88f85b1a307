#include "vortexlab/field.hpp"

#include <cmath>
#include <algorithm>
#include <cstring>
#include <limits>
#include <fstream>
#include <numbers>

#include "vortexlab/error.hpp"
#include "vortexlab/parallel.hpp"

namespace vortexlab {

namespace {

constexpr char kMagic[8] = {'V', 'L', 'X', 'F', 'L', 'D', '0', '1'};

// Offsets of the 8 corners of a cube relative to its base node, as bit masks.
std::int64_t corner_of(const DiscreteMetric& m, std::size_t p, int bits) {
  std::int64_t q = static_cast<std::int64_t>(p);
  for (int d = 0; d < 3 && q != kNoNode; ++d)
    if (bits & (1 << d)) q = m.neighbor(static_cast<std::size_t>(q), d, +1);
  return q;
}

// Central cube gradient: D_d = mean of the 4 edge differences along d.
std::array<Complex, 3> cube_gradient(const ComplexField& u, const std::array<std::size_t, 8>& c) {
  const Grid& g = u.grid();
  std::array<Complex, 3> D{};
  for (int d = 0; d < 3; ++d) {
    Complex s = 0.0;
    for (int bits = 0; bits < 8; ++bits)
      if (!(bits & (1 << d))) s += u[c[bits | (1 << d)]] - u[c[bits]];
    D[d] = s / (4.0 * g.spacing(d));
  }
  return D;
}

bool cube_corners(const DiscreteMetric& m, std::size_t p, std::array<std::size_t, 8>& c) {
  for (int bits = 0; bits < 8; ++bits) {
    const std::int64_t q = corner_of(m, p, bits);
    if (q == kNoNode) return false;
    c[bits] = static_cast<std::size_t>(q);
  }
  return true;
}

double mixed_cube_energy(const ComplexField& u, std::size_t p) {
  const DiscreteMetric& m = *u.metric;
  std::array<std::size_t, 8> c;
  if (!cube_corners(m, p, c)) return 0.0;
  const Mat3& W = m.cube_weight(p);
  const auto D = cube_gradient(u, c);
  double e = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != b) e += W(a, b) * std::real(D[a] * std::conj(D[b]));
  return 0.5 * e * m.cell_volume();
}

double potential(double eps, const Complex& z) {
  const double s = std::norm(z) - 1.0;
  return s * s / (4.0 * eps * eps);
}

double flux_log_scale(double eps) {
  if (!(eps > 0.0) || eps >= 1.0) fail(ErrorCode::Normalization, "normalized energy needs 0 < eps < 1");
  return std::numbers::pi * std::abs(std::log(eps));
}

}  // namespace

DiscreteMetric::DiscreteMetric(MetricField m)
    : m_(std::move(m)), diagonal_(m_.fn->diagonal()), volume_(m_.grid.cell_volume()) {
  const Grid& g = m_.grid;
  const std::size_t n = g.size();
  sqrt_g_.resize(n);
  for (auto& w : edge_w_) w.assign(n, 0.0);
  for (auto& v : nbr_) v.assign(n, kNoNode);
  if (!diagonal_) cube_w_.assign(n, Mat3::Zero());
  const Vec3 h{g.spacing(0), g.spacing(1), g.spacing(2)};

  std::vector<double> lam(n, 0.0);
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const auto ijk = g.unindex(p);
      const Vec3 x = g.node(ijk[0], ijk[1], ijk[2]);
      const Mat3 gx = m_.at(x);
      const double det = gx.determinant();
      if (!(det > 0.0)) fail(ErrorCode::DegenerateMetric, "metric not positive definite at a node");
      sqrt_g_[p] = std::sqrt(det);
      Eigen::SelfAdjointEigenSolver<Mat3> es(gx, Eigen::EigenvaluesOnly);
      lam[p] = 1.0 / es.eigenvalues()(0);
      for (int d = 0; d < 3; ++d) {
        for (int s = 0; s < 2; ++s) {
          auto q = ijk;
          q[d] += s ? 1 : -1;
          if (q[d] < 0 || q[d] >= g.dims[d]) {
            if (!g.periodic(d)) continue;
            q[d] = (q[d] + g.dims[d]) % g.dims[d];
          }
          nbr_[2 * d + s][p] = static_cast<std::int64_t>(g.index(q[0], q[1], q[2]));
        }
        if (nbr_[2 * d + 1][p] == kNoNode) continue;
        Vec3 xm = x;
        xm[d] += 0.5 * h[d];
        const Mat3 gm = m_.at(xm);
        edge_w_[d][p] = std::sqrt(gm.determinant()) * gm.inverse()(d, d);
      }
    }
  });
  lambda_max_inv_ = *std::max_element(lam.begin(), lam.end());

  if (!diagonal_) {
    parallel_for(n, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t p = lo; p < hi; ++p) {
        if (!cube_exists(p)) continue;
        const auto ijk = g.unindex(p);
        const Vec3 xc = g.node(ijk[0], ijk[1], ijk[2]) + 0.5 * h;
        const Mat3 gc = m_.at(xc);
        cube_w_[p] = std::sqrt(gc.determinant()) * gc.inverse();
      }
    });
  }
}

bool DiscreteMetric::cube_exists(std::size_t p) const {
  for (int bits = 0; bits < 8; ++bits)
    if (corner_of(*this, p, bits) == kNoNode) return false;
  return true;
}

ComplexField make_field(std::shared_ptr<const DiscreteMetric> metric, double epsilon, Complex value) {
  ComplexField u;
  u.values.assign(metric->size(), value);
  u.metric = std::move(metric);
  u.epsilon = epsilon;
  return u;
}

ComplexField make_field(std::shared_ptr<const DiscreteMetric> metric, double epsilon,
                        const std::function<Complex(const Vec3&)>& fn) {
  ComplexField u = make_field(std::move(metric), epsilon);
  const Grid& g = u.grid();
  parallel_for(u.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const auto ijk = g.unindex(p);
      u[p] = fn(g.node(ijk[0], ijk[1], ijk[2]));
    }
  });
  return u;
}

double core_profile(double s) {
  if (s <= 0.5) return std::max(s, 0.0);
  if (s >= 1.0) return 1.0;
  return -7.0 + s * (56.0 + s * (-168.0 + s * (248.0 + s * (-176.0 + s * 48.0))));
}

double energy(const ComplexField& u) {
  const DiscreteMetric& m = *u.metric;
  const Grid& g = m.grid();
  const double eps = u.epsilon;
  const double vol = m.cell_volume();
  const double ih2[3] = {1.0 / (g.spacing(0) * g.spacing(0)), 1.0 / (g.spacing(1) * g.spacing(1)),
                         1.0 / (g.spacing(2) * g.spacing(2))};
  return parallel_sum(u.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
      double e = 0.0;
      for (int d = 0; d < 3; ++d) {
        const std::int64_t q = m.neighbor(p, d, +1);
        if (q != kNoNode) e += 0.5 * m.edge_weight(d, p) * std::norm(u[q] - u[p]) * ih2[d];
      }
      s += (e + m.sqrt_g(p) * potential(eps, u[p])) * vol;
      if (!m.diagonal()) s += mixed_cube_energy(u, p);
    }
    return s;
  });
}

double energy_density(const ComplexField& u, std::size_t p) {
  const DiscreteMetric& m = *u.metric;
  const Grid& g = m.grid();
  double e = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double ih2 = 1.0 / (g.spacing(d) * g.spacing(d));
    const std::int64_t qp = m.neighbor(p, d, +1);
    const std::int64_t qm = m.neighbor(p, d, -1);
    if (qp != kNoNode) e += 0.25 * m.edge_weight(d, p) * std::norm(u[qp] - u[p]) * ih2;
    if (qm != kNoNode) e += 0.25 * m.edge_weight(d, qm) * std::norm(u[p] - u[qm]) * ih2;
  }
  double mixed = 0.0;
  if (!m.diagonal()) {
    // Each cube containing p hands an eighth of its energy to every corner.
    for (int bits = 0; bits < 8; ++bits) {
      std::int64_t q = static_cast<std::int64_t>(p);
      for (int d = 0; d < 3 && q != kNoNode; ++d)
        if (bits & (1 << d)) q = m.neighbor(static_cast<std::size_t>(q), d, -1);
      if (q != kNoNode) mixed += mixed_cube_energy(u, static_cast<std::size_t>(q)) / 8.0;
    }
  }
  return e / m.sqrt_g(p) + mixed / m.mass(p) + potential(u.epsilon, u[p]);
}

std::vector<double> energy_density(const ComplexField& u) {
  std::vector<double> e(u.size());
  parallel_for(u.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) e[p] = energy_density(u, p);
  });
  return e;
}

double normalized_energy(const ComplexField& u, const std::vector<bool>* mask) {
  const double scale = flux_log_scale(u.epsilon);
  if (!mask) return energy(u) / scale;
  const DiscreteMetric& m = *u.metric;
  const double s = parallel_sum(u.size(), [&](std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t p = lo; p < hi; ++p)
      if ((*mask)[p]) acc += energy_density(u, p) * m.mass(p);
    return acc;
  });
  return s / scale;
}

double measure_pairing(const ComplexField& u, const std::vector<double>& chi) {
  const double scale = flux_log_scale(u.epsilon);
  const DiscreteMetric& m = *u.metric;
  const double s = parallel_sum(u.size(), [&](std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t p = lo; p < hi; ++p)
      if (chi[p] != 0.0) acc += chi[p] * energy_density(u, p) * m.mass(p);
    return acc;
  });
  return s / scale;
}

void apply_laplace_beltrami(const ComplexField& u, std::vector<Complex>& out) {
  const DiscreteMetric& m = *u.metric;
  const Grid& g = m.grid();
  out.resize(u.size());
  const double ih2[3] = {1.0 / (g.spacing(0) * g.spacing(0)), 1.0 / (g.spacing(1) * g.spacing(1)),
                         1.0 / (g.spacing(2) * g.spacing(2))};
  parallel_for(u.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      Complex acc = 0.0;
      for (int d = 0; d < 3; ++d) {
        const std::int64_t qp = m.neighbor(p, d, +1);
        const std::int64_t qm = m.neighbor(p, d, -1);
        if (qp != kNoNode) acc += m.edge_weight(d, p) * (u[qp] - u[p]) * ih2[d];
        if (qm != kNoNode) acc -= m.edge_weight(d, qm) * (u[p] - u[qm]) * ih2[d];
      }
      if (!m.diagonal()) {
        // Gradient of the mixed cube energies with respect to corner p.
        for (int bits = 0; bits < 8; ++bits) {
          std::int64_t q = static_cast<std::int64_t>(p);
          for (int d = 0; d < 3 && q != kNoNode; ++d)
            if (bits & (1 << d)) q = m.neighbor(static_cast<std::size_t>(q), d, -1);
          if (q == kNoNode) continue;
          std::array<std::size_t, 8> c;
          if (!cube_corners(m, static_cast<std::size_t>(q), c)) continue;
          const Mat3& W = m.cube_weight(static_cast<std::size_t>(q));
          const auto D = cube_gradient(u, c);
          for (int a = 0; a < 3; ++a) {
            Complex wd = 0.0;
            for (int b = 0; b < 3; ++b)
              if (a != b) wd += W(a, b) * D[b];
            const double coef = ((bits >> a) & 1 ? 1.0 : -1.0) / (4.0 * g.spacing(a));
            acc -= coef * wd;
          }
        }
      }
      out[p] = acc / m.sqrt_g(p);
    }
  });
}

void gl_rhs(const ComplexField& u, std::vector<Complex>& out) {
  apply_laplace_beltrami(u, out);
  const double ie2 = 1.0 / (u.epsilon * u.epsilon);
  for (std::size_t p = 0; p < u.size(); ++p) out[p] -= (std::norm(u[p]) - 1.0) * u[p] * ie2;
}

bool face_exists(const DiscreteMetric& m, std::size_t face) {
  const std::size_t n = m.size();
  const int d = static_cast<int>(face / n);
  const std::size_t p = face % n;
  const int a = (d + 1) % 3, b = (d + 2) % 3;
  const std::int64_t pa = m.neighbor(p, a, +1);
  return pa != kNoNode && m.neighbor(p, b, +1) != kNoNode;
}

std::array<std::size_t, 4> face_corners(const DiscreteMetric& m, std::size_t face) {
  const std::size_t n = m.size();
  const int d = static_cast<int>(face / n);
  const std::size_t p = face % n;
  const int a = (d + 1) % 3, b = (d + 2) % 3;
  const auto pa = static_cast<std::size_t>(m.neighbor(p, a, +1));
  const auto pb = static_cast<std::size_t>(m.neighbor(p, b, +1));
  const auto pab = static_cast<std::size_t>(m.neighbor(pa, b, +1));
  return {p, pa, pab, pb};
}

Vec3 face_center(const Grid& g, std::size_t face) {
  const std::size_t n = g.size();
  const int d = static_cast<int>(face / n);
  const auto ijk = g.unindex(face % n);
  Vec3 x = g.node(ijk[0], ijk[1], ijk[2]);
  for (int e = 0; e < 3; ++e)
    if (e != d) x[e] += 0.5 * g.spacing(e);
  return x;
}

EdgePhase edge_phase_increment(const ComplexField& u, std::size_t p, int d, double amp_min) {
  const DiscreteMetric& m = *u.metric;
  EdgePhase e;
  const std::int64_t q = m.neighbor(p, d, +1);
  if (q == kNoNode) return e;
  const Complex a = u[p], b = u[static_cast<std::size_t>(q)];
  auto piece = [&](const Complex& x, const Complex& y) {
    const Complex r = y * std::conj(x);
    if (std::abs(r) == 0.0) {
      e.ambiguous = true;
      return 0.0;
    }
    const double dphi = std::arg(r);
    // A straight image segment sweeps exactly the principal angle unless it
    // runs through the origin, where that angle is +-pi.
    if (std::abs(dphi) > std::numbers::pi - 1e-9) e.ambiguous = true;
    return dphi;
  };
  const double coarse = piece(a, b);
  if (std::min(std::abs(a), std::abs(b)) >= amp_min && std::abs(coarse) <= 0.5 * std::numbers::pi) {
    e.increment = coarse;
    return e;
  }
  // Refinement: split the edge at its midpoint, interpolating along the grid
  // line with the 4-point cubic where both outer nodes exist.
  e.ambiguous = false;
  const std::int64_t pm = m.neighbor(p, d, -1);
  const std::int64_t qp = m.neighbor(static_cast<std::size_t>(q), d, +1);
  Complex mid = 0.5 * (a + b);
  if (pm != kNoNode && qp != kNoNode)
    mid = (9.0 * (a + b) - u[static_cast<std::size_t>(pm)] - u[static_cast<std::size_t>(qp)]) / 16.0;
  e.refined = true;
  e.increment = piece(a, mid) + piece(mid, b);
  return e;
}

FaceFlux jacobian_flux(const ComplexField& u, std::size_t face, double amp_min) {
  FaceFlux f;
  const DiscreteMetric& m = *u.metric;
  if (!face_exists(m, face)) return f;
  const std::size_t n = m.size();
  const int dn = static_cast<int>(face / n);
  const int da = (dn + 1) % 3, db = (dn + 2) % 3;
  const auto c = face_corners(m, face);
  // Counterclockwise in (a, b): +a from c0, +b from c1, -a into c3, -b into c0.
  const EdgePhase e0 = edge_phase_increment(u, c[0], da, amp_min);
  const EdgePhase e1 = edge_phase_increment(u, c[1], db, amp_min);
  const EdgePhase e2 = edge_phase_increment(u, c[3], da, amp_min);
  const EdgePhase e3 = edge_phase_increment(u, c[0], db, amp_min);
  const double turn = e0.increment + e1.increment - e2.increment - e3.increment;
  f.ambiguous = e0.ambiguous || e1.ambiguous || e2.ambiguous || e3.ambiguous;
  double area = 0.0;
  double amp = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) {
    amp = std::min(amp, std::abs(u[c[k]]));
    area += 0.5 * (std::conj(u[c[k]]) * u[c[(k + 1) % 4]]).imag();
  }
  f.winding = static_cast<int>(std::lround(turn / (2.0 * std::numbers::pi)));
  f.core = amp < amp_min;
  f.value = f.core ? area : std::numbers::pi * f.winding;
  return f;
}

std::vector<double> jacobian_2form(const ComplexField& u) {
  const DiscreteMetric& m = *u.metric;
  std::vector<double> J(3 * u.size(), 0.0);
  parallel_for(J.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t f = lo; f < hi; ++f) {
      if (!face_exists(m, f)) continue;
      const auto c = face_corners(m, f);
      double area = 0.0;
      for (int k = 0; k < 4; ++k) area += 0.5 * (std::conj(u[c[k]]) * u[c[(k + 1) % 4]]).imag();
      J[f] = area;
    }
  });
  return J;
}

std::vector<int> face_windings(const ComplexField& u) {
  std::vector<int> w(3 * u.size(), 0);
  parallel_for(w.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t f = lo; f < hi; ++f) w[f] = jacobian_flux(u, f).winding;
  });
  return w;
}

double pair_current(const std::vector<double>& jacobian, const std::vector<double>& phi) {
  if (jacobian.size() != phi.size()) fail(ErrorCode::Domain, "1-form size does not match the face count");
  return parallel_sum(phi.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t f = lo; f < hi; ++f) s += jacobian[f] * phi[f];
    return s;
  });
}

double pair_current(const ComplexField& u, const std::vector<double>& phi) {
  return pair_current(jacobian_2form(u), phi);
}

std::vector<double> sample_one_form(const Grid& g, const std::function<Vec3(const Vec3&)>& phi) {
  const std::size_t n = g.size();
  std::vector<double> out(3 * n, 0.0);
  parallel_for(3 * n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t f = lo; f < hi; ++f) {
      const int d = static_cast<int>(f / n);
      out[f] = phi(face_center(g, f))[d] * g.spacing(d);
    }
  });
  return out;
}

void write_checkpoint(const std::string& path, const ComplexField& u, double time) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, "cannot open checkpoint for writing: " + path);
  const Grid& g = u.grid();
  os.write(kMagic, sizeof kMagic);
  for (int d = 0; d < 3; ++d) {
    const std::int64_t n = g.dims[d];
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
  }
  for (int d = 0; d < 3; ++d) os.write(reinterpret_cast<const char*>(&g.lengths[d]), sizeof(double));
  os.write(reinterpret_cast<const char*>(&u.epsilon), sizeof(double));
  os.write(reinterpret_cast<const char*>(&time), sizeof(double));
  os.write(reinterpret_cast<const char*>(u.values.data()),
           static_cast<std::streamsize>(u.values.size() * sizeof(Complex)));
  if (!os) fail(ErrorCode::Io, "checkpoint write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Resume, "cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) fail(ErrorCode::Resume, "bad checkpoint magic: " + path);
  Checkpoint c;
  for (int d = 0; d < 3; ++d) {
    std::int64_t n = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    if (n <= 0 || n > (1 << 20)) fail(ErrorCode::Resume, "bad checkpoint dims: " + path);
    c.dims[d] = static_cast<int>(n);
  }
  for (int d = 0; d < 3; ++d) is.read(reinterpret_cast<char*>(&c.lengths[d]), sizeof(double));
  is.read(reinterpret_cast<char*>(&c.epsilon), sizeof(double));
  is.read(reinterpret_cast<char*>(&c.time), sizeof(double));
  if (!is) fail(ErrorCode::Resume, "truncated checkpoint header: " + path);
  const std::size_t n = static_cast<std::size_t>(c.dims[0]) * c.dims[1] * c.dims[2];
  c.values.resize(n);
  is.read(reinterpret_cast<char*>(c.values.data()), static_cast<std::streamsize>(n * sizeof(Complex)));
  if (!is) fail(ErrorCode::Resume, "truncated checkpoint data: " + path);
  if (is.peek() != std::char_traits<char>::eof()) fail(ErrorCode::Resume, "trailing bytes in checkpoint: " + path);
  for (const Complex& z : c.values)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) fail(ErrorCode::Resume, "non-finite checkpoint value");
  return c;
}

ComplexField load_field(const std::string& path, std::shared_ptr<const DiscreteMetric> metric, double* time) {
  Checkpoint c = read_checkpoint(path);
  const Grid& g = metric->grid();
  if (c.dims != g.dims || c.lengths != g.lengths)
    fail(ErrorCode::Resume, "checkpoint grid does not match the configured grid");
  ComplexField u;
  u.metric = std::move(metric);
  u.epsilon = c.epsilon;
  u.values = std::move(c.values);
  if (time) *time = c.time;
  return u;
}

double max_modulus(const ComplexField& u) {
  double m = 0.0;
  for (const Complex& z : u.values) m = std::max(m, std::abs(z));
  return m;
}

double l2_distance(const ComplexField& u, const ComplexField& v) {
  const DiscreteMetric& m = *u.metric;
  const double s = parallel_sum(u.size(), [&](std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t p = lo; p < hi; ++p) acc += m.mass(p) * std::norm(u[p] - v[p]);
    return acc;
  });
  return std::sqrt(s);
}

}  // namespace vortexlab
