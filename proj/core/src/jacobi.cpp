#include "vortexlab/jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "vortexlab/error.hpp"

namespace vortexlab {

namespace {

Mat2 orthogonal_factor(const Mat2& A) {
  Eigen::JacobiSVD<Mat2> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

JacobiOperator assemble_jacobi(const GeodesicLoop& loop, const MetricField& m) {
  const std::size_t n = loop.size();
  const double dt = loop.dt();
  JacobiOperator op;
  op.dt = dt;
  op.matrix = Eigen::MatrixXd::Zero(2 * n, 2 * n);

  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t kn = (k + 1) % n;
    const Vec3 a = loop.sample(static_cast<long>(k));
    const Vec3 d = loop.sample(static_cast<long>(k) + 1) - a;
    const Mat3 gn = m.at(loop.samples[kn]);
    Mat2 Q;
    const Vec3 p1 = transport_along_segment(m, a, d, loop.frame1[k]);
    const Vec3 p2 = transport_along_segment(m, a, d, loop.frame2[k]);
    Q << g_dot(gn, loop.frame1[kn], p1), g_dot(gn, loop.frame1[kn], p2),
        g_dot(gn, loop.frame2[kn], p1), g_dot(gn, loop.frame2[kn], p2);
    Q = orthogonal_factor(Q);
    // B = [-Q at k, I at k+1]; accumulate B^T B / dt^2.
    Eigen::Matrix<double, 2, 4> B;
    B.leftCols<2>() = -Q;
    B.rightCols<2>() = Mat2::Identity();
    const Eigen::Matrix4d BtB = B.transpose() * B / (dt * dt);
    const std::size_t idx[2] = {2 * k, 2 * kn};
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) op.matrix.block<2, 2>(idx[r], idx[c]) += BtB.block<2, 2>(2 * r, 2 * c);
  }

  for (std::size_t k = 0; k < n; ++k) {
    const Vec3& x = loop.samples[k];
    const Vec3& T = loop.tangents[k];
    const Vec3 xi[2] = {loop.frame1[k], loop.frame2[k]};
    const Mat3 g = m.at(x);
    Mat2 M;
    for (int ia = 0; ia < 2; ++ia) {
      const Vec3 R = curvature_apply(m, x, xi[ia], T, T);
      for (int ib = 0; ib < 2; ++ib) M(ia, ib) = -g_dot(g, R, xi[ib]);
    }
    op.curvature_asymmetry = std::max(op.curvature_asymmetry, std::abs(M(0, 1) - M(1, 0)));
    op.matrix.block<2, 2>(2 * k, 2 * k) += 0.5 * (M + M.transpose());
  }
  op.matrix = 0.5 * (op.matrix + op.matrix.transpose()).eval();
  return op;
}

double JacobiSpectrum::l2_inner(std::size_t i, std::size_t j) const {
  double s = 0.0;
  for (std::size_t k = 0; k < eigensections[i].size(); ++k) s += eigensections[i][k].dot(eigensections[j][k]);
  return s * dt;
}

JacobiSpectrum spectrum(const JacobiOperator& op, const SpectrumOptions& opts) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.matrix);
  if (es.info() != Eigen::Success) fail(ErrorCode::Solver, "eigen-solver failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const Eigen::Index dim = ev.size();
  JacobiSpectrum s;
  s.dt = op.dt;
  s.index = 0;
  s.nondegeneracy_margin = std::abs(ev[0]);
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (ev[i] < 0.0) ++s.index;
    s.nondegeneracy_margin = std::min(s.nondegeneracy_margin, std::abs(ev[i]));
  }
  const int count = static_cast<int>(
      std::min<Eigen::Index>(dim, opts.count > 0 ? opts.count : std::max(s.index + 4, 8)));
  const std::size_t n = static_cast<std::size_t>(dim / 2);
  const double scale = 1.0 / std::sqrt(op.dt);
  for (int j = 0; j < count; ++j) {
    Eigen::VectorXd v = es.eigenvectors().col(j);
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0) v = -v;
    const Eigen::VectorXd r = op.matrix * v - ev[j] * v;
    s.eigenvalues.push_back(ev[j]);
    s.residuals.push_back(r.norm() * std::sqrt(op.dt) * scale);
    std::vector<Vec2> sec(n);
    for (std::size_t k = 0; k < n; ++k) sec[k] = Vec2(v[2 * k], v[2 * k + 1]) * scale;
    s.eigensections.push_back(std::move(sec));
  }
  if (s.nondegeneracy_margin < opts.margin_min) {
    std::ostringstream os;
    os << "Jacobi operator has eigenvalue within " << s.nondegeneracy_margin << " of zero (margin_min "
       << opts.margin_min << ")";
    fail(ErrorCode::Degeneracy, os.str());
  }
  return s;
}

std::vector<Vec3> normal_field(const GeodesicLoop& loop, const JacobiSpectrum& spec, const Eigen::VectorXd& w) {
  const std::size_t n = loop.size();
  std::vector<Vec3> out(n, Vec3::Zero());
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (static_cast<std::size_t>(j) >= spec.modes()) fail(ErrorCode::Domain, "w has more entries than modes");
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2& c = spec.eigensections[j][k];
      out[k] += w[j] * (c[0] * loop.frame1[k] + c[1] * loop.frame2[k]);
    }
  }
  return out;
}

ClosedPolyline perturbed_loop(const MetricField& m, const GeodesicLoop& loop, const JacobiSpectrum& spec,
                              const Eigen::VectorXd& w, double r0) {
  const std::vector<Vec3> xi = normal_field(loop, spec, w);
  ClosedPolyline p;
  p.winding = loop.winding;
  p.points.reserve(loop.size());
  for (std::size_t k = 0; k < loop.size(); ++k) {
    if (g_norm(m.at(loop.samples[k]), xi[k]) > r0) fail(ErrorCode::ChartOverflow, "perturbation exceeds r0");
    p.points.push_back(exp_map(m, loop.samples[k], xi[k]));
  }
  return p;
}

void write_spectrum_csv(const std::string& path, const JacobiSpectrum& spec, const std::string& header) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path);
  os << header << "\n";
  os << "# index=" << spec.index << " margin=" << std::setprecision(17) << spec.nondegeneracy_margin << "\n";
  os << "j,lambda,k,xi1,xi2\n";
  for (std::size_t j = 0; j < spec.modes(); ++j)
    for (std::size_t k = 0; k < spec.eigensections[j].size(); ++k)
      os << j + 1 << "," << spec.eigenvalues[j] << "," << k << "," << spec.eigensections[j][k][0] << ","
         << spec.eigensections[j][k][1] << "\n";
}

}  // namespace vortexlab
