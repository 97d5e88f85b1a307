#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vortexlab/geometry.hpp"

namespace vortexlab {

// Jacobi operator on frame coefficients (xi^1(t_k), xi^2(t_k)), interleaved
// as index 2k + a. The matrix is symmetric with respect to the discrete L2
// product sum_k |xi_k|^2 dt.
struct JacobiOperator {
  Eigen::MatrixXd matrix;
  double dt = 0.0;
  // Largest |M_ab - M_ba| of the sampled curvature block before symmetrization.
  double curvature_asymmetry = 0.0;
};

JacobiOperator assemble_jacobi(const GeodesicLoop& loop, const MetricField& m);

struct SpectrumOptions {
  int count = 0;             // retained modes; 0 keeps max(index + 4, 8)
  double margin_min = 1e-3;
};

struct JacobiSpectrum {
  std::vector<double> eigenvalues;
  // eigensections[j][k] = frame coefficients of xi_j at sample k.
  std::vector<std::vector<Vec2>> eigensections;
  std::vector<double> residuals;  // ||L xi_j - lambda_j xi_j||_{L2}
  int index = 0;
  double nondegeneracy_margin = 0.0;
  double dt = 0.0;

  std::size_t modes() const { return eigenvalues.size(); }
  double l2_inner(std::size_t i, std::size_t j) const;
};

// Lowest eigenpairs. Throws a degeneracy error when min |lambda| < margin_min.
JacobiSpectrum spectrum(const JacobiOperator& op, const SpectrumOptions& opts = {});

// Ambient normal vectors sum_j w_j xi_j(t_k) at every sample.
std::vector<Vec3> normal_field(const GeodesicLoop& loop, const JacobiSpectrum& spec,
                               const Eigen::VectorXd& w);

// gamma_w(t_k) = exp_{gamma(t_k)} xi(w)(t_k). Throws chart-overflow if the
// field exceeds r0 in g-norm.
ClosedPolyline perturbed_loop(const MetricField& m, const GeodesicLoop& loop, const JacobiSpectrum& spec,
                              const Eigen::VectorXd& w, double r0);

void write_spectrum_csv(const std::string& path, const JacobiSpectrum& spec, const std::string& header);

}  // namespace vortexlab
