#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vortexlab/metric.hpp"

namespace vortexlab {

using Complex = std::complex<double>;

constexpr double kAmpMin = 0.3;
constexpr std::int64_t kNoNode = -1;

// Metric data sampled once on the grid. Diagonal gradient terms live on
// edges with weight sqrt(g) g^dd at the edge midpoint; off-diagonal terms
// live on cubes with sqrt(g) g^{-1} at the cube centre.
class DiscreteMetric {
 public:
  explicit DiscreteMetric(MetricField m);

  const MetricField& field() const { return m_; }
  const Grid& grid() const { return m_.grid; }
  std::size_t size() const { return m_.grid.size(); }
  bool diagonal() const { return diagonal_; }

  double sqrt_g(std::size_t p) const { return sqrt_g_[p]; }
  // sqrt(g) times the cell volume: the node mass of the Riemann sums.
  double mass(std::size_t p) const { return sqrt_g_[p] * volume_; }
  double cell_volume() const { return volume_; }
  // Weight of the edge p -> p + e_d, zero when that edge leaves the box.
  double edge_weight(int d, std::size_t p) const { return edge_w_[d][p]; }
  // Neighbour index p +- e_d, kNoNode across a reflecting wall.
  std::int64_t neighbor(std::size_t p, int d, int sign) const {
    return nbr_[2 * d + (sign > 0 ? 1 : 0)][p];
  }
  // sqrt(g) g^{-1} at the centre of the cube with base node p, for
  // non-diagonal metrics; Zero when the cube does not exist.
  const Mat3& cube_weight(std::size_t p) const { return cube_w_[p]; }
  bool cube_exists(std::size_t p) const;

  // sup over nodes of the largest eigenvalue of g^{-1}.
  double lambda_max_inverse() const { return lambda_max_inv_; }

 private:
  MetricField m_;
  bool diagonal_;
  double volume_;
  std::vector<double> sqrt_g_;
  std::array<std::vector<double>, 3> edge_w_;
  std::array<std::vector<std::int64_t>, 6> nbr_;
  std::vector<Mat3> cube_w_;
  double lambda_max_inv_ = 1.0;
};

struct ComplexField {
  std::shared_ptr<const DiscreteMetric> metric;
  double epsilon = 0.05;
  std::vector<Complex> values;

  const Grid& grid() const { return metric->grid(); }
  std::size_t size() const { return values.size(); }
  Complex& operator[](std::size_t p) { return values[p]; }
  const Complex& operator[](std::size_t p) const { return values[p]; }
};

ComplexField make_field(std::shared_ptr<const DiscreteMetric> metric, double epsilon,
                        Complex value = {1.0, 0.0});
// Samples fn at the grid nodes.
ComplexField make_field(std::shared_ptr<const DiscreteMetric> metric, double epsilon,
                        const std::function<Complex(const Vec3&)>& fn);

// Core profile: f(s) = s on [0, 1/2], 1 on [1, inf), quintic C^2 blend between.
double core_profile(double s);

// Discrete energy E_h: half the edge-weighted squared differences plus the
// potential (|u|^2 - 1)^2 / (4 eps^2) weighted by node mass.
double energy(const ComplexField& u);
// Per-node share of E_h divided by the node mass, so that
// sum_p energy_density(p) * mass(p) = energy(u) exactly.
double energy_density(const ComplexField& u, std::size_t p);
std::vector<double> energy_density(const ComplexField& u);

// E_h / (pi |log eps|), optionally restricted to a node mask.
double normalized_energy(const ComplexField& u, const std::vector<bool>* mask = nullptr);
// (1 / (pi |log eps|)) sum_p chi_p e_p mass_p.
double measure_pairing(const ComplexField& u, const std::vector<double>& chi);

// A_g u = -(1/mass) dE_grad/d(conj u): the discrete Laplace-Beltrami operator
// whose gradient flow dissipates E_h exactly in continuous time.
void apply_laplace_beltrami(const ComplexField& u, std::vector<Complex>& out);
// Right-hand side A_g u - (|u|^2 - 1) u / eps^2.
void gl_rhs(const ComplexField& u, std::vector<Complex>& out);

// Primal plaquettes: face id d * N + p is the face through node p normal to
// axis d, spanned by a = (d+1)%3 and b = (d+2)%3 with corners p, p+a, p+a+b, p+b.
bool face_exists(const DiscreteMetric& m, std::size_t face);
std::array<std::size_t, 4> face_corners(const DiscreteMetric& m, std::size_t face);
Vec3 face_center(const Grid& g, std::size_t face);

struct FaceFlux {
  double value = 0.0;   // pi * winding, or the shoelace area on core faces
  bool core = false;    // some corner has |u| < amp_min
  int winding = 0;
  bool ambiguous = false;  // unresolved after refinement of the boundary edges
};

// Phase change of u along the primal edge p -> p + e_d. Edges touching the
// core (or turning by more than pi/2) are split at the midpoint once, with the
// midpoint value interpolated along the grid line. Each edge has one value
// shared by every face containing it, so face windings cancel exactly on
// closed surfaces.
struct EdgePhase {
  double increment = 0.0;
  bool refined = false;
  bool ambiguous = false;  // a piece of the image passes through 0
};
EdgePhase edge_phase_increment(const ComplexField& u, std::size_t p, int d, double amp_min = kAmpMin);

FaceFlux jacobian_flux(const ComplexField& u, std::size_t face, double amp_min = kAmpMin);
// Oriented area of the image of the face boundary: sum over face edges of
// Im(conj(u_a) u_b) / 2, the exact integral of du1 ^ du2 for the bilinear
// interpolant. Indexed by face id (zero for nonexistent faces).
std::vector<double> jacobian_2form(const ComplexField& u);
std::vector<int> face_windings(const ComplexField& u);

// Pairing of the Jacobian 2-form with a 1-form stored on faces: phi[face] is
// the integral of the 1-form along the dual edge crossing that face.
double pair_current(const ComplexField& u, const std::vector<double>& phi);
double pair_current(const std::vector<double>& jacobian, const std::vector<double>& phi);
// Samples a 1-form given by its components at the face centres.
std::vector<double> sample_one_form(const Grid& g, const std::function<Vec3(const Vec3&)>& phi);

void write_checkpoint(const std::string& path, const ComplexField& u, double time);
struct Checkpoint {
  std::array<int, 3> dims{};
  std::array<double, 3> lengths{};
  double epsilon = 0.0;
  double time = 0.0;
  std::vector<Complex> values;
};
Checkpoint read_checkpoint(const std::string& path);
// Loads a checkpoint onto an existing metric; throws a resume error if the
// grid does not match.
ComplexField load_field(const std::string& path, std::shared_ptr<const DiscreteMetric> metric,
                        double* time = nullptr);

double max_modulus(const ComplexField& u);
// Weighted L2 distance sqrt(sum mass |u - v|^2).
double l2_distance(const ComplexField& u, const ComplexField& v);

}  // namespace vortexlab
