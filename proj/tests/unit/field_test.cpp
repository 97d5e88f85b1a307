#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "test_util.hpp"
#include "vortexlab/error.hpp"
#include "vortexlab/field.hpp"

using namespace vortexlab;
using namespace vltest;

namespace {

std::shared_ptr<const DiscreteMetric> flat(const Grid& g) {
  return std::make_shared<const DiscreteMetric>(flat_metric(g));
}

std::shared_ptr<const DiscreteMetric> warped(const Grid& g) {
  return std::make_shared<const DiscreteMetric>(benchmark_metric(g));
}

ComplexField random_field(std::shared_ptr<const DiscreteMetric> m, double eps, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  ComplexField u = make_field(std::move(m), eps);
  for (auto& z : u.values) z = {U(rng), U(rng)};
  return u;
}

}  // namespace

TEST(Field, CoreProfileJoints) {
  EXPECT_DOUBLE_EQ(core_profile(0.25), 0.25);
  EXPECT_NEAR(core_profile(0.5), 0.5, 1e-12);
  EXPECT_NEAR(core_profile(1.0 - 1e-12), 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(core_profile(3.0), 1.0);
  // C^1 and C^2 at both joints, and nondecreasing in between.
  const double h = 1e-5;
  auto d1 = [&](double s) { return (core_profile(s + h) - core_profile(s - h)) / (2 * h); };
  auto d2 = [&](double s) { return (core_profile(s + h) - 2 * core_profile(s) + core_profile(s - h)) / (h * h); };
  EXPECT_NEAR(d1(0.5 + 2 * h), 1.0, 1e-3);
  EXPECT_NEAR(d1(1.0 - 2 * h), 0.0, 1e-3);
  EXPECT_NEAR(d2(0.5 + 4 * h), 0.0, 2e-2);
  EXPECT_NEAR(d2(1.0 - 4 * h), 0.0, 2e-2);
  for (double s = 0.5; s < 1.0; s += 0.01) EXPECT_GE(core_profile(s + 0.01), core_profile(s));
}

TEST(Field, ConstantStates) {
  const Grid g = wall_grid(8, 12, 12);
  auto m = warped(g);
  const double eps = 0.1;
  ComplexField one = make_field(m, eps);
  EXPECT_EQ(energy(one), 0.0);
  EXPECT_EQ(normalized_energy(one), 0.0);
  ComplexField zero = make_field(m, eps, Complex{0.0, 0.0});
  for (std::size_t p = 0; p < zero.size(); p += 37) EXPECT_NEAR(energy_density(zero, p), 1.0 / (4 * eps * eps), 1e-12);
  double vol = 0.0;
  for (std::size_t p = 0; p < zero.size(); ++p) vol += m->mass(p);
  EXPECT_NEAR(energy(zero), vol / (4 * eps * eps), 1e-9 * vol / (eps * eps));
}

TEST(Field, NormalizationRejectsLargeEpsilon) {
  const Grid g = wall_grid(4, 4, 4);
  ComplexField u = make_field(flat(g), 1.0);
  try {
    normalized_energy(u);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Normalization);
  }
}

TEST(Field, DensitySumsToEnergy) {
  const Grid g = wall_grid(6, 10, 10);
  for (auto m : {warped(g), std::make_shared<const DiscreteMetric>(make_metric_field(g, "sheared", {{"amplitude", 0.05}}))}) {
    ComplexField u = random_field(m, 0.2, 3);
    const auto e = energy_density(u);
    double s = 0.0;
    for (std::size_t p = 0; p < u.size(); ++p) {
      EXPECT_GE(e[p], 0.0);
      s += e[p] * m->mass(p);
    }
    EXPECT_NEAR(s, energy(u), 1e-10 * energy(u));
    std::vector<double> chi(u.size(), 1.0);
    EXPECT_NEAR(measure_pairing(u, chi), normalized_energy(u), 1e-12 * normalized_energy(u));
    std::vector<bool> all(u.size(), true);
    EXPECT_NEAR(normalized_energy(u, &all), normalized_energy(u), 1e-12 * normalized_energy(u));
  }
}

TEST(Field, FarFieldOfPlanarVortex) {
  // e = |grad theta|^2 / 2 = 1 / (2 r^2) once the modulus is 1.
  const Grid g = wall_grid(2, 200, 200);
  auto m = flat(g);
  const double eps = 0.02;
  ComplexField u = straight_vortex(m, eps);
  for (int j : {130, 150, 170}) {
    const std::size_t p = g.index(0, j, 100);
    const Vec3 x = g.node(0, j, 100);
    const double r = std::hypot(x[1] - 0.5, x[2] - 0.5);
    EXPECT_NEAR(energy_density(u, p) * 2 * r * r, 1.0, 5e-3) << r;
  }
}

TEST(Field, LaplaceBeltramiIsMinusEnergyGradient) {
  const Grid g = wall_grid(6, 8, 8);
  for (auto m : {warped(g), std::make_shared<const DiscreteMetric>(make_metric_field(g, "sheared", {{"amplitude", 0.05}}))}) {
    ComplexField u = random_field(m, 0.3, 5);
    ComplexField v = random_field(m, 0.3, 6);
    std::vector<Complex> rhs;
    gl_rhs(u, rhs);
    double predicted = 0.0;
    for (std::size_t p = 0; p < u.size(); ++p) predicted -= m->mass(p) * std::real(std::conj(rhs[p]) * v[p]);
    const double s = 1e-5;
    ComplexField up = u, um = u;
    for (std::size_t p = 0; p < u.size(); ++p) {
      up[p] += s * v[p];
      um[p] -= s * v[p];
    }
    const double fd = (energy(up) - energy(um)) / (2 * s);
    EXPECT_NEAR(fd, predicted, 1e-6 * std::abs(predicted));
  }
}

TEST(Field, LaplaceBeltramiMatchesAnalyticOnFlatGrid) {
  // u = cos(2 pi x1) cos(pi x2 / W): the cosine in x2 satisfies the
  // Neumann condition of the wall, so the discrete operator is exact up to
  // the eigenvalue factor sin^2(k h / 2) / (h / 2)^2.
  const Grid g = wall_grid(16, 16, 4);
  auto m = flat(g);
  ComplexField u = make_field(m, 0.1, [](const Vec3& x) {
    return Complex{std::cos(2 * std::numbers::pi * x[0]) * std::cos(std::numbers::pi * x[1]), 0.0};
  });
  std::vector<Complex> out;
  apply_laplace_beltrami(u, out);
  const double h = 1.0 / 16;
  auto sym = [&](double k) { return 4.0 / (h * h) * std::pow(std::sin(k * h / 2), 2); };
  const double lam = sym(2 * std::numbers::pi) + sym(std::numbers::pi);
  for (std::size_t p = 0; p < u.size(); ++p) EXPECT_NEAR(out[p].real(), -lam * u[p].real(), 1e-9 * lam);
}

TEST(Field, WindingsCancelOnClosedCubeSurfaces) {
  const Grid g = wall_grid(6, 6, 6);
  auto m = flat(g);
  ComplexField u = random_field(m, 0.1, 11);
  const auto J = jacobian_2form(u);
  const std::size_t N = u.size();
  int checked = 0;
  for (std::size_t p = 0; p < N; ++p) {
    if (!m->cube_exists(p)) continue;
    int wsum = 0;
    double jsum = 0.0, jabs = 0.0;
    for (int d = 0; d < 3; ++d) {
      const std::size_t top = d * N + static_cast<std::size_t>(m->neighbor(p, d, +1));
      const std::size_t bottom = d * N + p;
      wsum += jacobian_flux(u, top).winding - jacobian_flux(u, bottom).winding;
      jsum += J[top] - J[bottom];
      jabs += std::abs(J[top]) + std::abs(J[bottom]);
    }
    EXPECT_EQ(wsum, 0);
    EXPECT_NEAR(jsum, 0.0, 1e-14 * (1 + jabs));
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(Field, VortexThroughFaceHasUnitWinding) {
  const Grid g = wall_grid(4, 16, 16);
  auto m = flat(g);
  const std::size_t N = g.size();
  const std::size_t face = 0 * N + g.index(1, 7, 7);  // straddles the centre 0.5
  ComplexField wide = straight_vortex(m, 4.0 / 16);
  FaceFlux f = jacobian_flux(wide, face);
  EXPECT_EQ(f.winding, 1);
  EXPECT_TRUE(f.core);
  EXPECT_GT(f.value, 0.0);
  ComplexField thin = straight_vortex(m, 0.5 / 16);
  f = jacobian_flux(thin, face);
  EXPECT_FALSE(f.core);
  EXPECT_DOUBLE_EQ(f.value, std::numbers::pi);
  // The neighbouring face and a constant field carry nothing.
  EXPECT_EQ(jacobian_flux(thin, 0 * N + g.index(1, 8, 7)).winding, 0);
  EXPECT_EQ(jacobian_flux(make_field(m, 0.1), face).value, 0.0);
  ComplexField two = straight_vortex(m, 4.0 / 16, 2);
  EXPECT_EQ(jacobian_flux(two, face).winding, 2);
}

TEST(Field, PairingIsLinear) {
  const Grid g = wall_grid(6, 8, 8);
  auto m = warped(g);
  ComplexField u = random_field(m, 0.2, 13);
  std::mt19937 rng(2);
  std::normal_distribution<double> n01;
  std::vector<double> a(3 * u.size()), b(3 * u.size()), c(3 * u.size());
  for (std::size_t f = 0; f < a.size(); ++f) {
    a[f] = n01(rng);
    b[f] = n01(rng);
    c[f] = 0.7 * a[f] - 2.5 * b[f];
  }
  const double pa = pair_current(u, a), pb = pair_current(u, b);
  EXPECT_NEAR(pair_current(u, c), 0.7 * pa - 2.5 * pb, 1e-12 * (std::abs(pa) + std::abs(pb)));
  EXPECT_EQ(pair_current(u, std::vector<double>(a.size(), 0.0)), 0.0);
}

TEST(Field, AxialFormPairingIsPiTimesLength) {
  const Grid g = wall_grid(8, 48, 48);
  auto m = flat(g);
  ComplexField u = straight_vortex(m, 0.05);
  auto phi = sample_one_form(g, [](const Vec3& x) {
    const double r = std::hypot(x[1] - 0.5, x[2] - 0.5);
    return Vec3{r < 0.3 ? 1.0 : 0.0, 0.0, 0.0};
  });
  EXPECT_NEAR(pair_current(u, phi) / std::numbers::pi, 1.0, 5e-3);
}

TEST(Field, ExactFormPairingVanishes) {
  const Grid g = wall_grid(24, 48, 48);
  auto m = flat(g);
  ComplexField u = make_field(m, 0.05, [](const Vec3& x) {
    // Slightly tilted vortex so that all three face families carry flux.
    const double c2 = 0.5 + 0.05 * std::sin(2 * std::numbers::pi * x[0]);
    const double y1 = x[1] - c2, y2 = x[2] - 0.5;
    return std::polar(core_profile(std::hypot(y1, y2) / 0.05), std::atan2(y2, y1));
  });
  // f is a smooth bump supported in |x - c| < 0.3 around a point on the filament.
  const Vec3 c{0.5, 0.5, 0.5};
  auto grad_f = [&](const Vec3& x) -> Vec3 {
    const Vec3 d = x - c;
    const double s = d.squaredNorm() / 0.09;
    if (s >= 1.0) return Vec3::Zero();
    return std::exp(-1.0 / (1.0 - s)) * (-2.0 / 0.09) / std::pow(1.0 - s, 2) * d;
  };
  const auto phi = sample_one_form(g, grad_f);
  const auto J = jacobian_2form(u);
  double scale = 0.0;
  for (std::size_t f = 0; f < J.size(); ++f) scale += std::abs(J[f] * phi[f]);
  EXPECT_GT(scale, 0.1);
  EXPECT_LT(std::abs(pair_current(J, phi)), 2e-3 * scale);
}

TEST(Field, StraightFilamentEnergyCalibration) {
  // Reference values from an independent NumPy evaluation of the same
  // discrete energy on the flat 64^3 box with unit cross-section.
  const Grid g = wall_grid(64, 64, 64);
  auto m = flat(g);
  const double expected[3] = {1.2497, 1.1808, 1.1323};
  const double eps[3] = {0.1, 0.05, 0.025};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(normalized_energy(straight_vortex(m, eps[i])), expected[i], 1e-3);
}

TEST(Field, GridConvergenceOfEnergy) {
  const double eps = 0.05;
  const auto coarse = normalized_energy(straight_vortex(flat(wall_grid(2, 40, 40, 0.5)), eps));
  const auto fine = normalized_energy(straight_vortex(flat(wall_grid(2, 80, 80, 0.5)), eps));
  EXPECT_LT(std::abs(fine - coarse) / fine, 0.01);
}

TEST(Field, FarFieldMeasureIsSmall) {
  // chi supported at distance > 4 eps from the filament.
  const Grid g = wall_grid(2, 96, 96);
  double prev = 1e9;
  for (double eps : {0.05, 0.025}) {
    ComplexField u = straight_vortex(flat(g), eps);
    std::vector<double> chi(u.size(), 0.0);
    for (std::size_t p = 0; p < u.size(); ++p) {
      const auto ijk = g.unindex(p);
      const Vec3 x = g.node(ijk[0], ijk[1], ijk[2]);
      if (std::hypot(x[1] - 0.5, x[2] - 0.5) > 0.2) chi[p] = 1.0;
    }
    const double v = measure_pairing(u, chi);
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Field, CheckpointRoundTripAndCorruption) {
  const Grid g = wall_grid(4, 6, 6);
  auto m = flat(g);
  ComplexField u = random_field(m, 0.07, 9);
  const std::string path = ::testing::TempDir() + "/vl_field.bin";
  write_checkpoint(path, u, 1.25);
  double t = 0.0;
  ComplexField v = load_field(path, m, &t);
  EXPECT_EQ(t, 1.25);
  EXPECT_EQ(v.epsilon, 0.07);
  EXPECT_EQ(v.values, u.values);
  auto other = flat(wall_grid(4, 6, 8));
  EXPECT_THROW(load_field(path, other), Error);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  try {
    read_checkpoint(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Resume);
  }
  std::remove(path.c_str());
}
