#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "test_util.hpp"
#include "vortexlab/error.hpp"
#include "vortexlab/minmax.hpp"

using namespace vortexlab;
using namespace vltest;

namespace {

constexpr double kEps = 0.1;

class MinmaxTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const Grid g = wall_grid(16, 32, 32);
    metric_ = std::make_shared<const DiscreteMetric>(benchmark_metric(g));
    chart_ = build_saddle_chart(metric_, axis_polyline(g, 128), 128, 0.25);
  }
  static void TearDownTestSuite() {
    chart_.reset();
    metric_.reset();
  }
  static Eigen::VectorXd W(double w) { return Eigen::VectorXd::Constant(1, w); }

  static std::shared_ptr<const DiscreteMetric> metric_;
  static std::shared_ptr<const SaddleChart> chart_;
};

std::shared_ptr<const DiscreteMetric> MinmaxTest::metric_;
std::shared_ptr<const SaddleChart> MinmaxTest::chart_;

}  // namespace

TEST_F(MinmaxTest, ChartShape) {
  EXPECT_EQ(chart_->ell(), 1);
  EXPECT_DOUBLE_EQ(chart_->R(), 0.25 / 8);
  EXPECT_NEAR(chart_->length(), 1.0, 1e-9);
  EXPECT_EQ(chart_->frame_orientation(), 1);
  EXPECT_DOUBLE_EQ(chart_->bump(0.0), 1.0);
  EXPECT_DOUBLE_EQ(chart_->bump(0.25 / 4), 1.0);
  EXPECT_DOUBLE_EQ(chart_->bump(0.25 / 2), 0.0);
  EXPECT_DOUBLE_EQ(chart_->time_cutoff(W(0.4 * chart_->R())), 1.0);
  EXPECT_DOUBLE_EQ(chart_->time_cutoff(W(-chart_->R())), 0.0);
  // The unstable benchmark mode is constant along the loop.
  const Vec2 d0 = chart_->displacement(W(1.0), 0.0), d1 = chart_->displacement(W(1.0), 0.37);
  EXPECT_NEAR((d0 - d1).norm(), 0.0, 1e-8);
  EXPECT_NEAR(d0.norm(), 1.0, 1e-8);
}

TEST_F(MinmaxTest, RejectsBadRadiusAndW) {
  const Grid g = wall_grid(8, 8, 8);
  auto m = std::make_shared<const DiscreteMetric>(benchmark_metric(g));
  EXPECT_THROW(build_saddle_chart(m, axis_polyline(g, 32), 32, 0.25, 0.25 / 4), Error);
  try {
    initial_data(*chart_, W(1.01 * chart_->R()), kEps);
    FAIL() << "expected a domain error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Domain);
  }
  EXPECT_THROW(initial_data(*chart_, Eigen::VectorXd::Zero(2), kEps), Error);
}

TEST_F(MinmaxTest, InverseShiftInvertsOw) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double R = chart_->R();
  for (int i = 0; i < 200; ++i) {
    const Vec2 y(0.2 * U(rng), 0.2 * U(rng));
    Vec2 d(U(rng), U(rng));
    d *= R * std::abs(U(rng)) / d.norm();
    const Vec2 z = chart_->inverse_shift(y, d);
    EXPECT_NEAR((z + chart_->bump(z.norm()) * d - y).norm(), 0.0, 1e-12);
  }
}

TEST_F(MinmaxTest, DatumAtOriginSitsOnTheGeodesic) {
  const ComplexField u = initial_data(*chart_, W(0.0), kEps);
  EXPECT_LE(max_modulus(u), 1.0 + 1e-15);
  const OneCurrent T = extract_filament(u, chart_->complex());
  EXPECT_EQ(T.edges, chart_->geodesic_current().edges);
  EXPECT_LT(std::abs(saddle_projection(*chart_, u)[0]), 1e-12 * chart_->R());
  EXPECT_NEAR(flat_norm_to_geodesic(*chart_, u), 0.0, 1e-12);
  // Far from the tube the datum is the unit winding phase about the axis.
  const Grid& g = metric_->grid();
  const std::size_t p = g.index(3, 1, 16);
  const Vec3 x = g.node(3, 1, 16);
  EXPECT_NEAR(std::abs(u[p] - std::polar(1.0, std::atan2(x[2] - 0.5, x[1] - 0.5))), 0.0, 1e-12);
}

TEST_F(MinmaxTest, ConstantFieldProjectsToZero) {
  const ComplexField u = make_field(metric_, kEps, Complex(1.0));
  EXPECT_EQ(saddle_projection(*chart_, u)[0], 0.0);
}

TEST(MinmaxCalibration, ProjectionRecoversW) {
  // Needs several cells across B_R and a core inside the rigid zone of the
  // bump (eps < r0 / 4), so this runs finer than the shared fixture. The
  // axis is straight, so few x1 cells suffice.
  const Grid g = wall_grid(4, 64, 64);
  auto m = std::make_shared<const DiscreteMetric>(benchmark_metric(g));
  const auto chart = build_saddle_chart(m, axis_polyline(g, 128), 128, 0.25);
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double R = chart->R();
  for (int i = 0; i < 20; ++i) {
    const double w = R * U(rng);
    const double P = saddle_projection(*chart, initial_data(*chart, Eigen::VectorXd::Constant(1, w), 0.05))[0];
    EXPECT_LE(std::abs(P - w), 0.05 * R) << "w = " << w;
  }
}

TEST_F(MinmaxTest, DatumIsLipschitzInW) {
  // Measured constant for small pairs versus well separated pairs.
  auto dist = [&](double a, double b) {
    return l2_distance(initial_data(*chart_, W(a), kEps), initial_data(*chart_, W(b), kEps));
  };
  const double R = chart_->R();
  const double c_ref = dist(0.0, 0.05 * R) / (0.05 * R);
  ASSERT_GT(c_ref, 0.0);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 6; ++i) {
    const double a = R * U(rng), b = R * U(rng);
    const double c = dist(a, b) / std::abs(a - b);
    EXPECT_LT(c, 2.0 * c_ref);
    EXPECT_GT(c, 0.25 * c_ref);
  }
}

TEST_F(MinmaxTest, ArclengthIsSaddleShaped) {
  // Unstable direction: L - c s^2. First stable direction: L + c' s^2.
  const double R = chart_->R();
  for (int mode : {0, 1}) {
    std::vector<double> s, len;
    for (int i = -5; i <= 5; ++i) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
      w[mode] = 0.1 * i * R;
      s.push_back(w[mode]);
      len.push_back(perturbed_length(*chart_, w));
    }
    // Least squares L0 + c s^2.
    Eigen::MatrixXd A(s.size(), 2);
    Eigen::VectorXd b(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      A(i, 0) = 1.0;
      A(i, 1) = s[i] * s[i];
      b[i] = len[i];
    }
    const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
    const double mean = b.mean();
    const double ss_res = (A * x - b).squaredNorm();
    const double ss_tot = (b.array() - mean).square().sum();
    EXPECT_GT(1.0 - ss_res / ss_tot, 0.95);
    EXPECT_NEAR(x[0], 1.0, 1e-6);
    if (mode == 0)
      EXPECT_LT(x[1], 0.0);
    else
      EXPECT_GT(x[1], 0.0);
  }
}

TEST_F(MinmaxTest, FamilyFlowEndpointsAndCutoff) {
  const double R = chart_->R();
  const ComplexField u0 = initial_data(*chart_, W(0.3 * R), kEps);
  FamilyOptions o;
  o.observer_period = 1;
  o.flat_norm = false;
  const FamilyRun r0 = family_flow(*chart_, kEps, W(0.3 * R), 0.0, o);
  EXPECT_EQ(r0.field.values, u0.values);
  const FamilyRun frozen = family_flow(*chart_, kEps, W(R), 0.05, o);
  EXPECT_EQ(frozen.flow_time, 0.0);
  EXPECT_EQ(frozen.field.values, initial_data(*chart_, W(R), kEps).values);

  const FamilyRun r = family_flow(*chart_, kEps, W(0.3 * R), 0.02, o);
  ASSERT_GE(r.trace.size(), 3u);
  EXPECT_NEAR(r.trace.back().time, 0.02, 1e-12);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i].energy, r.trace[i - 1].energy);
  EXPECT_LE(r.best_residual, r.trace.front().residual);
  // Partial cutoff: chi(0.7 R) t.
  const FamilyRun h = family_flow(*chart_, kEps, W(0.7 * R), 0.02, o);
  EXPECT_NEAR(h.flow_time, chart_->time_cutoff(W(0.7 * R)) * 0.02, 1e-15);
  EXPECT_GT(h.flow_time, 0.0);
  EXPECT_LT(h.flow_time, 0.02);
}

TEST_F(MinmaxTest, EndpointsAreSampleMaxima) {
  EXPECT_THROW(minmax_endpoints(*chart_, kEps, 2), Error);
  const MinmaxEndpoints e = minmax_endpoints(*chart_, kEps, 5);
  ASSERT_EQ(e.ball_samples.size(), 5u);
  EXPECT_EQ(e.ball_samples[0][0], 0.0);
  EXPECT_EQ(e.d, *std::max_element(e.ball_energies.begin(), e.ball_energies.end()));
  const double Ep = normalized_energy(initial_data(*chart_, W(chart_->R()), kEps));
  const double Em = normalized_energy(initial_data(*chart_, W(-chart_->R()), kEps));
  EXPECT_DOUBLE_EQ(e.a, std::max(Ep, Em));
  // The benchmark is symmetric under y2 -> -y2.
  EXPECT_NEAR(Ep, Em, 1e-10);
}

TEST(MinmaxSamples, HaltonBallAndSphere) {
  for (int ell : {1, 2, 3}) {
    const auto b = ball_samples(ell, 0.5, 17);
    ASSERT_EQ(b.size(), 17u);
    EXPECT_EQ(b[0].norm(), 0.0);
    for (const auto& w : b) EXPECT_LE(w.norm(), 0.5 + 1e-15);
    const auto s = sphere_samples(ell, 0.5, 9);
    EXPECT_EQ(s.size(), ell == 1 ? 2u : 9u);
    for (const auto& w : s) EXPECT_NEAR(w.norm(), 0.5, 1e-15);
  }
  // Deterministic.
  EXPECT_EQ(ball_samples(2, 1.0, 9)[5], ball_samples(2, 1.0, 9)[5]);
}

TEST(MinmaxRoots, BisectionFindsSignChange) {
  auto f = [](double w) { return std::tanh(3.0 * (w - 0.3)); };
  const RootResult r = bisect_root(f, -1.0, 1.0, f(-1.0), f(1.0), 1e-9);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.w[0], 0.3, 1e-9);
  EXPECT_LE(std::abs(r.value[0]), 1e-9);
  try {
    bisect_root(f, 0.5, 1.0, f(0.5), f(1.0), 1e-9);
    FAIL() << "expected a degree-condition error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegreeCondition);
  }
  const RootResult capped = bisect_root(f, -1.0, 1.0, f(-1.0), f(1.0), 1e-15, 5);
  EXPECT_FALSE(capped.converged);
  EXPECT_EQ(capped.iterations, 5);
}

TEST(MinmaxRoots, BroydenWithContinuation) {
  // Synthetic projection map: a rotation-shear of w about a tau-dependent root.
  auto F = [](const Eigen::VectorXd& w, double tau) {
    Eigen::Vector2d root(0.3 * tau, -0.2 * tau);
    Eigen::Matrix2d A;
    A << 1.0 + tau, 0.4 * tau, -0.3 * tau, 1.0 + 0.5 * tau;
    Eigen::VectorXd out = A * (w - root) + 0.05 * (w - root).cwiseAbs2();
    return out;
  };
  const RootResult r = broyden_root(F, 2, 1.0, 1.0, 1e-10);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.w[0], 0.3, 1e-8);
  EXPECT_NEAR(r.w[1], -0.2, 1e-8);
}

TEST_F(MinmaxTest, GoodTrajectoryShortHorizon) {
  TrajectoryOptions o;
  o.family.observer_period = 2;
  const GoodTrajectory gt = good_trajectory(*chart_, kEps, 0.02, o);
  EXPECT_TRUE(gt.converged);
  EXPECT_LE(std::abs(gt.projection[0]), 1e-3 * chart_->R());
  EXPECT_LT(std::abs(gt.w[0]), 0.05 * chart_->R());
  ASSERT_GE(gt.log.size(), 3u);
  // Frozen endpoints straddle zero.
  EXPECT_LT(gt.log[0].projection[0], 0.0);
  EXPECT_GT(gt.log[1].projection[0], 0.0);
  ASSERT_FALSE(gt.trace.empty());
  double emin = gt.trace.front().energy;
  for (const auto& r : gt.trace) {
    emin = std::min(emin, r.energy);
    EXPECT_LT(r.flat_norm, 0.1);
  }
  EXPECT_DOUBLE_EQ(gt.delta, std::max(gt.trace.front().energy - chart_->length(), chart_->length() - emin));
}

TEST_F(MinmaxTest, ExtractCriticalLevelsAndErrors) {
  CriticalOptions o;
  o.k_max = 0;
  EXPECT_THROW(extract_critical(*chart_, kEps, o), Error);
  o.k_max = 2;
  o.tau0 = 0.005;
  o.tol_res = 1e-12;
  o.trajectory.family.observer_period = 2;
  try {
    extract_critical(*chart_, kEps, o);
    FAIL() << "expected a convergence failure";
  } catch (const ConvergenceFailure& f) {
    EXPECT_EQ(f.code(), ErrorCode::Convergence);
    const CriticalResult& r = f.best();
    ASSERT_EQ(r.best_residuals.size(), 2u);
    EXPECT_LE(r.best_residuals[1], r.best_residuals[0]);
    EXPECT_EQ(r.taus, (std::vector<double>{0.01, 0.02}));
    EXPECT_TRUE(r.snapshot.metric != nullptr);
    EXPECT_NEAR(residual(r.snapshot), r.residual, 1e-12 * r.residual);
    EXPECT_FALSE(r.targets_met);
  }
  o.tol_res = 1e6;
  const CriticalResult r = extract_critical(*chart_, kEps, o);
  EXPECT_EQ(r.k, 1);
  EXPECT_TRUE(r.residual_met);
  EXPECT_NEAR(r.energy_gap, std::abs(normalized_energy(r.snapshot) - 1.0), 1e-9);

  const std::string path = ::testing::TempDir() + "snapshot_test.bin";
  write_snapshot(path, r, kEps, "# snapshot test");
  double t = -1.0;
  const ComplexField back = load_field(path, metric_, &t);
  EXPECT_EQ(back.values, r.snapshot.values);
  EXPECT_EQ(t, r.time);
  std::ifstream meta(path + ".meta");
  std::string line;
  std::getline(meta, line);
  EXPECT_EQ(line, "# snapshot test");
  bool found = false;
  while (std::getline(meta, line)) found |= line.rfind("targets_met = ", 0) == 0;
  EXPECT_TRUE(found);
  std::remove(path.c_str());
  std::remove((path + ".meta").c_str());
}

TEST(MinmaxCsv, SessionColumns) {
  SessionRow row;
  row.iteration = 0;
  row.w = Eigen::VectorXd::Constant(1, 0.01);
  row.projection = Eigen::VectorXd::Constant(1, -0.002);
  row.energy_tau = 1.1;
  const std::string path = ::testing::TempDir() + "session_test.csv";
  write_session_csv(path, {row, row}, "# h");
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  std::getline(is, line);
  EXPECT_EQ(line, "iteration,w0,P0,E_tau,flat_norm_tau");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 5), "0,0.0");
  EXPECT_NE(line.find("nan"), std::string::npos);
  std::remove(path.c_str());
}
