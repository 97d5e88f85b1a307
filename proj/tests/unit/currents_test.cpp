#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "vortexlab/currents.hpp"
#include "vortexlab/error.hpp"

using namespace vortexlab;
using namespace vltest;

namespace {

struct Box {
  Grid g;
  MetricField m;
  std::shared_ptr<const CubicalComplex> C;
};

Box flat_box(int n0, int n1, int n2, double width = 1.0) {
  Box b{wall_grid(n0, n1, n2, width), {}, nullptr};
  b.m = flat_metric(b.g);
  b.C = std::make_shared<const CubicalComplex>(b.g);
  return b;
}

OneCurrent axis_loop(const Box& b, double y1 = 0.0, double y2 = 0.0) {
  return rasterize(axis_polyline(b.g, 64, y1, y2), b.C);
}

OneCurrent wavy_loop(const Box& b, std::mt19937& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double a1 = 0.12 * U(rng), a2 = 0.12 * U(rng), p1 = 3 * U(rng), p2 = 3 * U(rng);
  const double c1 = 0.5 + 0.1 * U(rng), c2 = 0.5 + 0.1 * U(rng);
  std::vector<Vec3> pts;
  for (int k = 0; k < 200; ++k) {
    const double t = k / 200.0;
    pts.emplace_back(t, c1 + a1 * std::sin(2 * std::numbers::pi * t + p1),
                     c2 + a2 * std::sin(4 * std::numbers::pi * t + p2));
  }
  return rasterize(close_polyline(pts, b.g), b.C);
}

RealChain1 as_real(const OneCurrent& T) {
  RealChain1 r;
  for (const auto& [e, k] : T.edges) r[e] = static_cast<double>(k);
  return r;
}

}  // namespace

TEST(Currents, BoundaryOfBoundaryVanishes) {
  const Box b = flat_box(5, 4, 4);
  const CubicalComplex& C = *b.C;
  for (std::size_t c = 0; c < C.vertex_count(); ++c) {
    if (!C.cube_exists(c)) continue;
    TwoChain S{b.C, {}};
    for (const auto& [f, s] : C.cube_boundary(c)) S.faces[f] += s;
    EXPECT_TRUE(boundary(S).empty());
  }
  for (std::size_t f = 0; f < 3 * C.vertex_count(); ++f) {
    if (!C.face_exists(f)) continue;
    OneCurrent T{b.C, {}};
    for (const auto& [e, s] : C.face_boundary(f)) T.add(e, s);
    EXPECT_EQ(T.edges.size(), 4u);
    EXPECT_TRUE(boundary(T).empty());
  }
}

TEST(Currents, DualEdgeAndPrimalFaceAreInverse) {
  const Box b = flat_box(4, 5, 6);
  const CubicalComplex& C = *b.C;
  int count = 0;
  for (std::size_t e = 0; e < 3 * C.vertex_count(); ++e) {
    const std::int64_t pf = C.primal_face(e);
    if (pf < 0) continue;
    EXPECT_EQ(C.dual_edge(static_cast<std::size_t>(pf)), static_cast<std::int64_t>(e));
    // The dual edge passes through the primal face centre.
    const Vec3 x = face_center(b.g, static_cast<std::size_t>(pf));
    EXPECT_LT((b.g.minimal_image(C.edge_midpoint(e) - x)).norm(), 1e-12);
    ++count;
  }
  // Periodic x1 with 4 nodes, walls in x2 (5 nodes) and x3 (6 nodes).
  EXPECT_EQ(count, 4 * 4 * 5 + 5 * 4 * 5 + 6 * 4 * 4);
}

TEST(Currents, ConstantFieldHasNoFilament) {
  const Box b = flat_box(8, 16, 16);
  auto dm = std::make_shared<const DiscreteMetric>(b.m);
  EXPECT_TRUE(extract_filament(make_field(dm, 0.1), b.C).empty());
}

TEST(Currents, StraightFilamentExtraction) {
  const Box b = flat_box(32, 32, 32);
  auto dm = std::make_shared<const DiscreteMetric>(b.m);
  const double eps = 4.0 / 32;
  ComplexField u = straight_vortex(dm, eps);
  OneCurrent T = extract_filament(u, b.C);
  EXPECT_TRUE(boundary(T).empty());
  const auto loops = decompose(T);
  ASSERT_EQ(loops.size(), 1u);
  EXPECT_EQ(loops[0].multiplicity, 1);
  EXPECT_NEAR(mass(T, b.m), 1.0, 1e-12);
  for (const Vec3& x : loops[0].points) {
    EXPECT_LE(std::abs(x[1] - 0.5), 1.0 / 32);
    EXPECT_LE(std::abs(x[2] - 0.5), 1.0 / 32);
  }
  // The same edges as the rasterized axis.
  EXPECT_EQ(T.edges, axis_loop(b).edges);
  // And off-centre filaments too.
  ComplexField v = straight_vortex(dm, eps, 1, 0.41, 0.62);
  EXPECT_EQ(extract_filament(v, b.C).edges, axis_loop(b, -0.09, 0.12).edges);
}

TEST(Currents, DegreeTwoVortexGivesMultiplicityTwo) {
  const Box b = flat_box(8, 16, 16);
  auto dm = std::make_shared<const DiscreteMetric>(b.m);
  ComplexField u = straight_vortex(dm, 4.0 / 16, 2);
  OneCurrent T = extract_filament(u, b.C);
  EXPECT_TRUE(boundary(T).empty());
  ASSERT_EQ(T.edges.size(), 8u);
  for (const auto& [e, m] : T.edges) {
    EXPECT_EQ(m, 2);
    EXPECT_EQ(b.C->edge_axis(e), 0);
  }
  const auto loops = decompose(T);
  ASSERT_EQ(loops.size(), 1u);
  EXPECT_EQ(loops[0].multiplicity, 2);
}

TEST(Currents, ExtractionBoundaryFreeOnRandomFields) {
  const Box b = flat_box(6, 6, 6);
  auto dm = std::make_shared<const DiscreteMetric>(b.m);
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    ComplexField u = make_field(dm, 0.2);
    for (auto& z : u.values) z = {U(rng), U(rng)};
    OneCurrent T = extract_filament(u, b.C);
    EXPECT_FALSE(T.empty());
    // Wall vertices may carry boundary where a filament ends on a wall.
    for (const auto& [v, k] : boundary(T)) {
      const auto q = b.C->coords(v);
      EXPECT_TRUE(q[1] == 0 || q[1] == b.C->dim(1) - 1 || q[2] == 0 || q[2] == b.C->dim(2) - 1);
    }
  }
}

TEST(Currents, Mass) {
  const Box b = flat_box(16, 16, 16);
  OneCurrent T = axis_loop(b);
  EXPECT_NEAR(mass(T, b.m), 1.0, 1e-12);
  OneCurrent T3{b.C, {}};
  for (const auto& [e, k] : T.edges) T3.add(e, 3 * k);
  EXPECT_NEAR(mass(T3, b.m), 3.0, 1e-12);
  EXPECT_EQ(mass(OneCurrent{b.C, {}}, b.m), 0.0);
}

TEST(Currents, PairingMatchesJacobianPairing) {
  const Box b = flat_box(16, 48, 48);
  auto dm = std::make_shared<const DiscreteMetric>(b.m);
  ComplexField u = make_field(dm, 0.05, [](const Vec3& x) {
    const double c2 = 0.5 + 0.08 * std::sin(2 * std::numbers::pi * x[0]);
    const double y1 = x[1] - c2, y2 = x[2] - 0.5;
    return std::polar(core_profile(std::hypot(y1, y2) / 0.05), std::atan2(y2, y1));
  });
  const auto phi = sample_one_form(b.g, [](const Vec3& x) {
    const double r = std::hypot(x[1] - 0.5, x[2] - 0.5);
    const double cut = r < 0.3 ? 1.0 : 0.0;
    return Vec3{cut * (1.0 + 0.5 * x[1]), cut * std::cos(2 * std::numbers::pi * x[0]), 0.2 * cut};
  });
  const OneCurrent T = extract_filament(u, b.C);
  EXPECT_NEAR(pair(T, phi), pair_current(u, phi) / std::numbers::pi, 0.03);
}

TEST(Currents, CsvRoundTripAndDecomposition) {
  const Box b = flat_box(16, 16, 16);
  std::mt19937 rng(8);
  OneCurrent T = wavy_loop(b, rng) - axis_loop(b, 0.2, -0.1);
  OneCurrent Ttwo{b.C, {}};
  for (const auto& [e, k] : axis_loop(b, -0.25, 0.25).edges) Ttwo.add(e, 2 * k);
  for (const auto& [e, k] : Ttwo.edges) T.add(e, k);
  const auto loops = decompose(T);
  long mult_sum = 0;
  for (const auto& l : loops) mult_sum += std::abs(l.multiplicity);
  EXPECT_EQ(loops.size(), 3u);
  EXPECT_EQ(mult_sum, 4);
  const std::string path = ::testing::TempDir() + "/vl_current.csv";
  write_current_csv(path, T, "# test");
  EXPECT_EQ(read_current_csv(path, b.C).edges, T.edges);
}

TEST(Currents, SpanningChainBoundsTheDifference) {
  const Box b = flat_box(16, 16, 16);
  std::mt19937 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const OneCurrent D = wavy_loop(b, rng) - wavy_loop(b, rng);
    const TwoChain S = spanning_chain(D);
    EXPECT_EQ(boundary(S), as_real(D));
  }
  // An axis loop alone winds around the periodic axis and bounds nothing.
  try {
    spanning_chain(axis_loop(b));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Homology);
  }
}

TEST(Currents, FlatNormOfEqualCurrentsIsZero) {
  const Box b = flat_box(16, 16, 16);
  const OneCurrent T = axis_loop(b);
  EXPECT_EQ(flat_norm(T, T, b.m).value, 0.0);
}

TEST(Currents, FlatNormParallelLoopsIsCylinderArea) {
  const Box b = flat_box(16, 32, 32);
  const double h = 1.0 / 32;
  for (int k : {2, 4, 8}) {
    const OneCurrent T1 = axis_loop(b), T2 = axis_loop(b, k * h, 0.0);
    const FlatNormResult r = flat_norm(T1, T2, b.m);
    EXPECT_NEAR(r.value, k * h, 1e-9);
    EXPECT_EQ(boundary(r.witness), as_real(T1 - T2));
    EXPECT_NEAR(mass(r.witness, b.m), r.value, 1e-12);
  }
}

TEST(Currents, FlatNormOfSquareLoopIsItsArea) {
  const Box b = flat_box(16, 32, 32);
  const double h0 = 1.0 / 16, h = 1.0 / 32;
  for (int side : {2, 5}) {
    // Square in the (x1, x2) plane: side cells of dual edges.
    OneCurrent T{b.C, {}};
    const CubicalComplex& C = *b.C;
    std::array<int, 3> q{3, 10, 12};
    for (int s = 0; s < side; ++s) {
      T.add(C.edge_id(0, C.vertex({q[0] + s, q[1], q[2]})), +1);
      T.add(C.edge_id(1, C.vertex({q[0] + side, q[1] + s, q[2]})), +1);
      T.add(C.edge_id(0, C.vertex({q[0] + s, q[1] + side, q[2]})), -1);
      T.add(C.edge_id(1, C.vertex({q[0], q[1] + s, q[2]})), -1);
    }
    ASSERT_TRUE(boundary(T).empty());
    const double area = side * side * h0 * h;
    EXPECT_NEAR(flat_norm(T, OneCurrent{b.C, {}}, b.m).value, area, 1e-12);
  }
}

TEST(Currents, FlatNormIsAMetric) {
  const Box b = flat_box(16, 16, 16);
  std::mt19937 rng(21);
  for (int trial = 0; trial < 4; ++trial) {
    const OneCurrent A = wavy_loop(b, rng), B = wavy_loop(b, rng), Cc = wavy_loop(b, rng);
    const double ab = flat_norm(A, B, b.m).value, ba = flat_norm(B, A, b.m).value;
    const double bc = flat_norm(B, Cc, b.m).value, ac = flat_norm(A, Cc, b.m).value;
    EXPECT_NEAR(ab, ba, 1e-8);
    EXPECT_LE(ac, ab + bc + 1e-8);
  }
}

TEST(Currents, LocalSolveMatchesFullBox) {
  const Box b = flat_box(16, 16, 16);
  std::mt19937 rng(5);
  const OneCurrent A = wavy_loop(b, rng), B = wavy_loop(b, rng);
  FlatNormOptions local, full;
  full.local = false;
  local.margin_cells = 1;  // small margin to exercise the fallback path
  const double vl = flat_norm(A, B, b.m, local).value;
  const double vf = flat_norm(A, B, b.m, full).value;
  EXPECT_NEAR(vl, vf, 1e-10);
}

TEST(Currents, OneCellShiftIsBoundedByMassTimesSpacing) {
  const Box b = flat_box(16, 16, 16);
  std::mt19937 rng(9);
  const OneCurrent T = wavy_loop(b, rng);
  const double h = 1.0 / 16;
  const double v = flat_norm(T, shifted(T, {0, 1, 0}), b.m).value;
  EXPECT_LE(v, h * mass(T, b.m) + 1e-12);
  EXPECT_GT(v, 0.0);
}

TEST(Currents, ClassHintIsUsedWhenValid) {
  const Box b = flat_box(8, 16, 16);
  const OneCurrent T1 = axis_loop(b), T2 = axis_loop(b, 0.125, 0.0);
  const TwoChain hint = spanning_chain(T1 - T2);
  FlatNormOptions o;
  o.class_hint = &hint;
  EXPECT_NEAR(flat_norm(T1, T2, b.m, o).value, 0.125, 1e-12);
  TwoChain bogus{b.C, {{5, 0.5}}};
  o.class_hint = &bogus;
  EXPECT_NEAR(flat_norm(T1, T2, b.m, o).value, 0.125, 1e-12);
}

TEST(Currents, DifferentClassesRaiseHomologyError) {
  const Box b = flat_box(8, 16, 16);
  try {
    flat_norm(axis_loop(b), OneCurrent{b.C, {}}, b.m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Homology);
  }
}
