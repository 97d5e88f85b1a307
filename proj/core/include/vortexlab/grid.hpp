#pragma once

#include <array>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

namespace vortexlab {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

enum class Boundary { Periodic, Reflecting };

Boundary parse_boundary(const std::string& s);
const char* to_string(Boundary b);

// Node grid on the box. Periodic axes carry nodes at i*h; reflecting axes carry
// cell-centered nodes at (i + 1/2) h with walls at 0 and the box length.
struct Grid {
  std::array<int, 3> dims{1, 1, 1};
  std::array<double, 3> lengths{1.0, 1.0, 1.0};
  std::array<Boundary, 3> boundary{Boundary::Periodic, Boundary::Periodic, Boundary::Periodic};

  double spacing(int d) const { return lengths[d] / dims[d]; }
  bool periodic(int d) const { return boundary[d] == Boundary::Periodic; }
  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
  }
  std::array<int, 3> unindex(std::size_t p) const {
    const int k = static_cast<int>(p % dims[2]);
    const std::size_t q = p / dims[2];
    return {static_cast<int>(q / dims[1]), static_cast<int>(q % dims[1]), k};
  }
  double coordinate(int d, int i) const {
    return periodic(d) ? i * spacing(d) : (i + 0.5) * spacing(d);
  }
  Vec3 node(int i, int j, int k) const {
    return {coordinate(0, i), coordinate(1, j), coordinate(2, k)};
  }
  double cell_volume() const { return spacing(0) * spacing(1) * spacing(2); }

  // Minimal-image displacement: wraps periodic components into (-L/2, L/2].
  Vec3 minimal_image(const Vec3& d) const;
  // Position reduced into the fundamental box along periodic axes.
  Vec3 wrap(const Vec3& x) const;

  bool operator==(const Grid& o) const {
    return dims == o.dims && lengths == o.lengths && boundary == o.boundary;
  }
};

}  // namespace vortexlab
