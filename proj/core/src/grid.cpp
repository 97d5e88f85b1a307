#include "vortexlab/grid.hpp"

#include <cmath>

#include "vortexlab/error.hpp"

namespace vortexlab {

Boundary parse_boundary(const std::string& s) {
  if (s == "periodic") return Boundary::Periodic;
  if (s == "reflecting" || s == "neumann") return Boundary::Reflecting;
  fail(ErrorCode::Validation, "unknown boundary kind '" + s + "'");
}

const char* to_string(Boundary b) { return b == Boundary::Periodic ? "periodic" : "reflecting"; }

Vec3 Grid::minimal_image(const Vec3& d) const {
  Vec3 r = d;
  for (int a = 0; a < 3; ++a) {
    if (!periodic(a)) continue;
    r[a] -= lengths[a] * std::round(r[a] / lengths[a]);
  }
  return r;
}

Vec3 Grid::wrap(const Vec3& x) const {
  Vec3 r = x;
  for (int a = 0; a < 3; ++a) {
    if (!periodic(a)) continue;
    r[a] -= lengths[a] * std::floor(r[a] / lengths[a]);
  }
  return r;
}

}  // namespace vortexlab
