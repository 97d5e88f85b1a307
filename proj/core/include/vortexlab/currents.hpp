#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vortexlab/field.hpp"
#include "vortexlab/geometry.hpp"

namespace vortexlab {

// Cubical complex dual to the node grid. On a periodic axis with n nodes it
// has n vertices at (q + 1/2) h; on a reflecting axis it has n + 1 vertices
// at q h, including both walls. A dual edge along d crosses exactly one
// primal face normal to d, and a dual cube contains exactly one primal node.
//
// Ids: vertex v = (q0 * m1 + q1) * m2 + q2; edge (d, v) = d * V + v runs from v
// to v + e_d; face (n, v) = n * V + v is spanned by a = (n+1)%3, b = (n+2)%3
// at base v; cube v has base vertex v.
class CubicalComplex {
 public:
  explicit CubicalComplex(const Grid& primal);

  const Grid& primal() const { return primal_; }
  int dim(int d) const { return m_[d]; }
  bool periodic(int d) const { return primal_.periodic(d); }
  double spacing(int d) const { return primal_.spacing(d); }
  std::size_t vertex_count() const { return V_; }

  std::size_t vertex(const std::array<int, 3>& q) const {
    return (static_cast<std::size_t>(q[0]) * m_[1] + q[1]) * m_[2] + q[2];
  }
  std::array<int, 3> coords(std::size_t v) const;
  // Position of vertex coordinates q, which may lie outside [0, m) on periodic axes.
  Vec3 position(const std::array<int, 3>& q) const;
  Vec3 position(std::size_t v) const { return position(coords(v)); }
  // v + s e_d, or -1 past a wall.
  std::int64_t shift(std::size_t v, int d, int s) const;

  bool edge_exists(std::size_t e) const;
  bool face_exists(std::size_t f) const;
  bool cube_exists(std::size_t c) const;
  std::size_t edge_id(int d, std::size_t v) const { return d * V_ + v; }
  int edge_axis(std::size_t e) const { return static_cast<int>(e / V_); }
  std::size_t edge_tail(std::size_t e) const { return e % V_; }
  std::size_t edge_head(std::size_t e) const;
  // Oriented boundary of a face as (edge id, +-1), and of a cube as (face id, +-1).
  std::array<std::pair<std::size_t, int>, 4> face_boundary(std::size_t f) const;
  std::array<std::pair<std::size_t, int>, 6> cube_boundary(std::size_t c) const;
  // Cubes adjacent to a face with the incidence sign of the face in their boundary.
  std::vector<std::pair<std::size_t, int>> face_cofaces(std::size_t f) const;

  // Dual vertex whose primal cell contains x.
  std::size_t vertex_of_point(const Vec3& x) const;
  // Primal face crossed by a dual edge (face id as in the field module), and back.
  std::int64_t primal_face(std::size_t e) const;
  std::int64_t dual_edge(std::size_t primal_face) const;

  Vec3 edge_midpoint(std::size_t e) const;
  Vec3 face_center(std::size_t f) const;
  // Metric length of an edge and metric area of a face, midpoint rule.
  double edge_length(std::size_t e, const MetricField& m) const;
  double face_area(std::size_t f, const MetricField& m) const;

 private:
  Grid primal_;
  std::array<int, 3> m_{};
  std::size_t V_ = 0;
  Vec3 origin_;
};

using Chain1 = std::map<std::size_t, long>;    // edge id -> multiplicity
using Chain0 = std::map<std::size_t, long>;    // vertex id -> multiplicity
using RealChain1 = std::map<std::size_t, double>;

struct OneCurrent {
  std::shared_ptr<const CubicalComplex> complex;
  Chain1 edges;

  bool empty() const { return edges.empty(); }
  void add(std::size_t e, long m);
};

struct TwoChain {
  std::shared_ptr<const CubicalComplex> complex;
  std::map<std::size_t, double> faces;
};

Chain0 boundary(const OneCurrent& T);
RealChain1 boundary(const TwoChain& S);
double mass(const OneCurrent& T, const MetricField& m);
double mass(const TwoChain& S, const MetricField& m);
OneCurrent operator-(const OneCurrent& a, const OneCurrent& b);
// Translation by whole cells along periodic axes (or inside the walls).
OneCurrent shifted(const OneCurrent& T, const std::array<int, 3>& cells);
// T(phi) with phi stored per primal face as in pair_current.
double pair(const OneCurrent& T, const std::vector<double>& phi);

// Dual edge through each face with nonzero winding, carrying that winding.
// Throws an extraction error if a winding face remains ambiguous.
OneCurrent extract_filament(const ComplexField& u, std::shared_ptr<const CubicalComplex> complex = nullptr,
                            double amp_min = kAmpMin);

// Integral current of a closed polyline: each crossing between dual cells adds
// the dual edge joining them.
OneCurrent rasterize(const ClosedPolyline& p, std::shared_ptr<const CubicalComplex> complex);

struct PolyLoop {
  std::vector<std::size_t> vertices;  // dual vertex ids; the loop closes back to the first
  std::vector<Vec3> points;           // unwrapped positions
  long multiplicity = 1;
};

// Greedy edge following with smallest-turn preference. Loops of uniform
// multiplicity are reported once with that multiplicity.
std::vector<PolyLoop> decompose(const OneCurrent& T);

// Columns: loop, vertex, x1, x2, x3, multiplicity.
void write_current_csv(const std::string& path, const OneCurrent& T, const std::string& header);
OneCurrent read_current_csv(const std::string& path, std::shared_ptr<const CubicalComplex> complex);

struct FlatNormOptions {
  const TwoChain* class_hint = nullptr;
  int margin_cells = 8;   // locality margin around the supports
  bool local = true;      // false solves on the whole box directly
  int max_steps = 200;
};

struct FlatNormResult {
  double value = 0.0;
  TwoChain witness;
  bool full_box = false;  // the local solve touched its region boundary and was redone
  int steps = 0;
};

// min sum_f area(f) |S_f| over 2-chains with boundary T1 - T2.
FlatNormResult flat_norm(const OneCurrent& T1, const OneCurrent& T2, const MetricField& m,
                         const FlatNormOptions& opts = {});

// A 2-chain with boundary D, from sweeping D to a plane and then to a line.
// Throws a homology error when D does not bound in the box.
TwoChain spanning_chain(const OneCurrent& D);

}  // namespace vortexlab
