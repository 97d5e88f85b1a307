#include "vortexlab/currents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "maxflow.hpp"
#include "vortexlab/error.hpp"

namespace vortexlab {

// ---------------------------------------------------------------- complex

CubicalComplex::CubicalComplex(const Grid& primal) : primal_(primal) {
  for (int d = 0; d < 3; ++d) {
    m_[d] = primal.periodic(d) ? primal.dims[d] : primal.dims[d] + 1;
    origin_[d] = primal.periodic(d) ? 0.5 * primal.spacing(d) : 0.0;
  }
  V_ = static_cast<std::size_t>(m_[0]) * m_[1] * m_[2];
}

std::array<int, 3> CubicalComplex::coords(std::size_t v) const {
  const int q2 = static_cast<int>(v % m_[2]);
  const std::size_t r = v / m_[2];
  return {static_cast<int>(r / m_[1]), static_cast<int>(r % m_[1]), q2};
}

Vec3 CubicalComplex::position(const std::array<int, 3>& q) const {
  return {origin_[0] + q[0] * spacing(0), origin_[1] + q[1] * spacing(1), origin_[2] + q[2] * spacing(2)};
}

std::int64_t CubicalComplex::shift(std::size_t v, int d, int s) const {
  auto q = coords(v);
  q[d] += s;
  if (q[d] < 0 || q[d] >= m_[d]) {
    if (!periodic(d)) return -1;
    q[d] = ((q[d] % m_[d]) + m_[d]) % m_[d];
  }
  return static_cast<std::int64_t>(vertex(q));
}

bool CubicalComplex::edge_exists(std::size_t e) const {
  if (e >= 3 * V_) return false;
  const int d = edge_axis(e);
  return periodic(d) || coords(edge_tail(e))[d] < m_[d] - 1;
}

bool CubicalComplex::face_exists(std::size_t f) const {
  if (f >= 3 * V_) return false;
  const int n = static_cast<int>(f / V_);
  const std::size_t v = f % V_;
  return edge_exists(edge_id((n + 1) % 3, v)) && edge_exists(edge_id((n + 2) % 3, v));
}

bool CubicalComplex::cube_exists(std::size_t c) const {
  for (int d = 0; d < 3; ++d)
    if (!edge_exists(edge_id(d, c))) return false;
  return true;
}

std::size_t CubicalComplex::edge_head(std::size_t e) const {
  return static_cast<std::size_t>(shift(edge_tail(e), edge_axis(e), +1));
}

std::array<std::pair<std::size_t, int>, 4> CubicalComplex::face_boundary(std::size_t f) const {
  const int n = static_cast<int>(f / V_);
  const std::size_t v = f % V_;
  const int a = (n + 1) % 3, b = (n + 2) % 3;
  const auto va = static_cast<std::size_t>(shift(v, a, +1));
  const auto vb = static_cast<std::size_t>(shift(v, b, +1));
  return {{{edge_id(a, v), +1}, {edge_id(b, va), +1}, {edge_id(a, vb), -1}, {edge_id(b, v), -1}}};
}

std::array<std::pair<std::size_t, int>, 6> CubicalComplex::cube_boundary(std::size_t c) const {
  std::array<std::pair<std::size_t, int>, 6> out;
  for (int n = 0; n < 3; ++n) {
    out[2 * n] = {n * V_ + static_cast<std::size_t>(shift(c, n, +1)), +1};
    out[2 * n + 1] = {n * V_ + c, -1};
  }
  return out;
}

std::vector<std::pair<std::size_t, int>> CubicalComplex::face_cofaces(std::size_t f) const {
  std::vector<std::pair<std::size_t, int>> out;
  const int n = static_cast<int>(f / V_);
  const std::size_t v = f % V_;
  if (cube_exists(v)) out.emplace_back(v, -1);
  const std::int64_t below = shift(v, n, -1);
  if (below >= 0 && cube_exists(static_cast<std::size_t>(below))) out.emplace_back(static_cast<std::size_t>(below), +1);
  return out;
}

std::size_t CubicalComplex::vertex_of_point(const Vec3& x) const {
  std::array<int, 3> q{};
  for (int d = 0; d < 3; ++d) {
    int c = static_cast<int>(std::floor((x[d] - origin_[d]) / spacing(d) + 0.5));
    if (periodic(d))
      c = ((c % m_[d]) + m_[d]) % m_[d];
    else
      c = std::clamp(c, 0, m_[d] - 1);
    q[d] = c;
  }
  return vertex(q);
}

std::int64_t CubicalComplex::primal_face(std::size_t e) const {
  if (!edge_exists(e)) return -1;
  const int d = edge_axis(e);
  const auto q = coords(edge_tail(e));
  std::array<int, 3> p{};
  for (int k = 0; k < 3; ++k) {
    const int n = primal_.dims[k];
    if (k == d) {
      p[k] = periodic(k) ? (q[k] + 1) % n : q[k];
    } else {
      p[k] = periodic(k) ? q[k] : q[k] - 1;
      if (!periodic(k) && (p[k] < 0 || p[k] > n - 2)) return -1;
    }
  }
  return static_cast<std::int64_t>(d * primal_.size() + primal_.index(p[0], p[1], p[2]));
}

std::int64_t CubicalComplex::dual_edge(std::size_t pf) const {
  const std::size_t N = primal_.size();
  const int d = static_cast<int>(pf / N);
  const auto p = primal_.unindex(pf % N);
  std::array<int, 3> q{};
  for (int k = 0; k < 3; ++k) {
    const int n = primal_.dims[k];
    if (k == d) {
      q[k] = periodic(k) ? (p[k] - 1 + n) % n : p[k];
    } else {
      if (!periodic(k) && p[k] > n - 2) return -1;
      q[k] = periodic(k) ? p[k] : p[k] + 1;
    }
  }
  return static_cast<std::int64_t>(edge_id(d, vertex(q)));
}

Vec3 CubicalComplex::edge_midpoint(std::size_t e) const {
  const int d = edge_axis(e);
  Vec3 x = position(edge_tail(e));
  x[d] += 0.5 * spacing(d);
  return x;
}

Vec3 CubicalComplex::face_center(std::size_t f) const {
  const int n = static_cast<int>(f / V_);
  Vec3 x = position(f % V_);
  for (int k = 0; k < 3; ++k)
    if (k != n) x[k] += 0.5 * spacing(k);
  return x;
}

double CubicalComplex::edge_length(std::size_t e, const MetricField& m) const {
  const int d = edge_axis(e);
  return std::sqrt(m.at(edge_midpoint(e))(d, d)) * spacing(d);
}

double CubicalComplex::face_area(std::size_t f, const MetricField& m) const {
  const int n = static_cast<int>(f / V_);
  const int a = (n + 1) % 3, b = (n + 2) % 3;
  const Mat3 g = m.at(face_center(f));
  return std::sqrt(std::max(0.0, g(a, a) * g(b, b) - g(a, b) * g(a, b))) * spacing(a) * spacing(b);
}

// ---------------------------------------------------------------- chains

void OneCurrent::add(std::size_t e, long m) {
  if (m == 0) return;
  const long v = (edges[e] += m);
  if (v == 0) edges.erase(e);
}

Chain0 boundary(const OneCurrent& T) {
  Chain0 out;
  for (const auto& [e, m] : T.edges) {
    out[T.complex->edge_head(e)] += m;
    out[T.complex->edge_tail(e)] -= m;
  }
  std::erase_if(out, [](const auto& kv) { return kv.second == 0; });
  return out;
}

RealChain1 boundary(const TwoChain& S) {
  RealChain1 out;
  for (const auto& [f, c] : S.faces)
    for (const auto& [e, s] : S.complex->face_boundary(f)) out[e] += s * c;
  std::erase_if(out, [](const auto& kv) { return kv.second == 0.0; });
  return out;
}

double mass(const OneCurrent& T, const MetricField& m) {
  double s = 0.0;
  for (const auto& [e, k] : T.edges) s += std::abs(k) * T.complex->edge_length(e, m);
  return s;
}

double mass(const TwoChain& S, const MetricField& m) {
  double s = 0.0;
  for (const auto& [f, c] : S.faces) s += std::abs(c) * S.complex->face_area(f, m);
  return s;
}

OneCurrent operator-(const OneCurrent& a, const OneCurrent& b) {
  OneCurrent out{a.complex ? a.complex : b.complex, a.edges};
  for (const auto& [e, m] : b.edges) out.add(e, -m);
  return out;
}

OneCurrent shifted(const OneCurrent& T, const std::array<int, 3>& cells) {
  OneCurrent out{T.complex, {}};
  for (const auto& [e, m] : T.edges) {
    std::int64_t v = static_cast<std::int64_t>(T.complex->edge_tail(e));
    for (int d = 0; d < 3 && v >= 0; ++d) {
      const int s = cells[d] > 0 ? 1 : -1;
      for (int k = 0; k < std::abs(cells[d]) && v >= 0; ++k) v = T.complex->shift(static_cast<std::size_t>(v), d, s);
    }
    if (v < 0) fail(ErrorCode::Domain, "shifted current leaves the box");
    const std::size_t ne = T.complex->edge_id(T.complex->edge_axis(e), static_cast<std::size_t>(v));
    if (!T.complex->edge_exists(ne)) fail(ErrorCode::Domain, "shifted current leaves the box");
    out.add(ne, m);
  }
  return out;
}

double pair(const OneCurrent& T, const std::vector<double>& phi) {
  double s = 0.0;
  for (const auto& [e, m] : T.edges) {
    const std::int64_t pf = T.complex->primal_face(e);
    if (pf >= 0) s += m * phi[static_cast<std::size_t>(pf)];
  }
  return s;
}

// ---------------------------------------------------------------- extraction

OneCurrent extract_filament(const ComplexField& u, std::shared_ptr<const CubicalComplex> complex, double amp_min) {
  if (!complex) complex = std::make_shared<const CubicalComplex>(u.grid());
  OneCurrent T{complex, {}};
  const std::size_t F = 3 * u.size();
  for (std::size_t f = 0; f < F; ++f) {
    if (!face_exists(*u.metric, f)) continue;
    const FaceFlux flux = jacobian_flux(u, f, amp_min);
    if (flux.ambiguous && flux.core)
      fail(ErrorCode::Extraction, "ambiguous winding on a core face after refinement");
    if (flux.winding != 0) T.add(static_cast<std::size_t>(complex->dual_edge(f)), flux.winding);
  }
  return T;
}

OneCurrent rasterize(const ClosedPolyline& p, std::shared_ptr<const CubicalComplex> complex) {
  const CubicalComplex& C = *complex;
  OneCurrent T{complex, {}};
  if (p.size() < 2) return T;
  const Grid& g = C.primal();
  // Cell coordinate with a fixed symbolic offset so that no crossing lands
  // exactly on a primal edge or node.
  const std::array<double, 3> jitter{1.1e-9, 2.3e-9, 3.7e-9};
  auto cellcoord = [&](const Vec3& x, int d) {
    const double o = g.periodic(d) ? 0.5 * g.spacing(d) : 0.0;
    return (x[d] - o) / g.spacing(d) + jitter[d];
  };
  auto cell = [&](const Vec3& x) {
    std::array<long, 3> q{};
    for (int d = 0; d < 3; ++d) q[d] = static_cast<long>(std::floor(cellcoord(x, d) + 0.5));
    return q;
  };
  auto wrapped = [&](std::array<long, 3> q) {
    std::array<int, 3> w{};
    for (int d = 0; d < 3; ++d) {
      const long m = C.dim(d);
      if (C.periodic(d))
        w[d] = static_cast<int>(((q[d] % m) + m) % m);
      else if (q[d] < 0 || q[d] >= m)
        fail(ErrorCode::Domain, "polyline leaves the box");
      else
        w[d] = static_cast<int>(q[d]);
    }
    return C.vertex(w);
  };
  std::array<long, 3> q = cell(p.point(0));
  const std::array<long, 3> q0 = q;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Vec3 a = p.point(static_cast<long>(k)), b = p.point(static_cast<long>(k) + 1);
    struct Crossing {
      double lambda;
      int d;
      int dir;
    };
    std::vector<Crossing> xs;
    for (int d = 0; d < 3; ++d) {
      const double ta = cellcoord(a, d), tb = cellcoord(b, d);
      const long ca = static_cast<long>(std::floor(ta + 0.5)), cb = static_cast<long>(std::floor(tb + 0.5));
      const int dir = cb > ca ? 1 : -1;
      for (long c = ca; c != cb; c += dir) {
        const double plane = dir > 0 ? c + 0.5 : c - 0.5;
        xs.push_back({(plane - ta) / (tb - ta), d, dir});
      }
    }
    std::sort(xs.begin(), xs.end(), [](const Crossing& x, const Crossing& y) {
      return x.lambda < y.lambda || (x.lambda == y.lambda && x.d < y.d);
    });
    for (const Crossing& c : xs) {
      std::array<long, 3> tail = q;
      if (c.dir < 0) tail[c.d] -= 1;
      T.add(C.edge_id(c.d, wrapped(tail)), c.dir);
      q[c.d] += c.dir;
    }
  }
  for (int d = 0; d < 3; ++d) {
    const long expect = q0[d] + static_cast<long>(std::lround(p.winding[d] / g.spacing(d)));
    if (q[d] != expect) fail(ErrorCode::Domain, "rasterized polyline does not close");
  }
  return T;
}

// ---------------------------------------------------------------- decomposition

std::vector<PolyLoop> decompose(const OneCurrent& T) {
  const CubicalComplex& C = *T.complex;
  struct Half {
    std::size_t edge;
    int d;
    int dir;
    std::size_t to;
  };
  std::map<std::size_t, std::vector<Half>> out;
  std::map<std::size_t, long> remaining;
  for (const auto& [e, m] : T.edges) {
    const int d = C.edge_axis(e);
    const std::size_t tail = C.edge_tail(e), head = C.edge_head(e);
    if (m > 0)
      out[tail].push_back({e, d, +1, head});
    else
      out[head].push_back({e, d, -1, tail});
    remaining[e] = std::abs(m);
  }
  for (auto& [v, list] : out)
    std::sort(list.begin(), list.end(), [](const Half& a, const Half& b) {
      return std::tie(a.d, a.dir, a.edge) < std::tie(b.d, b.dir, b.edge);
    });

  std::vector<PolyLoop> loops;
  for (;;) {
    auto it = std::find_if(remaining.begin(), remaining.end(), [](const auto& kv) { return kv.second > 0; });
    if (it == remaining.end()) break;
    const std::size_t e0 = it->first;
    const long m0 = T.edges.at(e0);
    const std::size_t start = m0 > 0 ? C.edge_tail(e0) : C.edge_head(e0);
    std::vector<Half> path;
    std::map<std::size_t, long> used;
    std::size_t v = start;
    int last_d = C.edge_axis(e0), last_dir = m0 > 0 ? 1 : -1;
    bool first = true;
    do {
      const Half* best = nullptr;
      int best_rank = 3;
      for (const Half& h : out[v]) {
        if (remaining[h.edge] - used[h.edge] <= 0) continue;
        if (first && h.edge != e0) continue;
        const int rank = (h.d == last_d) ? (h.dir == last_dir ? 0 : 2) : 1;
        if (rank < best_rank) {
          best_rank = rank;
          best = &h;
        }
      }
      if (!best) fail(ErrorCode::Extraction, "current is not a cycle; edge following got stuck");
      first = false;
      path.push_back(*best);
      used[best->edge] += 1;
      last_d = best->d;
      last_dir = best->dir;
      v = best->to;
    } while (v != start);

    long mult = std::numeric_limits<long>::max();
    for (const auto& [e, k] : used) mult = std::min(mult, remaining[e] / k);
    PolyLoop loop;
    loop.multiplicity = mult;
    std::array<int, 3> q = C.coords(start);
    for (const Half& h : path) {
      loop.vertices.push_back(C.vertex({((q[0] % C.dim(0)) + C.dim(0)) % C.dim(0),
                                        ((q[1] % C.dim(1)) + C.dim(1)) % C.dim(1),
                                        ((q[2] % C.dim(2)) + C.dim(2)) % C.dim(2)}));
      loop.points.push_back(C.position(q));
      q[h.d] += h.dir;
    }
    for (const auto& [e, k] : used) remaining[e] -= k * mult;
    loops.push_back(std::move(loop));
  }
  return loops;
}

void write_current_csv(const std::string& path, const OneCurrent& T, const std::string& header) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path);
  os << header << "\n";
  os << "loop,vertex,x1,x2,x3,multiplicity\n";
  os.precision(17);
  const auto loops = decompose(T);
  for (std::size_t l = 0; l < loops.size(); ++l)
    for (std::size_t k = 0; k < loops[l].vertices.size(); ++k) {
      const Vec3& x = loops[l].points[k];
      os << l << "," << loops[l].vertices[k] << "," << x[0] << "," << x[1] << "," << x[2] << ","
         << loops[l].multiplicity << "\n";
    }
}

OneCurrent read_current_csv(const std::string& path, std::shared_ptr<const CubicalComplex> complex) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::Io, "cannot read " + path);
  std::string line;
  std::map<long, std::vector<std::size_t>> loops;
  std::map<long, long> mult;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || !std::isdigit(static_cast<unsigned char>(line[0]))) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() != 6) fail(ErrorCode::Io, "bad current row: " + line);
    const long l = std::stol(cols[0]);
    loops[l].push_back(std::stoul(cols[1]));
    mult[l] = std::stol(cols[5]);
  }
  OneCurrent T{complex, {}};
  const CubicalComplex& C = *complex;
  for (const auto& [l, vs] : loops) {
    for (std::size_t k = 0; k < vs.size(); ++k) {
      const std::size_t a = vs[k], b = vs[(k + 1) % vs.size()];
      bool found = false;
      for (int d = 0; d < 3 && !found; ++d) {
        if (C.shift(a, d, +1) == static_cast<std::int64_t>(b)) {
          T.add(C.edge_id(d, a), mult[l]);
          found = true;
        } else if (C.shift(a, d, -1) == static_cast<std::int64_t>(b)) {
          T.add(C.edge_id(d, b), -mult[l]);
          found = true;
        }
      }
      if (!found) fail(ErrorCode::Io, "non-adjacent vertices in current file");
    }
  }
  return T;
}

// ---------------------------------------------------------------- spanning chain

namespace {

struct SweepAxis {
  int axis;
  int seam;   // first level in sweep order
  int level;  // target plane, in sweep order
};

int to_level(const CubicalComplex& C, const SweepAxis& s, int q) {
  const int m = C.dim(s.axis);
  return C.periodic(s.axis) ? ((q - s.seam) % m + m) % m : q;
}

int from_level(const CubicalComplex& C, const SweepAxis& s, int l) {
  const int m = C.dim(s.axis);
  return C.periodic(s.axis) ? (l + s.seam) % m : l;
}

// Chooses a seam that no edge along the axis crosses; false if none exists.
bool choose_axis(const CubicalComplex& C, const Chain1& D, int a, SweepAxis& out) {
  out.axis = a;
  out.seam = 0;
  const int m = C.dim(a);
  if (C.periodic(a)) {
    std::vector<bool> crossed(m, false);
    for (const auto& [e, k] : D)
      if (C.edge_axis(e) == a) crossed[C.coords(C.edge_tail(e))[a]] = true;
    int seam = -1;
    for (int s = 0; s < m && seam < 0; ++s)
      if (!crossed[(s - 1 + m) % m]) seam = s;
    if (seam < 0) return false;
    out.seam = seam;
  }
  std::vector<int> levels;
  for (const auto& [e, k] : D)
    if (C.edge_axis(e) != a) levels.push_back(to_level(C, out, C.coords(C.edge_tail(e))[a]));
  if (levels.empty()) {
    out.level = 0;
  } else {
    std::nth_element(levels.begin(), levels.begin() + levels.size() / 2, levels.end());
    out.level = levels[levels.size() / 2];
  }
  return true;
}

// Sweeps every edge transverse to the axis onto the target plane. Adds the
// swept faces to S and returns the projected chain.
Chain1 sweep(const CubicalComplex& C, const Chain1& D, const SweepAxis& s, std::map<std::size_t, double>& S) {
  Chain1 P;
  const int a = s.axis;
  for (const auto& [e, mu] : D) {
    const int d = C.edge_axis(e);
    if (d == a) continue;
    const int n = 3 - a - d;
    const int alpha = (d == (n + 1) % 3) ? +1 : -1;
    auto q = C.coords(C.edge_tail(e));
    const int le = to_level(C, s, q[a]);
    const int lo = std::min(le, s.level), hi = std::max(le, s.level);
    const double coef = static_cast<double>(le > s.level ? -mu * alpha : mu * alpha);
    for (int l = lo; l < hi; ++l) {
      q[a] = from_level(C, s, l);
      S[n * C.vertex_count() + C.vertex(q)] += coef;
    }
    q[a] = from_level(C, s, s.level);
    const std::size_t pe = C.edge_id(d, C.vertex(q));
    if ((P[pe] += mu) == 0) P.erase(pe);
  }
  return P;
}

}  // namespace

TwoChain spanning_chain(const OneCurrent& D) {
  const CubicalComplex& C = *D.complex;
  if (!boundary(D).empty()) fail(ErrorCode::Homology, "chain has a boundary, so it bounds no 2-chain");
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return !C.periodic(x) && C.periodic(y); });
  for (int ia = 0; ia < 3; ++ia)
    for (int ib = 0; ib < 3; ++ib) {
      if (ia == ib) continue;
      const int a = order[ia], b = order[ib], c = 3 - a - b;
      SweepAxis sa, sb;
      if (!choose_axis(C, D.edges, a, sa)) continue;
      std::map<std::size_t, double> S;
      const Chain1 P1 = sweep(C, D.edges, sa, S);
      if (!choose_axis(C, P1, b, sb)) continue;
      const Chain1 P2 = sweep(C, P1, sb, S);
      // P2 lives on a single line along c; it is a cycle there.
      for (const auto& [e, k] : P2)
        if (C.edge_axis(e) != c || k != 0)
          fail(ErrorCode::Homology, "difference of currents winds around the periodic axis " + std::to_string(c));
      TwoChain out{D.complex, {}};
      for (const auto& [f, v] : S)
        if (v != 0.0) out.faces[f] = v;
      return out;
    }
  fail(ErrorCode::Homology, "difference of currents does not bound in the box");
}

// ---------------------------------------------------------------- flat norm

namespace {

std::vector<bool> locality_region(const CubicalComplex& C, const OneCurrent& D, const TwoChain& S0,
                                  const OneCurrent& T1, const OneCurrent& T2, int margin) {
  const std::size_t V = C.vertex_count();
  std::vector<char> mark(V, 0);
  auto touch_edge = [&](std::size_t e) {
    mark[C.edge_tail(e)] = 1;
    mark[C.edge_head(e)] = 1;
  };
  for (const auto& kv : T1.edges) touch_edge(kv.first);
  for (const auto& kv : T2.edges) touch_edge(kv.first);
  for (const auto& kv : D.edges) touch_edge(kv.first);
  for (const auto& kv : S0.faces)
    for (const auto& be : C.face_boundary(kv.first)) touch_edge(be.first);
  // Separable Chebyshev dilation.
  for (int d = 0; d < 3; ++d) {
    std::vector<char> next(V, 0);
    for (std::size_t v = 0; v < V; ++v) {
      if (!mark[v]) continue;
      next[v] = 1;
      for (int s : {-1, 1}) {
        std::int64_t w = static_cast<std::int64_t>(v);
        for (int k = 0; k < margin; ++k) {
          w = C.shift(static_cast<std::size_t>(w), d, s);
          if (w < 0) break;
          next[static_cast<std::size_t>(w)] = 1;
        }
      }
    }
    mark.swap(next);
  }
  std::vector<bool> free(V, false);
  for (std::size_t v = 0; v < V; ++v) free[v] = mark[v] && C.cube_exists(v);
  return free;
}

struct FaceTerm {
  std::size_t face;
  double area;
  double s0;
  int c[2] = {-1, -1};
  int sgn[2] = {0, 0};
};

double objective(const std::vector<FaceTerm>& terms, const std::vector<long>& V) {
  double s = 0.0;
  for (const FaceTerm& t : terms) {
    double k = t.s0;
    for (int i = 0; i < 2; ++i)
      if (t.c[i] >= 0) k += t.sgn[i] * V[t.c[i]];
    s += t.area * std::abs(k);
  }
  return s;
}

// Minimizes the objective over integer cube chains by steepest descent with
// +-1_X steps; each step is a minimum cut.
int descend(const std::vector<FaceTerm>& terms, std::vector<long>& V, int max_steps) {
  const std::size_t n = V.size();
  double F = objective(terms, V);
  int steps = 0;
  for (; steps < max_steps; ++steps) {
    double best_drop = 0.0;
    std::vector<long> best;
    for (int sigma : {+1, -1}) {
      std::vector<double> unary(n, 0.0);
      detail::MaxFlow g(n + 2);
      const std::size_t src = n, snk = n + 1;
      for (const FaceTerm& t : terms) {
        double k = t.s0;
        for (int i = 0; i < 2; ++i)
          if (t.c[i] >= 0) k += t.sgn[i] * V[t.c[i]];
        const double a = t.area;
        if (t.c[0] >= 0 && t.c[1] >= 0) {
          const int s1 = t.sgn[0];
          const double A = a * std::abs(k), C = a * std::abs(k + sigma * s1), B = a * std::abs(k - sigma * s1);
          unary[t.c[0]] += C - A;
          unary[t.c[1]] += A - C;
          g.add_edge(static_cast<std::size_t>(t.c[0]), static_cast<std::size_t>(t.c[1]), std::max(0.0, B + C - 2 * A));
        } else {
          const int i = t.c[0] >= 0 ? 0 : 1;
          if (t.c[i] < 0) continue;
          unary[t.c[i]] += a * std::abs(k + sigma * t.sgn[i]) - a * std::abs(k);
        }
      }
      for (std::size_t c = 0; c < n; ++c) {
        if (unary[c] > 0)
          g.add_edge(src, c, unary[c]);
        else if (unary[c] < 0)
          g.add_edge(c, snk, -unary[c]);
      }
      g.solve(src, snk);
      const auto S = g.source_side(src);
      std::vector<long> trial = V;
      bool any = false;
      for (std::size_t c = 0; c < n; ++c)
        if (!S[c]) {
          trial[c] += sigma;
          any = true;
        }
      if (!any) continue;
      const double drop = F - objective(terms, trial);
      if (drop > best_drop) {
        best_drop = drop;
        best = std::move(trial);
      }
    }
    if (best_drop <= 1e-12 * std::max(1.0, F)) break;
    V = std::move(best);
    F -= best_drop;
  }
  if (steps == max_steps) fail(ErrorCode::Solver, "flat-norm descent did not converge");
  return steps;
}

}  // namespace

FlatNormResult flat_norm(const OneCurrent& T1, const OneCurrent& T2, const MetricField& m, const FlatNormOptions& opts) {
  auto cx = T1.complex ? T1.complex : T2.complex;
  if (!cx) return {};
  const CubicalComplex& C = *cx;
  const OneCurrent D = T1 - T2;
  FlatNormResult res;
  res.witness.complex = cx;
  if (D.empty()) return res;

  TwoChain S0;
  bool hint_ok = false;
  if (opts.class_hint) {
    hint_ok = true;
    for (const auto& [f, v] : opts.class_hint->faces)
      if (v != std::round(v)) hint_ok = false;
    if (hint_ok) {
      const RealChain1 b = boundary(*opts.class_hint);
      RealChain1 want;
      for (const auto& [e, k] : D.edges) want[e] = static_cast<double>(k);
      hint_ok = b == want;
    }
  }
  S0 = hint_ok ? *opts.class_hint : spanning_chain(D);
  S0.complex = cx;

  const std::size_t V = C.vertex_count();
  for (int pass = 0; pass < 2; ++pass) {
    const bool local = opts.local && pass == 0;
    std::vector<bool> free;
    if (local) {
      free = locality_region(C, D, S0, T1, T2, opts.margin_cells);
    } else {
      free.assign(V, false);
      for (std::size_t v = 0; v < V; ++v) free[v] = C.cube_exists(v);
    }
    std::vector<int> local_id(V, -1);
    std::vector<std::size_t> cubes;
    for (std::size_t v = 0; v < V; ++v)
      if (free[v]) {
        local_id[v] = static_cast<int>(cubes.size());
        cubes.push_back(v);
      }
    std::vector<std::size_t> faces;
    for (const auto& kv : S0.faces) faces.push_back(kv.first);
    for (std::size_t c : cubes)
      for (const auto& bf : C.cube_boundary(c)) faces.push_back(bf.first);
    std::sort(faces.begin(), faces.end());
    faces.erase(std::unique(faces.begin(), faces.end()), faces.end());

    std::vector<FaceTerm> terms;
    terms.reserve(faces.size());
    for (std::size_t f : faces) {
      FaceTerm t;
      t.face = f;
      t.area = C.face_area(f, m);
      auto it = S0.faces.find(f);
      t.s0 = it == S0.faces.end() ? 0.0 : it->second;
      int slot = 0;
      for (const auto& [c, s] : C.face_cofaces(f))
        if (local_id[c] >= 0) {
          t.c[slot] = local_id[c];
          t.sgn[slot] = s;
          ++slot;
        }
      terms.push_back(t);
    }
    std::vector<long> Vc(cubes.size(), 0);
    res.steps = descend(terms, Vc, opts.max_steps);

    bool touches = false;
    if (local) {
      for (std::size_t i = 0; i < cubes.size() && !touches; ++i) {
        if (Vc[i] == 0) continue;
        for (const auto& bf : C.cube_boundary(cubes[i]))
          for (const auto& [c, s] : C.face_cofaces(bf.first))
            if (!free[c]) touches = true;
      }
    }
    if (touches) {
      res.full_box = true;
      continue;
    }
    res.witness.faces.clear();
    for (const FaceTerm& t : terms) {
      double k = t.s0;
      for (int i = 0; i < 2; ++i)
        if (t.c[i] >= 0) k += t.sgn[i] * Vc[t.c[i]];
      if (k != 0.0) res.witness.faces[t.face] = k;
    }
    res.value = objective(terms, Vc);
    return res;
  }
  fail(ErrorCode::Solver, "flat-norm full-box pass touched its region boundary");
}

}  // namespace vortexlab
