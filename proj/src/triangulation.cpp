#include "dmis/triangulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "dmis/error.hpp"

namespace dmis {

namespace geom {
namespace {

using Quad = __float128;

constexpr double kEps = std::numeric_limits<double>::epsilon() / 2;
constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kIncircleBound = (10.0 + 96.0 * kEps) * kEps;

int sign(Quad v) { return (v > 0) - (v < 0); }

int orient_quad(const Point2& a, const Point2& b, const Point2& c) {
  const Quad l = (Quad(a.t) - c.t) * (Quad(b.x) - c.x);
  const Quad r = (Quad(a.x) - c.x) * (Quad(b.t) - c.t);
  return sign(l - r);
}

int incircle_quad(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const Quad adx = Quad(a.t) - d.t, ady = Quad(a.x) - d.x;
  const Quad bdx = Quad(b.t) - d.t, bdy = Quad(b.x) - d.x;
  const Quad cdx = Quad(c.t) - d.t, cdy = Quad(c.x) - d.x;
  const Quad alift = adx * adx + ady * ady;
  const Quad blift = bdx * bdx + bdy * bdy;
  const Quad clift = cdx * cdx + cdy * cdy;
  return sign(alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
              clift * (adx * bdy - bdx * ady));
}

}  // namespace

int orient(const Point2& a, const Point2& b, const Point2& c) {
  const double l = (a.t - c.t) * (b.x - c.x);
  const double r = (a.x - c.x) * (b.t - c.t);
  const double det = l - r;
  const double bound = kOrientBound * (std::abs(l) + std::abs(r));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orient_quad(a, b, c);
}

int incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double adx = a.t - d.t, ady = a.x - d.x;
  const double bdx = b.t - d.t, bdy = b.x - d.x;
  const double cdx = c.t - d.t, cdy = c.x - d.x;
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                           (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                           (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = kIncircleBound * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return incircle_quad(a, b, c, d);
}

}  // namespace geom

namespace {

constexpr int kInf = -1;  // the symbolic vertex closing the hull

double raw_orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.t - a.t) * (c.x - a.x) - (b.x - a.x) * (c.t - a.t);
}

// Edge k of a triangle runs v[k+1] -> v[k+2].
int find_edge(const std::array<int, 3>& v, int from, int to) {
  for (int k = 0; k < 3; ++k) {
    if (v[(k + 1) % 3] == from && v[(k + 2) % 3] == to) return k;
  }
  return -1;
}

std::vector<MeshVertex> deduplicate(std::span<const MeshPoint> points) {
  constexpr double kTol = 1e-12;
  struct CellHash {
    std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& c) const {
      return std::hash<std::int64_t>()(c.first * 0x9e3779b97f4a7c15LL ^ c.second);
    }
  };
  auto cell = [](double v) { return static_cast<std::int64_t>(std::floor(v / kTol)); };
  std::unordered_multimap<std::pair<std::int64_t, std::int64_t>, std::size_t, CellHash> grid;
  std::vector<MeshVertex> kept;
  kept.reserve(points.size());
  for (const MeshPoint& mp : points) {
    if (!std::isfinite(mp.p.t) || !std::isfinite(mp.p.x)) {
      throw GeometryError("non-finite mesh coordinate");
    }
    const auto ct = cell(mp.p.t), cx = cell(mp.p.x);
    bool duplicate = false;
    for (std::int64_t dt = -1; dt <= 1 && !duplicate; ++dt) {
      for (std::int64_t dx = -1; dx <= 1 && !duplicate; ++dx) {
        auto [lo, hi] = grid.equal_range({ct + dt, cx + dx});
        for (auto it = lo; it != hi; ++it) {
          const Point2& q = kept[it->second].p;
          if (std::hypot(q.t - mp.p.t, q.x - mp.p.x) <= kTol) {
            duplicate = true;
            break;
          }
        }
      }
    }
    if (duplicate) continue;
    grid.emplace(std::make_pair(ct, cx), kept.size());
    kept.push_back({mp.id, mp.p, 0.0});
  }
  return kept;
}

class Builder {
 public:
  explicit Builder(const std::vector<MeshVertex>& verts) : verts_(verts) {}

  void run() {
    const int n = static_cast<int>(verts_.size());
    if (n < 3) throw GeometryError("triangulation needs at least 3 distinct points");
    int third = -1;
    for (int k = 2; k < n; ++k) {
      if (geom::orient(pt(0), pt(1), pt(k)) != 0) {
        third = k;
        break;
      }
    }
    if (third < 0) throw GeometryError("all mesh points are collinear");

    int a = 0, b = 1, c = third;
    if (geom::orient(pt(a), pt(b), pt(c)) < 0) std::swap(b, c);
    // One real triangle and the three ghosts around it.
    const int t0 = add({a, b, c});
    const int g_ab = add({b, a, kInf});
    const int g_bc = add({c, b, kInf});
    const int g_ca = add({a, c, kInf});
    tris_[t0].n = {g_bc, g_ca, g_ab};
    link_ghost_ring();
    last_ = t0;

    for (int k = 2; k < n; ++k) {
      if (k != third) insert(k);
    }
  }

  void finish(std::vector<MeshTriangle>& out) const {
    std::vector<int> remap(tris_.size(), -1);
    int next = 0;
    for (std::size_t i = 0; i < tris_.size(); ++i) {
      if (tris_[i].alive && !is_ghost(static_cast<int>(i))) remap[i] = next++;
    }
    out.clear();
    out.reserve(next);
    for (std::size_t i = 0; i < tris_.size(); ++i) {
      if (remap[i] < 0) continue;
      MeshTriangle t;
      t.v = tris_[i].v;
      for (int k = 0; k < 3; ++k) t.nbr[k] = remap[tris_[i].n[k]];
      out.push_back(t);
    }
  }

 private:
  struct Tri {
    std::array<int, 3> v{};
    std::array<int, 3> n{-1, -1, -1};
    bool alive = true;
  };
  struct BoundaryEdge {
    int from, to, outside;
  };

  const Point2& pt(int i) const { return verts_[i].p; }
  bool is_ghost(int t) const { return tris_[t].v[2] == kInf; }

  int add(std::array<int, 3> v) {
    if (v[0] == kInf) v = {v[1], v[2], v[0]};
    if (v[1] == kInf) v = {v[2], v[0], v[1]};
    Tri t;
    t.v = v;
    if (!free_.empty()) {
      const int id = free_.back();
      free_.pop_back();
      tris_[id] = t;
      return id;
    }
    tris_.push_back(t);
    return static_cast<int>(tris_.size() - 1);
  }

  // Connects the three initial ghosts through their infinite edges.
  void link_ghost_ring() {
    for (int g = 1; g <= 3; ++g) {
      tris_[g].n[2] = 0;
      for (int h = 1; h <= 3; ++h) {
        if (h == g) continue;
        // ghost (g0, g1, inf): edge 0 is (g1, inf), edge 1 is (inf, g0)
        if (tris_[h].v[1] == tris_[g].v[0]) tris_[g].n[1] = h;
        if (tris_[h].v[0] == tris_[g].v[1]) tris_[g].n[0] = h;
      }
    }
  }

  // Lifting perturbation ordered by id: the lowest-id point is lifted most.
  bool perturbed_inside(int a, int b, int c, int d) const {
    std::array<int, 4> order{a, b, c, d};
    std::sort(order.begin(), order.end(), [&](int i, int j) {
      return verts_[i].id != verts_[j].id ? verts_[i].id < verts_[j].id : i < j;
    });
    for (int cand : order) {
      if (cand == d) return false;
      int o = 0;
      if (cand == a) o = geom::orient(pt(d), pt(b), pt(c));
      else if (cand == b) o = geom::orient(pt(a), pt(d), pt(c));
      else o = geom::orient(pt(a), pt(b), pt(d));
      if (o != 0) return o > 0;
    }
    return false;
  }

  bool in_conflict(int t, int p) const {
    const auto& v = tris_[t].v;
    if (v[2] == kInf) {
      const int o = geom::orient(pt(v[0]), pt(v[1]), pt(p));
      if (o != 0) return o > 0;
      const Point2 &a = pt(v[0]), &b = pt(v[1]), &q = pt(p);
      const double s1 = (q.t - a.t) * (b.t - a.t) + (q.x - a.x) * (b.x - a.x);
      const double s2 = (q.t - b.t) * (a.t - b.t) + (q.x - b.x) * (a.x - b.x);
      return s1 > 0 && s2 > 0;
    }
    const int s = geom::incircle(pt(v[0]), pt(v[1]), pt(v[2]), pt(p));
    if (s != 0) return s > 0;
    return perturbed_inside(v[0], v[1], v[2], p);
  }

  // Real triangle whose closure holds p, or a ghost p lies strictly beyond.
  int locate(int p) const {
    int t = last_;
    if (is_ghost(t)) t = tris_[t].n[2];
    const std::size_t limit = 4 * tris_.size() + 64;
    for (std::size_t step = 0; step < limit; ++step) {
      const auto& v = tris_[t].v;
      int next = -1;
      for (int j = 0; j < 3; ++j) {
        const int k = static_cast<int>((j + step) % 3);
        if (geom::orient(pt(v[(k + 1) % 3]), pt(v[(k + 2) % 3]), pt(p)) < 0) {
          next = tris_[t].n[k];
          break;
        }
      }
      if (next < 0) return t;
      if (is_ghost(next)) return next;
      t = next;
    }
    for (std::size_t i = 0; i < tris_.size(); ++i) {
      const int ti = static_cast<int>(i);
      if (!tris_[i].alive || is_ghost(ti)) continue;
      const auto& v = tris_[i].v;
      if (geom::orient(pt(v[0]), pt(v[1]), pt(p)) >= 0 && geom::orient(pt(v[1]), pt(v[2]), pt(p)) >= 0 &&
          geom::orient(pt(v[2]), pt(v[0]), pt(p)) >= 0) {
        return ti;
      }
    }
    for (std::size_t i = 0; i < tris_.size(); ++i) {
      const int ti = static_cast<int>(i);
      if (tris_[i].alive && is_ghost(ti) && in_conflict(ti, p)) return ti;
    }
    throw GeometryError("point location failed");
  }

  void insert(int p) {
    const int start = locate(p);
    ++stamp_;
    marks_.resize(tris_.size(), 0);
    states_.resize(tris_.size(), 0);
    std::vector<int> cavity{start};
    std::vector<BoundaryEdge> boundary;
    marks_[start] = stamp_;
    states_[start] = 1;
    for (std::size_t i = 0; i < cavity.size(); ++i) {
      const int t = cavity[i];
      for (int k = 0; k < 3; ++k) {
        const int nb = tris_[t].n[k];
        if (marks_[nb] != stamp_) {
          marks_[nb] = stamp_;
          states_[nb] = in_conflict(nb, p) ? 1 : 2;
          if (states_[nb] == 1) cavity.push_back(nb);
        }
        if (states_[nb] == 2) {
          const auto& v = tris_[t].v;
          boundary.push_back({v[(k + 1) % 3], v[(k + 2) % 3], nb});
        }
      }
    }
    for (int t : cavity) {
      tris_[t].alive = false;
      free_.push_back(t);
    }
    // Reuse lowest slots first so ids stay compact and order-stable.
    std::sort(free_.begin(), free_.end(), std::greater<>());

    std::vector<int> created;
    created.reserve(boundary.size());
    for (const BoundaryEdge& e : boundary) {
      const int t = add({e.from, e.to, p});
      const int k_out = find_edge(tris_[t].v, e.from, e.to);
      tris_[t].n[k_out] = e.outside;
      tris_[e.outside].n[find_edge(tris_[e.outside].v, e.to, e.from)] = t;
      created.push_back(t);
    }
    marks_.resize(tris_.size(), 0);
    states_.resize(tris_.size(), 0);
    for (std::size_t i = 0; i < created.size(); ++i) {
      const BoundaryEdge& e = boundary[i];
      const int t = created[i];
      for (std::size_t j = 0; j < created.size(); ++j) {
        if (j == i) continue;
        if (boundary[j].from == e.to) tris_[t].n[find_edge(tris_[t].v, e.to, p)] = created[j];
        if (boundary[j].to == e.from) tris_[t].n[find_edge(tris_[t].v, p, e.from)] = created[j];
      }
    }
    for (int t : created) {
      if (!is_ghost(t)) {
        last_ = t;
        break;
      }
    }
  }

  const std::vector<MeshVertex>& verts_;
  std::vector<Tri> tris_;
  std::vector<int> free_;
  std::vector<unsigned> marks_;
  std::vector<unsigned char> states_;  // 1 = in cavity, 2 = outside
  unsigned stamp_ = 0;
  int last_ = 0;
};

}  // namespace

Triangulation Triangulation::build(std::span<const MeshPoint> points) {
  Triangulation mesh;
  mesh.vertices_ = deduplicate(points);
  Builder builder(mesh.vertices_);
  builder.run();
  builder.finish(mesh.triangles_);
  mesh.vertex_triangle_.assign(mesh.vertices_.size(), -1);
  for (std::size_t k = mesh.triangles_.size(); k-- > 0;) {
    for (int v : mesh.triangles_[k].v) mesh.vertex_triangle_[v] = static_cast<int>(k);
  }
  return mesh;
}

std::array<std::int64_t, 3> Triangulation::triangle_ids(int k) const {
  const auto& v = triangles_[k].v;
  return {vertices_[v[0]].id, vertices_[v[1]].id, vertices_[v[2]].id};
}

std::vector<std::array<std::int64_t, 3>> Triangulation::sorted_id_triples() const {
  std::vector<std::array<std::int64_t, 3>> out;
  out.reserve(triangles_.size());
  for (std::size_t k = 0; k < triangles_.size(); ++k) {
    auto ids = triangle_ids(static_cast<int>(k));
    std::sort(ids.begin(), ids.end());
    out.push_back(ids);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void Triangulation::set_values(std::span<const double> values) {
  if (values.size() != vertices_.size()) throw ContractError("vertex value count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) vertices_[i].value = values[i];
}

int Triangulation::walk(const Point2& p, int start) const {
  const int nt = static_cast<int>(triangles_.size());
  int t = (start >= 0 && start < nt) ? start : 0;
  const std::size_t limit = 4 * triangles_.size() + 64;
  for (std::size_t step = 0; step < limit; ++step) {
    const auto& tri = triangles_[t];
    int next = -2;
    for (int j = 0; j < 3; ++j) {
      const int k = static_cast<int>((j + step) % 3);
      if (geom::orient(vertices_[tri.v[(k + 1) % 3]].p, vertices_[tri.v[(k + 2) % 3]].p, p) < 0) {
        next = tri.nbr[k];
        break;
      }
    }
    if (next == -2) return t;
    if (next < 0) return kOutside;
    t = next;
  }
  for (int k = 0; k < nt; ++k) {
    const auto& v = triangles_[k].v;
    if (geom::orient(vertices_[v[0]].p, vertices_[v[1]].p, p) >= 0 &&
        geom::orient(vertices_[v[1]].p, vertices_[v[2]].p, p) >= 0 &&
        geom::orient(vertices_[v[2]].p, vertices_[v[0]].p, p) >= 0) {
      return k;
    }
  }
  return kOutside;
}

int Triangulation::lowest_containing(int k, const Point2& p) const {
  const auto& tri = triangles_[k];
  std::array<bool, 3> on_edge{};
  int zeros = 0;
  for (int e = 0; e < 3; ++e) {
    on_edge[e] = geom::orient(vertices_[tri.v[(e + 1) % 3]].p, vertices_[tri.v[(e + 2) % 3]].p, p) == 0;
    zeros += on_edge[e];
  }
  if (zeros == 0) return k;
  if (zeros == 1) {
    for (int e = 0; e < 3; ++e) {
      if (on_edge[e] && tri.nbr[e] >= 0) return std::min(k, tri.nbr[e]);
    }
    return k;
  }
  // p coincides with a vertex: take the lowest triangle of its fan.
  int corner = 0;
  for (int e = 0; e < 3; ++e) {
    if (!on_edge[e]) corner = tri.v[e];
  }
  int best = k;
  std::vector<int> stack{k};
  std::unordered_set<int> seen{k};
  while (!stack.empty()) {
    const int t = stack.back();
    stack.pop_back();
    best = std::min(best, t);
    for (int e = 0; e < 3; ++e) {
      const int nb = triangles_[t].nbr[e];
      if (nb < 0 || triangles_[t].v[e] == corner || seen.count(nb)) continue;
      seen.insert(nb);
      stack.push_back(nb);
    }
  }
  return best;
}

int Triangulation::locate(const Point2& p, int hint) const {
  if (triangles_.empty()) throw ContractError("locate on an empty mesh");
  const int t = walk(p, hint);
  return t == kOutside ? kOutside : lowest_containing(t, p);
}

std::array<double, 3> Triangulation::barycentric(int k, const Point2& p) const {
  const auto& v = triangles_[k].v;
  const Point2 &a = vertices_[v[0]].p, &b = vertices_[v[1]].p, &c = vertices_[v[2]].p;
  const double area = raw_orient(a, b, c);
  return {raw_orient(p, b, c) / area, raw_orient(a, p, c) / area, raw_orient(a, b, p) / area};
}

double Triangulation::interpolate_in(int k, const Point2& p) const {
  const auto w = barycentric(k, p);
  const auto& v = triangles_[k].v;
  return w[0] * vertices_[v[0]].value + w[1] * vertices_[v[1]].value + w[2] * vertices_[v[2]].value;
}

double Triangulation::interpolate(const Point2& p) const {
  if (triangles_.empty()) throw ContractError("interpolate on an empty mesh");
  const int k = locate(p);
  if (k == kOutside) return vertices_[nearest_vertex(p)].value;
  return interpolate_in(k, p);
}

std::size_t Triangulation::nearest_vertex(const Point2& p) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const double dt = vertices_[i].p.t - p.t, dx = vertices_[i].p.x - p.x;
    const double d = dt * dt + dx * dx;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double Triangulation::triangle_area(int k) const {
  const auto& v = triangles_[k].v;
  return 0.5 * raw_orient(vertices_[v[0]].p, vertices_[v[1]].p, vertices_[v[2]].p);
}

void write_vertices_csv(std::ostream& out, const Triangulation& mesh) {
  out << "id,t,x,value\n";
  out.precision(17);
  for (const MeshVertex& v : mesh.vertices()) {
    out << v.id << ',' << v.p.t << ',' << v.p.x << ',' << v.value << '\n';
  }
}

void write_triangles_csv(std::ostream& out, const Triangulation& mesh) {
  out << "tri,a,b,c\n";
  for (std::size_t k = 0; k < mesh.num_triangles(); ++k) {
    const auto ids = mesh.triangle_ids(static_cast<int>(k));
    out << k << ',' << ids[0] << ',' << ids[1] << ',' << ids[2] << '\n';
  }
}

}  // namespace dmis
