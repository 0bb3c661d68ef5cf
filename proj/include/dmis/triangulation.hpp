#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace dmis {

/// Coordinates in the normalized unit square: t' = t / T_train,
/// x' = (x - x_min) / (x_max - x_min).
struct Point2 {
  double t = 0.0;
  double x = 0.0;
};

struct MeshPoint {
  std::int64_t id = 0;
  Point2 p;
};

struct MeshVertex {
  std::int64_t id = 0;
  Point2 p;
  double value = 0.0;
};

/// Counter-clockwise vertex indices; nbr[k] is the triangle across the edge
/// opposite v[k], or -1 on the convex hull.
struct MeshTriangle {
  std::array<int, 3> v{};
  std::array<int, 3> nbr{};
};

namespace geom {

/// Sign of the signed area of (a, b, c): +1 counter-clockwise, -1 clockwise,
/// 0 collinear. Double-precision filter with a quad-precision fallback.
int orient(const Point2& a, const Point2& b, const Point2& c);

/// Sign of the in-circle determinant: +1 when d is strictly inside the
/// circumcircle of the counter-clockwise triangle (a, b, c).
int incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d);

}  // namespace geom

/// 2-D Delaunay triangulation with point location and linear interpolation.
///
/// Construction is incremental Bowyer-Watson in input order. The convex hull
/// is closed by a symbolic vertex at infinity, so hull edges are never lost to
/// a finite enclosing triangle. Cocircular ties are resolved by a symbolic
/// perturbation ordered by vertex id (the lowest id is lifted most), which
/// makes the result independent of how exact ties happen to be encountered.
class Triangulation {
 public:
  static constexpr int kOutside = -1;

  Triangulation() = default;

  /// Throws GeometryError for fewer than 3 distinct points or collinear input.
  /// Points closer than 1e-12 to an earlier point are dropped.
  static Triangulation build(std::span<const MeshPoint> points);

  const std::vector<MeshVertex>& vertices() const { return vertices_; }
  const std::vector<MeshTriangle>& triangles() const { return triangles_; }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }
  bool empty() const { return triangles_.empty(); }

  /// External ids of triangle k's corners.
  std::array<std::int64_t, 3> triangle_ids(int k) const;
  /// All triangles as id triples, each sorted, the list sorted.
  std::vector<std::array<std::int64_t, 3>> sorted_id_triples() const;

  void set_value(std::size_t vertex, double value) { vertices_[vertex].value = value; }
  void set_values(std::span<const double> values);

  /// Triangle whose closed region contains p; among several, the lowest
  /// index. kOutside if p is outside the convex hull. `hint` seeds the walk.
  int locate(const Point2& p, int hint = 0) const;

  /// Barycentric coordinates of p with respect to triangle k.
  std::array<double, 3> barycentric(int k, const Point2& p) const;

  /// Linear interpolation inside the hull; nearest vertex value outside.
  double interpolate(const Point2& p) const;
  double interpolate_in(int k, const Point2& p) const;

  /// Lowest-index vertex at minimum distance.
  std::size_t nearest_vertex(const Point2& p) const;

  /// Signed area, positive for every triangle of a valid mesh.
  double triangle_area(int k) const;

 private:
  int walk(const Point2& p, int start) const;
  int lowest_containing(int k, const Point2& p) const;

  std::vector<MeshVertex> vertices_;
  std::vector<MeshTriangle> triangles_;
  std::vector<int> vertex_triangle_;  // one incident triangle per vertex
};

/// Debug dumps: "id,t,x,value" and "tri,a,b,c" (a, b, c are vertex ids).
void write_vertices_csv(std::ostream& out, const Triangulation& mesh);
void write_triangles_csv(std::ostream& out, const Triangulation& mesh);

}  // namespace dmis
