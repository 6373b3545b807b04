#include <array>
#include <cmath>
#include <map>

#include <json.hpp>

#include "semslam/app/mesh.hpp"

namespace semslam {

namespace {

using Color = std::array<int, 3>;

struct Vertex {
  Eigen::Vector3d p;
  Color c;
};

// Evenly spaced hues at full saturation.
Color palette(int i) {
  const double h = std::fmod(i * 0.618033988749895, 1.0) * 6.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  std::array<double, 3> rgb{};
  switch (static_cast<int>(h)) {
    case 0: rgb = {1, x, 0}; break;
    case 1: rgb = {x, 1, 0}; break;
    case 2: rgb = {0, 1, x}; break;
    case 3: rgb = {0, x, 1}; break;
    case 4: rgb = {x, 0, 1}; break;
    default: rgb = {1, 0, x}; break;
  }
  return {int(std::lround(40 + 215 * rgb[0])), int(std::lround(40 + 215 * rgb[1])), int(std::lround(40 + 215 * rgb[2]))};
}

void add_ellipsoid(const DualQuadric& q, const Color& c, const MeshOptions& o, std::vector<Vertex>& v,
                   std::vector<std::array<int, 3>>& faces) {
  const int base = static_cast<int>(v.size());
  const Eigen::Vector3d axes = q.semi_axes();
  for (int i = 0; i <= o.rings; ++i) {
    const double theta = M_PI * i / o.rings;
    for (int j = 0; j < o.segments; ++j) {
      const double phi = 2.0 * M_PI * j / o.segments;
      const Eigen::Vector3d unit(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
      v.push_back({q.frame() * Eigen::Vector3d(axes.cwiseProduct(unit)), c});
    }
  }
  for (int i = 0; i < o.rings; ++i) {
    for (int j = 0; j < o.segments; ++j) {
      const int a = base + i * o.segments + j;
      const int b = base + i * o.segments + (j + 1) % o.segments;
      faces.push_back({a, a + o.segments, b});
      faces.push_back({b, a + o.segments, b + o.segments});
    }
  }
}

void add_plane_patch(const SolutionPlane& p, const std::map<int, Eigen::Vector3d>& points, const Color& c,
                     const MeshOptions& o, std::vector<Vertex>& v, std::vector<std::array<int, 3>>& faces) {
  const Eigen::Vector3d n = p.plane.normal().normalized();
  const Eigen::Vector3d origin = -p.plane.distance() / p.plane.normal().norm() * n;
  const Eigen::Vector3d e1 = n.unitOrthogonal();
  const Eigen::Vector3d e2 = n.cross(e1);
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(INFINITY);
  Eigen::Vector2d hi = Eigen::Vector2d::Constant(-INFINITY);
  for (int t : p.tracks) {
    const auto it = points.find(t);
    if (it == points.end()) continue;
    const Eigen::Vector3d d = it->second - origin;
    const Eigen::Vector2d uv(d.dot(e1), d.dot(e2));
    lo = lo.cwiseMin(uv);
    hi = hi.cwiseMax(uv);
  }
  if (!(lo.array() <= hi.array()).all()) return;
  lo.array() -= o.plane_margin;
  hi.array() += o.plane_margin;
  const int base = static_cast<int>(v.size());
  for (const Eigen::Vector2d uv : {lo, Eigen::Vector2d(hi.x(), lo.y()), hi, Eigen::Vector2d(lo.x(), hi.y())}) {
    v.push_back({origin + uv.x() * e1 + uv.y() * e2, c});
  }
  faces.push_back({base, base + 1, base + 2});
  faces.push_back({base, base + 2, base + 3});
}

}  // namespace

void write_map_mesh(const Solution& s, std::ostream& out, const MeshOptions& options) {
  std::vector<Vertex> v;
  std::vector<std::array<int, 3>> faces;
  for (const auto& q : s.quadrics) add_ellipsoid(q.quadric, palette(q.id), options, v, faces);
  const std::map<int, Eigen::Vector3d> points(s.points.begin(), s.points.end());
  for (const auto& p : s.planes) {
    const int shade = 150 + (p.id * 37) % 80;
    add_plane_patch(p, points, {shade, shade, shade}, options, v, faces);
  }
  for (const auto& [id, x] : s.points) v.push_back({x, {20, 20, 20}});

  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << v.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "element face " << faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const Vertex& x : v) {
    out << x.p.x() << ' ' << x.p.y() << ' ' << x.p.z() << ' ' << x.c[0] << ' ' << x.c[1] << ' ' << x.c[2] << '\n';
  }
  for (const auto& f : faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

void write_map_records(const Solution& s, std::ostream& out) {
  using nlohmann::json;
  auto vec = [](const auto& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.size(); ++i) a.push_back(m(i));
    return a;
  };
  for (const auto& [id, x] : s.points) out << json{{"type", "point"}, {"id", id}, {"xyz", vec(x)}}.dump() << '\n';
  for (const auto& p : s.planes) {
    out << json{{"type", "plane"}, {"id", p.id}, {"coeffs", vec(p.plane.coeffs())}, {"n_inliers", p.tracks.size()}}.dump()
        << '\n';
  }
  for (const auto& q : s.quadrics) {
    const Eigen::Matrix3d r = q.quadric.frame().rotation();
    json rot = json::array();
    for (int i = 0; i < 3; ++i) rot.push_back(vec(Eigen::Vector3d(r.row(i).transpose())));
    out << json{{"type", "quadric"},   {"id", q.id},           {"class", q.class_id},
                {"center", vec(q.quadric.center())}, {"semi_axes", vec(q.quadric.semi_axes())},
                {"rotation", rot},     {"support", q.support}}
               .dump()
        << '\n';
  }
}

}  // namespace semslam
