#include "irtk/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace irtk::geometry {

namespace {
constexpr double kHitEps = 1e-6;  // self-intersection guard, meters
}

Scene::Scene(std::vector<Surface> surf, std::vector<Material> mats,
             std::vector<double> bands, double v)
    : surfaces(std::move(surf)),
      materials(std::move(mats)),
      octave_bands(std::move(bands)),
      speed_of_sound(v) {
  if (!(speed_of_sound > 0.0)) throw std::invalid_argument("Scene: speed of sound must be > 0");
  if (octave_bands.empty()) throw std::invalid_argument("Scene: needs at least one octave band");
  for (size_t i = 1; i < octave_bands.size(); ++i)
    if (octave_bands[i] <= octave_bands[i - 1])
      throw std::invalid_argument("Scene: band centers must be strictly increasing");
  const auto n_bands = static_cast<Eigen::Index>(octave_bands.size());
  for (const auto& m : materials) {
    if (m.reflection.size() != n_bands || m.scattering.size() != n_bands)
      throw std::invalid_argument("Scene: material band count mismatch");
    if ((m.reflection < 0.0).any() || (m.reflection > 1.0).any() ||
        (m.scattering < 0.0).any() || (m.scattering > 1.0).any())
      throw std::invalid_argument("Scene: coefficients must lie in [0,1]");
  }
  for (auto& s : surfaces) {
    if (s.vertices.size() < 3) throw std::invalid_argument("Scene: surface needs >= 3 vertices");
    if (s.material < 0 || s.material >= static_cast<int>(materials.size()))
      throw std::invalid_argument("Scene: surface references unknown material");
    const Vec3 e1 = s.vertices[1] - s.vertices[0];
    const Vec3 e2 = s.vertices[2] - s.vertices[0];
    Vec3 n = e1.cross(e2);
    const double area2 = n.norm();
    if (area2 < 1e-12) throw std::invalid_argument("Scene: degenerate surface");
    s.normal = n / area2;
    s.plane_offset = s.normal.dot(s.vertices[0]);
    for (const auto& vtx : s.vertices)
      if (std::abs(s.normal.dot(vtx) - s.plane_offset) > 1e-6)
        throw std::invalid_argument("Scene: surface not planar within 1e-6 m");
  }
}

Eigen::AlignedBox3d Scene::bounds() const {
  Eigen::AlignedBox3d box;
  for (const auto& s : surfaces)
    for (const auto& v : s.vertices) box.extend(v);
  return box;
}

namespace {

bool point_in_convex_polygon(const Vec3& p, const Surface& s) {
  // consistent cross-product side test around the boundary
  const size_t n = s.vertices.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec3& a = s.vertices[i];
    const Vec3& b = s.vertices[(i + 1) % n];
    const Vec3 edge = b - a;
    if (s.normal.dot(edge.cross(p - a)) < -1e-9) return false;
  }
  return true;
}

}  // namespace

std::optional<Hit> intersect(const Vec3& origin, const Vec3& direction, const Scene& scene) {
  std::optional<Hit> best;
  for (size_t i = 0; i < scene.surfaces.size(); ++i) {
    const Surface& s = scene.surfaces[i];
    const double denom = s.normal.dot(direction);
    if (std::abs(denom) < 1e-12) continue;  // parallel
    const double t = (s.plane_offset - s.normal.dot(origin)) / denom;
    if (t <= kHitEps) continue;
    if (best && t >= best->distance) continue;
    const Vec3 p = origin + t * direction;
    if (!point_in_convex_polygon(p, s)) continue;
    best = Hit{static_cast<int>(i), p, t, s.normal};
  }
  return best;
}

bool occluded(const Vec3& a, const Vec3& b, const Scene& scene) {
  const Vec3 d = b - a;
  const double len = d.norm();
  if (len < kHitEps) return false;
  auto hit = intersect(a, d / len, scene);
  return hit && hit->distance < len - kHitEps;
}

Vec3 specular_reflect(const Vec3& direction, const Vec3& normal) {
  return direction - 2.0 * direction.dot(normal) * normal;
}

Vec3 scatter_direction(const Vec3& normal, Rng& rng) {
  // cosine-weighted hemisphere: uniform disc lifted onto the sphere
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  const double r = std::sqrt(u1);
  const double phi = 2.0 * M_PI * u2;
  const double x = r * std::cos(phi);
  const double y = r * std::sin(phi);
  const double z = std::sqrt(std::max(0.0, 1.0 - u1));

  Vec3 t0 = (std::abs(normal.x()) < 0.9) ? Vec3::UnitX().cross(normal).normalized()
                                         : Vec3::UnitY().cross(normal).normalized();
  Vec3 t1 = normal.cross(t0);
  return (x * t0 + y * t1 + z * normal).normalized();
}

std::vector<ImageSource> image_sources(const Vec3& dims, const Vec3& emitter,
                                       const Vec3& listener, int max_order) {
  if (max_order < 0 || max_order > 10)
    throw std::invalid_argument("image_sources: max_order must be in [0,10]");
  for (int a = 0; a < 3; ++a) {
    if (emitter[a] <= 0.0 || emitter[a] >= dims[a] || listener[a] <= 0.0 || listener[a] >= dims[a])
      throw std::invalid_argument("image_sources: positions must be strictly inside the box");
  }

  // 1D mirror images between walls at 0 and L:
  //   2kL + x  with |k| reflections at each wall
  //   2kL - x  with (1-k, -k) wall counts for k <= 0, (k-1, k) for k >= 1
  struct Axis1D {
    double pos;
    int lo;  // reflections at coordinate 0 wall
    int hi;  // reflections at coordinate L wall
  };
  std::array<std::vector<Axis1D>, 3> axes;
  for (int a = 0; a < 3; ++a) {
    const double L = dims[a], x = emitter[a];
    for (int k = -(max_order / 2 + 1); k <= max_order / 2 + 1; ++k) {
      Axis1D even{2.0 * k * L + x, std::abs(k), std::abs(k)};
      if (even.lo + even.hi <= max_order) axes[a].push_back(even);
      Axis1D odd{2.0 * k * L - x, 0, 0};
      if (k >= 1) {
        odd.lo = k - 1;
        odd.hi = k;
      } else {
        odd.lo = 1 - k;
        odd.hi = -k;
      }
      if (odd.lo + odd.hi <= max_order) axes[a].push_back(odd);
    }
  }

  std::vector<ImageSource> out;
  for (const auto& ix : axes[0])
    for (const auto& iy : axes[1])
      for (const auto& iz : axes[2]) {
        const int order = ix.lo + ix.hi + iy.lo + iy.hi + iz.lo + iz.hi;
        if (order > max_order) continue;
        ImageSource src;
        src.position = Vec3(ix.pos, iy.pos, iz.pos);
        src.path_length = (listener - src.position).norm();
        src.wall_counts = {ix.lo, ix.hi, iy.lo, iy.hi, iz.lo, iz.hi};
        out.push_back(src);
      }
  return out;
}

Scene make_shoebox(const Vec3& dims, const Material& mat,
                   std::vector<double> bands, double v) {
  const double X = dims.x(), Y = dims.y(), Z = dims.z();
  auto quad = [](Vec3 a, Vec3 b, Vec3 c, Vec3 d) {
    Surface s;
    s.vertices = {a, b, c, d};
    s.material = 0;
    return s;
  };
  // inward-facing normals
  std::vector<Surface> walls = {
      quad({0, 0, 0}, {0, Y, 0}, {0, Y, Z}, {0, 0, Z}),  // x=0, normal +x
      quad({X, 0, 0}, {X, 0, Z}, {X, Y, Z}, {X, Y, 0}),  // x=X, normal -x
      quad({0, 0, 0}, {0, 0, Z}, {X, 0, Z}, {X, 0, 0}),  // y=0, normal +y
      quad({0, Y, 0}, {X, Y, 0}, {X, Y, Z}, {0, Y, Z}),  // y=Y, normal -y
      quad({0, 0, 0}, {X, 0, 0}, {X, Y, 0}, {0, Y, 0}),  // z=0, normal +z
      quad({0, 0, Z}, {0, Y, Z}, {X, Y, Z}, {X, 0, Z}),  // z=Z, normal -z
  };
  return Scene(std::move(walls), {mat}, std::move(bands), v);
}

}  // namespace irtk::geometry
