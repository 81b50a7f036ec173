#pragma once

#include <optional>
#include <string>
#include <vector>

#include "irtk/rng.hpp"
#include "irtk/types.hpp"

namespace irtk::geometry {

/// Per-octave-band reflection (beta) and scattering (alpha) coefficients.
struct Material {
  std::string name;
  ArrayXd reflection;  // beta, in [0,1] per band
  ArrayXd scattering;  // alpha, in [0,1] per band
};

/// Planar convex polygon; vertices counter-clockwise w.r.t. the outward normal.
struct Surface {
  std::vector<Vec3> vertices;
  int material = 0;

  // derived, filled by Scene construction
  Vec3 normal = Vec3::Zero();
  double plane_offset = 0.0;  // normal . x = plane_offset
};

struct Scene {
  std::vector<Surface> surfaces;
  std::vector<Material> materials;
  std::vector<double> octave_bands;  // center frequencies, Hz, increasing
  double speed_of_sound = 343.0;

  Scene() = default;
  Scene(std::vector<Surface> surf, std::vector<Material> mats,
        std::vector<double> bands, double v = 343.0);

  int n_bands() const { return static_cast<int>(octave_bands.size()); }
  /// Axis-aligned bounds over all surface vertices.
  Eigen::AlignedBox3d bounds() const;
};

struct Hit {
  int surface = -1;
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
  Vec3 normal = Vec3::Zero();
};

/// Nearest ray-surface hit with distance > 1e-6 m (self-intersection guard).
std::optional<Hit> intersect(const Vec3& origin, const Vec3& direction, const Scene& scene);

/// True when the segment between two points is interrupted by a surface.
bool occluded(const Vec3& a, const Vec3& b, const Scene& scene);

/// d - 2 (d.n) n
Vec3 specular_reflect(const Vec3& direction, const Vec3& normal);

/// Cosine-weighted hemisphere sample about the normal.
Vec3 scatter_direction(const Vec3& normal, Rng& rng);

/// Virtual source produced by mirroring across shoebox walls.
struct ImageSource {
  Vec3 position;
  double path_length;
  /// reflections per wall: (x=0, x=L, y=0, y=L, z=0, z=L)
  std::array<int, 6> wall_counts;
  int order() const {
    int s = 0;
    for (int c : wall_counts) s += c;
    return s;
  }
};

/// All image sources up to max_order for a [0,dims] shoebox; order-0 entry is
/// the direct path.
std::vector<ImageSource> image_sources(const Vec3& dims, const Vec3& emitter,
                                       const Vec3& listener, int max_order);

/// Six-wall shoebox scene spanning [0, dims] with one material everywhere.
Scene make_shoebox(const Vec3& dims, const Material& mat,
                   std::vector<double> bands, double v = 343.0);

}  // namespace irtk::geometry
