#pragma once

#include <string>

#include "irtk/geometry.hpp"

namespace irtk::geometry {

/// Loads a scene from JSON:
///   {
///     "speed_of_sound": 343.0,
///     "octave_bands": [125, 250, 500, 1000, 2000, 4000],
///     "materials": {"plaster": {"reflection": [...], "scattering": [...]}},
///     "surfaces": [{"material": "plaster", "vertices": [[x,y,z], ...]}]
///   }
/// Unknown material references are rejected.
Scene load_scene(const std::string& path);
Scene parse_scene(const std::string& json_text);

void save_scene(const std::string& path, const Scene& scene);

}  // namespace irtk::geometry
