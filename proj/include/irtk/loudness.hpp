#pragma once

#include <string>

#include "irtk/field.hpp"
#include "irtk/renderer.hpp"
#include "irtk/types.hpp"

namespace irtk::loudness {

/// Horizontal slice specification for a loudness map.
struct SliceSpec {
  Vec3 origin = Vec3::Zero();  // cell (0,0) center
  int nx = 1, ny = 1;
  double spacing = 0.1;  // meters
  double height = 1.5;   // slice z
};

struct LoudnessMap {
  SliceSpec slice;
  Eigen::ArrayXXd db;  // ny rows x nx cols; 10 log10(sum h^2), sentinel for silent cells
  static constexpr double kSilent = -200.0;
};

LoudnessMap compute_loudness_map(const field::Field& f, const Pose& emitter,
                                 const SliceSpec& slice, const renderer::RenderConfig& cfg);

/// Writes <stem>.csv, <stem>.pgm (8-bit, min-max normalized) and
/// <stem>.json (grid geometry plus the normalization range).
void write_loudness_map(const std::string& stem, const LoudnessMap& map);
LoudnessMap read_loudness_csv(const std::string& path);

}  // namespace irtk::loudness
