#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irtk/fit.hpp"
#include "irtk/geometry.hpp"
#include "irtk/simulator.hpp"
#include "irtk/types.hpp"

namespace irtk::dataset {

struct ManifestItem {
  Pose listener;
  std::string file;  // relative to the manifest directory
};

struct Manifest {
  double sample_rate = 0.0;
  int ir_len = 0;
  Pose emitter;
  std::vector<ManifestItem> items;
};

void save_manifest(const std::string& dir, const Manifest& m);
Manifest load_manifest(const std::string& dir);

/// Loads every referenced IR into memory.
fit::Dataset load_dataset(const std::string& dir);

/// Listener placement: either an explicit pose list or a regular grid.
struct ListenerSpec {
  std::vector<Pose> poses;  // used when non-empty
  // otherwise: nx x ny poses on a horizontal lattice
  int nx = 0, ny = 0;
  Vec3 origin = Vec3::Zero();
  double spacing = 0.5;
  double height = 1.5;
};

std::vector<Pose> expand_listeners(const ListenerSpec& spec);

/// Simulates one IR per listener pose and writes WAVs plus manifest.json
/// into out_dir. Deterministic under the seed.
Manifest generate_dataset(const geometry::Scene& scene, const Pose& emitter,
                          const ListenerSpec& listeners, const simulator::SimConfig& sim,
                          std::uint64_t seed, const std::string& out_dir);

}  // namespace irtk::dataset
