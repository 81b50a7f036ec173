#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "irtk/geometry.hpp"
#include "irtk/types.hpp"

namespace irtk::simulator {

enum class InteractionKind { Specular, Scatter };

struct Interaction {
  int surface;
  InteractionKind kind;
};

/// One emitter-to-receiver propagation path. band_gain holds the full
/// per-band interaction product (specular (1-alpha)(-beta) factors plus, for
/// stochastic detections, the capture estimator); the 1/d_n spreading factor
/// is applied at assembly time.
struct RayPath {
  double length = 0.0;
  std::vector<Interaction> interactions;
  ArrayXd band_gain;
  double launch_weight = 1.0;

  int specular_count() const {
    int c = 0;
    for (const auto& i : interactions)
      if (i.kind == InteractionKind::Specular) ++c;
    return c;
  }
};

struct SimConfig {
  int64_t n_rays = 1000000;
  int max_depth = 30;
  double receiver_radius = 0.2;
  double ir_duration = 0.1;     // seconds
  double sample_rate = 16000.0; // Hz
  /// Specular paths up to this order come from deterministic mirror
  /// construction; sphere detection takes over beyond it.
  int deterministic_specular_order = 3;
  int threads = 0;  // 0 = hardware concurrency
};

struct PathStats {
  std::map<int, int64_t> count_per_order;
  int64_t dropped = 0;  // paths longer than the IR window
};

/// All propagation paths from emitter to the receiver sphere around the
/// listener. The direct path and low-order specular paths are constructed
/// deterministically; scattering and deep specular paths are sampled.
std::vector<RayPath> trace_paths(const geometry::Scene& scene, const Pose& emitter,
                                 const Pose& listener, const SimConfig& cfg, uint64_t seed);

/// Time-domain IR from a path list: each path deposits band_gain/d_n at delay
/// d_n/v through a windowed-sinc kernel whose spectrum is shaped by the
/// per-band gains (piecewise-linear in log frequency).
SampledIR assemble_ir(const std::vector<RayPath>& paths, const geometry::Scene& scene,
                      const SimConfig& cfg, PathStats* stats = nullptr);

SampledIR simulate(const geometry::Scene& scene, const Pose& emitter, const Pose& listener,
                   const SimConfig& cfg, uint64_t seed, PathStats* stats = nullptr);

}  // namespace irtk::simulator
