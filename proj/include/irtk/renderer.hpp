#pragma once

#include <memory>
#include <string>
#include <vector>

#include "irtk/field.hpp"
#include "irtk/rng.hpp"
#include "irtk/types.hpp"

namespace irtk::renderer {

struct RenderConfig {
  int n_theta = 80;
  int n_phi = 40;
  int n_r = 64;
  double u_near = 0.1;  // meters
  double u_far = 10.0;
  double speed_of_sound = 343.0;
  int n_fft = 2048;
  double sample_rate = 16000.0;
  int ir_len = 2048;
  std::uint64_t seed = 0;  // azimuth stratification jitter
  int threads = 0;         // 0 = hardware concurrency

  void validate() const;
};

struct DirectionSet {
  std::vector<Vec3> directions;  // unit vectors
  ArrayXd weights;               // sums to 1
};

/// Azimuths are stratified (one jittered sample per stratum, shared across
/// elevation rows); elevations use the equal-area midpoint rule
/// acos(2(j - 1/2)/N_phi - 1). Weights are uniform 1/(N_theta * N_phi).
DirectionSet sample_directions(int n_theta, int n_phi, Rng& rng);

struct RaySample {
  Vec3 position;
  double u;   // distance from listener, meters
  double du;  // step length
};

/// u_m = (u_far - u_near) * m / N_r + u_near, m = 1..N_r.
std::vector<RaySample> sample_points(const Vec3& origin, const Vec3& direction,
                                     const RenderConfig& cfg);

/// Listener directivity: per-direction, per-frequency complex gain.
class GainPattern {
 public:
  virtual ~GainPattern() = default;
  /// omega is the unit propagation direction away from the listener (world
  /// frame). Fills `out` (n_bins entries).
  virtual void gain_into(const Vec3& omega, const Pose& listener, ArrayXcd& out) const = 0;
};

class OmniGain : public GainPattern {
 public:
  void gain_into(const Vec3&, const Pose&, ArrayXcd& out) const override { out.setOnes(); }
};

/// 0.5 * (1 + omega . axis) with axis = listener orientation.
class CardioidGain : public GainPattern {
 public:
  void gain_into(const Vec3& omega, const Pose& listener, ArrayXcd& out) const override;
};

/// Head-related transfer functions on an azimuth x elevation grid,
/// nearest-cell lookup in the listener's head frame (x = forward, y = left,
/// z = up). File layout: one-line JSON header
/// {"n_azimuth","n_elevation","sample_rate","n_fft"} terminated by '\n',
/// then little-endian complex<double> gains, cell-major (elevation row by
/// row), left ear then right ear per cell.
class HrtfTable {
 public:
  HrtfTable(int n_azimuth, int n_elevation, double sample_rate, int n_fft);

  int n_azimuth() const { return n_az_; }
  int n_elevation() const { return n_el_; }
  double sample_rate() const { return sample_rate_; }
  int n_fft() const { return n_fft_; }
  Eigen::Index n_bins() const { return n_fft_ / 2 + 1; }

  /// ear: 0 = left, 1 = right
  Eigen::ArrayXXcd& gains(int ear) { return gains_[ear]; }
  const Eigen::ArrayXXcd& gains(int ear) const { return gains_[ear]; }

  Eigen::Index cell_index(const Vec3& omega, const Pose& listener) const;

  void save(const std::string& path) const;
  static HrtfTable load(const std::string& path);

 private:
  int n_az_, n_el_;
  double sample_rate_;
  int n_fft_;
  Eigen::ArrayXXcd gains_[2];  // rows = cells, cols = bins
};

class HrtfGain : public GainPattern {
 public:
  HrtfGain(std::shared_ptr<const HrtfTable> table, int ear)
      : table_(std::move(table)), ear_(ear) {}
  void gain_into(const Vec3& omega, const Pose& listener, ArrayXcd& out) const override;

 private:
  std::shared_ptr<const HrtfTable> table_;
  int ear_;
};

/// Single-ray transmittance quadrature; no listener gain, no distance decay.
Spectrum render_ray(const field::Field& f, const Vec3& listener_pos, const Vec3& omega,
                    const Pose& emitter, const RenderConfig& cfg);

struct RenderResult {
  Spectrum spectrum;  // post-decay, re-transformed
  SampledIR ir;       // truncated to ir_len
};

RenderResult render_ir(const field::Field& f, const Pose& listener, const GainPattern& gain,
                       const Pose& emitter, const RenderConfig& cfg);
RenderResult render_ir(const field::Field& f, const Pose& listener, const GainPattern& gain,
                       const Pose& emitter, const RenderConfig& cfg,
                       const DirectionSet& dirs);

struct StereoIR {
  Eigen::ArrayXXd samples;  // frames x 2 (left, right)
  double sample_rate = 0.0;
};

StereoIR render_binaural(const field::Field& f, const Pose& head, double ear_spacing,
                         const GainPattern& gain_left, const GainPattern& gain_right,
                         const Pose& emitter, const RenderConfig& cfg);

/// Reverse-mode derivative of render_ir with respect to every grid
/// parameter. `d_spectrum` is the loss gradient w.r.t. the post-decay
/// spectrum bins; `d_ir` the gradient w.r.t. the decayed time samples
/// (length <= n_fft, zero-extended). Accumulates into `grads`.
void render_ir_adjoint(const field::VoxelGridField& f, const Pose& listener,
                       const GainPattern& gain, const Pose& emitter,
                       const RenderConfig& cfg, const DirectionSet& dirs,
                       const ArrayXcd& d_spectrum, const ArrayXd& d_ir,
                       field::VoxelGridField::Gradients& grads);
void render_ir_adjoint(const field::VoxelGridField& f, const Pose& listener,
                       const GainPattern& gain, const Pose& emitter,
                       const RenderConfig& cfg, const ArrayXcd& d_spectrum,
                       const ArrayXd& d_ir, field::VoxelGridField::Gradients& grads);

/// Directions used by the cfg-only render/adjoint overloads (derived from
/// cfg.seed so forward and adjoint agree).
DirectionSet directions_for(const RenderConfig& cfg);

}  // namespace irtk::renderer
