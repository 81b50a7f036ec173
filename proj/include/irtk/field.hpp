#pragma once

#include <memory>
#include <string>
#include <vector>

#include "irtk/types.hpp"

namespace irtk::field {

/// Acoustic density plus the frequency-domain signal re-transmitted from a
/// point toward the listener.
struct FieldResponse {
  double sigma = 0.0;
  ArrayXcd emission;
};

/// Queryable mapping (p, omega, emitter pose) -> (sigma, emission spectrum).
class Field {
 public:
  virtual ~Field() = default;

  virtual int n_fft() const = 0;
  virtual double sample_rate() const = 0;
  Eigen::Index n_bins() const { return n_fft() / 2 + 1; }

  /// omega must be unit length. Out-of-bounds points return (0, zeros).
  virtual void query_into(const Vec3& p, const Vec3& omega, const Pose& emitter,
                          double& sigma, ArrayXcd& emission) const = 0;

  FieldResponse query(const Vec3& p, const Vec3& omega, const Pose& emitter) const {
    FieldResponse r;
    r.emission = ArrayXcd::Zero(n_bins());
    query_into(p, omega, emitter, r.sigma, r.emission);
    return r;
  }

  std::vector<FieldResponse> query_batch(const std::vector<Vec3>& points,
                                         const std::vector<Vec3>& directions,
                                         const Pose& emitter) const;
};

/// Number of real spherical-harmonic basis functions for degrees 0..L.
inline int sh_count(int degree) { return (degree + 1) * (degree + 1); }

/// Real spherical harmonics Y_00 .. Y_2,2 evaluated at a unit direction.
void sh_basis(const Vec3& omega, int degree, double* out);

/// Trainable voxel-grid field: per-node density logits plus per-node,
/// per-SH-coefficient complex emission spectra. Nodes sit on a regular grid
/// spanning the bounds; queries interpolate the 8 surrounding nodes.
class VoxelGridField : public Field {
 public:
  VoxelGridField(const Eigen::AlignedBox3d& bounds, const Eigen::Vector3i& resolution,
                 int sh_degree, int n_fft, double sample_rate, const Pose& emitter);

  int n_fft() const override { return n_fft_; }
  double sample_rate() const override { return sample_rate_; }
  const Eigen::AlignedBox3d& bounds() const { return bounds_; }
  const Eigen::Vector3i& resolution() const { return resolution_; }
  int sh_degree() const { return sh_degree_; }
  const Pose& emitter() const { return emitter_; }

  Eigen::Index n_nodes() const { return static_cast<Eigen::Index>(resolution_.x()) * resolution_.y() * resolution_.z(); }
  Eigen::Index n_params() const { return n_nodes() * (1 + 2 * sh_count(sh_degree_) * n_bins()); }

  /// density logits, one per node; sigma = softplus(logit)
  ArrayXd& density_logits() { return density_; }
  const ArrayXd& density_logits() const { return density_; }
  /// emission coefficients, row (node * n_sh + sh), column = frequency bin
  Eigen::ArrayXXcd& emission_coeffs() { return emission_; }
  const Eigen::ArrayXXcd& emission_coeffs() const { return emission_; }

  void query_into(const Vec3& p, const Vec3& omega, const Pose& emitter,
                  double& sigma, ArrayXcd& emission) const override;

  /// Gradient accumulation buffers, same shapes as the parameters.
  struct Gradients {
    ArrayXd density;
    Eigen::ArrayXXcd emission;
  };
  Gradients zero_gradients() const;

  /// Accumulates exact adjoints of the trilinear + SH evaluation. Adjoint
  /// lists must match the point list in length.
  void query_gradients(const std::vector<Vec3>& points, const std::vector<Vec3>& directions,
                       const Pose& emitter, const std::vector<double>& dsigma,
                       const std::vector<ArrayXcd>& demission, Gradients& grads) const;

  /// Single-point adjoint, reusable from the renderer inner loop.
  void accumulate_point_gradient(const Vec3& p, const Vec3& omega, double dsigma,
                                 const ArrayXcd& demission, Gradients& grads) const;

  void save(const std::string& path) const;
  static VoxelGridField load(const std::string& path);

  /// Flattened parameter view used by the optimizer: density logits followed
  /// by interleaved (re, im) emission coefficients.
  ArrayXd flatten_params() const;
  void unflatten_params(const ArrayXd& flat);
  static ArrayXd flatten_gradients(const Gradients& grads);

 private:
  struct NodeWeights {
    Eigen::Index idx[8];
    double w[8];
    int count = 0;
  };
  bool node_weights(const Vec3& p, NodeWeights& nw) const;

  Eigen::AlignedBox3d bounds_;
  Eigen::Vector3i resolution_;
  int sh_degree_;
  int n_fft_;
  double sample_rate_;
  Pose emitter_;
  ArrayXd density_;
  Eigen::ArrayXXcd emission_;
};

/// Free-field oracle: every point re-emits the source impulse carrying its
/// accumulated propagation phase exp(-j 2 pi f |p - p_e| / v) at unit
/// amplitude, and the medium is opaque beyond a small standoff so a ray
/// terminates at its first sample. Rendering this field reproduces the
/// free-field delay, phase slope, and 1/distance amplitude.
class AnalyticPointSourceField : public Field {
 public:
  AnalyticPointSourceField(const Vec3& source, double standoff, double density,
                           double speed_of_sound, double sample_rate, int n_fft);

  int n_fft() const override { return n_fft_; }
  double sample_rate() const override { return sample_rate_; }
  const Vec3& source() const { return source_; }

  void query_into(const Vec3& p, const Vec3& omega, const Pose& emitter,
                  double& sigma, ArrayXcd& emission) const override;

 private:
  Vec3 source_;
  double standoff_;
  double density_;
  double speed_of_sound_;
  double sample_rate_;
  int n_fft_;
};

/// standoff epsilon keeps the singular source point outside the opaque
/// region; density is the opacity rate in 1/m.
std::unique_ptr<AnalyticPointSourceField> make_analytic_point_source(
    const Vec3& source, double epsilon, double speed_of_sound, double sample_rate,
    int n_fft, double density = 1e4);

}  // namespace irtk::field
