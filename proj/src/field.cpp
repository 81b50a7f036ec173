#include "irtk/field.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace irtk::field {

namespace {

double softplus(double x) {
  // log1p(exp(x)) with overflow guard
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::vector<FieldResponse> Field::query_batch(const std::vector<Vec3>& points,
                                              const std::vector<Vec3>& directions,
                                              const Pose& emitter) const {
  if (points.size() != directions.size())
    throw std::invalid_argument("query_batch: points/directions size mismatch");
  std::vector<FieldResponse> out(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    out[i].emission = ArrayXcd::Zero(n_bins());
    query_into(points[i], directions[i], emitter, out[i].sigma, out[i].emission);
  }
  return out;
}

void sh_basis(const Vec3& omega, int degree, double* out) {
  const double x = omega.x(), y = omega.y(), z = omega.z();
  out[0] = 0.28209479177387814;  // 1/(2 sqrt(pi))
  if (degree < 1) return;
  constexpr double c1 = 0.4886025119029199;  // sqrt(3/(4 pi))
  out[1] = c1 * y;
  out[2] = c1 * z;
  out[3] = c1 * x;
  if (degree < 2) return;
  constexpr double c2 = 1.0925484305920792;   // sqrt(15/(4 pi))
  constexpr double c20 = 0.31539156525252005; // sqrt(5/(16 pi))
  constexpr double c22 = 0.5462742152960396;  // sqrt(15/(16 pi))
  out[4] = c2 * x * y;
  out[5] = c2 * y * z;
  out[6] = c20 * (3.0 * z * z - 1.0);
  out[7] = c2 * x * z;
  out[8] = c22 * (x * x - y * y);
}

VoxelGridField::VoxelGridField(const Eigen::AlignedBox3d& bounds,
                               const Eigen::Vector3i& resolution, int sh_degree,
                               int n_fft, double sample_rate, const Pose& emitter)
    : bounds_(bounds),
      resolution_(resolution),
      sh_degree_(sh_degree),
      n_fft_(n_fft),
      sample_rate_(sample_rate),
      emitter_(emitter) {
  if ((bounds.max().array() <= bounds.min().array()).any())
    throw std::invalid_argument("VoxelGridField: degenerate bounds");
  if ((resolution.array() < 2).any())
    throw std::invalid_argument("VoxelGridField: need at least 2 nodes per axis");
  if (sh_degree < 0 || sh_degree > 2)
    throw std::invalid_argument("VoxelGridField: sh_degree must be 0..2");
  if (n_fft < 2 || n_fft % 2 != 0)
    throw std::invalid_argument("VoxelGridField: n_fft must be even and >= 2");
  if (sample_rate <= 0.0) throw std::invalid_argument("VoxelGridField: bad sample rate");
  // softplus(rho0) = 1e-2  =>  rho0 = log(exp(0.01) - 1)
  const double rho0 = std::log(std::expm1(0.01));
  density_ = ArrayXd::Constant(n_nodes(), rho0);
  emission_ = Eigen::ArrayXXcd::Zero(n_nodes() * sh_count(sh_degree_), n_bins());
}

bool VoxelGridField::node_weights(const Vec3& p, NodeWeights& nw) const {
  const Vec3 ext = bounds_.max() - bounds_.min();
  Vec3 u;  // grid coordinates in node units, 0 .. res-1
  for (int a = 0; a < 3; ++a) {
    double t = (p[a] - bounds_.min()[a]) / ext[a];
    if (t < 0.0 || t > 1.0) return false;
    u[a] = t * (resolution_[a] - 1);
  }
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    i0[a] = static_cast<int>(std::floor(u[a]));
    if (i0[a] > resolution_[a] - 2) i0[a] = resolution_[a] - 2;
    f[a] = u[a] - i0[a];
  }
  const Eigen::Index sy = resolution_.x();
  const Eigen::Index sz = static_cast<Eigen::Index>(resolution_.x()) * resolution_.y();
  nw.count = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        double w = (dx ? f[0] : 1.0 - f[0]) * (dy ? f[1] : 1.0 - f[1]) *
                   (dz ? f[2] : 1.0 - f[2]);
        nw.idx[nw.count] = (i0[0] + dx) + sy * (i0[1] + dy) + sz * (i0[2] + dz);
        nw.w[nw.count] = w;
        ++nw.count;
      }
  return true;
}

void VoxelGridField::query_into(const Vec3& p, const Vec3& omega, const Pose& /*emitter*/,
                                double& sigma, ArrayXcd& emission) const {
  sigma = 0.0;
  emission.setZero();
  NodeWeights nw;
  if (!node_weights(p, nw)) return;
  double sh[9];
  sh_basis(omega, sh_degree_, sh);
  const int nsh = sh_count(sh_degree_);
  for (int i = 0; i < nw.count; ++i) {
    sigma += nw.w[i] * softplus(density_[nw.idx[i]]);
    const Eigen::Index base = nw.idx[i] * nsh;
    for (int s = 0; s < nsh; ++s) {
      const double a = nw.w[i] * sh[s];
      if (a != 0.0) emission += a * emission_.row(base + s).transpose();
    }
  }
}

VoxelGridField::Gradients VoxelGridField::zero_gradients() const {
  Gradients g;
  g.density = ArrayXd::Zero(n_nodes());
  g.emission = Eigen::ArrayXXcd::Zero(emission_.rows(), emission_.cols());
  return g;
}

void VoxelGridField::accumulate_point_gradient(const Vec3& p, const Vec3& omega,
                                               double dsigma, const ArrayXcd& demission,
                                               Gradients& grads) const {
  NodeWeights nw;
  if (!node_weights(p, nw)) return;
  double sh[9];
  sh_basis(omega, sh_degree_, sh);
  const int nsh = sh_count(sh_degree_);
  for (int i = 0; i < nw.count; ++i) {
    grads.density[nw.idx[i]] += dsigma * nw.w[i] * sigmoid(density_[nw.idx[i]]);
    const Eigen::Index base = nw.idx[i] * nsh;
    for (int s = 0; s < nsh; ++s) {
      const double a = nw.w[i] * sh[s];
      if (a != 0.0) grads.emission.row(base + s) += a * demission.transpose();
    }
  }
}

void VoxelGridField::query_gradients(const std::vector<Vec3>& points,
                                     const std::vector<Vec3>& directions,
                                     const Pose& /*emitter*/,
                                     const std::vector<double>& dsigma,
                                     const std::vector<ArrayXcd>& demission,
                                     Gradients& grads) const {
  if (points.size() != directions.size() || points.size() != dsigma.size() ||
      points.size() != demission.size())
    throw std::invalid_argument("query_gradients: size mismatch");
  for (size_t i = 0; i < points.size(); ++i)
    accumulate_point_gradient(points[i], directions[i], dsigma[i], demission[i], grads);
}

namespace {
constexpr char kMagic[8] = {'I', 'R', 'T', 'K', 'F', 'L', 'D', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void VoxelGridField::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write(kMagic, 8);
  for (int a = 0; a < 3; ++a) write_pod(os, bounds_.min()[a]);
  for (int a = 0; a < 3; ++a) write_pod(os, bounds_.max()[a]);
  for (int a = 0; a < 3; ++a) write_pod(os, static_cast<std::int32_t>(resolution_[a]));
  write_pod(os, static_cast<std::int32_t>(sh_degree_));
  write_pod(os, static_cast<std::int32_t>(n_fft_));
  write_pod(os, sample_rate_);
  for (int a = 0; a < 3; ++a) write_pod(os, emitter_.position[a]);
  for (int a = 0; a < 3; ++a) write_pod(os, emitter_.orientation[a]);
  os.write(reinterpret_cast<const char*>(density_.data()),
           static_cast<std::streamsize>(density_.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(emission_.data()),
           static_cast<std::streamsize>(emission_.size() * sizeof(Complex)));
  if (!os) throw std::runtime_error("write failed: " + path);
}

VoxelGridField VoxelGridField::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not a field checkpoint: " + path);
  Vec3 lo, hi;
  for (int a = 0; a < 3; ++a) read_pod(is, lo[a]);
  for (int a = 0; a < 3; ++a) read_pod(is, hi[a]);
  Eigen::Vector3i res;
  std::int32_t v32;
  for (int a = 0; a < 3; ++a) {
    read_pod(is, v32);
    res[a] = v32;
  }
  std::int32_t degree, nfft;
  read_pod(is, degree);
  read_pod(is, nfft);
  double sr;
  read_pod(is, sr);
  Vec3 pos, dir;
  for (int a = 0; a < 3; ++a) read_pod(is, pos[a]);
  for (int a = 0; a < 3; ++a) read_pod(is, dir[a]);
  if (!is) throw std::runtime_error("truncated field checkpoint: " + path);
  VoxelGridField f(Eigen::AlignedBox3d(lo, hi), res, degree, nfft, sr, Pose{pos, dir});
  is.read(reinterpret_cast<char*>(f.density_.data()),
          static_cast<std::streamsize>(f.density_.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(f.emission_.data()),
          static_cast<std::streamsize>(f.emission_.size() * sizeof(Complex)));
  if (!is) throw std::runtime_error("truncated field checkpoint: " + path);
  return f;
}

ArrayXd VoxelGridField::flatten_params() const {
  ArrayXd flat(n_params());
  Eigen::Index k = 0;
  flat.head(density_.size()) = density_;
  k = density_.size();
  const Complex* e = emission_.data();
  for (Eigen::Index i = 0; i < emission_.size(); ++i) {
    flat[k++] = e[i].real();
    flat[k++] = e[i].imag();
  }
  return flat;
}

void VoxelGridField::unflatten_params(const ArrayXd& flat) {
  if (flat.size() != n_params())
    throw std::invalid_argument("unflatten_params: size mismatch");
  density_ = flat.head(density_.size());
  Eigen::Index k = density_.size();
  Complex* e = emission_.data();
  for (Eigen::Index i = 0; i < emission_.size(); ++i) {
    e[i] = Complex(flat[k], flat[k + 1]);
    k += 2;
  }
}

ArrayXd VoxelGridField::flatten_gradients(const Gradients& grads) {
  ArrayXd flat(grads.density.size() + 2 * grads.emission.size());
  flat.head(grads.density.size()) = grads.density;
  Eigen::Index k = grads.density.size();
  const Complex* e = grads.emission.data();
  for (Eigen::Index i = 0; i < grads.emission.size(); ++i) {
    flat[k++] = e[i].real();
    flat[k++] = e[i].imag();
  }
  return flat;
}

AnalyticPointSourceField::AnalyticPointSourceField(const Vec3& source, double standoff,
                                                   double density, double speed_of_sound,
                                                   double sample_rate, int n_fft)
    : source_(source),
      standoff_(standoff),
      density_(density),
      speed_of_sound_(speed_of_sound),
      sample_rate_(sample_rate),
      n_fft_(n_fft) {
  if (standoff < 0.0 || density <= 0.0 || speed_of_sound <= 0.0 || sample_rate <= 0.0 ||
      n_fft < 2 || n_fft % 2 != 0)
    throw std::invalid_argument("AnalyticPointSourceField: bad parameters");
}

void AnalyticPointSourceField::query_into(const Vec3& p, const Vec3& /*omega*/,
                                          const Pose& /*emitter*/, double& sigma,
                                          ArrayXcd& emission) const {
  const double dist = (p - source_).norm();
  sigma = dist <= standoff_ ? 0.0 : density_;
  const double delay = dist / speed_of_sound_;
  const Eigen::Index nb = n_bins();
  for (Eigen::Index k = 0; k < nb; ++k) {
    const double f = static_cast<double>(k) * sample_rate_ / n_fft_;
    const double phi = -2.0 * EIGEN_PI * f * delay;
    emission[k] = Complex(std::cos(phi), std::sin(phi));
  }
}

std::unique_ptr<AnalyticPointSourceField> make_analytic_point_source(
    const Vec3& source, double epsilon, double speed_of_sound, double sample_rate,
    int n_fft, double density) {
  return std::make_unique<AnalyticPointSourceField>(source, epsilon, density,
                                                    speed_of_sound, sample_rate, n_fft);
}

}  // namespace irtk::field
