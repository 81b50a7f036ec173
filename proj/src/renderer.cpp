#include "irtk/renderer.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "irtk/fft.hpp"

namespace irtk::renderer {

namespace {

int worker_count(int requested, int jobs) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  return std::min(n, jobs);
}

// Per-bin phase rotation e^{-j 2 pi f_k tau}, periodically re-anchored to an
// exact value so recurrence roundoff cannot accumulate.
class PhaseRotor {
 public:
  PhaseRotor(double tau, double sample_rate, int n_fft)
      : dphi_(-2.0 * M_PI * tau * sample_rate / n_fft),
        step_(std::cos(dphi_), std::sin(dphi_)) {}

  Complex at(Eigen::Index k) {
    if (k % 64 == 0) cur_ = Complex(std::cos(dphi_ * k), std::sin(dphi_ * k));
    Complex out = cur_;
    cur_ *= step_;
    return out;
  }

 private:
  double dphi_;
  Complex step_;
  Complex cur_{1.0, 0.0};
};

}  // namespace

void RenderConfig::validate() const {
  if (n_theta < 1 || n_phi < 1 || n_r < 1)
    throw std::invalid_argument("RenderConfig: sampling counts must be >= 1");
  if (!(u_near >= 0.0) || !(u_near < u_far))
    throw std::invalid_argument("RenderConfig: need 0 <= u_near < u_far");
  if (!(speed_of_sound > 0.0)) throw std::invalid_argument("RenderConfig: bad speed of sound");
  if (n_fft < 2 || n_fft % 2 != 0)
    throw std::invalid_argument("RenderConfig: n_fft must be even, >= 2");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("RenderConfig: bad sample rate");
  if (ir_len < 1 || ir_len > n_fft)
    throw std::invalid_argument("RenderConfig: need 1 <= ir_len <= n_fft");
  if (u_far / speed_of_sound >= n_fft / sample_rate)
    throw std::invalid_argument("RenderConfig: far bound delay exceeds the transform window");
}

DirectionSet sample_directions(int n_theta, int n_phi, Rng& rng) {
  if (n_theta < 1 || n_phi < 1)
    throw std::invalid_argument("sample_directions: counts must be >= 1");
  DirectionSet out;
  out.directions.reserve(static_cast<size_t>(n_theta) * n_phi);
  std::vector<double> theta(n_theta);
  for (int i = 0; i < n_theta; ++i)
    theta[i] = 2.0 * M_PI * (static_cast<double>(i) + rng.uniform()) / n_theta;
  for (int j = 1; j <= n_phi; ++j) {
    const double cos_phi = 2.0 * (static_cast<double>(j) - 0.5) / n_phi - 1.0;
    const double sin_phi = std::sqrt(std::max(0.0, 1.0 - cos_phi * cos_phi));
    for (int i = 0; i < n_theta; ++i)
      out.directions.emplace_back(sin_phi * std::cos(theta[i]), sin_phi * std::sin(theta[i]),
                                  cos_phi);
  }
  out.weights =
      ArrayXd::Constant(out.directions.size(), 1.0 / (static_cast<double>(n_theta) * n_phi));
  return out;
}

std::vector<RaySample> sample_points(const Vec3& origin, const Vec3& direction,
                                     const RenderConfig& cfg) {
  const double du = (cfg.u_far - cfg.u_near) / cfg.n_r;
  std::vector<RaySample> out(static_cast<size_t>(cfg.n_r));
  for (int m = 1; m <= cfg.n_r; ++m) {
    const double u = (cfg.u_far - cfg.u_near) * m / cfg.n_r + cfg.u_near;
    out[static_cast<size_t>(m - 1)] = {origin + u * direction, u, du};
  }
  return out;
}

void CardioidGain::gain_into(const Vec3& omega, const Pose& listener, ArrayXcd& out) const {
  out.setConstant(0.5 * (1.0 + omega.dot(listener.orientation)));
}

HrtfTable::HrtfTable(int n_azimuth, int n_elevation, double sample_rate, int n_fft)
    : n_az_(n_azimuth), n_el_(n_elevation), sample_rate_(sample_rate), n_fft_(n_fft) {
  if (n_az_ < 1 || n_el_ < 1) throw std::invalid_argument("HrtfTable: grid sizes must be >= 1");
  if (n_fft_ < 2 || n_fft_ % 2 != 0)
    throw std::invalid_argument("HrtfTable: n_fft must be even, >= 2");
  if (!(sample_rate_ > 0.0)) throw std::invalid_argument("HrtfTable: bad sample rate");
  const Eigen::Index cells = static_cast<Eigen::Index>(n_az_) * n_el_;
  gains_[0] = Eigen::ArrayXXcd::Ones(cells, n_bins());
  gains_[1] = Eigen::ArrayXXcd::Ones(cells, n_bins());
}

Eigen::Index HrtfTable::cell_index(const Vec3& omega, const Pose& listener) const {
  const Vec3 fwd = listener.orientation;
  Vec3 up = Vec3::UnitZ();
  if (std::abs(fwd.dot(up)) > 0.999) up = Vec3::UnitX();
  Vec3 left = up.cross(fwd).normalized();
  Vec3 top = fwd.cross(left);
  const double x = omega.dot(fwd), y = omega.dot(left), z = omega.dot(top);
  double az = std::atan2(y, x);
  if (az < 0.0) az += 2.0 * M_PI;
  const double el = std::acos(std::clamp(z, -1.0, 1.0));
  int iaz = static_cast<int>(std::lround(az / (2.0 * M_PI) * n_az_)) % n_az_;
  int iel = n_el_ == 1 ? 0
                       : std::clamp(static_cast<int>(std::lround(el / M_PI * (n_el_ - 1))), 0,
                                    n_el_ - 1);
  return static_cast<Eigen::Index>(iel) * n_az_ + iaz;
}

void HrtfTable::save(const std::string& path) const {
  nlohmann::json header = {{"n_azimuth", n_az_},
                           {"n_elevation", n_el_},
                           {"sample_rate", sample_rate_},
                           {"n_fft", n_fft_}};
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os << header.dump() << '\n';
  for (int ear = 0; ear < 2; ++ear)
    os.write(reinterpret_cast<const char*>(gains_[ear].data()),
             static_cast<std::streamsize>(gains_[ear].size() * sizeof(Complex)));
  if (!os) throw std::runtime_error("write failed: " + path);
}

HrtfTable HrtfTable::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("missing header: " + path);
  const auto header = nlohmann::json::parse(line);
  HrtfTable t(header.at("n_azimuth").get<int>(), header.at("n_elevation").get<int>(),
              header.at("sample_rate").get<double>(), header.at("n_fft").get<int>());
  for (int ear = 0; ear < 2; ++ear)
    is.read(reinterpret_cast<char*>(t.gains_[ear].data()),
            static_cast<std::streamsize>(t.gains_[ear].size() * sizeof(Complex)));
  if (!is) throw std::runtime_error("truncated table: " + path);
  return t;
}

void HrtfGain::gain_into(const Vec3& omega, const Pose& listener, ArrayXcd& out) const {
  if (out.size() != table_->n_bins())
    throw std::invalid_argument("HrtfGain: bin count does not match the table");
  out = table_->gains(ear_).row(table_->cell_index(omega, listener)).transpose();
}

namespace {

// Shared inner loop: transmittance quadrature along one ray. Accumulates
// w_m * e^{-j 2 pi f u_m / v} * emission_m into `bins`.
void accumulate_ray(const field::Field& f, const Vec3& origin, const Vec3& omega,
                    const Pose& emitter, const RenderConfig& cfg, ArrayXcd& emission_buf,
                    ArrayXcd& bins) {
  const Eigen::Index nb = bins.size();
  double accum = 0.0;  // sum of sigma * du so far
  const auto points = sample_points(origin, omega, cfg);
  for (const auto& s : points) {
    double sigma = 0.0;
    f.query_into(s.position, omega, emitter, sigma, emission_buf);
    const double sdu = sigma * s.du;
    const double w = std::exp(-accum) * (-std::expm1(-sdu));
    accum += sdu;
    if (w == 0.0) continue;
    PhaseRotor rot(s.u / cfg.speed_of_sound, cfg.sample_rate, cfg.n_fft);
    for (Eigen::Index k = 0; k < nb; ++k) bins[k] += (w * rot.at(k)) * emission_buf[k];
  }
}

}  // namespace

Spectrum render_ray(const field::Field& f, const Vec3& listener_pos, const Vec3& omega,
                    const Pose& emitter, const RenderConfig& cfg) {
  cfg.validate();
  const Eigen::Index nb = cfg.n_fft / 2 + 1;
  if (f.n_bins() != nb)
    throw std::invalid_argument("render_ray: field bin count does not match config");
  ArrayXcd bins = ArrayXcd::Zero(nb);
  ArrayXcd emission_buf = ArrayXcd::Zero(nb);
  accumulate_ray(f, listener_pos, omega, emitter, cfg, emission_buf, bins);
  return Spectrum(std::move(bins), cfg.n_fft, cfg.sample_rate);
}

DirectionSet directions_for(const RenderConfig& cfg) {
  Rng rng = Rng::stream(cfg.seed, 0x5d1ec7);
  return sample_directions(cfg.n_theta, cfg.n_phi, rng);
}

namespace {

ArrayXd decay_profile(const RenderConfig& cfg) {
  // clamp below the near-bound time (and half a sample, so t=0 stays finite)
  const double t_min = std::max(cfg.u_near / cfg.speed_of_sound, 0.5 / cfg.sample_rate);
  ArrayXd d(cfg.n_fft);
  for (int n = 0; n < cfg.n_fft; ++n) {
    const double t = std::max(static_cast<double>(n) / cfg.sample_rate, t_min);
    d[n] = 1.0 / (t * cfg.speed_of_sound);
  }
  return d;
}

}  // namespace

RenderResult render_ir(const field::Field& f, const Pose& listener, const GainPattern& gain,
                       const Pose& emitter, const RenderConfig& cfg,
                       const DirectionSet& dirs) {
  cfg.validate();
  const Eigen::Index nb = cfg.n_fft / 2 + 1;
  if (f.n_bins() != nb)
    throw std::invalid_argument("render_ir: field bin count does not match config");
  const int n_dirs = static_cast<int>(dirs.directions.size());

  // Per-direction contributions land in fixed slots so the reduction order
  // (and hence the result) does not depend on the worker count.
  std::vector<ArrayXcd> contrib(static_cast<size_t>(n_dirs));
  const int n_workers = worker_count(cfg.threads, n_dirs);
  auto run = [&](int first, int last) {
    ArrayXcd emission_buf = ArrayXcd::Zero(nb);
    ArrayXcd gain_buf = ArrayXcd::Zero(nb);
    for (int d = first; d < last; ++d) {
      ArrayXcd bins = ArrayXcd::Zero(nb);
      accumulate_ray(f, listener.position, dirs.directions[d], emitter, cfg, emission_buf,
                     bins);
      gain.gain_into(dirs.directions[d], listener, gain_buf);
      contrib[static_cast<size_t>(d)] = dirs.weights[d] * gain_buf * bins;
    }
  };
  if (n_workers <= 1) {
    run(0, n_dirs);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n_dirs + n_workers - 1) / n_workers;
    for (int w = 0; w < n_workers; ++w)
      pool.emplace_back(run, w * chunk, std::min(n_dirs, (w + 1) * chunk));
    for (auto& t : pool) t.join();
  }

  ArrayXcd pre = ArrayXcd::Zero(nb);
  for (const auto& c : contrib) pre += c;

  ArrayXd time = fft::irfft(pre, cfg.n_fft);
  time *= decay_profile(cfg);
  ArrayXcd post = fft::rfft(time, cfg.n_fft);
  RenderResult out;
  out.spectrum = Spectrum(std::move(post), cfg.n_fft, cfg.sample_rate);
  out.ir = SampledIR(time.head(cfg.ir_len), cfg.sample_rate);
  return out;
}

RenderResult render_ir(const field::Field& f, const Pose& listener, const GainPattern& gain,
                       const Pose& emitter, const RenderConfig& cfg) {
  return render_ir(f, listener, gain, emitter, cfg, directions_for(cfg));
}

StereoIR render_binaural(const field::Field& f, const Pose& head, double ear_spacing,
                         const GainPattern& gain_left, const GainPattern& gain_right,
                         const Pose& emitter, const RenderConfig& cfg) {
  if (!(ear_spacing > 0.0)) throw std::invalid_argument("render_binaural: ear_spacing must be > 0");
  Vec3 up = Vec3::UnitZ();
  if (std::abs(head.orientation.dot(up)) > 0.999) up = Vec3::UnitX();
  const Vec3 left_axis = up.cross(head.orientation).normalized();
  const Vec3 offset = 0.5 * ear_spacing * left_axis;
  const DirectionSet dirs = directions_for(cfg);
  const Pose left_pose(head.position + offset, head.orientation);
  const Pose right_pose(head.position - offset, head.orientation);
  const RenderResult left = render_ir(f, left_pose, gain_left, emitter, cfg, dirs);
  const RenderResult right = render_ir(f, right_pose, gain_right, emitter, cfg, dirs);
  StereoIR out;
  out.sample_rate = cfg.sample_rate;
  out.samples.resize(cfg.ir_len, 2);
  out.samples.col(0) = left.ir.samples;
  out.samples.col(1) = right.ir.samples;
  return out;
}

void render_ir_adjoint(const field::VoxelGridField& f, const Pose& listener,
                       const GainPattern& gain, const Pose& emitter,
                       const RenderConfig& cfg, const DirectionSet& dirs,
                       const ArrayXcd& d_spectrum, const ArrayXd& d_ir,
                       field::VoxelGridField::Gradients& grads) {
  cfg.validate();
  const Eigen::Index nb = cfg.n_fft / 2 + 1;
  if (f.n_bins() != nb)
    throw std::invalid_argument("render_ir_adjoint: field bin count does not match config");
  if (d_spectrum.size() != 0 && d_spectrum.size() != nb)
    throw std::invalid_argument("render_ir_adjoint: d_spectrum size mismatch");
  if (d_ir.size() > cfg.n_fft)
    throw std::invalid_argument("render_ir_adjoint: d_ir longer than the transform window");

  // Pull the upstream gradients back to the pre-decay spectrum.
  ArrayXd g_time = ArrayXd::Zero(cfg.n_fft);
  if (d_spectrum.size() != 0) g_time = fft::rfft_adjoint(d_spectrum, cfg.n_fft);
  g_time.head(d_ir.size()) += d_ir;
  g_time *= decay_profile(cfg);
  const ArrayXcd g_pre = fft::irfft_adjoint(g_time, cfg.n_fft);
  if ((g_pre == Complex(0.0, 0.0)).all()) return;

  const size_t n_r = static_cast<size_t>(cfg.n_r);
  ArrayXcd gain_buf(nb), g_ray(nb), emission_buf(nb);
  std::vector<ArrayXcd> g_emission(n_r);
  std::vector<double> w(n_r), r(n_r), t_times_e(n_r);

  for (size_t d = 0; d < dirs.directions.size(); ++d) {
    const Vec3& omega = dirs.directions[d];
    gain.gain_into(omega, listener, gain_buf);
    // H = sum_d weight_d * G_d * H_ray_d, so dL/dH_ray = weight * conj(G) * dL/dH
    g_ray = dirs.weights[static_cast<Eigen::Index>(d)] * gain_buf.conjugate() * g_pre;

    const auto points = sample_points(listener.position, omega, cfg);
    double accum = 0.0;
    for (size_t m = 0; m < n_r; ++m) {
      const auto& s = points[m];
      double sigma = 0.0;
      f.query_into(s.position, omega, emitter, sigma, emission_buf);
      const double sdu = sigma * s.du;
      const double trans = std::exp(-accum);
      const double e = std::exp(-sdu);
      accum += sdu;
      w[m] = trans * (1.0 - e);
      t_times_e[m] = trans * e;
      // r_m = dL/dw_m for contribution w_m * phase_m * emission_m
      PhaseRotor rot(s.u / cfg.speed_of_sound, cfg.sample_rate, cfg.n_fft);
      double rm = 0.0;
      ArrayXcd& g_em = g_emission[m];
      g_em.resize(nb);
      for (Eigen::Index k = 0; k < nb; ++k) {
        const Complex phase = rot.at(k);
        rm += std::real(std::conj(g_ray[k]) * (phase * emission_buf[k]));
        g_em[k] = w[m] * std::conj(phase) * g_ray[k];
      }
      r[m] = rm;
    }

    // dL/dsigma_m = du * (T_m e^{-sigma_m du} r_m - sum_{j>m} w_j r_j):
    // sigma_m shapes its own weight and attenuates everything behind it.
    double suffix = 0.0;
    for (size_t m = n_r; m-- > 0;) {
      const double du = points[m].du;
      const double dsigma = du * (t_times_e[m] * r[m] - suffix);
      suffix += w[m] * r[m];
      f.accumulate_point_gradient(points[m].position, omega, dsigma, g_emission[m], grads);
    }
  }
}

void render_ir_adjoint(const field::VoxelGridField& f, const Pose& listener,
                       const GainPattern& gain, const Pose& emitter,
                       const RenderConfig& cfg, const ArrayXcd& d_spectrum,
                       const ArrayXd& d_ir, field::VoxelGridField::Gradients& grads) {
  render_ir_adjoint(f, listener, gain, emitter, cfg, directions_for(cfg), d_spectrum, d_ir,
                    grads);
}

}  // namespace irtk::renderer
