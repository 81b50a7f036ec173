#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <vector>

namespace irtk {

using Vec3 = Eigen::Vector3d;
using ArrayXd = Eigen::ArrayXd;
using ArrayXcd = Eigen::ArrayXcd;
using Complex = std::complex<double>;

/// Discrete time-domain impulse response, pressure amplitude per sample.
struct SampledIR {
  ArrayXd samples;
  double sample_rate = 0.0;

  SampledIR() = default;
  SampledIR(ArrayXd s, double sr) : samples(std::move(s)), sample_rate(sr) {
    if (samples.size() < 1) throw std::invalid_argument("SampledIR: empty");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("SampledIR: sample_rate must be > 0");
    if (!samples.isFinite().all()) throw std::invalid_argument("SampledIR: non-finite sample");
  }

  Eigen::Index size() const { return samples.size(); }
  double dt() const { return 1.0 / sample_rate; }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Complex half-spectrum of a real signal; bin k maps to f_k = k * sample_rate / n_fft.
struct Spectrum {
  ArrayXcd bins;   // n_fft/2 + 1 entries
  int n_fft = 0;   // even transform length
  double sample_rate = 0.0;

  Spectrum() = default;
  Spectrum(ArrayXcd b, int nfft, double sr)
      : bins(std::move(b)), n_fft(nfft), sample_rate(sr) {
    if (n_fft < 2 || n_fft % 2 != 0) throw std::invalid_argument("Spectrum: n_fft must be even, >= 2");
    if (bins.size() != n_fft / 2 + 1) throw std::invalid_argument("Spectrum: bin count != n_fft/2 + 1");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("Spectrum: sample_rate must be > 0");
  }

  Eigen::Index n_bins() const { return bins.size(); }
  double bin_freq(Eigen::Index k) const { return static_cast<double>(k) * sample_rate / n_fft; }
};

/// Position plus a unit orientation vector.
struct Pose {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::UnitX();

  Pose() = default;
  Pose(const Vec3& p, const Vec3& o) : position(p), orientation(o) {
    double n = orientation.norm();
    if (std::abs(n - 1.0) > 1e-9) {
      if (n <= 0.0 || !std::isfinite(n)) throw std::invalid_argument("Pose: degenerate orientation");
      orientation /= n;
    }
  }
};

}  // namespace irtk
