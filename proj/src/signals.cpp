#include "irtk/signals.hpp"

#include <cmath>
#include <stdexcept>

#include "irtk/fft.hpp"

namespace irtk::signals {

StftConfig::StftConfig(std::vector<StftResolution> res) : resolutions(std::move(res)) {
  if (resolutions.empty()) throw std::invalid_argument("StftConfig: no resolutions");
  for (const auto& r : resolutions) {
    if (r.hop_size <= 0 || r.window_size <= 0 || r.fft_size <= 0)
      throw std::invalid_argument("StftConfig: sizes must be > 0");
    if (r.hop_size > r.window_size || r.window_size > r.fft_size)
      throw std::invalid_argument("StftConfig: need hop <= window <= fft");
  }
}

StftConfig StftConfig::defaults() {
  return StftConfig({{512, 128, 512}, {1024, 256, 1024}, {2048, 512, 2048}});
}

Spectrum forward_transform(const SampledIR& ir, int n_fft) {
  if (n_fft < 2 * ir.size())
    throw std::invalid_argument("forward_transform: n_fft < 2x signal length");
  if (n_fft % 2 != 0) throw std::invalid_argument("forward_transform: n_fft must be even");
  return Spectrum(fft::rfft(ir.samples, n_fft), n_fft, ir.sample_rate);
}

SampledIR inverse_transform(const Spectrum& spec, int out_len) {
  if (out_len < 1) throw std::invalid_argument("inverse_transform: out_len < 1");
  if (out_len > spec.n_fft) throw std::invalid_argument("inverse_transform: out_len > n_fft");
  ArrayXd full = fft::irfft(spec.bins, spec.n_fft);
  return SampledIR(full.head(out_len), spec.sample_rate);
}

Spectrum apply_delay(const Spectrum& spec, double delay_seconds) {
  if (delay_seconds < 0.0) throw std::invalid_argument("apply_delay: negative delay");
  if (delay_seconds >= static_cast<double>(spec.n_fft) / spec.sample_rate)
    throw std::invalid_argument("apply_delay: delay exceeds transform window");
  ArrayXcd out(spec.bins.size());
  const double base = -2.0 * M_PI * spec.sample_rate / spec.n_fft * delay_seconds;
  for (Eigen::Index k = 0; k < spec.bins.size(); ++k) {
    double ang = base * static_cast<double>(k);
    out[k] = spec.bins[k] * Complex(std::cos(ang), std::sin(ang));
  }
  return Spectrum(std::move(out), spec.n_fft, spec.sample_rate);
}

ArrayXd hilbert_envelope(const SampledIR& ir) {
  const Eigen::Index n = ir.size();
  if (n < 2) throw std::invalid_argument("hilbert_envelope: need >= 2 samples");
  std::vector<Complex> buf(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) buf[static_cast<size_t>(i)] = Complex(ir.samples[i], 0.0);
  fft::transform(buf, false);
  // analytic signal: zero negative frequencies, double positives
  const Eigen::Index half = n / 2;
  for (Eigen::Index k = 1; k < (n + 1) / 2; ++k) buf[static_cast<size_t>(k)] *= 2.0;
  if (n % 2 == 0) {
    // Nyquist stays single
    for (Eigen::Index k = half + 1; k < n; ++k) buf[static_cast<size_t>(k)] = Complex(0, 0);
  } else {
    for (Eigen::Index k = half + 1; k < n; ++k) buf[static_cast<size_t>(k)] = Complex(0, 0);
  }
  fft::transform(buf, true);
  ArrayXd env(n);
  for (Eigen::Index i = 0; i < n; ++i) env[i] = std::abs(buf[static_cast<size_t>(i)]);
  return env;
}

ArrayXd hann_window(int n) {
  ArrayXd w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) / n));
  return w;
}

Eigen::MatrixXcd stft_frames(const ArrayXd& x, const StftResolution& res) {
  if (x.size() < res.window_size)
    throw std::invalid_argument("stft: signal shorter than window");
  const int n_frames =
      static_cast<int>((x.size() - res.window_size) / res.hop_size) + 1;
  const int n_bins = res.fft_size / 2 + 1;
  const ArrayXd win = hann_window(res.window_size);
  Eigen::MatrixXcd out(n_bins, n_frames);
  for (int t = 0; t < n_frames; ++t) {
    ArrayXd frame = x.segment(static_cast<Eigen::Index>(t) * res.hop_size, res.window_size) * win;
    ArrayXcd bins = fft::rfft(frame, res.fft_size);
    out.col(t) = bins.matrix();
  }
  return out;
}

std::vector<Eigen::MatrixXd> stft_magnitudes(const SampledIR& ir, const StftConfig& cfg) {
  std::vector<Eigen::MatrixXd> mags;
  mags.reserve(cfg.resolutions.size());
  for (const auto& res : cfg.resolutions)
    mags.push_back(stft_frames(ir.samples, res).cwiseAbs());
  return mags;
}

ArrayXd windowed_sinc_kernel(double fractional_delay, int taps) {
  if (taps < 9 || taps % 2 == 0) throw std::invalid_argument("windowed_sinc_kernel: taps must be odd, >= 9");
  if (fractional_delay < 0.0 || fractional_delay >= 1.0)
    throw std::invalid_argument("windowed_sinc_kernel: fractional_delay in [0,1)");
  const double center = static_cast<double>(taps - 1) / 2.0 + fractional_delay;
  ArrayXd k(taps);
  for (int i = 0; i < taps; ++i) {
    const double x = static_cast<double>(i) - center;
    const double s = (x == 0.0) ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
    const double w = 0.5 * (1.0 + std::cos(2.0 * M_PI * x / taps));
    k[i] = s * w;
  }
  return k;
}

}  // namespace irtk::signals
