#pragma once

#include <vector>

#include "irtk/types.hpp"

namespace irtk::signals {

/// STFT resolution set; every entry must satisfy hop <= window <= fft.
struct StftResolution {
  int fft_size;
  int hop_size;
  int window_size;
};

struct StftConfig {
  std::vector<StftResolution> resolutions;

  explicit StftConfig(std::vector<StftResolution> res);
  /// (512,128,512), (1024,256,1024), (2048,512,2048)
  static StftConfig defaults();
};

/// Real DFT of the signal zero-padded to n_fft. Requires n_fft >= 2x the
/// signal length so frequency-domain delays stay linear (non-circular).
Spectrum forward_transform(const SampledIR& ir, int n_fft);

/// Real inverse DFT truncated to out_len samples (out_len <= n_fft).
SampledIR inverse_transform(const Spectrum& spec, int out_len);

/// Multiplies bin k by exp(-j 2 pi f_k delay). Delay must be non-negative
/// and fit inside the padded transform window.
Spectrum apply_delay(const Spectrum& spec, double delay_seconds);

/// |analytic signal| per sample.
ArrayXd hilbert_envelope(const SampledIR& ir);

/// Hann-windowed frame magnitudes per resolution; frame count is
/// floor((len - window)/hop) + 1. Matrix layout: bins x frames.
std::vector<Eigen::MatrixXd> stft_magnitudes(const SampledIR& ir, const StftConfig& cfg);

/// Complex Hann-windowed STFT frames for one resolution (bins x frames).
Eigen::MatrixXcd stft_frames(const ArrayXd& x, const StftResolution& res);

/// Hann-windowed sinc centered at (taps-1)/2 + fractional_delay.
/// taps must be odd and >= 9; 0 <= fractional_delay < 1.
ArrayXd windowed_sinc_kernel(double fractional_delay, int taps);

/// Periodic Hann window of length n.
ArrayXd hann_window(int n);

}  // namespace irtk::signals
