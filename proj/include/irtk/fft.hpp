#pragma once

#include <complex>
#include <vector>

#include "irtk/types.hpp"

namespace irtk::fft {

/// In-place complex DFT / inverse DFT of arbitrary length (radix-2 for powers
/// of two, Bluestein otherwise). Inverse includes the 1/n factor.
void transform(std::vector<Complex>& data, bool inverse);

/// Half-spectrum (n/2 + 1 bins) of a real signal zero-padded to n_fft (even).
ArrayXcd rfft(const ArrayXd& x, int n_fft);

/// Real inverse of a half-spectrum, full n_fft samples.
ArrayXd irfft(const ArrayXcd& bins, int n_fft);

/// Adjoint of rfft as a linear map R^n_fft -> C^(n/2+1) under the inner
/// product Re(sum conj(g_k) H_k) with Hermitian bins counted twice.
/// Maps a spectrum-domain gradient back to a time-domain gradient.
ArrayXd rfft_adjoint(const ArrayXcd& grad_bins, int n_fft);

/// Adjoint of irfft: maps a time-domain gradient to a spectrum-domain one.
ArrayXcd irfft_adjoint(const ArrayXd& grad_time, int n_fft);

}  // namespace irtk::fft
