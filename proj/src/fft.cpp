#include "irtk/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace irtk::fft {

namespace {

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, bit-reversal permutation first.
void fft_pow2(std::vector<Complex>& a, bool inverse) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    Complex wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      Complex w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        Complex u = a[i + k];
        Complex v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Bluestein's algorithm: arbitrary-length DFT via a padded pow2 convolution.
void fft_bluestein(std::vector<Complex>& a, bool inverse) {
  const size_t n = a.size();
  const double sgn = inverse ? 1.0 : -1.0;
  size_t m = 1;
  while (m < 2 * n + 1) m <<= 1;

  std::vector<Complex> chirp(n);
  for (size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small for large k
    uint64_t k2 = (static_cast<uint64_t>(k) * k) % (2 * n);
    double ang = sgn * M_PI * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = Complex(std::cos(ang), std::sin(ang));
  }

  std::vector<Complex> x(m, Complex(0, 0)), y(m, Complex(0, 0));
  for (size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);

  fft_pow2(x, false);
  fft_pow2(y, false);
  for (size_t k = 0; k < m; ++k) x[k] *= y[k];
  fft_pow2(x, true);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (size_t k = 0; k < n; ++k) a[k] = x[k] * inv_m * chirp[k];
}

}  // namespace

void transform(std::vector<Complex>& data, bool inverse) {
  const size_t n = data.size();
  if (n == 0) throw std::invalid_argument("fft: empty input");
  if (n == 1) return;
  if (is_pow2(n)) {
    fft_pow2(data, inverse);
  } else {
    fft_bluestein(data, inverse);
  }
  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& v : data) v *= inv_n;
  }
}

ArrayXcd rfft(const ArrayXd& x, int n_fft) {
  if (n_fft < 2 || n_fft % 2 != 0) throw std::invalid_argument("rfft: n_fft must be even, >= 2");
  if (x.size() > n_fft) throw std::invalid_argument("rfft: signal longer than n_fft");
  std::vector<Complex> buf(static_cast<size_t>(n_fft), Complex(0, 0));
  for (Eigen::Index i = 0; i < x.size(); ++i) buf[static_cast<size_t>(i)] = Complex(x[i], 0.0);
  transform(buf, false);
  ArrayXcd out(n_fft / 2 + 1);
  for (int k = 0; k <= n_fft / 2; ++k) out[k] = buf[static_cast<size_t>(k)];
  // real-signal spectrum: DC and Nyquist are real by construction
  out[0] = Complex(out[0].real(), 0.0);
  out[n_fft / 2] = Complex(out[n_fft / 2].real(), 0.0);
  return out;
}

ArrayXd irfft(const ArrayXcd& bins, int n_fft) {
  if (n_fft < 2 || n_fft % 2 != 0) throw std::invalid_argument("irfft: n_fft must be even, >= 2");
  if (bins.size() != n_fft / 2 + 1) throw std::invalid_argument("irfft: bin count mismatch");
  std::vector<Complex> buf(static_cast<size_t>(n_fft));
  for (int k = 0; k <= n_fft / 2; ++k) buf[static_cast<size_t>(k)] = bins[k];
  for (int k = n_fft / 2 + 1; k < n_fft; ++k) buf[static_cast<size_t>(k)] = std::conj(bins[n_fft - k]);
  transform(buf, true);
  ArrayXd out(n_fft);
  for (int i = 0; i < n_fft; ++i) out[i] = buf[static_cast<size_t>(i)].real();
  return out;
}

ArrayXd rfft_adjoint(const ArrayXcd& grad_bins, int n_fft) {
  if (grad_bins.size() != n_fft / 2 + 1) throw std::invalid_argument("rfft_adjoint: bin count mismatch");
  // adjoint under dL = sum_k Re(conj(g_k) dH_k), each stored bin counted once
  std::vector<Complex> buf(static_cast<size_t>(n_fft), Complex(0, 0));
  for (int k = 0; k <= n_fft / 2; ++k) buf[static_cast<size_t>(k)] = std::conj(grad_bins[k]);
  transform(buf, false);
  ArrayXd out(n_fft);
  for (int i = 0; i < n_fft; ++i) out[i] = buf[static_cast<size_t>(i)].real();
  return out;
}

ArrayXcd irfft_adjoint(const ArrayXd& grad_time, int n_fft) {
  if (grad_time.size() != n_fft) throw std::invalid_argument("irfft_adjoint: length mismatch");
  ArrayXcd g = rfft(grad_time, n_fft);
  const double two_over_n = 2.0 / n_fft;
  g *= two_over_n;
  g[0] *= 0.5;
  g[n_fft / 2] *= 0.5;
  return g;
}

}  // namespace irtk::fft
