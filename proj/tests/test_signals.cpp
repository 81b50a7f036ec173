#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include "irtk/fft.hpp"
#include "irtk/rng.hpp"
#include "irtk/signals.hpp"
#include "irtk/wav.hpp"

using namespace irtk;

namespace {

// O(n^2) reference DFT
std::vector<Complex> naive_dft(const std::vector<Complex>& x, bool inverse) {
  const size_t n = x.size();
  std::vector<Complex> out(n, Complex(0, 0));
  const double sgn = inverse ? 1.0 : -1.0;
  for (size_t k = 0; k < n; ++k) {
    for (size_t j = 0; j < n; ++j) {
      const double ang = sgn * 2.0 * M_PI * static_cast<double>(k * j) / static_cast<double>(n);
      out[k] += x[j] * Complex(std::cos(ang), std::sin(ang));
    }
    if (inverse) out[k] /= static_cast<double>(n);
  }
  return out;
}

ArrayXd random_signal(Eigen::Index n, uint64_t seed) {
  Rng rng(seed);
  ArrayXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("complex transform matches the quadratic DFT") {
  for (size_t n : {2u, 8u, 15u, 64u, 100u, 128u}) {
    Rng rng(n);
    std::vector<Complex> x(n);
    for (auto& v : x) v = Complex(rng.normal(), rng.normal());
    auto ref = naive_dft(x, false);
    auto got = x;
    fft::transform(got, false);
    for (size_t k = 0; k < n; ++k) CHECK(std::abs(got[k] - ref[k]) < 1e-9 * std::sqrt(n));
    fft::transform(got, true);
    for (size_t k = 0; k < n; ++k) CHECK(std::abs(got[k] - x[k]) < 1e-10);
  }
}

TEST_CASE("rfft/irfft round trip and Parseval") {
  const int n = 256;
  const ArrayXd x = random_signal(n, 7);
  const ArrayXcd bins = fft::rfft(x, n);
  CHECK(bins.size() == n / 2 + 1);
  CHECK(bins[0].imag() == 0.0);
  CHECK(bins[n / 2].imag() == 0.0);
  const ArrayXd back = fft::irfft(bins, n);
  CHECK((back - x).abs().maxCoeff() < 1e-10);

  // Parseval with Hermitian bins counted twice
  double spec_energy = 0.0;
  for (int k = 0; k <= n / 2; ++k) {
    const double w = (k == 0 || k == n / 2) ? 1.0 : 2.0;
    spec_energy += w * std::norm(bins[k]);
  }
  CHECK(std::abs(spec_energy / n - x.square().sum()) < 1e-8);
}

TEST_CASE("transform adjoints satisfy the inner-product identity") {
  const int n = 128;
  Rng rng(11);
  const ArrayXd x = random_signal(n, 3);
  ArrayXcd g(n / 2 + 1);
  for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = Complex(rng.normal(), rng.normal());

  // <g, rfft(x)> == <rfft_adjoint(g), x> with Re(conj(g) H) pairing
  const ArrayXcd H = fft::rfft(x, n);
  double lhs = 0.0;
  for (Eigen::Index k = 0; k < g.size(); ++k) lhs += std::real(std::conj(g[k]) * H[k]);
  const ArrayXd gt = fft::rfft_adjoint(g, n);
  CHECK(std::abs(lhs - (gt * x).sum()) < 1e-8);

  // <t, irfft(S)> == Re<irfft_adjoint(t), S>
  const ArrayXd t = random_signal(n, 5);
  ArrayXcd S(n / 2 + 1);
  for (Eigen::Index k = 0; k < S.size(); ++k) S[k] = Complex(rng.normal(), rng.normal());
  S[0] = Complex(S[0].real(), 0.0);
  S[n / 2] = Complex(S[n / 2].real(), 0.0);
  const double lhs2 = (t * fft::irfft(S, n)).sum();
  const ArrayXcd gs = fft::irfft_adjoint(t, n);
  double rhs2 = 0.0;
  for (Eigen::Index k = 0; k < S.size(); ++k) rhs2 += std::real(std::conj(gs[k]) * S[k]);
  CHECK(std::abs(lhs2 - rhs2) < 1e-8);
}

TEST_CASE("frequency-domain fractional delay matches sinc interpolation") {
  // oracle: band-limited interpolation of the padded signal
  const int len = 1024, n_fft = 4096;
  const double sr = 16000.0;
  // Gaussian-windowed tone: compact in time (no wrap into the padding) and
  // effectively band-limited, so the periodic and infinite sinc
  // interpolations agree far below the tolerance.
  ArrayXd x(len);
  for (int i = 0; i < len; ++i) {
    const double t = (i - 512.0) / 30.0;
    x[i] = std::exp(-0.5 * t * t) * std::cos(2.0 * M_PI * 0.2 * i);
  }
  const SampledIR ir(x, sr);
  const Spectrum spec = signals::forward_transform(ir, n_fft);

  for (double d : {0.25, 0.5, 1.5}) {
    const Spectrum delayed = signals::apply_delay(spec, d / sr);
    const ArrayXd y = fft::irfft(delayed.bins, n_fft);
    // sinc-interpolate the zero-padded input at t = i - d
    for (int i = 400; i < 650; ++i) {
      double oracle = 0.0;
      for (int j = 0; j < len; ++j) {
        const double t = (static_cast<double>(i) - d) - j;
        oracle += x[j] * (t == 0.0 ? 1.0 : std::sin(M_PI * t) / (M_PI * t));
      }
      CHECK(std::abs(y[i] - oracle) < 1e-6);
    }
  }
}

TEST_CASE("delays compose and preserve magnitude") {
  const int n_fft = 512;
  const double sr = 8000.0;
  const SampledIR ir(random_signal(200, 9), sr);
  const Spectrum spec = signals::forward_transform(ir, n_fft);
  const Spectrum a = signals::apply_delay(signals::apply_delay(spec, 1e-3), 2e-3);
  const Spectrum b = signals::apply_delay(spec, 3e-3);
  CHECK((a.bins - b.bins).abs().maxCoeff() < 1e-10);
  CHECK((a.bins.abs() - spec.bins.abs()).abs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(signals::apply_delay(spec, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(signals::apply_delay(spec, 1.0), std::invalid_argument);
}

TEST_CASE("windowed sinc kernel interpolates a delayed impulse") {
  for (double frac : {0.0, 0.25, 0.7}) {
    const ArrayXd k = signals::windowed_sinc_kernel(frac, 81);
    CHECK(k.size() == 81);
    // kernel sums to ~1 (DC gain) and peaks near the shifted center
    CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-3));
    Eigen::Index peak;
    k.maxCoeff(&peak);
    CHECK(std::abs(static_cast<double>(peak) - (40.0 + frac)) <= 1.0);
  }
  // phase-slope oracle: the kernel's spectrum has group delay 40 + frac
  const double frac = 0.37;
  const ArrayXd k = signals::windowed_sinc_kernel(frac, 81);
  const ArrayXcd spec = fft::rfft(k, 256);
  for (int bin = 1; bin < 40; ++bin) {
    const double phase = std::arg(spec[bin] / spec[bin - 1]);
    const double delay = -phase * 256.0 / (2.0 * M_PI);
    CHECK(delay == doctest::Approx(40.0 + frac).epsilon(2e-3));
  }
}

TEST_CASE("hilbert envelope of a modulated tone recovers the modulation") {
  const int n = 2048;
  const double sr = 16000.0;
  ArrayXd x(n);
  for (int i = 0; i < n; ++i) {
    const double t = i / sr;
    const double env = std::exp(-t * 30.0);
    x[i] = env * std::sin(2.0 * M_PI * 2000.0 * t);
  }
  const ArrayXd env = signals::hilbert_envelope(SampledIR(x, sr));
  for (int i = 100; i < n - 100; i += 37) {
    const double expected = std::exp(-(i / sr) * 30.0);
    CHECK(std::abs(env[i] - expected) < 0.02);
  }
}

TEST_CASE("stft frame count and identity of identical inputs") {
  const ArrayXd x = random_signal(4000, 13);
  const signals::StftResolution res{512, 128, 512};
  const auto frames = signals::stft_frames(x, res);
  CHECK(frames.rows() == 257);
  CHECK(frames.cols() == (4000 - 512) / 128 + 1);
  CHECK_THROWS_AS(signals::stft_frames(random_signal(100, 1), res), std::invalid_argument);
}

TEST_CASE("wav round trip preserves float32 samples") {
  io::AudioData a;
  a.sample_rate = 24000.0;
  a.samples.resize(333, 2);
  Rng rng(4);
  for (Eigen::Index i = 0; i < a.samples.size(); ++i)
    a.samples.data()[i] = static_cast<float>(rng.normal());
  const std::string path = "test_roundtrip.wav";
  io::write_wav(path, a);
  const io::AudioData b = io::read_wav(path);
  CHECK(b.sample_rate == a.sample_rate);
  REQUIRE(b.samples.rows() == a.samples.rows());
  REQUIRE(b.samples.cols() == 2);
  CHECK((b.samples - a.samples).abs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("raw f32 with sidecar round trips") {
  io::AudioData a;
  a.sample_rate = 16000.0;
  a.samples.resize(100, 1);
  for (int i = 0; i < 100; ++i) a.samples(i, 0) = static_cast<float>(std::sin(0.1 * i));
  io::write_f32("test_roundtrip.f32", a);
  const io::AudioData b = io::read_audio("test_roundtrip.f32");
  CHECK(b.sample_rate == 16000.0);
  CHECK((b.samples - a.samples).abs().maxCoeff() == 0.0);
  std::remove("test_roundtrip.f32");
  std::remove("test_roundtrip.f32.json");
}
