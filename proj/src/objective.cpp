#include "irtk/objective.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "irtk/fft.hpp"

namespace irtk::objective {

namespace {

constexpr double kTinyMag = 1e-300;
constexpr double kLogEps = 1e-10;

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": size mismatch");
  if (a == 0) throw std::invalid_argument(std::string(what) + ": empty input");
}

}  // namespace

void LossWeights::validate() const {
  if (amp < 0.0 || phase < 0.0 || time < 0.0 || stft < 0.0 || energy < 0.0)
    throw std::invalid_argument("LossWeights: weights must be >= 0");
}

double loss_spec(const ArrayXcd& pred, const ArrayXcd& ref) {
  check_same_size(pred.size(), ref.size(), "loss_spec");
  return (pred.real() - ref.real()).abs().mean() + (pred.imag() - ref.imag()).abs().mean();
}

double loss_amp(const ArrayXcd& pred, const ArrayXcd& ref) {
  check_same_size(pred.size(), ref.size(), "loss_amp");
  return (pred.abs() - ref.abs()).abs().mean();
}

double loss_phase(const ArrayXcd& pred, const ArrayXcd& ref) {
  check_same_size(pred.size(), ref.size(), "loss_phase");
  double cos_term = 0.0, sin_term = 0.0;
  for (Eigen::Index k = 0; k < pred.size(); ++k) {
    const double rp = std::abs(pred[k]), rr = std::abs(ref[k]);
    const double cp = rp > kTinyMag ? pred[k].real() / rp : 1.0;
    const double sp = rp > kTinyMag ? pred[k].imag() / rp : 0.0;
    const double cr = rr > kTinyMag ? ref[k].real() / rr : 1.0;
    const double sr = rr > kTinyMag ? ref[k].imag() / rr : 0.0;
    cos_term += std::abs(cp - cr);
    sin_term += std::abs(sp - sr);
  }
  return (cos_term + sin_term) / static_cast<double>(pred.size());
}

double loss_time(const ArrayXd& pred, const ArrayXd& ref) {
  check_same_size(pred.size(), ref.size(), "loss_time");
  return (pred - ref).abs().mean();
}

double loss_stft(const ArrayXd& pred, const ArrayXd& ref, const signals::StftConfig& cfg) {
  check_same_size(pred.size(), ref.size(), "loss_stft");
  double total = 0.0;
  for (const auto& res : cfg.resolutions) {
    const Eigen::MatrixXd mp = signals::stft_frames(pred, res).cwiseAbs();
    const Eigen::MatrixXd mr = signals::stft_frames(ref, res).cwiseAbs();
    const double diff = (mp - mr).norm();
    const double denom = mp.norm();
    if (denom > 0.0) total += diff / denom;
    total += ((mp.array() + kLogEps).log() - (mr.array() + kLogEps).log()).abs().mean();
  }
  return total;
}

ArrayXd schroeder_db(const ArrayXd& h, double floor_db) {
  if (h.size() == 0) throw std::invalid_argument("schroeder_db: empty input");
  ArrayXd energy(h.size());
  double acc = 0.0;
  for (Eigen::Index n = h.size(); n-- > 0;) {
    acc += h[n] * h[n];
    energy[n] = acc;
  }
  if (!(energy[0] > 0.0)) throw std::invalid_argument("schroeder_db: all-zero signal");
  ArrayXd db(h.size());
  for (Eigen::Index n = 0; n < h.size(); ++n) {
    db[n] = energy[n] > 0.0 ? 10.0 * std::log10(energy[n] / energy[0]) : floor_db;
    if (db[n] < floor_db) db[n] = floor_db;
  }
  return db;
}

double loss_energy(const ArrayXd& pred, const ArrayXd& ref) {
  check_same_size(pred.size(), ref.size(), "loss_energy");
  // a silent prediction decays as a flat floor curve (no usable gradient,
  // but the other terms pull it off zero)
  if (!(pred.abs().maxCoeff() > 0.0))
    return (ArrayXd::Constant(pred.size(), -60.0) - schroeder_db(ref)).abs().mean();
  return (schroeder_db(pred) - schroeder_db(ref)).abs().mean();
}

LossBreakdown total_loss(const ArrayXd& h, const ArrayXcd& H, const ArrayXd& h_ref,
                         const ArrayXcd& H_ref, const LossWeights& w,
                         const signals::StftConfig& stft_cfg) {
  w.validate();
  LossBreakdown b;
  b.spec = loss_spec(H, H_ref);
  b.amp = loss_amp(H, H_ref);
  b.phase = loss_phase(H, H_ref);
  b.time = loss_time(h, h_ref);
  b.stft = loss_stft(h, h_ref, stft_cfg);
  b.energy = loss_energy(h, h_ref);
  b.total = b.spec + w.amp * b.amp + w.phase * b.phase + w.time * b.time + w.stft * b.stft +
            w.energy * b.energy;
  return b;
}

namespace {

// dL under dL = sum Re(conj(g) dH) for mean L1 on Re and Im separately
void add_spec_grad(const ArrayXcd& pred, const ArrayXcd& ref, double scale, ArrayXcd& g) {
  const double inv_n = scale / static_cast<double>(pred.size());
  for (Eigen::Index k = 0; k < pred.size(); ++k)
    g[k] += Complex(inv_n * sgn(pred[k].real() - ref[k].real()),
                    inv_n * sgn(pred[k].imag() - ref[k].imag()));
}

void add_amp_grad(const ArrayXcd& pred, const ArrayXcd& ref, double scale, ArrayXcd& g) {
  const double inv_n = scale / static_cast<double>(pred.size());
  for (Eigen::Index k = 0; k < pred.size(); ++k) {
    const double rp = std::abs(pred[k]);
    if (rp <= kTinyMag) continue;
    g[k] += (inv_n * sgn(rp - std::abs(ref[k])) / rp) * pred[k];
  }
}

void add_phase_grad(const ArrayXcd& pred, const ArrayXcd& ref, double scale, ArrayXcd& g) {
  const double inv_n = scale / static_cast<double>(pred.size());
  for (Eigen::Index k = 0; k < pred.size(); ++k) {
    const double a = pred[k].real(), b = pred[k].imag();
    const double rp = std::abs(pred[k]), rr = std::abs(ref[k]);
    if (rp <= kTinyMag) continue;
    const double cp = a / rp, sp = b / rp;
    const double cr = rr > kTinyMag ? ref[k].real() / rr : 1.0;
    const double sr = rr > kTinyMag ? ref[k].imag() / rr : 0.0;
    const double sc = sgn(cp - cr), ss = sgn(sp - sr);
    const double r3 = rp * rp * rp;
    // d(a/r) = (b^2 da - ab db)/r^3 ; d(b/r) = (-ab da + a^2 db)/r^3
    g[k] += Complex(inv_n * (sc * b * b - ss * a * b) / r3,
                    inv_n * (-sc * a * b + ss * a * a) / r3);
  }
}

void add_time_grad(const ArrayXd& pred, const ArrayXd& ref, double scale, ArrayXd& g) {
  const double inv_n = scale / static_cast<double>(pred.size());
  for (Eigen::Index n = 0; n < pred.size(); ++n) g[n] += inv_n * sgn(pred[n] - ref[n]);
}

void add_stft_grad(const ArrayXd& pred, const ArrayXd& ref, const signals::StftConfig& cfg,
                   double scale, ArrayXd& g) {
  for (const auto& res : cfg.resolutions) {
    const Eigen::MatrixXcd sp = signals::stft_frames(pred, res);
    const Eigen::MatrixXd mp = sp.cwiseAbs();
    const Eigen::MatrixXd mr = signals::stft_frames(ref, res).cwiseAbs();
    const Eigen::MatrixXd diff = mp - mr;
    const double f = diff.norm();
    const double p = mp.norm();
    const double n_el = static_cast<double>(mp.size());
    // per-element gradient of (||mp - mr|| / ||mp||) + mean |log mp - log mr|
    Eigen::MatrixXd gm = Eigen::MatrixXd::Zero(mp.rows(), mp.cols());
    if (p > 0.0 && f > 0.0) gm = diff / (f * p) - (f / (p * p * p)) * mp;
    for (Eigen::Index c = 0; c < mp.cols(); ++c)
      for (Eigen::Index r = 0; r < mp.rows(); ++r)
        gm(r, c) += sgn(std::log(mp(r, c) + kLogEps) - std::log(mr(r, c) + kLogEps)) /
                    (n_el * (mp(r, c) + kLogEps));
    // chain |S| -> S, then the linear STFT back to time samples
    const ArrayXd win = signals::hann_window(res.window_size);
    ArrayXcd col_grad(mp.rows());
    for (Eigen::Index c = 0; c < mp.cols(); ++c) {
      for (Eigen::Index r = 0; r < mp.rows(); ++r) {
        const double m = mp(r, c);
        col_grad[r] = m > kTinyMag ? Complex(gm(r, c) / m) * sp(r, c) : Complex(0.0, 0.0);
      }
      const ArrayXd frame_grad = fft::rfft_adjoint(col_grad, res.fft_size);
      g.segment(c * res.hop_size, res.window_size) +=
          scale * win * frame_grad.head(res.window_size);
    }
  }
}

void add_energy_grad(const ArrayXd& pred, const ArrayXd& ref, double scale, ArrayXd& g) {
  constexpr double floor_db = -60.0;
  if (!(pred.abs().maxCoeff() > 0.0)) return;  // silent prediction: no gradient
  const ArrayXd cp = schroeder_db(pred, floor_db);
  const ArrayXd cr = schroeder_db(ref, floor_db);
  const Eigen::Index n = pred.size();
  ArrayXd energy(n);
  double acc = 0.0;
  for (Eigen::Index i = n; i-- > 0;) {
    acc += pred[i] * pred[i];
    energy[i] = acc;
  }
  // dC_n = (10/ln10)(dE_n/E_n - dE_0/E_0) where the floor is inactive;
  // E_n = sum_{m>=n} h_m^2 so dE_n/dh_m = 2 h_m [m >= n].
  const double k = scale * (10.0 / std::log(10.0)) / static_cast<double>(n);
  double s_total = 0.0;
  ArrayXd s_over_e(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = cp[i] > floor_db ? sgn(cp[i] - cr[i]) : 0.0;
    s_total += s;
    s_over_e[i] = (s != 0.0 && energy[i] > 0.0) ? s / energy[i] : 0.0;
  }
  double prefix = 0.0;  // sum_{i <= m} s_i / E_i
  for (Eigen::Index m = 0; m < n; ++m) {
    prefix += s_over_e[m];
    g[m] += k * 2.0 * pred[m] * (prefix - s_total / energy[0]);
  }
}

}  // namespace

LossGradients total_loss_gradients(const ArrayXd& h, const ArrayXcd& H, const ArrayXd& h_ref,
                                   const ArrayXcd& H_ref, const LossWeights& w,
                                   const signals::StftConfig& stft_cfg) {
  w.validate();
  check_same_size(h.size(), h_ref.size(), "total_loss_gradients(time)");
  check_same_size(H.size(), H_ref.size(), "total_loss_gradients(spec)");
  LossGradients out;
  out.d_ir = ArrayXd::Zero(h.size());
  out.d_spectrum = ArrayXcd::Zero(H.size());
  add_spec_grad(H, H_ref, 1.0, out.d_spectrum);
  if (w.amp > 0.0) add_amp_grad(H, H_ref, w.amp, out.d_spectrum);
  if (w.phase > 0.0) add_phase_grad(H, H_ref, w.phase, out.d_spectrum);
  if (w.time > 0.0) add_time_grad(h, h_ref, w.time, out.d_ir);
  if (w.stft > 0.0) add_stft_grad(h, h_ref, stft_cfg, w.stft, out.d_ir);
  if (w.energy > 0.0) add_energy_grad(h, h_ref, w.energy, out.d_ir);
  return out;
}

double metric_phase(const ArrayXcd& pred, const ArrayXcd& ref) { return loss_phase(pred, ref); }

AmpMetric metric_amp(const ArrayXcd& pred, const ArrayXcd& ref) {
  check_same_size(pred.size(), ref.size(), "metric_amp");
  const ArrayXd mr = ref.abs();
  const double cutoff = 1e-8 * mr.maxCoeff();
  AmpMetric out;
  double sum = 0.0;
  Eigen::Index used = 0;
  for (Eigen::Index k = 0; k < pred.size(); ++k) {
    if (mr[k] < cutoff || mr[k] <= 0.0) {
      ++out.excluded;
      continue;
    }
    sum += std::abs(mr[k] - std::abs(pred[k])) / mr[k];
    ++used;
  }
  if (used == 0) throw std::invalid_argument("metric_amp: reference has no usable bins");
  out.value = sum / static_cast<double>(used);
  return out;
}

double metric_envelope(const SampledIR& pred, const SampledIR& ref) {
  check_same_size(pred.size(), ref.size(), "metric_envelope");
  if (pred.sample_rate != ref.sample_rate)
    throw std::invalid_argument("metric_envelope: sample rate mismatch");
  const ArrayXd ep = signals::hilbert_envelope(pred);
  const ArrayXd er = signals::hilbert_envelope(ref);
  const double peak = er.maxCoeff();
  if (!(peak > 0.0)) throw std::invalid_argument("metric_envelope: zero reference envelope");
  return 100.0 * (er - ep).abs().mean() / peak;
}

namespace {

// least-squares line through the Schroeder curve between two dB thresholds;
// returns the decay slope in dB/s, or nothing when the region is unusable
std::optional<double> decay_slope(const ArrayXd& h, double sample_rate, double db_hi,
                                  double db_lo) {
  const ArrayXd db = schroeder_db(h, -1e9);
  Eigen::Index first = -1, last = -1;
  for (Eigen::Index n = 0; n < db.size(); ++n) {
    if (first < 0 && db[n] <= db_hi) first = n;
    if (last < 0 && db[n] <= db_lo) {
      last = n;
      break;
    }
  }
  if (first < 0 || last < 0 || last - first < 2) return std::nullopt;
  // fit db = a + b t over [first, last]
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n_pts = static_cast<double>(last - first + 1);
  for (Eigen::Index n = first; n <= last; ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    st += t;
    sy += db[n];
    stt += t * t;
    sty += t * db[n];
  }
  const double det = n_pts * stt - st * st;
  if (det <= 0.0) return std::nullopt;
  const double slope = (n_pts * sty - st * sy) / det;
  if (!(slope < 0.0)) return std::nullopt;
  return slope;
}

}  // namespace

std::optional<double> t60_seconds(const ArrayXd& h, double sample_rate) {
  const auto slope = decay_slope(h, sample_rate, -5.0, -25.0);
  if (!slope) return std::nullopt;
  return -60.0 / *slope;
}

std::optional<double> metric_t60(const ArrayXd& pred, const ArrayXd& ref, double sample_rate) {
  const auto tp = t60_seconds(pred, sample_rate);
  const auto tr = t60_seconds(ref, sample_rate);
  if (!tp || !tr || !(*tr > 0.0)) return std::nullopt;
  return 100.0 * std::abs(*tp - *tr) / *tr;
}

double c50_db(const ArrayXd& h, double sample_rate) {
  const Eigen::Index split = std::min<Eigen::Index>(
      h.size(), static_cast<Eigen::Index>(std::llround(0.05 * sample_rate)));
  if (split <= 0 || split >= h.size())
    throw std::invalid_argument("c50_db: signal does not span the 50 ms boundary");
  const double early = h.head(split).square().sum();
  const double late = h.tail(h.size() - split).square().sum();
  if (!(early > 0.0) || !(late > 0.0))
    throw std::invalid_argument("c50_db: zero energy on one side of 50 ms");
  return 10.0 * std::log10(early / late);
}

double metric_c50(const ArrayXd& pred, const ArrayXd& ref, double sample_rate) {
  return std::abs(c50_db(pred, sample_rate) - c50_db(ref, sample_rate));
}

std::optional<double> edt_seconds(const ArrayXd& h, double sample_rate) {
  const auto slope = decay_slope(h, sample_rate, -0.0, -10.0);
  if (!slope) return std::nullopt;
  return -60.0 / *slope;
}

std::optional<double> metric_edt(const ArrayXd& pred, const ArrayXd& ref, double sample_rate) {
  const auto ep = edt_seconds(pred, sample_rate);
  const auto er = edt_seconds(ref, sample_rate);
  if (!ep || !er) return std::nullopt;
  return 1000.0 * std::abs(*ep - *er);
}

MetricReport evaluate(const SampledIR& pred, const Spectrum& pred_spec, const SampledIR& ref,
                      const Spectrum& ref_spec) {
  MetricReport r;
  r.phase_error = metric_phase(pred_spec.bins, ref_spec.bins);
  const AmpMetric amp = metric_amp(pred_spec.bins, ref_spec.bins);
  r.amp_error = amp.value;
  r.amp_excluded_bins = amp.excluded;
  r.envelope_error = metric_envelope(pred, ref);
  r.t60_error = metric_t60(pred.samples, ref.samples, ref.sample_rate);
  try {
    r.c50_error = metric_c50(pred.samples, ref.samples, ref.sample_rate);
  } catch (const std::invalid_argument&) {
    r.c50_error = std::numeric_limits<double>::quiet_NaN();
  }
  r.edt_error = metric_edt(pred.samples, ref.samples, ref.sample_rate);
  return r;
}

}  // namespace irtk::objective
