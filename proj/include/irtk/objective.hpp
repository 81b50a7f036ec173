#pragma once

#include <optional>

#include "irtk/signals.hpp"
#include "irtk/types.hpp"

namespace irtk::objective {

struct LossWeights {
  double amp = 0.5;
  double phase = 0.5;
  double time = 100.0;
  double stft = 1.0;
  double energy = 5.0;

  void validate() const;
};

struct LossBreakdown {
  double spec = 0.0;
  double amp = 0.0;
  double phase = 0.0;
  double time = 0.0;
  double stft = 0.0;
  double energy = 0.0;
  double total = 0.0;  // spec + weighted sum of the rest
};

/// mean L1 over real parts + mean L1 over imaginary parts
double loss_spec(const ArrayXcd& pred, const ArrayXcd& ref);
/// mean L1 of magnitudes
double loss_amp(const ArrayXcd& pred, const ArrayXcd& ref);
/// mean L1 of cosine difference + mean L1 of sine difference
double loss_phase(const ArrayXcd& pred, const ArrayXcd& ref);
/// mean L1 of time samples
double loss_time(const ArrayXd& pred, const ArrayXd& ref);
/// sum over resolutions of spectral convergence + log-magnitude L1
double loss_stft(const ArrayXd& pred, const ArrayXd& ref, const signals::StftConfig& cfg);
/// mean L1 between Schroeder log-decay curves, floored at -60 dB
double loss_energy(const ArrayXd& pred, const ArrayXd& ref);

LossBreakdown total_loss(const ArrayXd& h, const ArrayXcd& H, const ArrayXd& h_ref,
                         const ArrayXcd& H_ref, const LossWeights& w,
                         const signals::StftConfig& stft_cfg);

/// Subgradients of total_loss w.r.t. the prediction. d_spectrum uses the
/// convention dL = sum_k Re(conj(g_k) dH_k).
struct LossGradients {
  ArrayXd d_ir;
  ArrayXcd d_spectrum;
};
LossGradients total_loss_gradients(const ArrayXd& h, const ArrayXcd& H, const ArrayXd& h_ref,
                                   const ArrayXcd& H_ref, const LossWeights& w,
                                   const signals::StftConfig& stft_cfg);

/// Schroeder backward-integrated energy decay, 10*log10(E_n / E_0), floored
/// at floor_db.
ArrayXd schroeder_db(const ArrayXd& h, double floor_db = -60.0);

// --- evaluation metrics ---

/// same functional form as loss_phase (random baseline ~1.62)
double metric_phase(const ArrayXcd& pred, const ArrayXcd& ref);

/// relative amplitude error mean(||H*| - |H|| / |H*|); reference bins with
/// magnitude < 1e-8 * max are excluded and counted.
struct AmpMetric {
  double value = 0.0;
  Eigen::Index excluded = 0;
};
AmpMetric metric_amp(const ArrayXcd& pred, const ArrayXcd& ref);

/// 100 * mean(|Env* - Env|) / max(Env*), Hilbert envelopes
double metric_envelope(const SampledIR& pred, const SampledIR& ref);

/// T60 from a -5..-25 dB Schroeder line fit, extrapolated x3. Empty when the
/// decay never reaches -25 dB or the fit degenerates.
std::optional<double> t60_seconds(const ArrayXd& h, double sample_rate);
/// percent error |T60 - T60*| / T60* * 100
std::optional<double> metric_t60(const ArrayXd& pred, const ArrayXd& ref, double sample_rate);

/// 10 log10(energy 0-50 ms / energy 50 ms-end)
double c50_db(const ArrayXd& h, double sample_rate);
double metric_c50(const ArrayXd& pred, const ArrayXd& ref, double sample_rate);  // |dB diff|

/// early decay time from the 0..-10 dB slope, x6
std::optional<double> edt_seconds(const ArrayXd& h, double sample_rate);
/// absolute error in milliseconds
std::optional<double> metric_edt(const ArrayXd& pred, const ArrayXd& ref, double sample_rate);

struct MetricReport {
  double phase_error = 0.0;
  double amp_error = 0.0;
  Eigen::Index amp_excluded_bins = 0;
  double envelope_error = 0.0;               // percent
  std::optional<double> t60_error;           // percent
  double c50_error = 0.0;                    // dB
  std::optional<double> edt_error;           // milliseconds
};

MetricReport evaluate(const SampledIR& pred, const Spectrum& pred_spec, const SampledIR& ref,
                      const Spectrum& ref_spec);

}  // namespace irtk::objective
