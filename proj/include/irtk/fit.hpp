#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "irtk/field.hpp"
#include "irtk/objective.hpp"
#include "irtk/renderer.hpp"
#include "irtk/types.hpp"

namespace irtk::fit {

struct DatasetItem {
  Pose listener;
  Pose emitter;
  SampledIR ir;
};

struct Dataset {
  std::vector<DatasetItem> items;
  double sample_rate = 0.0;
  int ir_len = 0;

  void validate() const;  // consistent rates/lengths, >= 2 items
};

/// Deterministic shuffled split; both sides non-empty.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double ratio, std::uint64_t seed);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ArrayXd m;
  ArrayXd v;
  long step = 0;

  explicit AdamState(Eigen::Index n) : m(ArrayXd::Zero(n)), v(ArrayXd::Zero(n)) {}
};

/// Standard Adam update with bias correction. Returns false (and leaves
/// params and moments untouched) when the gradient is not finite; the step
/// count still advances so schedules stay aligned.
bool adam_step(ArrayXd& params, const ArrayXd& grads, AdamState& state, double lr,
               const AdamHyper& hyper);

/// lr_end + 0.5 (lr_start - lr_end)(1 + cos(pi step / total))
double cosine_lr(long step, long total_steps, double lr_start, double lr_end);

struct FitConfig {
  int epochs = 200;
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  int batch_size = 4;
  double split_ratio = 0.9;
  AdamHyper adam;
  std::uint64_t seed = 0;
  int threads = 0;  // batch items fitted in parallel; 0 = auto
  objective::LossWeights weights;
  renderer::RenderConfig render;
  signals::StftConfig stft = signals::StftConfig::defaults();

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  objective::LossBreakdown train_loss;  // mean over training steps
  double test_phase = 0.0;
  double test_amp = 0.0;
  double test_envelope = 0.0;
  bool rejected_step = false;  // a non-finite gradient was skipped
};

struct TrainResult {
  std::vector<EpochRecord> log;
  bool aborted = false;  // divergence; field holds the last good parameters
};

/// Splits ds per cfg, fits the field in place, and (optionally) appends one
/// JSON record per epoch to log_path.
TrainResult train(const Dataset& ds, field::VoxelGridField& f, const FitConfig& cfg,
                  const std::string& log_path = "");

/// One forward render + loss of a single item (shared by train and tests).
objective::LossBreakdown item_loss(const DatasetItem& item, const field::Field& f,
                                   const FitConfig& cfg, const renderer::DirectionSet& dirs);

}  // namespace irtk::fit
