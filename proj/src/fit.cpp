#include "irtk/fit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "irtk/fft.hpp"
#include "irtk/rng.hpp"

namespace irtk::fit {

void Dataset::validate() const {
  if (items.size() < 2) throw std::invalid_argument("Dataset: need >= 2 items");
  if (!(sample_rate > 0.0) || ir_len < 1) throw std::invalid_argument("Dataset: bad sizing");
  for (const auto& it : items) {
    if (it.ir.sample_rate != sample_rate)
      throw std::invalid_argument("Dataset: inconsistent sample rate");
    if (it.ir.size() != ir_len) throw std::invalid_argument("Dataset: inconsistent IR length");
  }
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double ratio, std::uint64_t seed) {
  ds.validate();
  if (!(ratio > 0.0) || !(ratio < 1.0))
    throw std::invalid_argument("split_dataset: ratio must be in (0,1)");
  const size_t n = ds.items.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng = Rng::stream(seed, 0x5b117);
  // Fisher-Yates with our own draws so the split is stable across platforms
  for (size_t i = n - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(rng.uniform() * static_cast<double>(i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  size_t n_train = static_cast<size_t>(std::llround(ratio * static_cast<double>(n)));
  n_train = std::clamp<size_t>(n_train, 1, n - 1);
  Dataset train{.items = {}, .sample_rate = ds.sample_rate, .ir_len = ds.ir_len};
  Dataset test = train;
  for (size_t i = 0; i < n; ++i)
    (i < n_train ? train : test).items.push_back(ds.items[order[i]]);
  return {std::move(train), std::move(test)};
}

bool adam_step(ArrayXd& params, const ArrayXd& grads, AdamState& state, double lr,
               const AdamHyper& hyper) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  ++state.step;
  if (!grads.isFinite().all()) return false;
  state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grads;
  state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * grads.square();
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  params -= lr * (state.m / bc1) / ((state.v / bc2).sqrt() + hyper.eps);
  return true;
}

double cosine_lr(long step, long total_steps, double lr_start, double lr_end) {
  if (total_steps < 1 || step < 0 || step > total_steps)
    throw std::invalid_argument("cosine_lr: need 0 <= step <= total_steps");
  return lr_end + 0.5 * (lr_start - lr_end) *
                      (1.0 + std::cos(M_PI * static_cast<double>(step) / total_steps));
}

void FitConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("FitConfig: epochs >= 1");
  if (!(lr_start >= lr_end) || !(lr_end > 0.0))
    throw std::invalid_argument("FitConfig: need lr_start >= lr_end > 0");
  if (batch_size < 1) throw std::invalid_argument("FitConfig: batch_size >= 1");
  if (!(split_ratio > 0.0) || !(split_ratio < 1.0))
    throw std::invalid_argument("FitConfig: split_ratio in (0,1)");
  weights.validate();
  render.validate();
}

objective::LossBreakdown item_loss(const DatasetItem& item, const field::Field& f,
                                   const FitConfig& cfg, const renderer::DirectionSet& dirs) {
  const auto res = renderer::render_ir(f, item.listener, renderer::OmniGain(), item.emitter,
                                       cfg.render, dirs);
  const ArrayXcd ref_spec = fft::rfft(item.ir.samples, cfg.render.n_fft);
  return objective::total_loss(res.ir.samples, res.spectrum.bins, item.ir.samples, ref_spec,
                               cfg.weights, cfg.stft);
}

namespace {

struct ItemResult {
  objective::LossBreakdown loss;
  field::VoxelGridField::Gradients grads;
};

// forward render, loss, loss gradient, renderer adjoint for one item
ItemResult backward_item(const DatasetItem& item, const field::VoxelGridField& f,
                         const FitConfig& cfg, const renderer::DirectionSet& dirs,
                         const renderer::RenderConfig& rcfg) {
  ItemResult out{.loss = {}, .grads = f.zero_gradients()};
  const auto res = renderer::render_ir(f, item.listener, renderer::OmniGain(), item.emitter,
                                       rcfg, dirs);
  const ArrayXcd ref_spec = fft::rfft(item.ir.samples, rcfg.n_fft);
  out.loss = objective::total_loss(res.ir.samples, res.spectrum.bins, item.ir.samples,
                                   ref_spec, cfg.weights, cfg.stft);
  if (!std::isfinite(out.loss.total)) return out;
  const auto g = objective::total_loss_gradients(res.ir.samples, res.spectrum.bins,
                                                 item.ir.samples, ref_spec, cfg.weights,
                                                 cfg.stft);
  renderer::render_ir_adjoint(f, item.listener, renderer::OmniGain(), item.emitter, rcfg,
                              dirs, g.d_spectrum, g.d_ir, out.grads);
  return out;
}

void add_breakdown(objective::LossBreakdown& acc, const objective::LossBreakdown& b,
                   double scale) {
  acc.spec += scale * b.spec;
  acc.amp += scale * b.amp;
  acc.phase += scale * b.phase;
  acc.time += scale * b.time;
  acc.stft += scale * b.stft;
  acc.energy += scale * b.energy;
  acc.total += scale * b.total;
}

nlohmann::json record_json(const EpochRecord& r) {
  auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  return {{"epoch", r.epoch},
          {"lr", r.lr},
          {"loss",
           {{"spec", num(r.train_loss.spec)},
            {"amp", num(r.train_loss.amp)},
            {"phase", num(r.train_loss.phase)},
            {"time", num(r.train_loss.time)},
            {"stft", num(r.train_loss.stft)},
            {"energy", num(r.train_loss.energy)},
            {"total", num(r.train_loss.total)}}},
          {"test",
           {{"phase", num(r.test_phase)},
            {"amp", num(r.test_amp)},
            {"envelope", num(r.test_envelope)}}},
          {"rejected_step", r.rejected_step}};
}

}  // namespace

TrainResult train(const Dataset& ds, field::VoxelGridField& f, const FitConfig& cfg,
                  const std::string& log_path) {
  cfg.validate();
  ds.validate();
  if (ds.ir_len != cfg.render.ir_len || ds.sample_rate != cfg.render.sample_rate)
    throw std::invalid_argument("train: dataset sizing does not match the render config");
  const auto [train_ds, test_ds] = split_dataset(ds, cfg.split_ratio, cfg.seed);

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::app);
    if (!log) throw std::runtime_error("cannot open log: " + log_path);
  }

  const renderer::DirectionSet dirs = renderer::directions_for(cfg.render);
  renderer::RenderConfig item_cfg = cfg.render;
  const int n_workers =
      cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  item_cfg.threads = 1;  // parallelism lives at the batch-item level instead

  const size_t n_train = train_ds.items.size();
  const long steps_per_epoch =
      static_cast<long>((n_train + cfg.batch_size - 1) / cfg.batch_size);
  const long total_steps = steps_per_epoch * cfg.epochs;

  ArrayXd params = f.flatten_params();
  AdamState state(params.size());
  ArrayXd last_good = params;

  TrainResult result;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<size_t> order(n_train);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng = Rng::stream(cfg.seed, 0xe90c0 + static_cast<std::uint64_t>(epoch));
    for (size_t i = n_train - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(rng.uniform() * static_cast<double>(i + 1));
      std::swap(order[i], order[std::min(j, i)]);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cosine_lr(step, total_steps, cfg.lr_start, cfg.lr_end);
    bool diverged = false;

    for (size_t first = 0; first < n_train && !diverged; first += cfg.batch_size) {
      const size_t last = std::min(n_train, first + cfg.batch_size);
      const int batch_n = static_cast<int>(last - first);
      std::vector<ItemResult> results(static_cast<size_t>(batch_n));

      auto run = [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i)
          results[static_cast<size_t>(i)] = backward_item(
              train_ds.items[order[first + static_cast<size_t>(i)]], f, cfg, dirs, item_cfg);
      };
      const int workers = std::max(1, std::min(n_workers, batch_n));
      if (workers <= 1) {
        run(0, batch_n);
      } else {
        std::vector<std::thread> pool;
        const int chunk = (batch_n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w)
          pool.emplace_back(run, w * chunk, std::min(batch_n, (w + 1) * chunk));
        for (auto& t : pool) t.join();
      }

      // deterministic reduction in item order
      const double inv_b = 1.0 / batch_n;
      auto total_grads = f.zero_gradients();
      double batch_loss = 0.0;
      for (const auto& r : results) {
        add_breakdown(rec.train_loss, r.loss, inv_b / static_cast<double>(steps_per_epoch));
        batch_loss += inv_b * r.loss.total;
        total_grads.density += inv_b * r.grads.density;
        total_grads.emission += inv_b * r.grads.emission;
      }
      if (!std::isfinite(batch_loss)) {
        diverged = true;
        break;
      }

      const double lr = cosine_lr(step, total_steps, cfg.lr_start, cfg.lr_end);
      const ArrayXd grad_flat = field::VoxelGridField::flatten_gradients(total_grads);
      if (adam_step(params, grad_flat, state, lr, cfg.adam)) {
        f.unflatten_params(params);
      } else {
        rec.rejected_step = true;
      }
      ++step;
    }

    if (diverged) {
      f.unflatten_params(last_good);
      result.aborted = true;
      result.log.push_back(rec);
      if (log) log << record_json(rec).dump() << '\n';
      break;
    }
    last_good = params;

    // test-split metrics (never used for updates)
    double phase = 0.0, amp = 0.0, env = 0.0;
    for (const auto& item : test_ds.items) {
      const auto res = renderer::render_ir(f, item.listener, renderer::OmniGain(),
                                           item.emitter, cfg.render, dirs);
      const ArrayXcd ref_spec = fft::rfft(item.ir.samples, cfg.render.n_fft);
      phase += objective::metric_phase(res.spectrum.bins, ref_spec);
      amp += objective::metric_amp(res.spectrum.bins, ref_spec).value;
      env += objective::metric_envelope(res.ir, item.ir);
    }
    const double inv_t = 1.0 / static_cast<double>(test_ds.items.size());
    rec.test_phase = phase * inv_t;
    rec.test_amp = amp * inv_t;
    rec.test_envelope = env * inv_t;

    result.log.push_back(rec);
    if (log) log << record_json(rec).dump() << '\n';
  }
  return result;
}

}  // namespace irtk::fit
