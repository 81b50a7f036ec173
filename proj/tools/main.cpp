// Command-line front end: simulation, field fitting, rendering, metrics,
// loudness maps, dataset generation, and IR convolution.
//
// Exit codes: 0 success, 2 validation error, 3 numerical failure (NaN).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "irtk/dataset.hpp"
#include "irtk/fft.hpp"
#include "irtk/field.hpp"
#include "irtk/fit.hpp"
#include "irtk/loudness.hpp"
#include "irtk/objective.hpp"
#include "irtk/renderer.hpp"
#include "irtk/scene_io.hpp"
#include "irtk/simulator.hpp"
#include "irtk/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace irtk;

namespace {

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOpts {
  int threads = 0;
  bool verbose = false;
  std::uint64_t seed = 0;
  std::string command_line;
};

void vlog(const GlobalOpts& g, const std::string& msg) {
  if (g.verbose) std::cerr << msg << '\n';
}

Pose parse_pose(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  if (v.size() == 3) return Pose(Vec3(v[0], v[1], v[2]), Vec3::UnitX());
  if (v.size() == 6) return Pose(Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]));
  throw CLI::ValidationError("pose", "expected x,y,z or x,y,z,ox,oy,oz");
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  return v;
}

void require_finite(const Eigen::ArrayXXd& a, const std::string& what) {
  if (!a.isFinite().all()) throw NumericalError(what + " contains non-finite samples");
}

void write_sidecar(const std::string& audio_path, const GlobalOpts& g, json extra) {
  extra["command"] = g.command_line;
  std::ofstream os(audio_path + ".json");
  os << extra.dump(2) << '\n';
}

int next_pow2(int n) {
  int p = 2;
  while (p < n) p <<= 1;
  return p;
}

// ---- simulate ----

struct SimulateArgs {
  std::string scene_file, emitter, listener, out;
  std::int64_t rays = 1000000;
  int depth = 30;
  double duration = 0.1;
  double sr = 16000.0;
  double receiver_radius = 0.2;
};

int run_simulate(const SimulateArgs& a, const GlobalOpts& g) {
  const geometry::Scene scene = geometry::load_scene(a.scene_file);
  simulator::SimConfig cfg;
  cfg.n_rays = a.rays;
  cfg.max_depth = a.depth;
  cfg.ir_duration = a.duration;
  cfg.sample_rate = a.sr;
  cfg.receiver_radius = a.receiver_radius;
  cfg.threads = g.threads;
  simulator::PathStats stats;
  const SampledIR ir =
      simulator::simulate(scene, parse_pose(a.emitter), parse_pose(a.listener), cfg, g.seed,
                          &stats);
  require_finite(ir.samples, "simulated IR");
  io::write_audio(a.out, io::from_ir(ir));
  json order_counts = json::object();
  for (const auto& [order, count] : stats.count_per_order)
    order_counts[std::to_string(order)] = count;
  write_sidecar(a.out, g,
                {{"sample_rate_hz", a.sr},
                 {"duration_s", a.duration},
                 {"units", "pressure amplitude"},
                 {"paths_per_order", order_counts},
                 {"dropped_paths", stats.dropped}});
  vlog(g, "wrote " + a.out);
  return 0;
}

// ---- gen-dataset ----

struct GenDatasetArgs {
  std::string scene_file, emitter, out_dir;
  int nx = 5, ny = 5;
  std::string origin = "0.5,0.5";
  double spacing = 0.5, height = 1.5;
  std::int64_t rays = 100000;
  int depth = 30;
  double duration = 0.1;
  double sr = 16000.0;
};

int run_gen_dataset(const GenDatasetArgs& a, const GlobalOpts& g) {
  const geometry::Scene scene = geometry::load_scene(a.scene_file);
  const auto o = parse_doubles(a.origin);
  if (o.size() != 2) throw CLI::ValidationError("--origin", "expected x,y");
  dataset::ListenerSpec spec;
  spec.nx = a.nx;
  spec.ny = a.ny;
  spec.origin = Vec3(o[0], o[1], 0.0);
  spec.spacing = a.spacing;
  spec.height = a.height;
  simulator::SimConfig cfg;
  cfg.n_rays = a.rays;
  cfg.max_depth = a.depth;
  cfg.ir_duration = a.duration;
  cfg.sample_rate = a.sr;
  cfg.threads = g.threads;
  const auto manifest =
      dataset::generate_dataset(scene, parse_pose(a.emitter), spec, cfg, g.seed, a.out_dir);
  vlog(g, "wrote " + std::to_string(manifest.items.size()) + " IRs to " + a.out_dir);
  return 0;
}

// ---- fit ----

struct FitArgs {
  std::string dataset_dir, bounds = "auto", out, log;
  std::string grid = "32";
  int epochs = 200;
  int batch = 4;
  int n_theta = 80, n_phi = 40, n_r = 64;
  double u_near = 0.1;
  double u_far = 0.0;  // 0 = auto
  double lr_start = 1e-3, lr_end = 1e-4;
  double speed_of_sound = 343.0;
};

int run_fit(const FitArgs& a, const GlobalOpts& g) {
  const fit::Dataset ds = dataset::load_dataset(a.dataset_dir);
  const dataset::Manifest manifest = dataset::load_manifest(a.dataset_dir);

  Eigen::AlignedBox3d bounds;
  if (a.bounds == "auto") {
    for (const auto& item : ds.items) bounds.extend(item.listener.position);
    bounds.extend(manifest.emitter.position);
    bounds.min() -= Vec3::Constant(0.5);
    bounds.max() += Vec3::Constant(0.5);
  } else {
    const auto v = parse_doubles(a.bounds);
    if (v.size() != 6)
      throw CLI::ValidationError("--scene-bounds", "expected auto or x0,y0,z0,x1,y1,z1");
    bounds = Eigen::AlignedBox3d(Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]));
  }

  const auto gv = parse_doubles(a.grid);
  Eigen::Vector3i res;
  if (gv.size() == 1)
    res.setConstant(static_cast<int>(gv[0]));
  else if (gv.size() == 3)
    res = Eigen::Vector3i(static_cast<int>(gv[0]), static_cast<int>(gv[1]),
                          static_cast<int>(gv[2]));
  else
    throw CLI::ValidationError("--grid", "expected N or Nx,Ny,Nz");

  fit::FitConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.lr_start = a.lr_start;
  cfg.lr_end = a.lr_end;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  cfg.render.n_theta = a.n_theta;
  cfg.render.n_phi = a.n_phi;
  cfg.render.n_r = a.n_r;
  cfg.render.u_near = a.u_near;
  cfg.render.speed_of_sound = a.speed_of_sound;
  cfg.render.sample_rate = ds.sample_rate;
  cfg.render.ir_len = ds.ir_len;
  cfg.render.n_fft = next_pow2(2 * ds.ir_len);
  cfg.render.seed = g.seed;
  const double max_u = 0.95 * cfg.render.speed_of_sound * cfg.render.n_fft / ds.sample_rate;
  cfg.render.u_far =
      a.u_far > 0.0 ? a.u_far : std::min(max_u, (bounds.max() - bounds.min()).norm());
  // keep the three default STFT resolutions that fit inside the IR
  std::vector<signals::StftResolution> res_list;
  for (const auto& r : signals::StftConfig::defaults().resolutions)
    if (r.window_size <= ds.ir_len) res_list.push_back(r);
  if (res_list.empty()) res_list.push_back({64, 16, 64});
  cfg.stft = signals::StftConfig(res_list);

  field::VoxelGridField f(bounds, res, 0, cfg.render.n_fft, ds.sample_rate, manifest.emitter);
  vlog(g, "fitting " + std::to_string(f.n_params()) + " parameters over " +
              std::to_string(ds.items.size()) + " IRs");
  const auto result = fit::train(ds, f, cfg, a.log);
  f.save(a.out);
  if (result.aborted) {
    std::cerr << "training diverged (NaN loss); saved the last good checkpoint\n";
    return 3;
  }
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    vlog(g, "final train loss " + std::to_string(last.train_loss.total) + ", test phase " +
                std::to_string(last.test_phase));
  }
  return 0;
}

// ---- render ----

struct RenderArgs {
  std::string field_file, listener, out, gain = "omni";
  bool binaural = false;
  double ear_spacing = 0.2;
  int n_theta = 80, n_phi = 40, n_r = 64;
  double u_near = 0.1, u_far = 0.0;
  double speed_of_sound = 343.0;
  int ir_len = 0;
};

std::unique_ptr<renderer::GainPattern> make_gain(const std::string& spec, int ear,
                                                 std::shared_ptr<renderer::HrtfTable>& table) {
  if (spec == "omni") return std::make_unique<renderer::OmniGain>();
  if (spec == "cardioid") return std::make_unique<renderer::CardioidGain>();
  if (spec.rfind("hrtf:", 0) == 0) {
    if (!table)
      table = std::make_shared<renderer::HrtfTable>(renderer::HrtfTable::load(spec.substr(5)));
    return std::make_unique<renderer::HrtfGain>(table, ear);
  }
  throw CLI::ValidationError("--gain", "expected omni, cardioid, or hrtf:<file>");
}

int run_render(const RenderArgs& a, const GlobalOpts& g) {
  const field::VoxelGridField f = field::VoxelGridField::load(a.field_file);
  renderer::RenderConfig cfg;
  cfg.n_theta = a.n_theta;
  cfg.n_phi = a.n_phi;
  cfg.n_r = a.n_r;
  cfg.u_near = a.u_near;
  cfg.speed_of_sound = a.speed_of_sound;
  cfg.n_fft = f.n_fft();
  cfg.sample_rate = f.sample_rate();
  cfg.ir_len = a.ir_len > 0 ? a.ir_len : f.n_fft() / 2;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  const double max_u = 0.95 * cfg.speed_of_sound * cfg.n_fft / cfg.sample_rate;
  cfg.u_far = a.u_far > 0.0 ? a.u_far
                            : std::min(max_u, (f.bounds().max() - f.bounds().min()).norm());
  const Pose listener = parse_pose(a.listener);

  std::shared_ptr<renderer::HrtfTable> table;
  io::AudioData audio;
  audio.sample_rate = cfg.sample_rate;
  if (a.binaural) {
    const auto gl = make_gain(a.gain, 0, table);
    const auto gr = make_gain(a.gain, 1, table);
    const auto stereo =
        renderer::render_binaural(f, listener, a.ear_spacing, *gl, *gr, f.emitter(), cfg);
    audio.samples = stereo.samples;
  } else {
    const auto gain = make_gain(a.gain, 0, table);
    const auto res = renderer::render_ir(f, listener, *gain, f.emitter(), cfg);
    audio.samples.resize(res.ir.samples.size(), 1);
    audio.samples.col(0) = res.ir.samples;
  }
  require_finite(audio.samples, "rendered IR");
  io::write_audio(a.out, audio);
  write_sidecar(a.out, g,
                {{"sample_rate_hz", cfg.sample_rate},
                 {"channels", a.binaural ? 2 : 1},
                 {"units", "pressure amplitude"}});
  return 0;
}

// ---- eval / compare ----

struct EvalItem {
  std::string name;
  SampledIR pred;
  SampledIR ref;
};

std::vector<EvalItem> collect_items(const std::string& pred, const std::string& ref) {
  std::vector<EvalItem> items;
  auto load = [](const std::string& p) { return io::to_mono_ir(io::read_audio(p)); };
  if (fs::is_directory(pred) != fs::is_directory(ref))
    throw std::invalid_argument("eval: --pred and --ref must both be files or both directories");
  if (!fs::is_directory(pred)) {
    items.push_back({fs::path(pred).filename().string(), load(pred), load(ref)});
    return items;
  }
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(pred)) {
    const auto ext = e.path().extension().string();
    if (ext == ".wav" || ext == ".f32") names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw std::invalid_argument("eval: no .wav/.f32 files in " + pred);
  for (const auto& n : names) {
    const auto rp = fs::path(ref) / n;
    if (!fs::exists(rp)) throw std::invalid_argument("eval: missing reference for " + n);
    items.push_back({n, load((fs::path(pred) / n).string()), load(rp.string())});
  }
  return items;
}

json report_json(const std::string& name, const objective::MetricReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v && std::isfinite(*v) ? json(*v) : json(nullptr);
  };
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"item", name},
          {"phase_error", num(r.phase_error)},
          {"amp_error", num(r.amp_error)},
          {"amp_excluded_bins", r.amp_excluded_bins},
          {"envelope_error_pct", num(r.envelope_error)},
          {"t60_error_pct", opt(r.t60_error)},
          {"c50_error_db", num(r.c50_error)},
          {"edt_error_ms", opt(r.edt_error)}};
}

objective::MetricReport eval_pair(const EvalItem& item) {
  if (item.pred.sample_rate != item.ref.sample_rate)
    throw std::invalid_argument("eval: sample rate mismatch on " + item.name);
  if (item.pred.size() != item.ref.size())
    throw std::invalid_argument("eval: length mismatch on " + item.name);
  const int n_fft = next_pow2(2 * static_cast<int>(item.ref.size()));
  const Spectrum ps = signals::forward_transform(item.pred, n_fft);
  const Spectrum rs = signals::forward_transform(item.ref, n_fft);
  return objective::evaluate(item.pred, ps, item.ref, rs);
}

int run_eval(const std::string& pred, const std::string& ref, const std::string& out,
             const GlobalOpts& g) {
  const auto items = collect_items(pred, ref);
  json per_item = json::array();
  double phase = 0, amp = 0, env = 0;
  for (const auto& item : items) {
    const auto r = eval_pair(item);
    per_item.push_back(report_json(item.name, r));
    phase += r.phase_error;
    amp += r.amp_error;
    env += r.envelope_error;
  }
  const double n = static_cast<double>(items.size());
  json report = {{"command", g.command_line},
                 {"items", per_item},
                 {"aggregate",
                  {{"phase_error", phase / n},
                   {"amp_error", amp / n},
                   {"envelope_error_pct", env / n},
                   {"count", items.size()}}}};
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out);
  os << report.dump(2) << '\n';
  vlog(g, "aggregate phase error " + std::to_string(phase / n));
  return 0;
}

int run_compare(const std::string& pred, const std::string& ref, const std::string& out) {
  const auto items = collect_items(pred, ref);
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out);
  os << "item,phase_error,amp_error,envelope_error_pct,t60_error_pct,c50_error_db,edt_error_ms\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string();
  };
  for (const auto& item : items) {
    const auto r = eval_pair(item);
    os << item.name << ',' << r.phase_error << ',' << r.amp_error << ',' << r.envelope_error
       << ',' << opt(r.t60_error) << ',' << r.c50_error << ',' << opt(r.edt_error) << '\n';
  }
  return 0;
}

// ---- loudness-map ----

struct LoudnessArgs {
  std::string field_file, out_stem, origin = "0,0";
  int nx = 10, ny = 10;
  double spacing = 0.1, height = 1.5;
  int n_theta = 40, n_phi = 20, n_r = 48;
  double u_near = 0.1, u_far = 0.0;
};

int run_loudness(const LoudnessArgs& a, const GlobalOpts& g) {
  const field::VoxelGridField f = field::VoxelGridField::load(a.field_file);
  renderer::RenderConfig cfg;
  cfg.n_theta = a.n_theta;
  cfg.n_phi = a.n_phi;
  cfg.n_r = a.n_r;
  cfg.u_near = a.u_near;
  cfg.n_fft = f.n_fft();
  cfg.sample_rate = f.sample_rate();
  cfg.ir_len = f.n_fft() / 2;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  const double max_u = 0.95 * cfg.speed_of_sound * cfg.n_fft / cfg.sample_rate;
  cfg.u_far = a.u_far > 0.0 ? a.u_far
                            : std::min(max_u, (f.bounds().max() - f.bounds().min()).norm());
  const auto o = parse_doubles(a.origin);
  if (o.size() != 2) throw CLI::ValidationError("--origin", "expected x,y");
  loudness::SliceSpec slice;
  slice.origin = Vec3(o[0], o[1], 0.0);
  slice.nx = a.nx;
  slice.ny = a.ny;
  slice.spacing = a.spacing;
  slice.height = a.height;
  const auto map = loudness::compute_loudness_map(f, f.emitter(), slice, cfg);
  loudness::write_loudness_map(a.out_stem, map);
  vlog(g, "wrote " + a.out_stem + ".{csv,pgm,json}");
  return 0;
}

// ---- convolve ----

int run_convolve(const std::string& ir_path, const std::string& audio_path,
                 const std::string& out, const GlobalOpts& g) {
  const io::AudioData ir = io::read_audio(ir_path);
  const io::AudioData src = io::read_audio(audio_path);
  if (ir.sample_rate != src.sample_rate)
    throw std::invalid_argument("convolve: sample rate mismatch (no resampling)");
  if (src.samples.cols() != 1)
    throw std::invalid_argument("convolve: source audio must be mono");
  const Eigen::Index out_len = src.samples.rows() + ir.samples.rows() - 1;
  const int n_fft = next_pow2(static_cast<int>(out_len));
  const ArrayXcd src_spec = fft::rfft(src.samples.col(0).array(), n_fft);
  io::AudioData result;
  result.sample_rate = ir.sample_rate;
  result.samples.resize(out_len, ir.samples.cols());
  for (Eigen::Index c = 0; c < ir.samples.cols(); ++c) {
    const ArrayXcd ir_spec = fft::rfft(ir.samples.col(c).array(), n_fft);
    result.samples.col(c) = fft::irfft(src_spec * ir_spec, n_fft).head(out_len);
  }
  require_finite(result.samples, "convolved audio");
  const double peak = result.samples.abs().maxCoeff();
  const double gain = peak > 0.0 ? 0.99 / peak : 1.0;
  result.samples *= gain;
  io::write_audio(out, result);
  write_sidecar(out, g,
                {{"sample_rate_hz", result.sample_rate},
                 {"normalization_gain", gain},
                 {"channels", ir.samples.cols()}});
  std::cout << "normalization gain: " << gain << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Impulse-response toolkit: acoustic ray-traced simulation, volume-rendered "
      "IR field fitting, rendering, and metrics.\n"
      "Exit codes: 0 success, 2 validation error, 3 numerical failure (NaN)."};
  app.require_subcommand(1);

  GlobalOpts g;
  {
    std::ostringstream cl;
    for (int i = 0; i < argc; ++i) cl << (i ? " " : "") << argv[i];
    g.command_line = cl.str();
  }
  app.add_option("--threads", g.threads, "worker threads (0 = auto)");
  app.add_flag("--verbose", g.verbose, "progress output on stderr");
  app.add_option("--seed", g.seed, "RNG seed (seeded runs are bit-reproducible)");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "trace a room impulse response");
  c_sim->add_option("--scene", sim.scene_file)->required();
  c_sim->add_option("--emitter", sim.emitter, "x,y,z[,ox,oy,oz]")->required();
  c_sim->add_option("--listener", sim.listener, "x,y,z[,ox,oy,oz]")->required();
  c_sim->add_option("--rays", sim.rays);
  c_sim->add_option("--depth", sim.depth);
  c_sim->add_option("--duration", sim.duration, "seconds");
  c_sim->add_option("--sr", sim.sr, "Hz");
  c_sim->add_option("--receiver-radius", sim.receiver_radius, "meters");
  c_sim->add_option("--out", sim.out)->required();

  GenDatasetArgs gen;
  auto* c_gen = app.add_subcommand("gen-dataset", "simulate IRs on a listener grid");
  c_gen->add_option("--scene", gen.scene_file)->required();
  c_gen->add_option("--emitter", gen.emitter)->required();
  c_gen->add_option("--nx", gen.nx);
  c_gen->add_option("--ny", gen.ny);
  c_gen->add_option("--origin", gen.origin, "grid corner x,y");
  c_gen->add_option("--spacing", gen.spacing, "meters");
  c_gen->add_option("--height", gen.height, "listener z");
  c_gen->add_option("--rays", gen.rays);
  c_gen->add_option("--depth", gen.depth);
  c_gen->add_option("--duration", gen.duration);
  c_gen->add_option("--sr", gen.sr);
  c_gen->add_option("--out", gen.out_dir)->required();

  FitArgs fita;
  auto* c_fit = app.add_subcommand("fit", "fit a voxel-grid IR field to a dataset");
  c_fit->add_option("--dataset", fita.dataset_dir)->required();
  c_fit->add_option("--scene-bounds", fita.bounds, "auto or x0,y0,z0,x1,y1,z1");
  c_fit->add_option("--grid", fita.grid, "N or Nx,Ny,Nz");
  c_fit->add_option("--epochs", fita.epochs);
  c_fit->add_option("--batch", fita.batch);
  c_fit->add_option("--n-theta", fita.n_theta);
  c_fit->add_option("--n-phi", fita.n_phi);
  c_fit->add_option("--n-r", fita.n_r);
  c_fit->add_option("--u-near", fita.u_near);
  c_fit->add_option("--u-far", fita.u_far, "0 = bounds diagonal");
  c_fit->add_option("--lr-start", fita.lr_start);
  c_fit->add_option("--lr-end", fita.lr_end);
  c_fit->add_option("--out", fita.out)->required();
  c_fit->add_option("--log", fita.log, "JSONL, one record per epoch");

  RenderArgs ren;
  auto* c_ren = app.add_subcommand("render", "render an IR from a fitted field");
  c_ren->add_option("--field", ren.field_file)->required();
  c_ren->add_option("--listener", ren.listener)->required();
  c_ren->add_option("--gain", ren.gain, "omni|cardioid|hrtf:<file>");
  c_ren->add_flag("--binaural", ren.binaural);
  c_ren->add_option("--ear-spacing", ren.ear_spacing, "meters");
  c_ren->add_option("--n-theta", ren.n_theta);
  c_ren->add_option("--n-phi", ren.n_phi);
  c_ren->add_option("--n-r", ren.n_r);
  c_ren->add_option("--u-near", ren.u_near);
  c_ren->add_option("--u-far", ren.u_far);
  c_ren->add_option("--ir-len", ren.ir_len, "samples (0 = n_fft/2)");
  c_ren->add_option("--out", ren.out)->required();

  std::string eval_pred, eval_ref, eval_out = "report.json";
  auto* c_eval = app.add_subcommand("eval", "metric report, prediction vs reference");
  c_eval->add_option("--pred", eval_pred)->required();
  c_eval->add_option("--ref", eval_ref)->required();
  c_eval->add_option("--out", eval_out);

  std::string cmp_pred, cmp_ref, cmp_out = "compare.csv";
  auto* c_cmp = app.add_subcommand("compare", "side-by-side metric CSV");
  c_cmp->add_option("--pred", cmp_pred)->required();
  c_cmp->add_option("--ref", cmp_ref)->required();
  c_cmp->add_option("--out", cmp_out);

  LoudnessArgs loud;
  auto* c_loud = app.add_subcommand("loudness-map", "per-cell IR energy over a slice");
  c_loud->add_option("--field", loud.field_file)->required();
  c_loud->add_option("--origin", loud.origin, "slice corner x,y");
  c_loud->add_option("--nx", loud.nx);
  c_loud->add_option("--ny", loud.ny);
  c_loud->add_option("--spacing", loud.spacing, "meters (0.1 typical)");
  c_loud->add_option("--height", loud.height);
  c_loud->add_option("--n-theta", loud.n_theta);
  c_loud->add_option("--n-phi", loud.n_phi);
  c_loud->add_option("--n-r", loud.n_r);
  c_loud->add_option("--u-near", loud.u_near);
  c_loud->add_option("--u-far", loud.u_far);
  c_loud->add_option("--out", loud.out_stem, "output stem (.csv/.pgm/.json)")->required();

  std::string conv_ir, conv_audio, conv_out;
  auto* c_conv = app.add_subcommand("convolve", "convolve source audio with an IR");
  c_conv->add_option("--ir", conv_ir)->required();
  c_conv->add_option("--audio", conv_audio)->required();
  c_conv->add_option("--out", conv_out)->required();

  try {
    app.parse(argc, argv);
    if (*c_sim) return run_simulate(sim, g);
    if (*c_gen) return run_gen_dataset(gen, g);
    if (*c_fit) return run_fit(fita, g);
    if (*c_ren) return run_render(ren, g);
    if (*c_eval) return run_eval(eval_pred, eval_ref, eval_out, g);
    if (*c_cmp) return run_compare(cmp_pred, cmp_ref, cmp_out);
    if (*c_loud) return run_loudness(loud, g);
    if (*c_conv) return run_convolve(conv_ir, conv_audio, conv_out, g);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
