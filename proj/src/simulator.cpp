#include "irtk/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "irtk/fft.hpp"
#include "irtk/signals.hpp"

namespace irtk::simulator {

using geometry::Scene;
using geometry::Surface;

namespace {

constexpr int kSincTaps = 81;

ArrayXd specular_factor(const Scene& scene, int surface) {
  const auto& mat = scene.materials[static_cast<size_t>(scene.surfaces[static_cast<size_t>(surface)].material)];
  return (1.0 - mat.scattering) * (-mat.reflection);
}

/// Mirror a point across the surface plane.
Vec3 mirror(const Vec3& p, const Surface& s) {
  return p - 2.0 * (s.normal.dot(p) - s.plane_offset) * s.normal;
}

/// Validates a candidate specular sequence by backtracking from the listener
/// toward successive image positions. Returns the path if every segment hits
/// the intended surface unobstructed.
std::optional<RayPath> validate_specular(const Scene& scene, const Vec3& emitter,
                                         const Vec3& listener,
                                         const std::vector<int>& sequence) {
  // image positions of the emitter after mirroring across sequence[0..k]
  std::vector<Vec3> images(sequence.size() + 1);
  images[0] = emitter;
  for (size_t k = 0; k < sequence.size(); ++k)
    images[k + 1] = mirror(images[k], scene.surfaces[static_cast<size_t>(sequence[k])]);

  RayPath path;
  path.length = (listener - images.back()).norm();
  path.band_gain = ArrayXd::Ones(scene.n_bands());

  Vec3 point = listener;
  for (size_t k = sequence.size(); k-- > 0;) {
    const int sid = sequence[k];
    const Vec3 target = images[k + 1];
    const Vec3 dir = (target - point).normalized();
    auto hit = geometry::intersect(point, dir, scene);
    if (!hit || hit->surface != sid) return std::nullopt;
    if (hit->distance > (target - point).norm()) return std::nullopt;
    point = hit->point;
    path.interactions.push_back({sid, InteractionKind::Specular});
    path.band_gain *= specular_factor(scene, sid);
  }
  // final leg back to the emitter
  if (geometry::occluded(point, emitter, scene)) return std::nullopt;
  std::reverse(path.interactions.begin(), path.interactions.end());
  return path;
}

void enumerate_specular(const Scene& scene, const Vec3& emitter, const Vec3& listener,
                        int max_order, std::vector<int>& sequence,
                        std::vector<RayPath>& out) {
  if (!sequence.empty()) {
    if (auto p = validate_specular(scene, emitter, listener, sequence)) out.push_back(*p);
  }
  if (static_cast<int>(sequence.size()) >= max_order) return;
  for (int s = 0; s < static_cast<int>(scene.surfaces.size()); ++s) {
    if (!sequence.empty() && sequence.back() == s) continue;  // no immediate re-hit
    sequence.push_back(s);
    enumerate_specular(scene, emitter, listener, max_order, sequence, out);
    sequence.pop_back();
  }
}

/// Distance along the segment [a, a + t*dir], t in (0, seg_len), at which the
/// receiver sphere is crossed; nullopt when the segment misses it.
std::optional<double> segment_sphere(const Vec3& a, const Vec3& dir, double seg_len,
                                     const Vec3& center, double radius) {
  const Vec3 oc = a - center;
  const double b = oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t <= 1e-9 || t >= seg_len) return std::nullopt;
  return t;
}

void trace_one_ray(const Scene& scene, const Vec3& emitter, const Vec3& listener,
                   const SimConfig& cfg, Rng& rng, std::vector<RayPath>& out) {
  // uniform direction over the sphere
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
  Vec3 dir(rxy * std::cos(phi), rxy * std::sin(phi), z);

  Vec3 origin = emitter;
  double traveled = 0.0;
  ArrayXd gain = ArrayXd::Ones(scene.n_bands());
  std::vector<Interaction> history;
  const double n_rays = static_cast<double>(cfg.n_rays);
  const double r2 = cfg.receiver_radius * cfg.receiver_radius;

  for (int depth = 0; depth < cfg.max_depth; ++depth) {
    auto hit = geometry::intersect(origin, dir, scene);
    const double seg_len = hit ? hit->distance : std::numeric_limits<double>::infinity();

    // deep specular paths are found by receiver-sphere crossing; low orders
    // are already covered by the deterministic mirror construction
    if (static_cast<int>(history.size()) > cfg.deterministic_specular_order) {
      if (auto t = segment_sphere(origin, dir, seg_len, listener, cfg.receiver_radius)) {
        RayPath p;
        p.length = traveled + (listener - origin).norm();
        p.interactions = history;
        // coherent family estimator: expected sphere hits for one specular
        // path at distance d is n_rays * r^2 / (4 d^2)
        p.band_gain = gain * (4.0 * p.length * p.length / (n_rays * r2));
        p.launch_weight = 1.0 / n_rays;
        out.push_back(std::move(p));
      }
    }

    if (!hit) return;  // escaped the scene

    const auto& mat = scene.materials[static_cast<size_t>(
        scene.surfaces[static_cast<size_t>(hit->surface)].material)];
    const double hit_traveled = traveled + hit->distance;

    // next-event connection for the scattered component
    if ((mat.scattering > 0.0).any() && !geometry::occluded(hit->point, listener, scene)) {
      const Vec3 to_l = listener - hit->point;
      const double d_conn = to_l.norm();
      if (d_conn > 1e-9) {
        const Vec3 n = hit->normal.dot(dir) < 0.0 ? hit->normal : Vec3(-hit->normal);
        const double cos_out = std::abs(n.dot(to_l / d_conn));
        const double cos_in = std::abs(n.dot(dir));
        if (cos_in > 1e-9) {
          RayPath p;
          p.length = hit_traveled + d_conn;
          p.interactions = history;
          p.interactions.push_back({hit->surface, InteractionKind::Scatter});
          // ensemble-energy-matched amplitude for the diffuse lobe estimate
          const double capture = p.length / d_conn * cfg.receiver_radius *
                                 std::sqrt(4.0 * cos_out / (n_rays * cos_in));
          p.band_gain = gain * mat.scattering * mat.reflection * capture;
          p.launch_weight = 1.0 / n_rays;
          out.push_back(std::move(p));
        }
      }
    }

    // specular continuation
    gain *= (1.0 - mat.scattering) * (-mat.reflection);
    history.push_back({hit->surface, InteractionKind::Specular});
    if ((gain.abs() < 1e-12).all()) return;
    traveled = hit_traveled;
    origin = hit->point;
    dir = geometry::specular_reflect(dir, hit->normal);
  }
}

/// Piecewise-linear interpolation of band gains in log frequency, constant
/// beyond the outermost band centers.
double band_gain_at(double freq, const std::vector<double>& centers, const ArrayXd& gains) {
  if (gains.size() == 1) return gains[0];
  if (freq <= centers.front()) return gains[0];
  if (freq >= centers.back()) return gains[gains.size() - 1];
  const double lf = std::log(freq);
  for (size_t i = 1; i < centers.size(); ++i) {
    if (freq <= centers[i]) {
      const double l0 = std::log(centers[i - 1]);
      const double l1 = std::log(centers[i]);
      const double w = (lf - l0) / (l1 - l0);
      return (1.0 - w) * gains[static_cast<Eigen::Index>(i - 1)] + w * gains[static_cast<Eigen::Index>(i)];
    }
  }
  return gains[gains.size() - 1];
}

}  // namespace

std::vector<RayPath> trace_paths(const Scene& scene, const Pose& emitter, const Pose& listener,
                                 const SimConfig& cfg, uint64_t seed) {
  // n_rays = 0 keeps only the deterministic mirror construction
  if (cfg.n_rays < 0 || cfg.max_depth < 1 || !(cfg.receiver_radius > 0.0))
    throw std::invalid_argument("trace_paths: invalid SimConfig");
  const Vec3 pe = emitter.position, pl = listener.position;
  if ((pe - pl).norm() < 1e-9)
    throw std::invalid_argument("trace_paths: emitter and listener coincide");

  std::vector<RayPath> paths;

  // direct line of sight, always deterministic
  if (!geometry::occluded(pe, pl, scene)) {
    RayPath direct;
    direct.length = (pl - pe).norm();
    direct.band_gain = ArrayXd::Ones(scene.n_bands());
    paths.push_back(std::move(direct));
  }

  // low-order specular paths via mirror images
  const int det_order = std::min(cfg.deterministic_specular_order, cfg.max_depth);
  if (det_order > 0 && !scene.surfaces.empty()) {
    std::vector<int> sequence;
    enumerate_specular(scene, pe, pl, det_order, sequence, paths);
  }

  if (scene.surfaces.empty()) return paths;

  // stochastic tracing: per-ray RNG streams keyed by ray index so results do
  // not depend on the thread count
  int n_threads = cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, static_cast<int>(std::min<int64_t>(n_threads, cfg.n_rays)));
  std::vector<std::vector<std::vector<RayPath>>> per_chunk(static_cast<size_t>(n_threads));
  const int64_t chunk = (cfg.n_rays + n_threads - 1) / n_threads;

  auto worker = [&](int w) {
    const int64_t begin = static_cast<int64_t>(w) * chunk;
    const int64_t end = std::min<int64_t>(begin + chunk, cfg.n_rays);
    auto& bucket = per_chunk[static_cast<size_t>(w)];
    bucket.reserve(static_cast<size_t>(std::max<int64_t>(0, end - begin)));
    for (int64_t i = begin; i < end; ++i) {
      Rng rng = Rng::stream(seed, static_cast<uint64_t>(i));
      std::vector<RayPath> found;
      trace_one_ray(scene, pe, pl, cfg, rng, found);
      bucket.push_back(std::move(found));
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < n_threads; ++w) pool.emplace_back(worker, w);
  worker(0);
  for (auto& t : pool) t.join();

  for (auto& bucket : per_chunk)
    for (auto& found : bucket)
      for (auto& p : found) paths.push_back(std::move(p));
  return paths;
}

SampledIR assemble_ir(const std::vector<RayPath>& paths, const Scene& scene,
                      const SimConfig& cfg, PathStats* stats) {
  if (!(cfg.ir_duration > 0.0) || !(cfg.sample_rate > 0.0))
    throw std::invalid_argument("assemble_ir: invalid duration or sample rate");
  const int n = std::max<int>(1, static_cast<int>(std::llround(cfg.ir_duration * cfg.sample_rate)));
  ArrayXd ir = ArrayXd::Zero(n);
  const double v = scene.speed_of_sound;
  const double max_len = cfg.ir_duration * v;

  // shaped-kernel workspace: kernel centered in a pow2 block so zero-phase
  // band shaping cannot wrap
  constexpr int kBlock = 256;
  constexpr int kLead = (kBlock - kSincTaps) / 2;
  const int n_block_bins = kBlock / 2 + 1;

  PathStats local;
  for (const auto& path : paths) {
    if (path.length > max_len) {
      ++local.dropped;
      continue;
    }
    ++local.count_per_order[static_cast<int>(path.interactions.size())];

    const double delay_samples = path.length / v * cfg.sample_rate;
    const int idx = static_cast<int>(std::floor(delay_samples));
    const double frac = delay_samples - idx;
    const ArrayXd kernel = signals::windowed_sinc_kernel(frac, kSincTaps);
    const ArrayXd amp = path.band_gain / path.length;

    const bool flat = (amp - amp[0]).abs().maxCoeff() < 1e-15;
    if (flat) {
      const int start = idx - (kSincTaps - 1) / 2;
      for (int i = 0; i < kSincTaps; ++i) {
        const int j = start + i;
        if (j >= 0 && j < n) ir[j] += amp[0] * kernel[i];
      }
    } else {
      ArrayXd block = ArrayXd::Zero(kBlock);
      block.segment(kLead, kSincTaps) = kernel;
      ArrayXcd spec = fft::rfft(block, kBlock);
      for (int k = 0; k < n_block_bins; ++k) {
        const double f = static_cast<double>(k) * cfg.sample_rate / kBlock;
        spec[k] *= band_gain_at(f, scene.octave_bands, amp);
      }
      const ArrayXd shaped = fft::irfft(spec, kBlock);
      const int start = idx - (kSincTaps - 1) / 2 - kLead;
      for (int i = 0; i < kBlock; ++i) {
        const int j = start + i;
        if (j >= 0 && j < n) ir[j] += shaped[i];
      }
    }
  }
  if (stats) *stats = std::move(local);
  return SampledIR(std::move(ir), cfg.sample_rate);
}

SampledIR simulate(const Scene& scene, const Pose& emitter, const Pose& listener,
                   const SimConfig& cfg, uint64_t seed, PathStats* stats) {
  auto paths = trace_paths(scene, emitter, listener, cfg, seed);
  return assemble_ir(paths, scene, cfg, stats);
}

}  // namespace irtk::simulator
