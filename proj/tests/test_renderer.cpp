#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "irtk/field.hpp"
#include "irtk/renderer.hpp"
#include "irtk/rng.hpp"

using namespace irtk;
using namespace irtk::renderer;

namespace {

// Homogeneous medium with a flat unit emission spectrum; the quadrature has a
// closed form against which render_ray can be checked.
class ConstantField : public field::Field {
 public:
  ConstantField(double sigma, int n_fft, double sr) : sigma_(sigma), n_fft_(n_fft), sr_(sr) {}
  int n_fft() const override { return n_fft_; }
  double sample_rate() const override { return sr_; }
  void query_into(const Vec3&, const Vec3&, const Pose&, double& sigma,
                  ArrayXcd& emission) const override {
    sigma = sigma_;
    emission.setOnes();
  }

 private:
  double sigma_;
  int n_fft_;
  double sr_;
};

field::VoxelGridField random_grid(uint64_t seed, int n_fft = 16, int degree = 1) {
  field::VoxelGridField f(Eigen::AlignedBox3d(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5)),
                          Eigen::Vector3i::Constant(2), degree, n_fft, 16000.0,
                          Pose(Vec3(0.2, 0.1, -0.1), Vec3::UnitX()));
  Rng rng(seed);
  for (Eigen::Index i = 0; i < f.density_logits().size(); ++i)
    f.density_logits()[i] = rng.normal();
  for (Eigen::Index i = 0; i < f.emission_coeffs().size(); ++i)
    f.emission_coeffs().data()[i] = 0.3 * Complex(rng.normal(), rng.normal());
  return f;
}

RenderConfig small_cfg() {
  RenderConfig cfg;
  cfg.n_theta = 4;
  cfg.n_phi = 3;
  cfg.n_r = 8;
  cfg.u_near = 0.01;
  cfg.u_far = 0.3;
  cfg.n_fft = 16;
  cfg.ir_len = 16;
  cfg.sample_rate = 16000.0;
  cfg.seed = 77;
  cfg.threads = 1;
  return cfg;
}

int argmax_abs(const ArrayXd& x) {
  int best = 0;
  for (int i = 1; i < x.size(); ++i)
    if (std::abs(x[i]) > std::abs(x[best])) best = i;
  return best;
}

}  // namespace

TEST_CASE("sample_points lays out the documented quadrature nodes") {
  RenderConfig cfg;
  cfg.u_near = 0.0;
  cfg.u_far = 4.0;
  cfg.n_r = 4;
  const Vec3 o(1, 2, 3), d(0, 0, 1);
  const auto pts = sample_points(o, d, cfg);
  REQUIRE(pts.size() == 4);
  for (int m = 0; m < 4; ++m) {
    CHECK(pts[m].u == doctest::Approx(m + 1.0).epsilon(1e-15));
    CHECK(pts[m].du == doctest::Approx(1.0).epsilon(1e-15));
    CHECK((pts[m].position - (o + pts[m].u * d)).norm() == 0.0);
  }

  cfg.u_near = 0.5;
  cfg.u_far = 2.5;
  cfg.n_r = 10;
  const auto pts2 = sample_points(o, d, cfg);
  CHECK(pts2.front().u == doctest::Approx(0.7));
  CHECK(pts2.back().u == doctest::Approx(2.5));
}

TEST_CASE("direction sampling: unit vectors, uniform weights, sphere moments") {
  Rng rng(41);
  const auto ds = sample_directions(80, 40, rng);
  REQUIRE(static_cast<int>(ds.directions.size()) == 3200);
  CHECK(ds.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ds.weights.minCoeff() == ds.weights.maxCoeff());

  Vec3 mean = Vec3::Zero();
  double z2 = 0.0;
  for (const auto& d : ds.directions) {
    CHECK(std::abs(d.norm() - 1.0) < 1e-12);
    mean += d;
    z2 += d.z() * d.z();
  }
  mean /= static_cast<double>(ds.directions.size());
  z2 /= static_cast<double>(ds.directions.size());
  CHECK(mean.norm() < 0.02);
  // midpoint rule on cos(phi) reproduces the second moment of the sphere
  CHECK(z2 == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
}

TEST_CASE("render_ray matches the closed-form homogeneous quadrature") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    RenderConfig cfg;
    cfg.n_r = 3 + static_cast<int>(rng.uniform() * 40);
    cfg.u_near = rng.uniform(0.0, 0.5);
    cfg.u_far = cfg.u_near + rng.uniform(0.5, 3.0);
    cfg.n_fft = 512;
    cfg.ir_len = 512;
    cfg.sample_rate = 16000.0;
    const double sigma = rng.uniform(0.1, 3.0);
    ConstantField f(sigma, cfg.n_fft, cfg.sample_rate);

    const Spectrum s = render_ray(f, Vec3(0.3, -0.2, 1.0), Vec3(0, 1, 0), Pose(), cfg);
    const double du = (cfg.u_far - cfg.u_near) / cfg.n_r;
    ArrayXcd expect = ArrayXcd::Zero(s.n_bins());
    double trans = 1.0;
    for (int m = 1; m <= cfg.n_r; ++m) {
      const double u = cfg.u_near + du * m;
      const double w = trans * (1.0 - std::exp(-sigma * du));
      trans *= std::exp(-sigma * du);
      for (Eigen::Index k = 0; k < s.n_bins(); ++k)
        expect[k] += w * std::polar(1.0, -2.0 * M_PI * s.bin_freq(k) * u / cfg.speed_of_sound);
    }
    CHECK((s.bins - expect).abs().maxCoeff() < 1e-9);
    // opacity telescopes: sum of weights = 1 - exp(-sigma * (u_far - u_near))
    CHECK(std::abs(s.bins[0] - Complex(-std::expm1(-sigma * (cfg.u_far - cfg.u_near)), 0.0)) <
          1e-12);
  }
}

TEST_CASE("point-source field renders free-field delay and 1/d amplitude") {
  RenderConfig cfg;
  cfg.n_theta = 48;
  cfg.n_phi = 24;
  cfg.n_r = 64;
  cfg.u_near = 0.02;
  cfg.u_far = 1.0;
  cfg.n_fft = 1024;
  cfg.ir_len = 1024;
  cfg.sample_rate = 16000.0;
  cfg.seed = 3;
  const double v = cfg.speed_of_sound;
  const Vec3 src(0, 0, 0);
  auto f = field::make_analytic_point_source(src, 0.01, v, cfg.sample_rate, cfg.n_fft);
  const Pose emitter(src, Vec3::UnitX());
  OmniGain omni;

  const double r_shell = cfg.u_near + (cfg.u_far - cfg.u_near) / cfg.n_r;
  const double slack = r_shell / v * cfg.sample_rate + 2.0;

  const auto near_ir = render_ir(*f, Pose(Vec3(1, 0, 0), Vec3::UnitX()), omni, emitter, cfg);
  const auto far_ir = render_ir(*f, Pose(Vec3(0, 2, 0), Vec3::UnitX()), omni, emitter, cfg);
  const int p1 = argmax_abs(near_ir.ir.samples);
  const int p2 = argmax_abs(far_ir.ir.samples);
  CHECK(std::abs(p1 - 1.0 / v * cfg.sample_rate) <= slack);
  CHECK(std::abs(p2 - 2.0 / v * cfg.sample_rate) <= slack);
  const double ratio =
      std::abs(near_ir.ir.samples[p1]) / std::abs(far_ir.ir.samples[p2]);
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("rendered output is linear in the emission coefficients") {
  auto f = random_grid(31);
  const RenderConfig cfg = small_cfg();
  const Pose listener(Vec3(0, 0, 0), Vec3::UnitX());
  OmniGain omni;
  const auto base = render_ir(f, listener, omni, f.emitter(), cfg);
  f.emission_coeffs() *= 2.0;
  const auto twice = render_ir(f, listener, omni, f.emitter(), cfg);
  CHECK((twice.spectrum.bins - 2.0 * base.spectrum.bins).abs().maxCoeff() < 1e-14);
  CHECK((twice.ir.samples - 2.0 * base.ir.samples).abs().maxCoeff() < 1e-14);
}

TEST_CASE("render is deterministic per seed and across thread counts") {
  const auto f = random_grid(37);
  RenderConfig cfg = small_cfg();
  cfg.n_theta = 16;
  cfg.n_phi = 8;
  const Pose listener(Vec3(0.1, 0, 0), Vec3::UnitX());
  OmniGain omni;

  cfg.threads = 1;
  const auto a = render_ir(f, listener, omni, f.emitter(), cfg);
  const auto b = render_ir(f, listener, omni, f.emitter(), cfg);
  cfg.threads = 4;
  const auto c = render_ir(f, listener, omni, f.emitter(), cfg);
  CHECK((a.ir.samples == b.ir.samples).all());
  CHECK((a.ir.samples == c.ir.samples).all());
  CHECK((a.spectrum.bins == c.spectrum.bins).all());

  cfg.seed = 1234;
  const auto d = render_ir(f, listener, omni, f.emitter(), cfg);
  CHECK((a.ir.samples != d.ir.samples).any());
}

TEST_CASE("binaural rendering: symmetry ahead, interaural delay to the side") {
  RenderConfig cfg;
  cfg.n_theta = 48;
  cfg.n_phi = 24;
  cfg.n_r = 64;
  cfg.u_near = 0.02;
  cfg.u_far = 1.0;
  cfg.n_fft = 1024;
  cfg.ir_len = 1024;
  cfg.sample_rate = 16000.0;
  cfg.seed = 9;
  const double v = cfg.speed_of_sound;
  OmniGain omni;

  // source dead ahead: both ears see the same thing up to quadrature noise
  {
    const Vec3 src(2, 0, 0);
    auto f = field::make_analytic_point_source(src, 0.01, v, cfg.sample_rate, cfg.n_fft);
    const auto st = render_binaural(*f, Pose(Vec3::Zero(), Vec3::UnitX()), 0.2, omni, omni,
                                    Pose(src, Vec3::UnitX()), cfg);
    REQUIRE(st.samples.rows() == cfg.ir_len);
    const ArrayXd l = st.samples.col(0), r = st.samples.col(1);
    CHECK(argmax_abs(l) == argmax_abs(r));
    CHECK(std::abs(l[argmax_abs(l)] - r[argmax_abs(r)]) <
          0.05 * std::abs(l[argmax_abs(l)]));
  }

  // source on the left (+y for a +x-facing head): left ear leads
  {
    const Vec3 src(0, 2, 0);
    auto f = field::make_analytic_point_source(src, 0.01, v, cfg.sample_rate, cfg.n_fft);
    const auto st = render_binaural(*f, Pose(Vec3::Zero(), Vec3::UnitX()), 0.3, omni, omni,
                                    Pose(src, Vec3::UnitX()), cfg);
    const int pl = argmax_abs(st.samples.col(0));
    const int pr = argmax_abs(st.samples.col(1));
    const double itd_expect = 0.3 / v * cfg.sample_rate;  // ears 0.3 m apart, endfire
    CHECK(pl < pr);
    CHECK(std::abs((pr - pl) - itd_expect) <= 4.0);
  }
}

TEST_CASE("hrtf table: lookup frame, round trip, gain application") {
  HrtfTable t(4, 3, 16000.0, 64);
  for (Eigen::Index c = 0; c < t.gains(0).rows(); ++c) {
    t.gains(0).row(c).setConstant(Complex(static_cast<double>(c), 0.5));
    t.gains(1).row(c).setConstant(Complex(-static_cast<double>(c), 2.0));
  }
  const Pose head(Vec3::Zero(), Vec3::UnitX());
  // forward = azimuth 0, elevation pi/2 -> middle elevation row, azimuth 0
  CHECK(t.cell_index(Vec3::UnitX(), head) == 1 * 4 + 0);
  // left (+y) is azimuth pi/2 -> cell 1 of the middle row
  CHECK(t.cell_index(Vec3::UnitY(), head) == 1 * 4 + 1);
  // straight up -> elevation 0 row
  CHECK(t.cell_index(Vec3::UnitZ(), head) == 0);

  t.save("test_hrtf.bin");
  const HrtfTable u = HrtfTable::load("test_hrtf.bin");
  std::remove("test_hrtf.bin");
  CHECK(u.n_azimuth() == 4);
  CHECK(u.n_elevation() == 3);
  CHECK((u.gains(0) == t.gains(0)).all());
  CHECK((u.gains(1) == t.gains(1)).all());

  HrtfGain g(std::make_shared<HrtfTable>(u), 1);
  ArrayXcd out(t.n_bins());
  g.gain_into(Vec3::UnitY(), head, out);
  CHECK(out[0] == Complex(-5.0, 2.0));
}

TEST_CASE("config validation rejects unusable setups") {
  RenderConfig cfg = small_cfg();
  CHECK_NOTHROW(cfg.validate());
  cfg.u_far = 400.0;  // farther than the transform window can represent
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_cfg();
  cfg.ir_len = cfg.n_fft + 2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_cfg();
  cfg.n_r = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_cfg();
  cfg.u_near = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("adjoint render matches central finite differences") {
  auto f = random_grid(101, 16, 1);
  RenderConfig cfg = small_cfg();
  const Pose listener(Vec3(0.05, -0.05, 0.0), Vec3::UnitX());
  OmniGain omni;
  const DirectionSet dirs = directions_for(cfg);

  Rng rng(55);
  const Eigen::Index nb = cfg.n_fft / 2 + 1;
  ArrayXcd d_spec(nb);
  for (Eigen::Index k = 0; k < nb; ++k) d_spec[k] = Complex(rng.normal(), rng.normal());
  ArrayXd d_ir(cfg.ir_len);
  for (Eigen::Index n = 0; n < d_ir.size(); ++n) d_ir[n] = rng.normal();

  auto objective = [&](const field::VoxelGridField& ff) {
    const auto r = render_ir(ff, listener, omni, ff.emitter(), cfg, dirs);
    double L = 0.0;
    for (Eigen::Index k = 0; k < nb; ++k)
      L += std::real(std::conj(d_spec[k]) * r.spectrum.bins[k]);
    L += (d_ir * r.ir.samples).sum();
    return L;
  };

  auto grads = f.zero_gradients();
  render_ir_adjoint(f, listener, omni, f.emitter(), cfg, dirs, d_spec, d_ir, grads);
  const ArrayXd g = field::VoxelGridField::flatten_gradients(grads);

  const ArrayXd params = f.flatten_params();
  Rng pick(7);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index i =
        static_cast<Eigen::Index>(pick.uniform() * static_cast<double>(params.size()));
    const double h = 1e-5;
    field::VoxelGridField fp = f, fm = f;
    ArrayXd pp = params, pm = params;
    pp[i] += h;
    pm[i] -= h;
    fp.unflatten_params(pp);
    fm.unflatten_params(pm);
    const double fd = (objective(fp) - objective(fm)) / (2.0 * h);
    CHECK(std::abs(fd - g[i]) < 2e-5 * std::max(1.0, std::abs(fd)));
    ++checked;
  }
  CHECK(checked == 50);
  // density gradients must be populated somewhere (the medium is visible)
  CHECK(grads.density.abs().maxCoeff() > 0.0);
}
