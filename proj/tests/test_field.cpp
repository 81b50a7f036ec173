#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "irtk/field.hpp"
#include "irtk/rng.hpp"

using namespace irtk;
using field::VoxelGridField;

namespace {

double softplus(double x) { return std::log1p(std::exp(x)); }
double inv_softplus(double y) { return std::log(std::expm1(y)); }

VoxelGridField make_grid(int res = 2, int degree = 0, int n_fft = 8) {
  return VoxelGridField(Eigen::AlignedBox3d(Vec3(0, 0, 0), Vec3(1, 1, 1)),
                        Eigen::Vector3i::Constant(res), degree, n_fft, 1000.0,
                        Pose(Vec3(0.5, 0.5, 0.5), Vec3::UnitX()));
}

void randomize(VoxelGridField& f, uint64_t seed) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < f.density_logits().size(); ++i)
    f.density_logits()[i] = rng.normal();
  auto& em = f.emission_coeffs();
  for (Eigen::Index i = 0; i < em.size(); ++i)
    em.data()[i] = Complex(rng.normal(), rng.normal());
}

}  // namespace

TEST_CASE("corner queries return node values; midpoint averages them") {
  VoxelGridField f = make_grid(2, 0, 8);
  randomize(f, 3);
  const Pose em = f.emitter();

  // corner (0,0,0) is node 0
  auto r = f.query(Vec3(0, 0, 0), Vec3::UnitX(), em);
  CHECK(r.sigma == doctest::Approx(softplus(f.density_logits()[0])).epsilon(1e-12));
  const double y00 = 0.28209479177387814;
  for (int k = 0; k < 5; ++k)
    CHECK(std::abs(r.emission[k] - y00 * f.emission_coeffs()(0, k)) < 1e-12);

  // center averages all eight nodes
  auto c = f.query(Vec3(0.5, 0.5, 0.5), Vec3::UnitX(), em);
  double sig = 0.0;
  Complex em0(0, 0);
  for (int i = 0; i < 8; ++i) {
    sig += 0.125 * softplus(f.density_logits()[i]);
    em0 += 0.125 * y00 * f.emission_coeffs()(i, 0);
  }
  CHECK(c.sigma == doctest::Approx(sig).epsilon(1e-12));
  CHECK(std::abs(c.emission[0] - em0) < 1e-12);
}

TEST_CASE("out-of-bounds queries are transparent and silent") {
  VoxelGridField f = make_grid();
  randomize(f, 4);
  auto r = f.query(Vec3(1.5, 0.5, 0.5), Vec3::UnitX(), f.emitter());
  CHECK(r.sigma == 0.0);
  CHECK((r.emission.abs() == 0.0).all());
}

TEST_CASE("default initialization: sigma 1e-2, emission zero") {
  VoxelGridField f = make_grid(3, 1, 16);
  auto r = f.query(Vec3(0.37, 0.81, 0.2), Vec3(0, 0, 1), f.emitter());
  CHECK(r.sigma == doctest::Approx(0.01).epsilon(1e-9));
  CHECK((r.emission.abs() == 0.0).all());
}

TEST_CASE("degree-0 fields are isotropic; degree-2 SH basis is orthonormal") {
  VoxelGridField f = make_grid(2, 0, 8);
  randomize(f, 5);
  const Vec3 p(0.3, 0.4, 0.5);
  auto a = f.query(p, Vec3::UnitX(), f.emitter());
  auto b = f.query(p, Vec3(0, 0, -1), f.emitter());
  CHECK((a.emission - b.emission).abs().maxCoeff() < 1e-14);

  // orthonormality under uniform sphere sampling: E[Y_i Y_j] = delta_ij/(4pi)
  Rng rng(11);
  Eigen::Matrix<double, 9, 9> gram = Eigen::Matrix<double, 9, 9>::Zero();
  const int trials = 400000;
  for (int t = 0; t < trials; ++t) {
    const double z = rng.uniform(-1.0, 1.0);
    const double az = rng.uniform(0.0, 2.0 * M_PI);
    const double s = std::sqrt(1.0 - z * z);
    double y[9];
    field::sh_basis(Vec3(s * std::cos(az), s * std::sin(az), z), 2, y);
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j) gram(i, j) += y[i] * y[j];
  }
  gram *= 4.0 * M_PI / trials;
  CHECK((gram - Eigen::Matrix<double, 9, 9>::Identity()).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("query gradients match finite differences") {
  VoxelGridField f = make_grid(2, 2, 8);
  randomize(f, 7);
  const Vec3 p(0.21, 0.65, 0.4);
  const Vec3 omega = Vec3(0.3, -0.5, 0.8).normalized();
  Rng rng(9);
  const Eigen::Index nb = f.n_bins();
  ArrayXcd dem(nb);
  for (Eigen::Index k = 0; k < nb; ++k) dem[k] = Complex(rng.normal(), rng.normal());
  const double dsig = rng.normal();

  auto grads = f.zero_gradients();
  f.accumulate_point_gradient(p, omega, dsig, dem, grads);
  const ArrayXd gflat = VoxelGridField::flatten_gradients(grads);

  // objective: dsig * sigma + sum Re(conj(dem) emission)
  auto value = [&](const VoxelGridField& ff) {
    auto r = ff.query(p, omega, ff.emitter());
    double v = dsig * r.sigma;
    for (Eigen::Index k = 0; k < nb; ++k) v += std::real(std::conj(dem[k]) * r.emission[k]);
    return v;
  };

  const ArrayXd params = f.flatten_params();
  Rng pick(13);
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index i =
        static_cast<Eigen::Index>(pick.uniform() * static_cast<double>(params.size()));
    const double h = 1e-5;
    VoxelGridField fp = f, fm = f;
    ArrayXd pp = params, pm = params;
    pp[i] += h;
    pm[i] -= h;
    fp.unflatten_params(pp);
    fm.unflatten_params(pm);
    const double fd = (value(fp) - value(fm)) / (2.0 * h);
    CHECK(std::abs(fd - gflat[i]) < 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("batch queries equal a query loop") {
  VoxelGridField f = make_grid(3, 1, 16);
  randomize(f, 19);
  Rng rng(2);
  std::vector<Vec3> pts, dirs;
  for (int i = 0; i < 50; ++i) {
    pts.emplace_back(rng.uniform(-0.2, 1.2), rng.uniform(0, 1), rng.uniform(0, 1));
    dirs.push_back(Vec3(rng.normal(), rng.normal(), rng.normal()).normalized());
  }
  const auto batch = f.query_batch(pts, dirs, f.emitter());
  for (size_t i = 0; i < pts.size(); ++i) {
    const auto one = f.query(pts[i], dirs[i], f.emitter());
    CHECK(one.sigma == batch[i].sigma);
    CHECK((one.emission == batch[i].emission).all());
  }
}

TEST_CASE("checkpoint round trip preserves every parameter") {
  VoxelGridField f(Eigen::AlignedBox3d(Vec3(-1, 0, 2), Vec3(3, 5, 4)),
                   Eigen::Vector3i(4, 3, 2), 1, 32, 24000.0,
                   Pose(Vec3(1, 2, 3), Vec3(0, 1, 0)));
  randomize(f, 23);
  f.save("test_field.ckpt");
  const VoxelGridField g = VoxelGridField::load("test_field.ckpt");
  CHECK(g.resolution() == f.resolution());
  CHECK(g.sh_degree() == 1);
  CHECK(g.n_fft() == 32);
  CHECK(g.sample_rate() == 24000.0);
  CHECK((g.bounds().min() - f.bounds().min()).norm() == 0.0);
  CHECK((g.emitter().position - f.emitter().position).norm() == 0.0);
  CHECK((g.density_logits() == f.density_logits()).all());
  CHECK((g.emission_coeffs() == f.emission_coeffs()).all());
  std::remove("test_field.ckpt");
  CHECK_THROWS(VoxelGridField::load("does_not_exist.ckpt"));
}

TEST_CASE("analytic point source: unit magnitude, propagation phase, opaque shell") {
  const Vec3 src(1.0, 2.0, 3.0);
  auto f = field::make_analytic_point_source(src, 0.05, 343.0, 16000.0, 64);
  const Pose em(src, Vec3::UnitX());
  auto r = f->query(Vec3(3.0, 2.0, 3.0), Vec3::UnitX(), em);  // 2 m away
  CHECK(r.sigma > 100.0);
  CHECK((r.emission.abs() - 1.0).abs().maxCoeff() < 1e-12);
  // phase slope: exp(-j 2 pi f d / v)
  const double tau = 2.0 / 343.0;
  for (int k = 0; k < 33; ++k) {
    const double expect = -2.0 * M_PI * (k * 16000.0 / 64.0) * tau;
    CHECK(std::abs(r.emission[k] - Complex(std::cos(expect), std::sin(expect))) < 1e-12);
  }
  // inside the standoff the medium is transparent
  auto inner = f->query(src + Vec3(0.01, 0, 0), Vec3::UnitX(), em);
  CHECK(inner.sigma == 0.0);
}

TEST_CASE("inv_softplus helper sanity") { CHECK(softplus(inv_softplus(0.01)) == doctest::Approx(0.01)); }
