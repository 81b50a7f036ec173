#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <set>

#include "irtk/dataset.hpp"
#include "irtk/fit.hpp"
#include "irtk/loudness.hpp"
#include "irtk/rng.hpp"
#include "irtk/wav.hpp"

using namespace irtk;
using namespace irtk::fit;

namespace {

Dataset toy_dataset(int n, double sr = 16000.0, int len = 32) {
  Dataset ds;
  ds.sample_rate = sr;
  ds.ir_len = len;
  Rng rng(17);
  for (int i = 0; i < n; ++i) {
    ArrayXd samples(len);
    for (int k = 0; k < len; ++k) samples[k] = rng.normal();
    ds.items.push_back({Pose(Vec3(0.1 * i, 0, 0), Vec3::UnitX()),
                        Pose(Vec3(0, 0, 0), Vec3::UnitX()), SampledIR(samples, sr)});
  }
  return ds;
}

FitConfig small_fit_cfg() {
  FitConfig cfg;
  cfg.epochs = 6;
  cfg.lr_start = 5e-2;
  cfg.lr_end = 1e-2;
  cfg.batch_size = 2;
  cfg.split_ratio = 0.75;
  cfg.seed = 3;
  cfg.threads = 1;
  cfg.render.n_theta = 4;
  cfg.render.n_phi = 2;
  cfg.render.n_r = 8;
  cfg.render.u_near = 0.01;
  cfg.render.u_far = 0.35;
  cfg.render.n_fft = 32;
  cfg.render.ir_len = 32;
  cfg.render.sample_rate = 16000.0;
  cfg.render.threads = 1;
  cfg.stft = signals::StftConfig({{32, 8, 16}});
  return cfg;
}

field::VoxelGridField make_student(uint64_t seed) {
  field::VoxelGridField f(Eigen::AlignedBox3d(Vec3(-0.5, -0.5, -0.5), Vec3(0.6, 0.5, 0.5)),
                          Eigen::Vector3i::Constant(2), 0, 32, 16000.0,
                          Pose(Vec3::Zero(), Vec3::UnitX()));
  if (seed != 0) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < f.density_logits().size(); ++i)
      f.density_logits()[i] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < f.emission_coeffs().size(); ++i)
      f.emission_coeffs().data()[i] = 0.2 * Complex(rng.normal(), rng.normal());
  }
  return f;
}

}  // namespace

TEST_CASE("dataset split: deterministic, disjoint, covering") {
  const Dataset ds = toy_dataset(10);
  const auto [tr1, te1] = split_dataset(ds, 0.7, 42);
  const auto [tr2, te2] = split_dataset(ds, 0.7, 42);
  CHECK(tr1.items.size() == 7);
  CHECK(te1.items.size() == 3);
  REQUIRE(tr2.items.size() == tr1.items.size());
  for (size_t i = 0; i < tr1.items.size(); ++i)
    CHECK(tr1.items[i].listener.position == tr2.items[i].listener.position);

  std::set<double> seen;
  for (const auto& it : tr1.items) seen.insert(it.listener.position.x());
  for (const auto& it : te1.items) {
    CHECK(seen.count(it.listener.position.x()) == 0);
    seen.insert(it.listener.position.x());
  }
  CHECK(seen.size() == 10);

  // extreme ratios still leave both sides non-empty
  const auto [tr3, te3] = split_dataset(ds, 0.0001, 1);
  CHECK(tr3.items.size() >= 1);
  CHECK(te3.items.size() >= 1);
  const auto [tr4, te4] = split_dataset(ds, 0.9999, 1);
  CHECK(tr4.items.size() <= 9);
  CHECK(te4.items.size() >= 1);

  const auto [tr5, te5] = split_dataset(ds, 0.7, 43);
  bool same = tr5.items.size() == tr1.items.size();
  if (same) {
    same = true;
    for (size_t i = 0; i < tr1.items.size(); ++i)
      if (tr1.items[i].listener.position != tr5.items[i].listener.position) same = false;
  }
  CHECK(!same);
}

TEST_CASE("adam first step moves by ~lr in the sign direction") {
  ArrayXd p(3);
  p << 1.0, -2.0, 0.5;
  ArrayXd g(3);
  g << 0.3, -4.0, 1e-12;  // last one is tiny: update damped by eps
  const ArrayXd p0 = p;
  AdamState st(3);
  AdamHyper hp;
  CHECK(adam_step(p, g, st, 0.01, hp));
  CHECK(st.step == 1);
  CHECK(p[0] == doctest::Approx(p0[0] - 0.01).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(p0[1] + 0.01).epsilon(1e-6));
  CHECK(std::abs(p[2] - p0[2]) < 0.01);  // eps keeps the tiny-grad step small

  // zero gradient: moments decay but parameters stay put
  ArrayXd z = ArrayXd::Zero(3);
  ArrayXd q = p;
  AdamState st2(3);
  CHECK(adam_step(q, z, st2, 0.01, hp));
  CHECK((q == p).all());
}

TEST_CASE("non-finite gradients are rejected but advance the schedule") {
  ArrayXd p = ArrayXd::Constant(2, 1.0);
  ArrayXd g(2);
  g << 1.0, std::numeric_limits<double>::quiet_NaN();
  AdamState st(2);
  CHECK(!adam_step(p, g, st, 0.1, AdamHyper{}));
  CHECK(st.step == 1);
  CHECK((p == 1.0).all());
  CHECK((st.m == 0.0).all());
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(cosine_lr(0, 100, 1e-3, 1e-4) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(cosine_lr(100, 100, 1e-3, 1e-4) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(cosine_lr(50, 100, 1e-3, 1e-4) == doctest::Approx(5.5e-4).epsilon(1e-12));
  CHECK(cosine_lr(25, 100, 1e-3, 1e-4) > cosine_lr(75, 100, 1e-3, 1e-4));
}

TEST_CASE("a field that reproduces the data is a fixed point of the loss") {
  const FitConfig cfg = small_fit_cfg();
  auto teacher = make_student(99);
  renderer::OmniGain omni;
  const auto dirs = renderer::directions_for(cfg.render);

  Dataset ds;
  ds.sample_rate = cfg.render.sample_rate;
  ds.ir_len = cfg.render.ir_len;
  for (int i = 0; i < 3; ++i) {
    const Pose listener(Vec3(-0.2 + 0.2 * i, 0.1, 0.0), Vec3::UnitX());
    const auto r = renderer::render_ir(teacher, listener, omni, teacher.emitter(), cfg.render, dirs);
    ds.items.push_back({listener, teacher.emitter(), r.ir});
  }
  for (const auto& item : ds.items) {
    const auto b = item_loss(item, teacher, cfg, dirs);
    CHECK(b.total < 1e-10);
  }
}

TEST_CASE("training a student on teacher renders reduces the loss deterministically") {
  FitConfig cfg = small_fit_cfg();
  auto teacher = make_student(99);
  renderer::OmniGain omni;
  const auto dirs = renderer::directions_for(cfg.render);

  Dataset ds;
  ds.sample_rate = cfg.render.sample_rate;
  ds.ir_len = cfg.render.ir_len;
  for (int i = 0; i < 8; ++i) {
    const Pose listener(Vec3(-0.35 + 0.1 * i, 0.05 * (i % 3), 0.0), Vec3::UnitX());
    const auto r = renderer::render_ir(teacher, listener, omni, teacher.emitter(), cfg.render, dirs);
    ds.items.push_back({listener, teacher.emitter(), r.ir});
  }

  auto student = make_student(0);
  const TrainResult res = train(ds, student, cfg);
  CHECK(!res.aborted);
  REQUIRE(static_cast<int>(res.log.size()) == cfg.epochs);
  CHECK(res.log.back().train_loss.total < res.log.front().train_loss.total);
  for (const auto& rec : res.log) CHECK(std::isfinite(rec.test_phase));

  // bitwise repeatability, independent of thread count
  auto student2 = make_student(0);
  train(ds, student2, cfg);
  CHECK((student.flatten_params() == student2.flatten_params()).all());

  auto student3 = make_student(0);
  FitConfig cfg4 = cfg;
  cfg4.threads = 4;
  train(ds, student3, cfg4);
  CHECK((student.flatten_params() == student3.flatten_params()).all());
}

TEST_CASE("listener lattice expansion") {
  dataset::ListenerSpec spec;
  spec.nx = 3;
  spec.ny = 2;
  spec.origin = Vec3(1.0, 2.0, 0.0);
  spec.spacing = 0.5;
  spec.height = 1.4;
  const auto poses = dataset::expand_listeners(spec);
  REQUIRE(poses.size() == 6);
  CHECK((poses[0].position - Vec3(1.0, 2.0, 1.4)).norm() == 0.0);
  bool found = false;
  for (const auto& p : poses)
    if ((p.position - Vec3(2.0, 2.5, 1.4)).norm() < 1e-12) found = true;
  CHECK(found);

  dataset::ListenerSpec explicit_spec;
  explicit_spec.poses = {Pose(Vec3(1, 1, 1), Vec3::UnitY())};
  const auto only = dataset::expand_listeners(explicit_spec);
  REQUIRE(only.size() == 1);
  CHECK(only[0].orientation == Vec3::UnitY());
}

TEST_CASE("manifest and dataset round trip through disk") {
  namespace ds = irtk::dataset;
  REQUIRE(std::system("rm -rf test_manifest_dir && mkdir -p test_manifest_dir") == 0);
  ds::Manifest m;
  m.sample_rate = 16000.0;
  m.ir_len = 64;
  m.emitter = Pose(Vec3(1, 2, 3), Vec3::UnitZ());
  Rng rng(4);
  for (int i = 0; i < 3; ++i) {
    ArrayXd samples(64);
    for (int k = 0; k < 64; ++k) samples[k] = rng.normal();
    char name[32];
    std::snprintf(name, sizeof(name), "ir_%05d.wav", i);
    io::write_wav("test_manifest_dir/" + std::string(name),
                  io::from_ir(SampledIR(samples, 16000.0)));
    m.items.push_back({Pose(Vec3(i, 0, 1.5), Vec3::UnitX()), name});
  }
  ds::save_manifest("test_manifest_dir", m);
  const ds::Manifest back = ds::load_manifest("test_manifest_dir");
  CHECK(back.sample_rate == 16000.0);
  CHECK(back.ir_len == 64);
  CHECK((back.emitter.position - m.emitter.position).norm() == 0.0);
  REQUIRE(back.items.size() == 3);
  CHECK(back.items[1].file == "ir_00001.wav");

  const Dataset loaded = ds::load_dataset("test_manifest_dir");
  CHECK(loaded.items.size() == 3);
  CHECK(loaded.ir_len == 64);
  CHECK(loaded.items[2].listener.position.x() == doctest::Approx(2.0));
  CHECK(std::system("rm -rf test_manifest_dir") == 0);
}

TEST_CASE("loudness map: analytic source falls off with distance") {
  renderer::RenderConfig rc;
  rc.n_theta = 16;
  rc.n_phi = 8;
  rc.n_r = 32;
  rc.u_near = 0.02;
  rc.u_far = 1.0;
  rc.n_fft = 512;
  rc.ir_len = 512;
  rc.sample_rate = 16000.0;
  rc.threads = 1;
  const Vec3 src(0, 0, 1.5);
  auto f = field::make_analytic_point_source(src, 0.01, rc.speed_of_sound, rc.sample_rate,
                                             rc.n_fft);
  loudness::SliceSpec slice;
  slice.origin = Vec3(1.0, 0.0, 0.0);
  slice.nx = 3;
  slice.ny = 1;
  slice.spacing = 1.0;  // cells at x = 1, 2, 3
  slice.height = 1.5;
  const auto map = loudness::compute_loudness_map(*f, Pose(src, Vec3::UnitX()), slice, rc);
  REQUIRE(map.db.rows() == 1);
  REQUIRE(map.db.cols() == 3);
  CHECK(map.db(0, 0) > map.db(0, 1));
  CHECK(map.db(0, 1) > map.db(0, 2));

  loudness::write_loudness_map("test_loudness", map);
  const auto back = loudness::read_loudness_csv("test_loudness.csv");
  CHECK((back.db - map.db).abs().maxCoeff() < 1e-9);
  std::remove("test_loudness.csv");
  std::remove("test_loudness.pgm");
  std::remove("test_loudness.json");
}
