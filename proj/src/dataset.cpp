#include "irtk/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "irtk/wav.hpp"

namespace irtk::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json pose_json(const Pose& p) {
  return {{"position", {p.position.x(), p.position.y(), p.position.z()}},
          {"orientation", {p.orientation.x(), p.orientation.y(), p.orientation.z()}}};
}

Pose pose_from(const json& j) {
  const auto& p = j.at("position");
  const auto& o = j.at("orientation");
  return Pose(Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()),
              Vec3(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()));
}

}  // namespace

void save_manifest(const std::string& dir, const Manifest& m) {
  json j = {{"sample_rate", m.sample_rate},
            {"ir_len", m.ir_len},
            {"emitter", pose_json(m.emitter)},
            {"items", json::array()}};
  for (const auto& it : m.items)
    j["items"].push_back({{"listener", pose_json(it.listener)}, {"file", it.file}});
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw std::runtime_error("cannot write manifest in " + dir);
  os << j.dump(2) << '\n';
}

Manifest load_manifest(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw std::runtime_error("no manifest.json in " + dir);
  json j;
  is >> j;
  Manifest m;
  m.sample_rate = j.at("sample_rate").get<double>();
  m.ir_len = j.at("ir_len").get<int>();
  m.emitter = pose_from(j.at("emitter"));
  for (const auto& it : j.at("items")) {
    ManifestItem item;
    item.listener = pose_from(it.at("listener"));
    item.file = it.at("file").get<std::string>();
    if (!fs::exists(fs::path(dir) / item.file))
      throw std::runtime_error("manifest references missing file: " + item.file);
    m.items.push_back(std::move(item));
  }
  return m;
}

fit::Dataset load_dataset(const std::string& dir) {
  const Manifest m = load_manifest(dir);
  fit::Dataset ds;
  ds.sample_rate = m.sample_rate;
  ds.ir_len = m.ir_len;
  for (const auto& it : m.items) {
    SampledIR ir = io::to_mono_ir(io::read_audio((fs::path(dir) / it.file).string()));
    ds.items.push_back({it.listener, m.emitter, std::move(ir)});
  }
  ds.validate();
  return ds;
}

std::vector<Pose> expand_listeners(const ListenerSpec& spec) {
  if (!spec.poses.empty()) return spec.poses;
  if (spec.nx < 1 || spec.ny < 1)
    throw std::invalid_argument("expand_listeners: empty spec");
  if (!(spec.spacing > 0.0)) throw std::invalid_argument("expand_listeners: spacing must be > 0");
  std::vector<Pose> out;
  out.reserve(static_cast<size_t>(spec.nx) * spec.ny);
  for (int iy = 0; iy < spec.ny; ++iy)
    for (int ix = 0; ix < spec.nx; ++ix)
      out.emplace_back(spec.origin + Vec3(ix * spec.spacing, iy * spec.spacing, spec.height),
                       Vec3::UnitX());
  return out;
}

Manifest generate_dataset(const geometry::Scene& scene, const Pose& emitter,
                          const ListenerSpec& listeners, const simulator::SimConfig& sim,
                          std::uint64_t seed, const std::string& out_dir) {
  const std::vector<Pose> poses = expand_listeners(listeners);
  if (poses.empty()) throw std::invalid_argument("generate_dataset: no listener poses");
  fs::create_directories(out_dir);
  Manifest m;
  m.sample_rate = sim.sample_rate;
  m.ir_len = static_cast<int>(std::llround(sim.ir_duration * sim.sample_rate));
  m.emitter = emitter;
  for (size_t i = 0; i < poses.size(); ++i) {
    // one seed stream per pose so regeneration is order-independent
    SampledIR ir = simulator::simulate(scene, emitter, poses[i], sim, seed + i);
    char name[32];
    std::snprintf(name, sizeof(name), "ir_%05zu.wav", i);
    io::write_wav((fs::path(out_dir) / name).string(), io::from_ir(ir));
    m.items.push_back({poses[i], name});
  }
  save_manifest(out_dir, m);
  return m;
}

}  // namespace irtk::dataset
