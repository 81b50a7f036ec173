#include "irtk/scene_io.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace irtk::geometry {

using nlohmann::json;

Scene parse_scene(const std::string& json_text) {
  json j = json::parse(json_text);

  std::vector<double> bands = j.value("octave_bands", std::vector<double>{125, 250, 500, 1000, 2000, 4000});
  const double v = j.value("speed_of_sound", 343.0);

  std::vector<Material> materials;
  std::map<std::string, int> mat_index;
  for (auto& [name, body] : j.at("materials").items()) {
    Material m;
    m.name = name;
    auto refl = body.at("reflection").get<std::vector<double>>();
    auto scat = body.at("scattering").get<std::vector<double>>();
    m.reflection = Eigen::Map<ArrayXd>(refl.data(), static_cast<Eigen::Index>(refl.size()));
    m.scattering = Eigen::Map<ArrayXd>(scat.data(), static_cast<Eigen::Index>(scat.size()));
    mat_index[name] = static_cast<int>(materials.size());
    materials.push_back(std::move(m));
  }

  std::vector<Surface> surfaces;
  for (const auto& js : j.at("surfaces")) {
    Surface s;
    const auto mat_name = js.at("material").get<std::string>();
    auto it = mat_index.find(mat_name);
    if (it == mat_index.end())
      throw std::invalid_argument("scene: unknown material reference '" + mat_name + "'");
    s.material = it->second;
    for (const auto& jv : js.at("vertices")) {
      auto vtx = jv.get<std::vector<double>>();
      if (vtx.size() != 3) throw std::invalid_argument("scene: vertex must have 3 coordinates");
      s.vertices.emplace_back(vtx[0], vtx[1], vtx[2]);
    }
    surfaces.push_back(std::move(s));
  }

  return Scene(std::move(surfaces), std::move(materials), std::move(bands), v);
}

Scene load_scene(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_scene: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_scene(text);
}

void save_scene(const std::string& path, const Scene& scene) {
  json j;
  j["speed_of_sound"] = scene.speed_of_sound;
  j["octave_bands"] = scene.octave_bands;
  json mats = json::object();
  for (const auto& m : scene.materials) {
    mats[m.name] = {
        {"reflection", std::vector<double>(m.reflection.data(), m.reflection.data() + m.reflection.size())},
        {"scattering", std::vector<double>(m.scattering.data(), m.scattering.data() + m.scattering.size())}};
  }
  j["materials"] = mats;
  json surfs = json::array();
  for (const auto& s : scene.surfaces) {
    json verts = json::array();
    for (const auto& vtx : s.vertices) verts.push_back({vtx.x(), vtx.y(), vtx.z()});
    surfs.push_back({{"material", scene.materials[static_cast<size_t>(s.material)].name},
                     {"vertices", verts}});
  }
  j["surfaces"] = surfs;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_scene: cannot open " + path);
  os << j.dump(2) << "\n";
}

}  // namespace irtk::geometry
