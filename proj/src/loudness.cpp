#include "irtk/loudness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace irtk::loudness {

LoudnessMap compute_loudness_map(const field::Field& f, const Pose& emitter,
                                 const SliceSpec& slice, const renderer::RenderConfig& cfg) {
  if (slice.nx < 1 || slice.ny < 1 || !(slice.spacing > 0.0))
    throw std::invalid_argument("compute_loudness_map: bad slice spec");
  LoudnessMap map;
  map.slice = slice;
  map.db.resize(slice.ny, slice.nx);
  const renderer::DirectionSet dirs = renderer::directions_for(cfg);
  const renderer::OmniGain gain;
  for (int iy = 0; iy < slice.ny; ++iy) {
    for (int ix = 0; ix < slice.nx; ++ix) {
      const Vec3 pos = slice.origin + Vec3(ix * slice.spacing, iy * slice.spacing, 0.0) +
                       Vec3(0.0, 0.0, slice.height);
      const auto res = renderer::render_ir(f, Pose(pos, Vec3::UnitX()), gain, emitter, cfg, dirs);
      const double energy = res.ir.samples.square().sum();
      map.db(iy, ix) = energy > 0.0 ? 10.0 * std::log10(energy) : LoudnessMap::kSilent;
    }
  }
  return map;
}

void write_loudness_map(const std::string& stem, const LoudnessMap& map) {
  // CSV, row per y index
  {
    std::ofstream os(stem + ".csv");
    if (!os) throw std::runtime_error("cannot write " + stem + ".csv");
    os.precision(12);
    for (Eigen::Index y = 0; y < map.db.rows(); ++y) {
      for (Eigen::Index x = 0; x < map.db.cols(); ++x)
        os << map.db(y, x) << (x + 1 < map.db.cols() ? "," : "");
      os << '\n';
    }
  }
  const double lo = map.db.minCoeff();
  const double hi = map.db.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  // 8-bit PGM, min-max normalized
  {
    std::ofstream os(stem + ".pgm", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + stem + ".pgm");
    os << "P5\n" << map.db.cols() << ' ' << map.db.rows() << "\n255\n";
    for (Eigen::Index y = 0; y < map.db.rows(); ++y)
      for (Eigen::Index x = 0; x < map.db.cols(); ++x) {
        const double t = (map.db(y, x) - lo) / span;
        os.put(static_cast<char>(std::lround(255.0 * std::clamp(t, 0.0, 1.0))));
      }
  }
  nlohmann::json sidecar = {
      {"units", "dB (10 log10 of summed squared IR samples)"},
      {"origin", {map.slice.origin.x(), map.slice.origin.y(), map.slice.origin.z()}},
      {"nx", map.slice.nx},
      {"ny", map.slice.ny},
      {"spacing_m", map.slice.spacing},
      {"slice_height_m", map.slice.height},
      {"pgm_range_db", {lo, hi}},
      {"silent_sentinel_db", LoudnessMap::kSilent}};
  std::ofstream os(stem + ".json");
  if (!os) throw std::runtime_error("cannot write " + stem + ".json");
  os << sidecar.dump(2) << '\n';
}

LoudnessMap read_loudness_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged CSV: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty CSV: " + path);
  LoudnessMap map;
  map.slice.nx = static_cast<int>(rows.front().size());
  map.slice.ny = static_cast<int>(rows.size());
  map.db.resize(map.slice.ny, map.slice.nx);
  for (size_t y = 0; y < rows.size(); ++y)
    for (size_t x = 0; x < rows[y].size(); ++x)
      map.db(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = rows[y][x];
  return map;
}

}  // namespace irtk::loudness
