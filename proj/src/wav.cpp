#include "irtk/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace irtk::io {

namespace {

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u16(std::ostream& os, uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); }

uint32_t get_u32(std::istream& is) {
  uint32_t v;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint16_t get_u16(std::istream& is) {
  uint16_t v;
  is.read(reinterpret_cast<char*>(&v), 2);
  return v;
}

std::vector<float> interleave(const Eigen::ArrayXXd& samples) {
  std::vector<float> data(static_cast<size_t>(samples.size()));
  const Eigen::Index frames = samples.rows(), ch = samples.cols();
  for (Eigen::Index i = 0; i < frames; ++i)
    for (Eigen::Index c = 0; c < ch; ++c)
      data[static_cast<size_t>(i * ch + c)] = static_cast<float>(samples(i, c));
  return data;
}

Eigen::ArrayXXd deinterleave(const std::vector<float>& data, Eigen::Index ch) {
  const Eigen::Index frames = static_cast<Eigen::Index>(data.size()) / ch;
  Eigen::ArrayXXd samples(frames, ch);
  for (Eigen::Index i = 0; i < frames; ++i)
    for (Eigen::Index c = 0; c < ch; ++c)
      samples(i, c) = data[static_cast<size_t>(i * ch + c)];
  return samples;
}

}  // namespace

void write_wav(const std::string& path, const AudioData& audio) {
  if (audio.samples.cols() < 1 || audio.samples.cols() > 2)
    throw std::invalid_argument("write_wav: 1 or 2 channels only");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_wav: cannot open " + path);
  const auto data = interleave(audio.samples);
  const uint32_t data_bytes = static_cast<uint32_t>(data.size() * 4);
  const uint16_t channels = static_cast<uint16_t>(audio.samples.cols());
  const uint32_t sr = static_cast<uint32_t>(audio.sample_rate);

  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 3);  // IEEE float
  put_u16(os, channels);
  put_u32(os, sr);
  put_u32(os, sr * channels * 4);
  put_u16(os, static_cast<uint16_t>(channels * 4));
  put_u16(os, 32);
  os.write("data", 4);
  put_u32(os, data_bytes);
  os.write(reinterpret_cast<const char*>(data.data()), data_bytes);
}

AudioData read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_wav: cannot open " + path);
  char tag[5] = {0};
  is.read(tag, 4);
  if (std::strncmp(tag, "RIFF", 4) != 0) throw std::runtime_error("read_wav: not a RIFF file");
  get_u32(is);
  is.read(tag, 4);
  if (std::strncmp(tag, "WAVE", 4) != 0) throw std::runtime_error("read_wav: not a WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sr = 0;
  std::vector<float> data;
  while (is.read(tag, 4)) {
    uint32_t size = get_u32(is);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      format = get_u16(is);
      channels = get_u16(is);
      sr = get_u32(is);
      get_u32(is);
      get_u16(is);
      bits = get_u16(is);
      is.seekg(size - 16, std::ios::cur);
    } else if (std::strncmp(tag, "data", 4) == 0) {
      if (format != 3 || bits != 32)
        throw std::runtime_error("read_wav: only 32-bit float WAV supported");
      data.resize(size / 4);
      is.read(reinterpret_cast<char*>(data.data()), size);
      break;
    } else {
      is.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (channels < 1 || data.empty()) throw std::runtime_error("read_wav: no audio data in " + path);
  return {deinterleave(data, channels), static_cast<double>(sr)};
}

void write_f32(const std::string& path, const AudioData& audio) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_f32: cannot open " + path);
  const auto data = interleave(audio.samples);
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size() * 4));
  nlohmann::json side = {{"sample_rate", audio.sample_rate},
                         {"channels", audio.samples.cols()}};
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

AudioData read_f32(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) throw std::runtime_error("read_f32: missing sidecar " + path + ".json");
  nlohmann::json side = nlohmann::json::parse(js);
  const double sr = side.at("sample_rate").get<double>();
  const Eigen::Index ch = side.at("channels").get<Eigen::Index>();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_f32: cannot open " + path);
  is.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(is.tellg());
  is.seekg(0);
  std::vector<float> data(bytes / 4);
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  return {deinterleave(data, ch), sr};
}

AudioData read_audio(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".f32") return read_f32(path);
  return read_wav(path);
}

void write_audio(const std::string& path, const AudioData& audio) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".f32")
    write_f32(path, audio);
  else
    write_wav(path, audio);
}

SampledIR to_mono_ir(const AudioData& audio) {
  return SampledIR(audio.samples.col(0), audio.sample_rate);
}

AudioData from_ir(const SampledIR& ir) {
  Eigen::ArrayXXd s(ir.samples.size(), 1);
  s.col(0) = ir.samples;
  return {s, ir.sample_rate};
}

}  // namespace irtk::io
