#pragma once

#include <string>

#include "irtk/types.hpp"

namespace irtk::io {

/// Multichannel audio buffer; one column per channel.
struct AudioData {
  Eigen::ArrayXXd samples;  // frames x channels
  double sample_rate = 0.0;
};

/// 32-bit float little-endian WAV, mono or stereo.
void write_wav(const std::string& path, const AudioData& audio);
AudioData read_wav(const std::string& path);

/// Raw little-endian f32 with a JSON sidecar ({"sample_rate":..,"channels":..}).
void write_f32(const std::string& path, const AudioData& audio);
AudioData read_f32(const std::string& path);

/// Dispatches on extension: .wav or .f32.
AudioData read_audio(const std::string& path);
void write_audio(const std::string& path, const AudioData& audio);

SampledIR to_mono_ir(const AudioData& audio);
AudioData from_ir(const SampledIR& ir);

}  // namespace irtk::io
