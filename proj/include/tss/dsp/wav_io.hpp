#pragma once

#include <filesystem>

#include "tss/dsp/waveform.hpp"

namespace tss::dsp {

enum class SampleFormat { kPcm16, kFloat32 };

// Reads mono RIFF/WAVE, PCM16 or IEEE float32. No resampling.
Waveform read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const Waveform& wave,
               SampleFormat format = SampleFormat::kFloat32);

}  // namespace tss::dsp
