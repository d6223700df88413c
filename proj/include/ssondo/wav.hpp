#pragma once

#include <filesystem>

#include "ssondo/features.hpp"

namespace ssondo {

/// Reads mono PCM16 or IEEE float32 RIFF/WAVE. Rejects anything else, including
/// sample rates other than `expected_rate` (no resampling is done here).
WaveClip read_wav(const std::filesystem::path& path, double expected_rate = 32000.0);

/// Writes mono PCM16; used by tests and demo tooling.
void write_wav_pcm16(const std::filesystem::path& path, const WaveClip& clip);

}  // namespace ssondo
