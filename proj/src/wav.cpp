#include "ssondo/wav.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "ssondo/error.hpp"

namespace ssondo {
namespace {

std::uint32_t u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
std::uint16_t u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | p[1] << 8); }

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

WaveClip read_wav(const std::filesystem::path& path, double expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
    throw DataError(name + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const std::uint32_t chunk_len = u32(p + off + 4);
    const unsigned char* body = p + off + 8;
    const std::size_t avail = bytes.size() - off - 8;
    if (std::memcmp(p + off, "fmt ", 4) == 0) {
      if (chunk_len < 16 || avail < 16) throw DataError(name + ": truncated fmt chunk");
      format = u16(body);
      channels = u16(body + 2);
      rate = u32(body + 4);
      bits = u16(body + 14);
      if (format == kFormatExtensible && chunk_len >= 26 && avail >= 26) format = u16(body + 24);
    } else if (std::memcmp(p + off, "data", 4) == 0) {
      data = body;
      data_len = std::min<std::size_t>(chunk_len, avail);
    }
    off += 8 + chunk_len + (chunk_len & 1);
  }
  if (format == 0) throw DataError(name + ": missing fmt chunk");
  if (data == nullptr) throw DataError(name + ": missing data chunk");
  if (channels != 1) throw DataError(name + ": expected mono audio, got " + std::to_string(channels) + " channels");
  if (static_cast<double>(rate) != expected_rate) {
    throw DataError(name + ": sample rate " + std::to_string(rate) + " Hz, expected " +
                    std::to_string(static_cast<long>(expected_rate)) + " Hz (resample externally)");
  }

  WaveClip clip;
  clip.sample_rate = rate;
  if (format == kFormatPcm && bits == 16) {
    clip.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
      clip.samples[i] = static_cast<std::int16_t>(u16(data + 2 * i)) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    clip.samples.resize(data_len / 4);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
      clip.samples[i] = std::bit_cast<float>(u32(data + 4 * i));
      if (!std::isfinite(clip.samples[i])) throw DataError(name + ": non-finite sample");
    }
  } else {
    throw DataError(name + ": unsupported encoding (need PCM 16-bit or float 32-bit)");
  }
  return clip;
}

void write_wav_pcm16(const std::filesystem::path& path, const WaveClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  const auto rate = static_cast<std::uint32_t>(clip.sample_rate);
  std::string out = "RIFF";
  put32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, rate);
  put32(out, rate * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, 2 * n);
  for (double s : clip.samples) {
    const double clamped = std::max(-1.0, std::min(1.0, s));
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clamped * 32767.0))));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace ssondo
