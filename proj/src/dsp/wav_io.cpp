#include "tss/dsp/wav_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "tss/errors.hpp"

namespace tss::dsp {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_wav: cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0)
    throw FormatError("read_wav: not a RIFF/WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* payload = nullptr;
  std::size_t payload_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const unsigned char* chunk = data + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > n && std::memcmp(chunk, "data", 4) != 0)
      throw FormatError("read_wav: truncated chunk in " + path.string());
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("read_wav: short fmt chunk");
      format = read_u16(data + body);
      channels = read_u16(data + body + 2);
      rate = read_u32(data + body + 4);
      bits = read_u16(data + body + 14);
      if (format == kFormatExtensible && size >= 26) format = read_u16(data + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      payload = data + body;
      payload_size = std::min<std::size_t>(size, n - body);
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt || payload == nullptr) throw FormatError("read_wav: missing fmt or data chunk");
  if (channels != 1)
    throw FormatError("read_wav: expected mono, got " + std::to_string(channels) + " channels");
  if (rate == 0) throw FormatError("read_wav: zero sample rate");

  std::vector<double> samples;
  if (format == kFormatPcm && bits == 16) {
    samples.resize(payload_size / 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto v = static_cast<std::int16_t>(read_u16(payload + 2 * i));
      samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    samples.resize(payload_size / 4);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const float f = std::bit_cast<float>(read_u32(payload + 4 * i));
      samples[i] = static_cast<double>(f);
    }
  } else {
    throw FormatError("read_wav: unsupported format " + std::to_string(format) + " with " +
                      std::to_string(bits) + " bits");
  }
  try {
    return Waveform(std::move(samples), static_cast<int>(rate));
  } catch (const DomainError& e) {
    throw FormatError(std::string("read_wav: ") + e.what());
  }
}

void write_wav(const std::filesystem::path& path, const Waveform& wave, SampleFormat format) {
  const bool is_float = format == SampleFormat::kFloat32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint16_t block = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(wave.size() * block);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, is_float ? kFormatFloat : kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate()) * block);
  put_u16(out, block);
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_bytes);
  for (double v : wave.samples()) {
    if (is_float) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      const double scaled = std::round(std::clamp(v, -1.0, 1.0) * 32768.0);
      const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      put_u16(out, static_cast<std::uint16_t>(q));
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("write_wav: cannot open " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("write_wav: write failed for " + path.string());
}

}  // namespace tss::dsp
