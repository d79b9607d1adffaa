#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "fadein/error.hpp"
#include "fadein/types.hpp"

namespace fadein::io {

enum class WavEncoding { kFloat32, kPcm16 };

namespace detail {

inline std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

inline bool tag_is(const std::uint8_t* p, const char* tag) { return std::memcmp(p, tag, 4) == 0; }

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace detail

/// Encodes a mono RIR as a WAV byte stream.
inline std::vector<std::uint8_t> encode_wav(const Rir& rir,
                                            WavEncoding enc = WavEncoding::kFloat32) {
  const std::uint16_t bits = enc == WavEncoding::kFloat32 ? 32 : 16;
  const std::uint16_t block = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(rir.size() * block);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  detail::put_tag(out, "RIFF");
  detail::put_u32(out, 36 + data_bytes);
  detail::put_tag(out, "WAVE");
  detail::put_tag(out, "fmt ");
  detail::put_u32(out, 16);
  detail::put_u16(out, enc == WavEncoding::kFloat32 ? detail::kFormatFloat : detail::kFormatPcm);
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(rir.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(rir.sample_rate) * block);
  detail::put_u16(out, block);
  detail::put_u16(out, bits);
  detail::put_tag(out, "data");
  detail::put_u32(out, data_bytes);
  for (double v : rir.samples) {
    if (enc == WavEncoding::kFloat32) {
      const auto f = static_cast<float>(v);
      std::uint32_t u = 0;
      std::memcpy(&u, &f, 4);
      detail::put_u32(out, u);
    } else {
      // Symmetric 1/32768 scale so that decode followed by encode is exact.
      const double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
    }
  }
  return out;
}

/// Decodes a mono 16-bit PCM or 32-bit float WAV (plain or extensible format).
inline Rir decode_wav(const std::vector<std::uint8_t>& bytes, const std::string& name = "") {
  const auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorCode::kIngestion, (name.empty() ? "" : name + ": ") + why);
  };
  if (bytes.size() < 12 || !detail::tag_is(bytes.data(), "RIFF") ||
      !detail::tag_is(bytes.data() + 8, "WAVE")) {
    throw fail("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::size_t len = detail::read_u32(chunk + 4);
    if (len > bytes.size() - pos - 8) throw fail("truncated chunk");
    const std::uint8_t* body = chunk + 8;
    if (detail::tag_is(chunk, "fmt ")) {
      if (len < 16) throw fail("short fmt chunk");
      format = detail::read_u16(body);
      channels = detail::read_u16(body + 2);
      rate = detail::read_u32(body + 4);
      bits = detail::read_u16(body + 14);
      if (format == detail::kFormatExtensible) {
        if (len < 40) throw fail("short extensible fmt chunk");
        format = detail::read_u16(body + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (detail::tag_is(chunk, "data")) {
      data = body;
      data_len = len;
    }
    pos += 8 + len + (len & 1);
  }
  if (!have_fmt || data == nullptr) throw fail("missing fmt or data chunk");
  if (channels != 1) throw fail("expected mono, found " + std::to_string(channels) + " channels");
  const bool is_float = format == detail::kFormatFloat && bits == 32;
  const bool is_pcm = format == detail::kFormatPcm && bits == 16;
  if (!is_float && !is_pcm) {
    throw fail("unsupported encoding (format " + std::to_string(format) + ", " +
               std::to_string(bits) + " bits)");
  }

  Rir rir;
  rir.sample_rate = static_cast<int>(rate);
  rir.position_id = name;
  const std::size_t block = bits / 8;
  rir.samples.resize(data_len / block);
  for (std::size_t i = 0; i < rir.samples.size(); ++i) {
    const std::uint8_t* p = data + i * block;
    if (is_float) {
      const std::uint32_t u = detail::read_u32(p);
      float f = 0.0f;
      std::memcpy(&f, &u, 4);
      rir.samples[i] = f;
    } else {
      rir.samples[i] = static_cast<std::int16_t>(detail::read_u16(p)) / 32768.0;
    }
  }
  return rir;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_wav(const std::filesystem::path& path, const Rir& rir,
                      WavEncoding enc = WavEncoding::kFloat32) {
  write_bytes(path, encode_wav(rir, enc));
}

/// Reads a WAV file; the position id is the file stem.
inline Rir read_wav(const std::filesystem::path& path) {
  return decode_wav(read_bytes(path), path.stem().string());
}

}  // namespace fadein::io
