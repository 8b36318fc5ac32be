#include "maskbeam/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace maskbeam {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 24) & 0xff);
}

void put_u16(std::vector<unsigned char>& v, std::uint16_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
}

void put_tag(std::vector<unsigned char>& v, const char* tag) {
  v.insert(v.end(), tag, tag + 4);
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw ValidationError("not a RIFF/WAVE file: " + path);

  std::uint16_t format = 0, num_channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data_ptr = nullptr;
  std::size_t data_len = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t chunk_len = read_u32(hdr + 4);
    pos += 8;
    if (pos + chunk_len > bytes.size())
      throw ValidationError("truncated RIFF chunk in " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw ValidationError("fmt chunk too short in " + path);
      format = read_u16(bytes.data() + pos);
      num_channels = read_u16(bytes.data() + pos + 2);
      sample_rate = read_u32(bytes.data() + pos + 4);
      bits = read_u16(bytes.data() + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_ptr = bytes.data() + pos;
      data_len = chunk_len;
    }
    pos += chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data_ptr == nullptr)
    throw ValidationError("missing fmt or data chunk in " + path);
  if (num_channels == 0) throw ValidationError("zero channels in " + path);
  const bool pcm16 = (format == 1 && bits == 16);
  const bool f32 = (format == 3 && bits == 32);
  if (!pcm16 && !f32)
    throw ValidationError("unsupported WAV codec (format " + std::to_string(format) +
                          ", " + std::to_string(bits) + " bit) in " + path);

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t frame_bytes = bytes_per_sample * num_channels;
  const std::size_t num_frames = data_len / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.samples.resize(num_channels, static_cast<Eigen::Index>(num_frames));
  for (std::size_t i = 0; i < num_frames; ++i) {
    for (int c = 0; c < num_channels; ++c) {
      const unsigned char* p = data_ptr + i * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        std::int16_t v = static_cast<std::int16_t>(read_u16(p));
        clip.samples(c, static_cast<Eigen::Index>(i)) = static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        clip.samples(c, static_cast<Eigen::Index>(i)) = static_cast<double>(v);
      }
    }
  }
  return clip;
}

std::int64_t write_wav(const std::string& path, const AudioClip& clip, WavCodec codec) {
  if (clip.channels() == 0 || clip.length() == 0)
    throw ValidationError("write_wav: empty clip");

  const int channels = clip.channels();
  const std::int64_t frames = clip.length();
  const bool pcm16 = codec == WavCodec::kPcm16;
  const int bytes_per_sample = pcm16 ? 2 : 4;
  const std::uint32_t data_len =
      static_cast<std::uint32_t>(frames * channels * bytes_per_sample);

  std::vector<unsigned char> out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_len);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, pcm16 ? 1 : 3);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * channels * bytes_per_sample);
  put_u16(out, static_cast<std::uint16_t>(channels * bytes_per_sample));
  put_u16(out, pcm16 ? 16 : 32);
  put_tag(out, "data");
  put_u32(out, data_len);

  std::int64_t clipped = 0;
  for (std::int64_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      double x = clip.samples(c, static_cast<Eigen::Index>(i));
      if (pcm16) {
        if (x < -1.0 || x > 1.0) ++clipped;
        double scaled = std::round(x * 32768.0);
        if (scaled > 32767.0) scaled = 32767.0;
        if (scaled < -32768.0) scaled = -32768.0;
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
      } else {
        float v = static_cast<float>(x);
        unsigned char b[4];
        std::memcpy(b, &v, 4);
        out.insert(out.end(), b, b + 4);
      }
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
  return clipped;
}

}  // namespace maskbeam
