#include "advspeech/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "advspeech/errors.hpp"

namespace advspeech {

namespace {

template <typename T>
T read_le(const std::vector<char>& buf, size_t off) {
  if (off + sizeof(T) > buf.size()) throw FormatError("WAV: truncated file");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return v;
}

std::string read_tag(const std::vector<char>& buf, size_t off) {
  if (off + 4 > buf.size()) throw FormatError("WAV: truncated file");
  return std::string(buf.data() + off, 4);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (buf.size() < 12) throw FormatError("WAV: file too small: " + path);

  std::string magic = read_tag(buf, 0);
  if (magic == "RIFX")
    throw FormatError("WAV: big-endian RIFX not supported: " + path);
  if (magic != "RIFF" || read_tag(buf, 8) != "WAVE")
    throw FormatError("WAV: not a RIFF/WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  size_t data_off = 0, data_len = 0;

  // Chunk scan; chunks are padded to even sizes.
  size_t off = 12;
  while (off + 8 <= buf.size()) {
    std::string id = read_tag(buf, off);
    uint32_t len = read_le<uint32_t>(buf, off + 4);
    size_t body = off + 8;
    if (id == "fmt ") {
      if (len < 16) throw FormatError("WAV: fmt chunk too small: " + path);
      format = read_le<uint16_t>(buf, body);
      channels = read_le<uint16_t>(buf, body + 2);
      rate = read_le<uint32_t>(buf, body + 4);
      bits = read_le<uint16_t>(buf, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      data_off = body;
      data_len = std::min<size_t>(len, buf.size() - body);
    }
    off = body + len + (len & 1);
  }
  if (!have_fmt) throw FormatError("WAV: missing fmt chunk: " + path);
  if (data_off == 0) throw FormatError("WAV: missing data chunk: " + path);
  if (channels == 0) throw FormatError("WAV: zero channels: " + path);
  if (rate == 0) throw FormatError("WAV: zero sample rate: " + path);

  const bool pcm16 = (format == 1 && bits == 16);
  const bool float32 = (format == 3 && bits == 32);
  if (!pcm16 && !float32)
    throw FormatError("WAV: unsupported encoding (format=" +
                      std::to_string(format) + ", bits=" +
                      std::to_string(bits) + "): " + path);

  const size_t bytes_per = bits / 8;
  const size_t n_values = data_len / bytes_per;
  const size_t n_frames = n_values / channels;

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(n_frames);
  for (size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (size_t c = 0; c < channels; ++c) {
      size_t p = data_off + (i * channels + c) * bytes_per;
      if (pcm16) {
        acc += read_le<int16_t>(buf, p) / 32768.0;
      } else {
        float f;
        std::memcpy(&f, buf.data() + p, 4);
        acc += std::clamp(static_cast<double>(f), -1.0, 1.0);
      }
    }
    w.samples[i] = acc / channels;
  }
  return w;
}

void write_wav(const Waveform& w, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);

  const uint32_t n = static_cast<uint32_t>(w.samples.size());
  const uint32_t rate = static_cast<uint32_t>(w.sample_rate);
  const uint32_t data_bytes = n * 2;
  const uint32_t byte_rate = rate * 2;

  auto put16 = [&out](uint16_t v) { out.write(reinterpret_cast<char*>(&v), 2); };
  auto put32 = [&out](uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };

  out.write("RIFF", 4);
  put32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put32(16);
  put16(1);   // PCM
  put16(1);   // mono
  put32(rate);
  put32(byte_rate);
  put16(2);   // block align
  put16(16);  // bits
  out.write("data", 4);
  put32(data_bytes);

  for (double s : w.samples) {
    double q = std::round(s * 32768.0);
    q = std::clamp(q, -32768.0, 32767.0);
    int16_t v = static_cast<int16_t>(q);
    out.write(reinterpret_cast<char*>(&v), 2);
  }
  if (!out) throw IoError("write failed: " + path);
}

double db_peak(const std::vector<double>& x) {
  if (x.empty()) throw ConfigError("db_peak: empty sequence");
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  peak = std::max(peak, 1e-9);
  return 20.0 * std::log10(peak);
}

double db_relative(const Waveform& host, const Perturbation& delta) {
  if (host.samples.size() != delta.deltas.size())
    throw ConfigError("db_relative: length mismatch");
  return db_peak(delta.deltas) - db_peak(host.samples);
}

Waveform apply_and_clip(const Waveform& host, const Perturbation& delta) {
  if (host.samples.size() != delta.deltas.size())
    throw ConfigError("apply_and_clip: length mismatch");
  Waveform out = host;
  for (size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] =
        std::clamp(host.samples[i] + delta.deltas[i], -1.0, 1.0);
  return out;
}

Waveform quantize_pcm16(const Waveform& w) {
  Waveform out = w;
  for (double& s : out.samples) {
    double q = std::round(s * 32768.0);
    q = std::clamp(q, -32768.0, 32767.0);
    s = q / 32768.0;
  }
  return out;
}

}  // namespace advspeech
