#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "advspeech/audio.hpp"
#include "advspeech/errors.hpp"
#include "advspeech/rng.hpp"
#include "helpers.hpp"

using namespace advspeech;

namespace {

const std::string kDir = testutil::scratch_dir("audio");

// Hand-built WAV bytes, independent of write_wav.
std::string raw_wav(uint16_t format, uint16_t channels, uint32_t rate,
                    uint16_t bits, const std::string& payload,
                    const char* magic = "RIFF") {
  std::string s;
  auto u16 = [&s](uint16_t v) { s.append(reinterpret_cast<char*>(&v), 2); };
  auto u32 = [&s](uint32_t v) { s.append(reinterpret_cast<char*>(&v), 4); };
  s.append(magic, 4);
  u32(36 + static_cast<uint32_t>(payload.size()));
  s.append("WAVE", 4);
  s.append("fmt ", 4);
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<uint16_t>(channels * bits / 8));
  u16(bits);
  s.append("data", 4);
  u32(static_cast<uint32_t>(payload.size()));
  s += payload;
  return s;
}

std::string write_file(const std::string& name, const std::string& bytes) {
  const std::string path = kDir + "/" + name;
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  return path;
}

std::string pcm16_payload(const std::vector<int16_t>& v) {
  std::string s(v.size() * 2, '\0');
  std::memcpy(s.data(), v.data(), s.size());
  return s;
}

}  // namespace

TEST_CASE("read_wav: silence identity") {
  std::vector<int16_t> z(16000, 0);
  auto path = write_file("silence.wav", raw_wav(1, 1, 16000, 16, pcm16_payload(z)));
  Waveform w = read_wav(path);
  CHECK(w.sample_rate == 16000);
  REQUIRE(w.samples.size() == 16000);
  for (double s : w.samples) CHECK(s == 0.0);
}

TEST_CASE("read_wav: PCM16 integer-to-float scaling") {
  auto path = write_file("scale.wav",
                         raw_wav(1, 1, 16000, 16,
                                 pcm16_payload({32767, -32768, 16384, -16384})));
  Waveform w = read_wav(path);
  REQUIRE(w.samples.size() == 4);
  CHECK(w.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-12));
  CHECK(w.samples[1] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(w.samples[2] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w.samples[3] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("read_wav: RIFX rejected") {
  auto path = write_file("rifx.wav",
                         raw_wav(1, 1, 16000, 16, pcm16_payload({0, 0}), "RIFX"));
  CHECK_THROWS_AS(read_wav(path), FormatError);
}

TEST_CASE("read_wav: unsupported encodings rejected") {
  auto p24 = write_file("pcm24.wav", raw_wav(1, 1, 16000, 24, std::string(6, '\0')));
  CHECK_THROWS_AS(read_wav(p24), FormatError);
  auto alaw = write_file("alaw.wav", raw_wav(6, 1, 16000, 8, std::string(4, '\0')));
  CHECK_THROWS_AS(read_wav(alaw), FormatError);
  CHECK_THROWS_AS(read_wav(kDir + "/missing.wav"), IoError);
}

TEST_CASE("read_wav: stereo downmixed by averaging") {
  // L/R interleaved: (0.5, 0.25) then (-0.5, -0.25).
  auto path = write_file(
      "stereo.wav",
      raw_wav(1, 2, 16000, 16, pcm16_payload({16384, 8192, -16384, -8192})));
  Waveform w = read_wav(path);
  REQUIRE(w.samples.size() == 2);
  CHECK(w.samples[0] == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(w.samples[1] == doctest::Approx(-0.375).epsilon(1e-12));
}

TEST_CASE("read_wav: IEEE float32 supported") {
  std::vector<float> v = {0.25f, -0.75f, 1.0f, -1.0f};
  std::string payload(v.size() * 4, '\0');
  std::memcpy(payload.data(), v.data(), payload.size());
  auto path = write_file("f32.wav", raw_wav(3, 1, 16000, 32, payload));
  Waveform w = read_wav(path);
  REQUIRE(w.samples.size() == 4);
  CHECK(w.samples[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(w.samples[1] == doctest::Approx(-0.75).epsilon(1e-9));
}

TEST_CASE("write_wav: silence round-trip is exact") {
  Waveform w;
  w.samples.assign(16000, 0.0);
  const std::string path = kDir + "/rt_zero.wav";
  write_wav(w, path);
  Waveform r = read_wav(path);
  REQUIRE(r.samples.size() == w.samples.size());
  for (double s : r.samples) CHECK(s == 0.0);
}

TEST_CASE("write_wav: 440 Hz sine round-trip within one quantization step") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(16000);
  for (size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = std::sin(2.0 * 3.14159265358979323846 * 440.0 * i / 16000.0);
  const std::string path = kDir + "/rt_sine.wav";
  write_wav(w, path);
  Waveform r = read_wav(path);
  REQUIRE(r.samples.size() == w.samples.size());
  double max_err = 0.0;
  for (size_t i = 0; i < r.samples.size(); ++i)
    max_err = std::max(max_err, std::abs(r.samples[i] - w.samples[i]));
  CHECK(max_err <= 1.0 / 32768.0);
}

TEST_CASE("db_peak: reference values") {
  CHECK(db_peak({1.0, -1.0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(db_peak({0.5}) == doctest::Approx(-6.0206).epsilon(1e-4));
  CHECK(db_peak(std::vector<double>(100, 0.0)) == doctest::Approx(-180.0));
  CHECK_THROWS_AS(db_peak({}), ConfigError);
}

TEST_CASE("db_peak: scale equivariance") {
  Rng rng(11);
  std::vector<double> x(500);
  for (auto& s : x) s = rng.uniform(-0.4, 0.4);
  x[7] = 0.45;  // pin a clear peak away from the floor
  for (double k : {0.5, 2.0, 0.037}) {
    std::vector<double> kx = x;
    for (auto& s : kx) s *= k;
    CHECK(std::abs(db_peak(kx) - (db_peak(x) + 20.0 * std::log10(k))) < 1e-9);
  }
}

TEST_CASE("db_relative: reference values and scale invariance") {
  Waveform host;
  host.samples = {1.0, 0.0, -0.5};
  Perturbation same{host.samples};
  CHECK(db_relative(host, same) == doctest::Approx(0.0));

  Perturbation quarter{{0.25, 0.0, 0.1}};
  CHECK(db_relative(host, quarter) == doctest::Approx(-12.0412).epsilon(1e-4));

  Waveform silent;
  silent.samples.assign(3, 0.0);
  Perturbation delta{{0.5, 0.0, 0.0}};
  CHECK(db_relative(silent, delta) > 0.0);

  Waveform host2 = host;
  Perturbation q2 = quarter;
  for (auto& s : host2.samples) s *= 0.2;
  for (auto& d : q2.deltas) d *= 0.2;
  CHECK(db_relative(host2, q2) == doctest::Approx(db_relative(host, quarter)).epsilon(1e-9));

  Perturbation bad{{0.1}};
  CHECK_THROWS_AS(db_relative(host, bad), ConfigError);
}

TEST_CASE("apply_and_clip: identity, boundary, and round-trip") {
  Waveform h;
  h.samples = {0.9, -0.2, 0.1};
  h.label = "keep";
  Perturbation zero{{0.0, 0.0, 0.0}};
  Waveform same = apply_and_clip(h, zero);
  CHECK(same.samples == h.samples);
  CHECK(same.label == "keep");

  Perturbation push{{0.3, 0.0, 0.0}};
  CHECK(apply_and_clip(h, push).samples[0] == 1.0);

  Rng rng(3);
  Waveform x;
  x.samples.resize(300);
  Perturbation d;
  d.deltas.resize(300);
  for (size_t i = 0; i < x.samples.size(); ++i) {
    x.samples[i] = rng.uniform(-0.5, 0.5);
    d.deltas[i] = rng.uniform(-0.3, 0.3);
  }
  Waveform sum = apply_and_clip(x, d);
  for (size_t i = 0; i < x.samples.size(); ++i)
    CHECK(std::abs((sum.samples[i] - x.samples[i]) - d.deltas[i]) < 1e-12);

  Perturbation bad{{0.1}};
  CHECK_THROWS_AS(apply_and_clip(h, bad), ConfigError);
}
