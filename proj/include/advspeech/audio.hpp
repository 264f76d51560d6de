#pragma once

#include <string>
#include <vector>

namespace advspeech {

// Mono audio clip. Samples live in [-1, 1]; label is an optional transcript
// or keyword used by dataset and victim code.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;
  std::string label;

  double duration_seconds() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
};

// Additive perturbation; same length as its host waveform.
struct Perturbation {
  std::vector<double> deltas;
};

// Reads a RIFF/WAVE file. PCM16 and IEEE-float32 supported; stereo is
// downmixed by averaging. PCM16 amplitudes are scaled by 1/32768.
Waveform read_wav(const std::string& path);

// Writes mono PCM16 little-endian. Samples must already be in [-1, 1];
// values are quantized with round-to-nearest and clamped to int16 range.
void write_wav(const Waveform& w, const std::string& path);

// Peak level: max_i 20*log10(|x_i|), with |x_i| floored at 1e-9 so silence
// reports -180 dB instead of -inf.
double db_peak(const std::vector<double>& x);

// Perturbation level relative to the host peak: db_peak(delta) - db_peak(host).
// Negative means the perturbation peaks quieter than the host.
double db_relative(const Waveform& host, const Perturbation& delta);

// Element-wise host + delta, clipped to [-1, 1]. Keeps the host's rate and
// label.
Waveform apply_and_clip(const Waveform& host, const Perturbation& delta);

// Snaps every sample to the PCM16 grid exactly as write_wav does, so
// quantize_pcm16(w) equals read_wav(write_wav(w)) sample for sample. Attack
// success is always judged on quantized audio: that is what gets stored.
Waveform quantize_pcm16(const Waveform& w);

}  // namespace advspeech
