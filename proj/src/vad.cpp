#include "advspeech/vad.hpp"

#include <algorithm>
#include <cmath>

#include "advspeech/errors.hpp"

namespace advspeech {

namespace {

// Lower nearest-rank percentile. Interpolation is deliberately avoided: when
// the quiet fraction sits exactly at the percentile, an interpolated value
// straddles the silence/speech energy gap and destabilizes the threshold.
double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  return v[static_cast<size_t>(std::floor(pos))];
}

}  // namespace

VadResult speech_ratio(const Waveform& w, const MfccConfig& cfg,
                       double energy_percentile, double margin_db) {
  const int t = frame_count(static_cast<int64_t>(w.samples.size()), cfg);
  if (t == 0) throw ConfigError("speech_ratio: waveform shorter than one frame");

  std::vector<double> energy_db(t);
  for (int i = 0; i < t; ++i) {
    const int64_t s = static_cast<int64_t>(i) * cfg.hop;
    double acc = 0.0;
    for (int n = 0; n < cfg.frame_length; ++n)
      acc += w.samples[s + n] * w.samples[s + n];
    const double mean_power = acc / cfg.frame_length;
    energy_db[i] = 10.0 * std::log10(std::max(mean_power, 1e-12));
  }

  const double threshold =
      percentile(energy_db, energy_percentile) + margin_db;

  VadResult r;
  r.frame_flags.resize(t);
  int speech = 0;
  for (int i = 0; i < t; ++i) {
    const bool flag = energy_db[i] > threshold;
    r.frame_flags[i] = flag;
    speech += flag ? 1 : 0;
  }
  r.speech_ratio = static_cast<double>(speech) / t;
  return r;
}

bool passes_speech_filter(const VadResult& v, double threshold) {
  return v.speech_ratio > threshold;
}

}  // namespace advspeech
