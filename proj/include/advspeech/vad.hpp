#pragma once

#include <vector>

#include "advspeech/audio.hpp"
#include "advspeech/features.hpp"

namespace advspeech {

struct VadResult {
  std::vector<bool> frame_flags;
  double speech_ratio = 0.0;
};

// Energy-threshold VAD sharing the MFCC framing. A frame is speech iff its
// energy in dB exceeds the energy_percentile-th percentile of all frame
// energies plus margin_db.
VadResult speech_ratio(const Waveform& w, const MfccConfig& cfg,
                       double energy_percentile = 10.0,
                       double margin_db = 9.0);

// Strict inequality: a ratio exactly at the threshold fails.
bool passes_speech_filter(const VadResult& v, double threshold);

}  // namespace advspeech
