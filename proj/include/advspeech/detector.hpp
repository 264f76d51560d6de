#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "advspeech/audio.hpp"
#include "advspeech/dataset.hpp"
#include "advspeech/features.hpp"
#include "advspeech/nn.hpp"

namespace advspeech {

// The detector consumes padded MFCC maps of shape {t_max, n_coeffs, 1};
// mfcc.t_max fixes the network input height at build time.
struct DetectorConfig {
  MfccConfig mfcc;
  std::string third_activation = "linear";  // "linear" or "selu"
  int pool3_h = 2;  // the third pool stage is config-overridable
  int pool3_w = 2;
};

struct DetectorModel {
  Network network;
  MfccConfig mfcc_cfg;
  std::string third_activation = "linear";
  int pool3_h = 2;
  int pool3_w = 2;
};

struct DetectorTrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-3;
};

struct DetectorTrainReport {
  std::vector<double> losses;  // per-epoch mean cross-entropy
  double train_accuracy = 0.0;
};

// Entry id -> padded feature tensor. Prefill before sharing across threads;
// lookups never mutate a cache that already holds the id.
using FeatureCache = std::map<std::string, Tensor>;

// Class 0 is normal, class 1 is adversarial.
inline constexpr int kDetectorNormal = 0;
inline constexpr int kDetectorAdversarial = 1;

DetectorModel build_detector(const DetectorConfig& cfg, uint64_t seed);
int64_t detector_parameter_count(const DetectorModel& m);

// Trains on every entry of the given manifest; the caller filters splits.
// Refuses manifests whose normal and adversarial counts differ.
DetectorTrainReport train_detector(DetectorModel& m,
                                   const DatasetManifest& train,
                                   const DetectorTrainConfig& cfg,
                                   uint64_t seed,
                                   FeatureCache* cache = nullptr);

struct DetectorPrediction {
  int class_index = 0;
  Eigen::VectorXd probs;
};

Tensor detector_features(const DetectorModel& m, const Waveform& w);
DetectorPrediction classify_features(const DetectorModel& m,
                                     const Tensor& features);
DetectorPrediction classify(const DetectorModel& m, const Waveform& w);

void save_detector(const DetectorModel& m, const std::string& path);
DetectorModel load_detector(const std::string& path);

}  // namespace advspeech
