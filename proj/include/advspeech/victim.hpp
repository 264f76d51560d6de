#pragma once

#include <map>
#include <string>
#include <vector>

#include "advspeech/dataset.hpp"
#include "advspeech/features.hpp"
#include "advspeech/nn.hpp"

namespace advspeech {

// ---------------------------------------------------------------------------
// Keyword victim: single-label command classifier over fixed-length clips.
// ---------------------------------------------------------------------------

struct KeywordModel {
  Network network;  // input {t_max, n_coeffs, 1}, output {K} softmax
  std::vector<std::string> class_names;
  MfccConfig mfcc_cfg;  // t_max pins the fixed input length
};

struct KeywordTrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-3;
  double holdout_fraction = 0.2;
};

struct TrainReport {
  double train_accuracy = 0.0;
  double holdout_accuracy = 0.0;
  double final_loss = 0.0;
  int epochs = 0;
};

KeywordModel make_keyword_model(const std::vector<std::string>& class_names,
                                const MfccConfig& mfcc_cfg, uint64_t seed);

// Trains on the corpus's keyword clips. Deterministic given seed; a holdout
// slice per class is excluded from gradient updates and scored afterwards.
TrainReport train_keyword_model(KeywordModel& m, const CorpusManifest& corpus,
                                const KeywordTrainConfig& cfg, uint64_t seed);

struct KeywordPrediction {
  int class_index = -1;
  Eigen::VectorXd probs;
};

KeywordPrediction predict_keyword(const KeywordModel& m, const Waveform& w);
// Same prediction from precomputed (already padded) features; the attack
// inner loops use this to skip redundant MFCC work.
KeywordPrediction predict_keyword_features(const KeywordModel& m,
                                           const FeatureMap& fm);

// Features for one waveform, padded to the model's t_max. Over-length input
// raises ConfigError.
FeatureMap keyword_features(const KeywordModel& m, const Waveform& w);

// {t, n_coeffs, 1} tensor view of a feature map (row-major copy).
Tensor feature_tensor(const FeatureMap& fm);

void save_keyword_model(const KeywordModel& m, const std::string& path);
KeywordModel load_keyword_model(const std::string& path);

// ---------------------------------------------------------------------------
// Sequence victim: per-frame character distributions consumed by CTC.
// ---------------------------------------------------------------------------

struct SequenceModel {
  Network network;    // reference network; input {t_ref, n_coeffs, 1}
  std::string vocab;  // characters; blank = vocab.size() (last column)
  MfccConfig mfcc_cfg;

  // Conv-only stacks are T-independent, so variable-length inputs run on
  // per-T clones sharing the master parameters. The cache is rebuilt lazily;
  // clone the model per worker rather than sharing across threads.
  mutable std::map<int, Network> per_t_cache;
};

struct SequenceTrainConfig {
  int epochs = 10;
  int batch_size = 4;
  double lr = 1e-3;
};

SequenceModel make_sequence_model(const MfccConfig& mfcc_cfg, uint64_t seed);

// Trains CTC on the corpus's sentence clips (transcript = word sequence).
TrainReport train_sequence_model(SequenceModel& m, const CorpusManifest& corpus,
                                 const SequenceTrainConfig& cfg, uint64_t seed);

// Network instance matching t_frames input rows, parameters shared with the
// master network.
const Network& sequence_network_for(const SequenceModel& m, int t_frames);

// Per-frame log probabilities, rows CTC-ready: T' x (vocab+1).
Eigen::MatrixXd sequence_log_probs(const SequenceModel& m,
                                   const FeatureMap& fm,
                                   ForwardCache* cache = nullptr);

// Greedy best-path decode: per-frame argmax, collapse repeats, drop blanks.
std::string transcribe(const SequenceModel& m, const Waveform& w);

std::vector<int> encode_text(const std::string& text, const std::string& vocab);
std::string collapse_ctc_path(const std::vector<int>& path,
                              const std::string& vocab);

void save_sequence_model(const SequenceModel& m, const std::string& path);
SequenceModel load_sequence_model(const std::string& path);

// MfccConfig <-> JSON, shared by model checkpoints and run configs.
nlohmann::ordered_json mfcc_config_to_json(const MfccConfig& cfg);
MfccConfig mfcc_config_from_json(const nlohmann::ordered_json& j);

}  // namespace advspeech
