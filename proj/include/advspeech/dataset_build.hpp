#pragma once

#include <string>
#include <vector>

#include "advspeech/attacks.hpp"
#include "advspeech/dataset.hpp"
#include "advspeech/victim.hpp"

namespace advspeech {

struct BuildAConfig {
  int n_per_bucket = 12;       // attacked sources per duration bucket
  double train_fraction = 0.75;
  double speech_filter = 0.68;
  WhiteBoxConfig wb;
  int jobs = 1;
};

struct BuildBConfig {
  std::vector<std::string> command_classes;  // empty = all corpus classes
  int n_per_command = 4;  // attacked sources per command
  double train_fraction = 0.75;
  double speech_filter = 0.68;
  BlackBoxConfig bb;
  int jobs = 1;
};

struct BuildResult {
  DatasetManifest manifest;
  std::vector<AttackResult> records;
  nlohmann::ordered_json summary;      // batch_attack summary
  std::vector<std::string> warnings;   // rebalancing drops, split fallbacks
};

// Dataset A: sentence sources bucketed by duration, each attacked with the
// three fixed target sentences via the white-box attack on the sequence
// victim; 3x distinct normal sentences per bucket. Failed attacks drop one
// same-bucket normal each to keep the manifest balanced. Artifacts
// (manifest.jsonl, attack_records.jsonl, attack_summary.json, wavs/) are
// written under out_dir.
BuildResult build_dataset_A(const CorpusManifest& corpus,
                            const SequenceModel& victim,
                            const std::string& victim_checkpoint_hash,
                            const BuildAConfig& cfg, uint64_t seed,
                            const std::string& out_dir);

// Dataset B: keyword sources, mutual targeting over the command set via the
// genetic black-box attack; (K-1) x n distinct normals per command.
BuildResult build_dataset_B(const CorpusManifest& corpus,
                            const KeywordModel& victim,
                            const std::string& victim_checkpoint_hash,
                            const BuildBConfig& cfg, uint64_t seed,
                            const std::string& out_dir);

}  // namespace advspeech
