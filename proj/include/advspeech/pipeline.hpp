#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "advspeech/dataset.hpp"
#include "advspeech/dataset_build.hpp"
#include "advspeech/eval.hpp"
#include "advspeech/victim.hpp"

namespace advspeech {

// The archived run configuration: everything a run needs to reproduce its
// artifacts byte-for-byte.
struct PipelineConfig {
  uint64_t master_seed = 1;
  std::string preset = "desk";
  std::string work_dir = "runs/desk";
  int jobs = 1;

  CorpusSpec corpus;
  MfccConfig keyword_mfcc;
  KeywordTrainConfig keyword_train;
  MfccConfig sequence_mfcc;
  SequenceTrainConfig sequence_train;
  BuildAConfig build_a;
  BuildBConfig build_b;
  EvalConfig eval;
  int unknown_runs = 3;
};

// Calibrated to finish the whole pipeline within the desk budget.
PipelineConfig desk_preset();
// Full-scale settings; orders of magnitude slower, kept for completeness.
PipelineConfig paper_parity_preset();

nlohmann::ordered_json pipeline_config_to_json(const PipelineConfig& cfg);
// Starts from the named preset and applies any overriding keys present.
PipelineConfig pipeline_config_from_json(const nlohmann::ordered_json& j);

struct StageResult {
  std::string name;
  bool skipped = false;
  double seconds = 0.0;
  std::vector<std::string> warnings;
};

struct PipelineResult {
  std::vector<StageResult> stages;
};

// Derives each stage's seed from master_seed through a named substream.
uint64_t stage_seed(uint64_t master_seed, const std::string& stage);

// Six-scenario protocol plus the unknown-target experiment; writes
// scenario_<id>.json, breakdown_b.csv, unknown_target.json and
// eval_summary.json under out_dir. Returns the file names written.
std::vector<std::string> run_eval(const DatasetManifest& a,
                                  const DatasetManifest& b,
                                  const EvalConfig& cfg, int unknown_runs,
                                  uint64_t eval_seed,
                                  const std::string& out_dir);

PipelineResult run_pipeline(const PipelineConfig& cfg);

}  // namespace advspeech
