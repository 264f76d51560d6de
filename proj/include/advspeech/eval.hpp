#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "advspeech/dataset.hpp"
#include "advspeech/detector.hpp"

namespace advspeech {

// One row of the six-scenario protocol: train on the union of the train
// splits of train_sets, test on the test split of test_set.
struct ScenarioSpec {
  int id = 0;
  std::vector<std::string> train_sets;  // subset of {"A","B"}
  std::string test_set;                 // "A" or "B"
};

// The six rows: (A,A),(A,B),(B,A),(B,B),(AB,A),(AB,B).
std::vector<ScenarioSpec> table_scenarios();

struct BreakdownCell {
  int64_t n_adversarial = 0;  // adversarial test entries in the cell
  int64_t n_total = 0;        // plus the paired normals of the same bucket
  double accuracy = 0.0;
};

struct ScenarioReport {
  int id = 0;
  int runs = 0;
  std::vector<double> accuracies;  // indexed by run
  double mean_accuracy = 0.0;
  double ci95_halfwidth = 0.0;
  // bucket (or source command) -> target class -> cell, pooled over runs.
  // Empty cells are absent.
  std::map<std::string, std::map<std::string, BreakdownCell>> breakdown;
};

struct UnknownTargetReport {
  std::string held_out;  // target class tested but never trained on
  int runs = 0;
  std::vector<double> accuracies;
  double mean_accuracy = 0.0;
  double ci95_halfwidth = 0.0;
};

struct EvalConfig {
  DetectorConfig detector;
  DetectorTrainConfig train;
  int runs = 5;
  int jobs = 1;
};

// mean and 1.96*stdev/sqrt(n); requires at least two values.
std::pair<double, double> ci95(const std::vector<double>& accuracies);

// Detector seeds are keyed to the training-set signature, so scenarios that
// share a train set produce identical detectors and results whether run
// standalone or batched.
uint64_t scenario_base_seed(uint64_t eval_seed,
                            const std::vector<std::string>& train_sets);

ScenarioReport run_scenario(const ScenarioSpec& spec, const DatasetManifest& a,
                            const DatasetManifest& b, const EvalConfig& cfg,
                            uint64_t base_seed);

// All six scenarios with one detector training per (train set, run).
std::vector<ScenarioReport> run_all_scenarios(const DatasetManifest& a,
                                              const DatasetManifest& b,
                                              const EvalConfig& cfg,
                                              uint64_t eval_seed);

UnknownTargetReport unknown_target_experiment(const DatasetManifest& a,
                                              const std::string& held_out,
                                              const EvalConfig& cfg,
                                              uint64_t base_seed);

nlohmann::ordered_json scenario_report_to_json(const ScenarioReport& r);
ScenarioReport scenario_report_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json unknown_target_report_to_json(const UnknownTargetReport& r);

// Plot-data export of a breakdown matrix: one row per source bucket, one
// column per target class, empty string for absent cells.
std::string breakdown_to_csv(const ScenarioReport& r);

}  // namespace advspeech
