#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advspeech/audio.hpp"
#include "advspeech/victim.hpp"

namespace advspeech {

struct WhiteBoxConfig {
  int max_iters = 1000;
  double lr = 0.01;
  double c_init = 1.0;
  double tau_db = -20.0;        // relative constraint db_x(delta) < tau
  double tau_decay_db = 2.0;    // tightening per verified success
  bool early_stop = false;      // stop early instead of running max_iters
  int early_stop_after = 1;     // verified successes before an early stop
};

struct BlackBoxConfig {
  int population = 100;
  int max_generations = 500;
  int elite_count = 10;
  double mutation_prob = 0.005;  // per sample
  double mutation_std = 0.005;
  double noise_bound = 0.02;     // cap on |delta_i| of the stored audio
  bool use_log_prob = true;      // fitness on log target probability
};

struct AttackResult {
  std::string source_id;
  std::string source_label;
  std::string target;          // class name or target sentence
  Perturbation perturbation;   // continuous delta behind `adversarial`
  bool success = false;
  int iterations_used = 0;     // outer iterations / generations executed
  double final_db_relative = 0.0;  // of the quantized stored audio
  std::string attack_kind;     // "white_box" | "black_box"
  std::string victim_checkpoint_hash;
  double success_tau_db = 0.0;  // tau active at the recorded success (wb)
  Waveform adversarial;        // quantized x + delta, the audio that is stored
  std::string wav_path;        // assigned when the batch layer emits the WAV
};

// Optional introspection for property tests.
struct WhiteBoxTrace {
  std::vector<double> objective;  // at accepted iterates
  std::vector<double> c_values;   // c active when the iterate was accepted
  std::vector<double> tau_values;
};

struct BlackBoxTrace {
  std::vector<double> best_fitness;  // per generation
};

// Gradient attack: minimizes ||delta||^2 + c * loss(x + delta, target) with
// delta clipped each step so db_relative(x, delta) stays under tau. Success
// is verified on PCM16-quantized audio; each verified success tightens tau by
// tau_decay_db and the record keeps the tightest successful delta.
AttackResult attack_white_box(const SequenceModel& victim, const Waveform& x,
                              const std::string& target_text,
                              const WhiteBoxConfig& cfg, uint64_t seed,
                              WhiteBoxTrace* trace = nullptr);

AttackResult attack_white_box(const KeywordModel& victim, const Waveform& x,
                              int target_class, const WhiteBoxConfig& cfg,
                              uint64_t seed, WhiteBoxTrace* trace = nullptr);

// Genetic attack against the keyword victim: bounded perturbation population,
// elitism, fitness-proportional selection, uniform crossover, per-sample
// Gaussian mutation. Fitness and the success test run on quantized audio.
AttackResult attack_black_box(const KeywordModel& victim, const Waveform& x,
                              int target_class, const BlackBoxConfig& cfg,
                              uint64_t seed, BlackBoxTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Batch layer
// ---------------------------------------------------------------------------

struct AttackBatchItem {
  std::string source_id;
  std::string source_path;  // absolute path of the source WAV
  std::string source_label;
  std::string bucket;       // duration bucket or command class
  std::string target;
};

struct AttackBatch {
  std::vector<AttackResult> results;  // plan order
  nlohmann::ordered_json summary;     // per (bucket, target) success cells
};

// Runs one attack per item on a worker pool. Per-item seeds derive from
// (master_seed, kind, source_id, target), so results do not depend on
// scheduling. All missing source files are reported in one error before any
// attack starts.
AttackBatch batch_attack(
    const std::vector<AttackBatchItem>& items,
    const std::function<AttackResult(const AttackBatchItem&, uint64_t seed)>&
        runner,
    const std::string& kind, uint64_t master_seed, int jobs);

// Records as JSON-lines; the perturbation is referenced by each record's
// emitted WAV path. Paths must be assigned before writing.
void write_attack_records(const std::vector<AttackResult>& results,
                          const std::string& path);

uint64_t attack_seed(uint64_t master_seed, const std::string& kind,
                     const std::string& source_id, const std::string& target);

}  // namespace advspeech
