#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "advspeech/audio.hpp"
#include "advspeech/features.hpp"

namespace advspeech {

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

struct ClipEntry {
  std::string id;         // e.g. "kw_yes_003" or "sent_long_007"
  std::string wav_path;   // relative to the manifest's directory
  std::string kind;       // "keyword" | "sentence"
  std::string class_name; // keyword clips: command word; sentences: ""
  std::string transcript; // sentences: space-joined words; keywords: the word
  double duration_s = 0.0;
  double speech_ratio = 0.0;
};

struct CorpusManifest {
  std::string root;  // directory holding the manifest file
  std::vector<ClipEntry> entries;
};

struct CorpusSpec {
  int sample_rate = 16000;
  int keyword_clips_per_class = 200;
  int sentences_per_bucket = 54;
  // Sentence lengths are drawn inside each bucket's interval, away from the
  // edges so rounding never drops a clip out of its bucket.
  double short_lo = 1.2, short_hi = 1.9;
  double medium_lo = 3.2, medium_hi = 3.9;
  double long_lo = 6.2, long_hi = 6.8;
};

const std::vector<std::string>& keyword_class_names();  // the 10 commands

// Deterministic synthetic speech-like corpus: per-class harmonic recipes with
// amplitude envelopes plus a low background noise bed on every clip, so
// "contains noise" alone cannot separate normal from adversarial audio.
CorpusManifest synth_corpus(const CorpusSpec& spec, uint64_t seed,
                            const std::string& out_dir);

void write_corpus_manifest(const CorpusManifest& m, const std::string& path);
CorpusManifest read_corpus_manifest(const std::string& path);

// Synthesis used by tests that need a single clip without a corpus.
Waveform synth_keyword_clip(const std::string& class_name, uint64_t seed,
                            int sample_rate = 16000);
Waveform synth_sentence_clip(const std::vector<std::string>& words,
                             double duration_s, uint64_t seed,
                             int sample_rate = 16000);

// ---------------------------------------------------------------------------
// Dataset manifests
// ---------------------------------------------------------------------------

struct DatasetEntry {
  std::string id;
  std::string wav_path;      // relative to the manifest's directory
  std::string label;         // "normal" | "adversarial"
  std::string bucket;        // duration bucket or command class
  std::string target_class;  // "short"|"medium"|"long"|command|"none"
  std::string split;         // "train" | "test" | "" before splitting
  std::string source_id;     // "" for normal entries
  std::string attack_kind;   // "white_box" | "black_box" | "none"
  double duration_s = 0.0;
  double speech_ratio = 0.0;
};

struct DatasetManifest {
  std::string root;
  std::vector<DatasetEntry> entries;
};

void write_dataset_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_dataset_manifest(const std::string& path);

struct TargetSpec {
  std::string class_name;  // "short" | "medium" | "long"
  std::string text;
};

// The three fixed attack target sentences, one per length class.
const std::vector<TargetSpec>& sequence_targets();

// ---------------------------------------------------------------------------
// Bucketing, splitting, validation
// ---------------------------------------------------------------------------

struct BucketResult {
  std::map<std::string, std::vector<ClipEntry>> buckets;  // short/medium/long
  std::vector<ClipEntry> excluded;
};

// short = [1,2] s, medium = [3,4] s, long = [6,7] s, inclusive bounds.
BucketResult bucket_by_duration(const std::vector<ClipEntry>& files);
std::string bucket_of_duration(double duration_s);  // "" when outside all

// Splits at source-id granularity: every entry whose lineage traces to one
// source lands on the same side. Stratified by (label, bucket); strata too
// small to honor the fraction fall back to the global pool with a warning.
struct SplitReport {
  double achieved_fraction = 0.0;
  std::vector<std::string> warnings;
};
SplitReport split_train_test(DatasetManifest& m, double train_fraction,
                             uint64_t seed);

// Independent deep validator: re-reads every WAV, recomputes duration and
// speech ratio, and re-checks balance, source-disjointness across splits,
// normal/attack-source exclusivity, and adversarial-differs-from-source.
// source_wavs maps source_id to an absolute WAV path; when given, adversarial
// entries are compared sample-by-sample against their sources.
struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
};
ValidationReport validate_manifest(
    const DatasetManifest& m, const MfccConfig& frame_cfg = {},
    bool check_speech_filter = true,
    const std::map<std::string, std::string>* source_wavs = nullptr);

}  // namespace advspeech
