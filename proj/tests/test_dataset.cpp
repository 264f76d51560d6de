#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "advspeech/audio.hpp"
#include "advspeech/dataset.hpp"
#include "advspeech/errors.hpp"
#include "advspeech/jsonio.hpp"
#include "advspeech/vad.hpp"

#include "helpers.hpp"

using namespace advspeech;
namespace fs = std::filesystem;

namespace {

CorpusSpec tiny_spec() {
  CorpusSpec spec;
  spec.keyword_clips_per_class = 3;
  spec.sentences_per_bucket = 4;
  return spec;
}

// In-memory manifest with paired adversarial/normal entries per bucket.
// sources_per_bucket sources, each attacked toward every target class.
DatasetManifest synthetic_manifest(int sources_per_bucket,
                                   const std::vector<std::string>& buckets,
                                   const std::vector<std::string>& targets) {
  DatasetManifest m;
  for (const std::string& b : buckets) {
    for (int s = 0; s < sources_per_bucket; ++s) {
      const std::string sid = "src_" + b + "_" + std::to_string(s);
      for (const std::string& t : targets) {
        DatasetEntry e;
        e.id = "adv-" + sid + "-" + t;
        e.wav_path = e.id + ".wav";
        e.label = "adversarial";
        e.bucket = b;
        e.target_class = t;
        e.source_id = sid;
        e.attack_kind = "white_box";
        m.entries.push_back(e);
      }
      for (size_t t = 0; t < targets.size(); ++t) {
        DatasetEntry e;
        e.id = "norm-" + b + "-" + std::to_string(s) + "-" + std::to_string(t);
        e.wav_path = e.id + ".wav";
        e.label = "normal";
        e.bucket = b;
        e.target_class = "none";
        e.attack_kind = "none";
        m.entries.push_back(e);
      }
    }
  }
  return m;
}

struct CellCount {
  int normal = 0, adversarial = 0;
};

std::map<std::string, CellCount> count_cells(const DatasetManifest& m) {
  std::map<std::string, CellCount> cells;
  for (const DatasetEntry& e : m.entries) {
    CellCount& c = cells[e.split + "|" + e.bucket];
    (e.label == "normal" ? c.normal : c.adversarial)++;
  }
  return cells;
}

// On-disk pair of (normal, adversarial) entries over real keyword clips; the
// base for validator tests. Bucket is a command class so the duration-bucket
// rule stays out of the way.
struct DiskDataset {
  std::string dir;
  DatasetManifest m;
  std::map<std::string, std::string> source_wavs;
};

DiskDataset make_disk_dataset(const std::string& scratch) {
  DiskDataset d;
  d.dir = scratch;
  d.m.root = scratch;

  auto emit = [&](const std::string& id, const Waveform& w) {
    write_wav(w, (fs::path(scratch) / (id + ".wav")).string());
    return read_wav((fs::path(scratch) / (id + ".wav")).string());
  };
  auto fill = [&](DatasetEntry& e, const Waveform& w) {
    e.wav_path = e.id + ".wav";
    e.duration_s = w.duration_seconds();
    e.speech_ratio = speech_ratio(w, MfccConfig{}).speech_ratio;
  };

  // Source clip for the adversarial entry; not itself a manifest entry.
  Waveform src = synth_keyword_clip("yes", 101);
  const std::string src_path = (fs::path(scratch) / "source_yes.wav").string();
  write_wav(src, src_path);
  d.source_wavs["source_yes"] = src_path;

  Waveform adv = read_wav(src_path);
  for (size_t i = 0; i < adv.samples.size(); i += 50)
    adv.samples[i] += 0.002;  // audible enough to differ after quantization
  DatasetEntry ea;
  ea.id = "adv-1";
  ea.label = "adversarial";
  ea.bucket = "yes";
  ea.target_class = "no";
  ea.split = "train";
  ea.source_id = "source_yes";
  ea.attack_kind = "black_box";
  fill(ea, emit(ea.id, adv));
  d.m.entries.push_back(ea);

  DatasetEntry en;
  en.id = "norm-1";
  en.label = "normal";
  en.bucket = "yes";
  en.target_class = "none";
  en.split = "train";
  en.attack_kind = "none";
  fill(en, emit(en.id, synth_keyword_clip("no", 202)));
  d.m.entries.push_back(en);

  return d;
}

bool has_violation(const ValidationReport& r, const std::string& needle) {
  for (const std::string& v : r.violations)
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("duration buckets are inclusive intervals with gaps excluded") {
  CHECK(bucket_of_duration(0.999) == "");
  CHECK(bucket_of_duration(1.0) == "short");
  CHECK(bucket_of_duration(1.5) == "short");
  CHECK(bucket_of_duration(2.0) == "short");
  CHECK(bucket_of_duration(2.001) == "");
  CHECK(bucket_of_duration(2.999) == "");
  CHECK(bucket_of_duration(3.0) == "medium");
  CHECK(bucket_of_duration(4.0) == "medium");
  CHECK(bucket_of_duration(4.001) == "");
  CHECK(bucket_of_duration(5.999) == "");
  CHECK(bucket_of_duration(6.0) == "long");
  CHECK(bucket_of_duration(7.0) == "long");
  CHECK(bucket_of_duration(7.001) == "");
}

TEST_CASE("bucket_by_duration partitions clips and reports the excluded") {
  std::vector<ClipEntry> clips(5);
  clips[0].duration_s = 1.2;
  clips[1].duration_s = 2.5;  // gap
  clips[2].duration_s = 3.5;
  clips[3].duration_s = 6.9;
  clips[4].duration_s = 0.4;  // below every bucket
  BucketResult r = bucket_by_duration(clips);
  CHECK(r.buckets["short"].size() == 1);
  CHECK(r.buckets["medium"].size() == 1);
  CHECK(r.buckets["long"].size() == 1);
  CHECK(r.excluded.size() == 2);
}

TEST_CASE("corpus synthesis is deterministic in content and on disk") {
  const std::string root = testutil::scratch_dir("dataset_corpus_det");
  CorpusManifest a = synth_corpus(tiny_spec(), 7, root + "/a");
  CorpusManifest b = synth_corpus(tiny_spec(), 7, root + "/b");
  REQUIRE(a.entries.size() == b.entries.size());

  CHECK(read_text_file(root + "/a/corpus_manifest.jsonl") ==
        read_text_file(root + "/b/corpus_manifest.jsonl"));
  for (size_t i = 0; i < a.entries.size(); i += 7)
    CHECK(read_text_file(root + "/a/" + a.entries[i].wav_path) ==
          read_text_file(root + "/b/" + b.entries[i].wav_path));

  CorpusManifest c = synth_corpus(tiny_spec(), 8, root + "/c");
  bool any_differs = false;
  for (size_t i = 0; i < a.entries.size(); ++i)
    if (read_text_file(root + "/a/" + a.entries[i].wav_path) !=
        read_text_file(root + "/c/" + c.entries[i].wav_path))
      any_differs = true;
  CHECK(any_differs);
}

TEST_CASE("corpus structure: counts, durations, buckets, speech filter") {
  const std::string root = testutil::scratch_dir("dataset_corpus_shape");
  const CorpusSpec spec = tiny_spec();
  CorpusManifest m = synth_corpus(spec, 3, root);
  CHECK(m.entries.size() ==
        static_cast<size_t>(10 * spec.keyword_clips_per_class +
                            3 * spec.sentences_per_bucket));

  std::map<std::string, int> sentence_buckets;
  for (const ClipEntry& e : m.entries) {
    CHECK(e.speech_ratio > 0.68);  // every clip passes the dataset filter
    if (e.kind == "keyword") {
      CHECK(e.duration_s == doctest::Approx(1.0));
      CHECK(e.transcript == e.class_name);
    } else {
      const std::string b = bucket_of_duration(e.duration_s);
      CHECK(b != "");
      ++sentence_buckets[b];
      CHECK_FALSE(e.transcript.empty());
    }
  }
  CHECK(sentence_buckets["short"] == spec.sentences_per_bucket);
  CHECK(sentence_buckets["medium"] == spec.sentences_per_bucket);
  CHECK(sentence_buckets["long"] == spec.sentences_per_bucket);
}

TEST_CASE("corpus manifest round-trips through disk") {
  const std::string root = testutil::scratch_dir("dataset_corpus_rt");
  CorpusManifest m = synth_corpus(tiny_spec(), 11, root);
  CorpusManifest r = read_corpus_manifest(root + "/corpus_manifest.jsonl");
  REQUIRE(r.entries.size() == m.entries.size());
  for (size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(r.entries[i].id == m.entries[i].id);
    CHECK(r.entries[i].wav_path == m.entries[i].wav_path);
    CHECK(r.entries[i].kind == m.entries[i].kind);
    CHECK(r.entries[i].class_name == m.entries[i].class_name);
    CHECK(r.entries[i].transcript == m.entries[i].transcript);
    CHECK(r.entries[i].duration_s == m.entries[i].duration_s);
    CHECK(r.entries[i].speech_ratio == m.entries[i].speech_ratio);
  }
}

TEST_CASE("split keeps lineages together and balances every bucket cell") {
  DatasetManifest m =
      synthetic_manifest(8, {"short", "medium", "long"},
                         {"short", "medium", "long"});
  SplitReport rep = split_train_test(m, 0.75, 42);

  std::map<std::string, std::set<std::string>> lineage_sides;
  for (const DatasetEntry& e : m.entries) {
    CHECK((e.split == "train" || e.split == "test"));
    lineage_sides[e.source_id.empty() ? e.id : e.source_id].insert(e.split);
  }
  for (const auto& [key, sides] : lineage_sides) CHECK(sides.size() == 1);

  for (const auto& [cell, c] : count_cells(m)) {
    INFO(cell);
    CHECK(c.normal == c.adversarial);
  }
  CHECK(rep.achieved_fraction == doctest::Approx(0.75).epsilon(0.1));
}

TEST_CASE("split is deterministic in the seed") {
  DatasetManifest a = synthetic_manifest(6, {"short"}, {"x", "y"});
  DatasetManifest b = a;
  split_train_test(a, 0.7, 9);
  split_train_test(b, 0.7, 9);
  for (size_t i = 0; i < a.entries.size(); ++i)
    CHECK(a.entries[i].split == b.entries[i].split);

  DatasetManifest c = synthetic_manifest(6, {"short"}, {"x", "y"});
  bool any_differs = false;
  for (uint64_t seed = 10; seed < 15 && !any_differs; ++seed) {
    DatasetManifest d = synthetic_manifest(6, {"short"}, {"x", "y"});
    split_train_test(d, 0.7, seed);
    split_train_test(c, 0.7, 9);
    for (size_t i = 0; i < c.entries.size(); ++i)
      if (c.entries[i].split != d.entries[i].split) any_differs = true;
  }
  CHECK(any_differs);
}

TEST_CASE("split defers label-less strata to the global pool with a warning") {
  DatasetManifest m = synthetic_manifest(6, {"short"}, {"x", "y"});
  // A bucket holding only normals has no adversarial counterpart.
  for (int i = 0; i < 4; ++i) {
    DatasetEntry e;
    e.id = "lonely-" + std::to_string(i);
    e.wav_path = e.id + ".wav";
    e.label = "normal";
    e.bucket = "odd";
    e.target_class = "none";
    e.attack_kind = "none";
    m.entries.push_back(e);
  }
  SplitReport rep = split_train_test(m, 0.75, 3);
  bool warned = false;
  for (const std::string& w : rep.warnings)
    if (w.find("no counterpart") != std::string::npos) warned = true;
  CHECK(warned);
}

TEST_CASE("split rejects bad fractions and empty manifests") {
  DatasetManifest m = synthetic_manifest(2, {"short"}, {"x"});
  CHECK_THROWS_AS(split_train_test(m, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_train_test(m, 1.0, 1), ConfigError);
  DatasetManifest empty;
  CHECK_THROWS_AS(split_train_test(empty, 0.75, 1), ConfigError);
}

TEST_CASE("validator accepts a consistent dataset") {
  DiskDataset d = make_disk_dataset(testutil::scratch_dir("dataset_val_ok"));
  ValidationReport r = validate_manifest(d.m, MfccConfig{}, true, &d.source_wavs);
  const std::string first = r.violations.empty() ? "" : r.violations[0];
  INFO(first);
  CHECK(r.ok);
}

TEST_CASE("validator flags duplicate ids") {
  DiskDataset d = make_disk_dataset(testutil::scratch_dir("dataset_val_dup"));
  d.m.entries.push_back(d.m.entries[1]);
  d.m.entries.push_back(d.m.entries[0]);  // keep labels balanced
  ValidationReport r = validate_manifest(d.m);
  CHECK_FALSE(r.ok);
  CHECK(has_violation(r, "duplicate id"));
}

TEST_CASE("validator flags label imbalance globally and per cell") {
  DiskDataset d = make_disk_dataset(testutil::scratch_dir("dataset_val_bal"));
  d.m.entries.pop_back();  // drop the normal
  ValidationReport r = validate_manifest(d.m, MfccConfig{}, true, &d.source_wavs);
  CHECK_FALSE(r.ok);
  CHECK(has_violation(r, "unbalanced manifest"));
  CHECK(has_violation(r, "unbalanced cell"));
}

TEST_CASE("validator flags recorded metadata that does not match the audio") {
  DiskDataset d = make_disk_dataset(testutil::scratch_dir("dataset_val_meta"));
  d.m.entries[0].duration_s += 0.25;
  d.m.entries[1].speech_ratio += 0.05;
  ValidationReport r = validate_manifest(d.m);
  CHECK(has_violation(r, "duration mismatch"));
  CHECK(has_violation(r, "speech_ratio mismatch"));
}

TEST_CASE("validator flags sources that cross the split") {
  DiskDataset d = make_disk_dataset(testutil::scratch_dir("dataset_val_leak"));
  DatasetEntry twin = d.m.entries[0];
  twin.id = "adv-2";
  twin.split = "test";
  twin.target_class = "up";
  d.m.entries.push_back(twin);
  DatasetEntry norm2 = d.m.entries[1];
  norm2.id = "norm-2";
  norm2.split = "test";
  d.m.entries.push_back(norm2);  // id duplicate is reported separately
  ValidationReport r = validate_manifest(d.m);
  CHECK(has_violation(r, "crosses the split"));
}

TEST_CASE("validator flags normals that double as attack sources") {
  DiskDataset d = make_disk_dataset(testutil::scratch_dir("dataset_val_excl"));
  d.m.entries[0].source_id = d.m.entries[1].id;
  ValidationReport r = validate_manifest(d.m);
  CHECK(has_violation(r, "also used as attack source"));
}

TEST_CASE("validator flags normal entries carrying attack fields") {
  DiskDataset d = make_disk_dataset(testutil::scratch_dir("dataset_val_norm"));
  d.m.entries[1].attack_kind = "white_box";
  d.m.entries[1].source_id = "source_yes";
  ValidationReport r = validate_manifest(d.m);
  CHECK(has_violation(r, "normal entry with attack_kind"));
  CHECK(has_violation(r, "normal entry with source_id"));
}

TEST_CASE("validator flags clips failing the speech filter") {
  DiskDataset d = make_disk_dataset(testutil::scratch_dir("dataset_val_vad"));
  // A nearly silent clip with honest metadata still violates the filter.
  Waveform quiet;
  quiet.samples.assign(16000, 0.0);
  for (size_t i = 0; i < 2000; ++i)
    quiet.samples[i] = 0.3 * std::sin(0.05 * static_cast<double>(i));
  const std::string path = (fs::path(d.dir) / "quiet.wav").string();
  write_wav(quiet, path);
  Waveform q = read_wav(path);

  DatasetEntry e;
  e.id = "norm-quiet";
  e.wav_path = "quiet.wav";
  e.label = "normal";
  e.bucket = "yes";
  e.target_class = "none";
  e.split = "train";
  e.attack_kind = "none";
  e.duration_s = q.duration_seconds();
  e.speech_ratio = speech_ratio(q, MfccConfig{}).speech_ratio;
  REQUIRE(e.speech_ratio <= 0.68);
  d.m.entries.push_back(e);
  d.m.entries.push_back(d.m.entries[0]);
  d.m.entries.back().id = "adv-pad";  // keep balance so only the filter fires

  ValidationReport r = validate_manifest(d.m);
  CHECK(has_violation(r, "fails speech filter"));

  ValidationReport relaxed = validate_manifest(d.m, MfccConfig{}, false);
  CHECK_FALSE(has_violation(relaxed, "fails speech filter"));
}

TEST_CASE("validator flags adversarial audio identical to its source") {
  DiskDataset d = make_disk_dataset(testutil::scratch_dir("dataset_val_same"));
  // Overwrite the adversarial wav with an exact copy of the source.
  Waveform src = read_wav(d.source_wavs["source_yes"]);
  write_wav(src, (fs::path(d.dir) / d.m.entries[0].wav_path).string());
  Waveform w = read_wav((fs::path(d.dir) / d.m.entries[0].wav_path).string());
  d.m.entries[0].duration_s = w.duration_seconds();
  d.m.entries[0].speech_ratio = speech_ratio(w, MfccConfig{}).speech_ratio;
  ValidationReport r = validate_manifest(d.m, MfccConfig{}, true, &d.source_wavs);
  CHECK(has_violation(r, "identical to its source"));

  // Without source audio the check cannot run and the rest must still pass.
  ValidationReport without = validate_manifest(d.m);
  CHECK_FALSE(has_violation(without, "identical to its source"));
}

TEST_CASE("validator flags duration buckets that contradict the audio") {
  DiskDataset d = make_disk_dataset(testutil::scratch_dir("dataset_val_bkt"));
  d.m.entries[0].bucket = "medium";  // a 1 s clip is not a medium sentence
  d.m.entries[1].bucket = "medium";
  ValidationReport r = validate_manifest(d.m);
  CHECK(has_violation(r, "bucket does not match duration"));
}

TEST_CASE("dataset manifest round-trips through disk") {
  const std::string root = testutil::scratch_dir("dataset_manifest_rt");
  DatasetManifest m = synthetic_manifest(2, {"short"}, {"x", "y"});
  split_train_test(m, 0.75, 5);
  const std::string path = root + "/manifest.jsonl";
  write_dataset_manifest(m, path);
  DatasetManifest r = read_dataset_manifest(path);
  REQUIRE(r.entries.size() == m.entries.size());
  for (size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(r.entries[i].id == m.entries[i].id);
    CHECK(r.entries[i].label == m.entries[i].label);
    CHECK(r.entries[i].bucket == m.entries[i].bucket);
    CHECK(r.entries[i].target_class == m.entries[i].target_class);
    CHECK(r.entries[i].split == m.entries[i].split);
    CHECK(r.entries[i].source_id == m.entries[i].source_id);
    CHECK(r.entries[i].attack_kind == m.entries[i].attack_kind);
  }
}
