#include "advspeech/dataset_build.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "advspeech/errors.hpp"
#include "advspeech/jsonio.hpp"
#include "advspeech/rng.hpp"
#include "advspeech/vad.hpp"

namespace fs = std::filesystem;

namespace advspeech {

namespace {

// Relative path from the dataset directory to a corpus clip, kept lexical so
// two runs in different roots produce identical manifest bytes.
std::string relative_to(const std::string& from_dir, const std::string& path) {
  return fs::relative(fs::path(path), fs::path(from_dir)).generic_string();
}

struct FinishedDataset {
  DatasetManifest manifest;
  std::vector<std::string> warnings;
};

// Shared tail of both builders: attach normals (dropping one per failed
// attack to preserve balance), split, and persist all artifacts.
void persist(BuildResult& out, const std::string& out_dir,
             double train_fraction, uint64_t seed) {
  SplitReport split = split_train_test(out.manifest, train_fraction, seed);
  for (const auto& w : split.warnings) out.warnings.push_back(w);

  write_dataset_manifest(out.manifest,
                         (fs::path(out_dir) / "manifest.jsonl").string());
  write_attack_records(
      out.records, (fs::path(out_dir) / "attack_records.jsonl").string());
  nlohmann::ordered_json summary = out.summary;
  summary["warnings"] = out.warnings;
  write_json_file((fs::path(out_dir) / "attack_summary.json").string(),
                  summary);
}

DatasetEntry normal_entry(const ClipEntry& clip, const std::string& id_prefix,
                          const std::string& bucket,
                          const std::string& corpus_root,
                          const std::string& out_dir) {
  DatasetEntry e;
  e.id = id_prefix + clip.id;
  e.wav_path =
      relative_to(out_dir, (fs::path(corpus_root) / clip.wav_path).string());
  e.label = "normal";
  e.bucket = bucket;
  e.target_class = "none";
  e.source_id = "";
  e.attack_kind = "none";
  e.duration_s = clip.duration_s;
  e.speech_ratio = clip.speech_ratio;
  return e;
}

}  // namespace

BuildResult build_dataset_A(const CorpusManifest& corpus,
                            const SequenceModel& victim,
                            const std::string& victim_checkpoint_hash,
                            const BuildAConfig& cfg, uint64_t seed,
                            const std::string& out_dir) {
  if (cfg.n_per_bucket < 1)
    throw ConfigError("build_dataset_A: n_per_bucket must be >= 1");
  fs::create_directories(fs::path(out_dir) / "wavs");

  // Candidates: sentence clips passing the speech filter, by duration bucket.
  std::vector<ClipEntry> sentences;
  for (const ClipEntry& e : corpus.entries)
    if (e.kind == "sentence" && e.speech_ratio > cfg.speech_filter)
      sentences.push_back(e);
  BucketResult buckets = bucket_by_duration(sentences);

  const std::vector<std::string> bucket_names = {"short", "medium", "long"};
  std::string shortfall;
  for (const auto& name : bucket_names) {
    const auto have = static_cast<int>(buckets.buckets[name].size());
    if (have < 4 * cfg.n_per_bucket)
      shortfall += " bucket " + name + ": need " +
                   std::to_string(4 * cfg.n_per_bucket) + ", have " +
                   std::to_string(have) + ";";
  }
  if (!shortfall.empty())
    throw ConfigError("build_dataset_A: insufficient candidates:" + shortfall);

  // Deterministic source/normal selection per bucket.
  std::map<std::string, std::vector<ClipEntry>> attack_sources, normals;
  std::map<std::string, ClipEntry> clip_by_id;
  for (const auto& name : bucket_names) {
    std::vector<ClipEntry>& pool = buckets.buckets[name];
    std::sort(pool.begin(), pool.end(),
              [](const ClipEntry& a, const ClipEntry& b) { return a.id < b.id; });
    Rng rng(mix_seed({seed, hash_string("pick_a"), hash_string(name)}));
    rng.shuffle(pool);
    for (int i = 0; i < cfg.n_per_bucket; ++i)
      attack_sources[name].push_back(pool[static_cast<size_t>(i)]);
    for (int i = cfg.n_per_bucket; i < 4 * cfg.n_per_bucket; ++i)
      normals[name].push_back(pool[static_cast<size_t>(i)]);
    for (const ClipEntry& e : pool) clip_by_id[e.id] = e;
  }

  // Plan: every source crossed with the three fixed target sentences.
  std::vector<AttackBatchItem> plan;
  std::map<std::string, std::string> target_class_of;
  for (const TargetSpec& t : sequence_targets()) target_class_of[t.text] = t.class_name;
  for (const auto& name : bucket_names)
    for (const ClipEntry& src : attack_sources[name])
      for (const TargetSpec& t : sequence_targets()) {
        AttackBatchItem item;
        item.source_id = src.id;
        item.source_path = (fs::path(corpus.root) / src.wav_path).string();
        item.source_label = src.transcript;
        item.bucket = name;
        item.target = t.text;
        plan.push_back(item);
      }

  auto runner = [&](const AttackBatchItem& item, uint64_t attack_seed_value) {
    Waveform x = read_wav(item.source_path);
    x.label = item.source_label;
    WhiteBoxConfig wb = cfg.wb;
    AttackResult r =
        attack_white_box(victim, x, item.target, wb, attack_seed_value);
    // A success that drags the clip's speech ratio under the dataset filter
    // is retried from a tighter loudness start: quieter deltas disturb the
    // speech detector less. Two ladder steps, then it counts as failed.
    const MfccConfig frame_cfg;
    for (int retry = 0;
         retry < 2 && r.success &&
         !(speech_ratio(r.adversarial, frame_cfg).speech_ratio >
           cfg.speech_filter);
         ++retry) {
      wb.tau_db = r.success_tau_db - 4.0;
      r = attack_white_box(victim, x, item.target, wb, attack_seed_value);
    }
    r.victim_checkpoint_hash = victim_checkpoint_hash;
    return r;
  };

  BuildResult out;
  AttackBatch batch =
      batch_attack(plan, runner, "white_box", seed, cfg.jobs);
  out.summary = std::move(batch.summary);
  out.records = std::move(batch.results);

  const MfccConfig frame_cfg;
  std::map<std::string, int> failures_per_bucket;
  for (size_t i = 0; i < plan.size(); ++i) {
    AttackResult& r = out.records[i];
    const std::string& bucket = plan[i].bucket;
    const std::string& tclass = target_class_of[plan[i].target];
    const std::string adv_id = "advA-" + r.source_id + "-" + tclass;
    r.wav_path = "wavs/" + adv_id + ".wav";
    write_wav(r.adversarial, (fs::path(out_dir) / r.wav_path).string());

    if (!r.success) {
      ++failures_per_bucket[bucket];
      out.warnings.push_back("attack failed, dropping one normal: " + adv_id);
      continue;
    }
    const double ratio = speech_ratio(r.adversarial, frame_cfg).speech_ratio;
    if (!(ratio > cfg.speech_filter)) {
      ++failures_per_bucket[bucket];
      out.warnings.push_back(
          "adversarial clip fails the speech filter, dropped: " + adv_id);
      continue;
    }

    DatasetEntry e;
    e.id = adv_id;
    e.wav_path = r.wav_path;
    e.label = "adversarial";
    e.bucket = bucket;
    e.target_class = tclass;
    e.source_id = r.source_id;
    e.attack_kind = "white_box";
    e.duration_s = r.adversarial.duration_seconds();
    e.speech_ratio = ratio;
    out.manifest.entries.push_back(e);
  }

  for (const auto& name : bucket_names) {
    auto keep = static_cast<int>(normals[name].size()) -
                failures_per_bucket[name];
    if (keep < 0) {
      out.warnings.push_back("bucket " + name +
                             " has more failures than normals; clamping");
      keep = 0;
    }
    for (int i = 0; i < keep; ++i)
      out.manifest.entries.push_back(normal_entry(
          normals[name][static_cast<size_t>(i)], "normA-", name, corpus.root,
          out_dir));
  }

  out.manifest.root = out_dir;
  persist(out, out_dir, cfg.train_fraction, seed);
  return out;
}

BuildResult build_dataset_B(const CorpusManifest& corpus,
                            const KeywordModel& victim,
                            const std::string& victim_checkpoint_hash,
                            const BuildBConfig& cfg, uint64_t seed,
                            const std::string& out_dir) {
  if (cfg.n_per_command < 1)
    throw ConfigError("build_dataset_B: n_per_command must be >= 1");
  fs::create_directories(fs::path(out_dir) / "wavs");

  std::vector<std::string> commands = cfg.command_classes;
  if (commands.empty()) commands = victim.class_names;
  const auto k = static_cast<int>(commands.size());
  if (k < 2) throw ConfigError("build_dataset_B: need at least 2 commands");
  std::map<std::string, int> class_index;
  for (size_t i = 0; i < victim.class_names.size(); ++i)
    class_index[victim.class_names[i]] = static_cast<int>(i);
  for (const auto& c : commands)
    if (!class_index.count(c))
      throw ConfigError("build_dataset_B: command not in victim: " + c);

  // Candidate keyword clips per command, speech-filtered.
  std::map<std::string, std::vector<ClipEntry>> by_class;
  for (const ClipEntry& e : corpus.entries)
    if (e.kind == "keyword" && e.speech_ratio > cfg.speech_filter &&
        std::find(commands.begin(), commands.end(), e.class_name) !=
            commands.end())
      by_class[e.class_name].push_back(e);

  const int need = cfg.n_per_command * k;  // n sources + (k-1)*n normals
  std::string shortfall;
  for (const auto& c : commands) {
    const auto have = static_cast<int>(by_class[c].size());
    if (have < need)
      shortfall += " command " + c + ": need " + std::to_string(need) +
                   ", have " + std::to_string(have) + ";";
  }
  if (!shortfall.empty())
    throw ConfigError("build_dataset_B: insufficient clips:" + shortfall);

  std::map<std::string, std::vector<ClipEntry>> attack_sources, normals;
  for (const auto& c : commands) {
    std::vector<ClipEntry>& pool = by_class[c];
    std::sort(pool.begin(), pool.end(),
              [](const ClipEntry& a, const ClipEntry& b) { return a.id < b.id; });
    Rng rng(mix_seed({seed, hash_string("pick_b"), hash_string(c)}));
    rng.shuffle(pool);
    for (int i = 0; i < cfg.n_per_command; ++i)
      attack_sources[c].push_back(pool[static_cast<size_t>(i)]);
    for (int i = cfg.n_per_command; i < need; ++i)
      normals[c].push_back(pool[static_cast<size_t>(i)]);
  }

  std::vector<AttackBatchItem> plan;
  for (const auto& c : commands)
    for (const ClipEntry& src : attack_sources[c])
      for (const auto& target : commands) {
        if (target == c) continue;  // mutual targeting excludes self
        AttackBatchItem item;
        item.source_id = src.id;
        item.source_path = (fs::path(corpus.root) / src.wav_path).string();
        item.source_label = c;
        item.bucket = c;
        item.target = target;
        plan.push_back(item);
      }

  auto runner = [&](const AttackBatchItem& item, uint64_t attack_seed_value) {
    Waveform x = read_wav(item.source_path);
    x.label = item.source_label;
    AttackResult r = attack_black_box(
        victim, x, class_index.at(item.target), cfg.bb, attack_seed_value);
    r.victim_checkpoint_hash = victim_checkpoint_hash;
    return r;
  };

  BuildResult out;
  AttackBatch batch = batch_attack(plan, runner, "black_box", seed, cfg.jobs);
  out.summary = std::move(batch.summary);
  out.records = std::move(batch.results);

  const MfccConfig frame_cfg;
  std::map<std::string, int> failures_per_command;
  for (size_t i = 0; i < plan.size(); ++i) {
    AttackResult& r = out.records[i];
    const std::string& cls = plan[i].bucket;
    const std::string adv_id = "advB-" + r.source_id + "-" + plan[i].target;
    r.wav_path = "wavs/" + adv_id + ".wav";
    write_wav(r.adversarial, (fs::path(out_dir) / r.wav_path).string());

    if (!r.success) {
      ++failures_per_command[cls];
      out.warnings.push_back("attack failed, dropping one normal: " + adv_id);
      continue;
    }
    const double ratio = speech_ratio(r.adversarial, frame_cfg).speech_ratio;
    if (!(ratio > cfg.speech_filter)) {
      ++failures_per_command[cls];
      out.warnings.push_back(
          "adversarial clip fails the speech filter, dropped: " + adv_id);
      continue;
    }

    DatasetEntry e;
    e.id = adv_id;
    e.wav_path = r.wav_path;
    e.label = "adversarial";
    e.bucket = cls;
    e.target_class = plan[i].target;
    e.source_id = r.source_id;
    e.attack_kind = "black_box";
    e.duration_s = r.adversarial.duration_seconds();
    e.speech_ratio = ratio;
    out.manifest.entries.push_back(e);
  }

  for (const auto& c : commands) {
    auto keep =
        static_cast<int>(normals[c].size()) - failures_per_command[c];
    if (keep < 0) {
      out.warnings.push_back("command " + c +
                             " has more failures than normals; clamping");
      keep = 0;
    }
    for (int i = 0; i < keep; ++i)
      out.manifest.entries.push_back(normal_entry(
          normals[c][static_cast<size_t>(i)], "normB-", c, corpus.root,
          out_dir));
  }

  out.manifest.root = out_dir;
  persist(out, out_dir, cfg.train_fraction, seed);
  return out;
}

}  // namespace advspeech
