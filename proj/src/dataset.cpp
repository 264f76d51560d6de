#include "advspeech/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "advspeech/errors.hpp"
#include "advspeech/jsonio.hpp"
#include "advspeech/rng.hpp"
#include "advspeech/vad.hpp"

namespace fs = std::filesystem;

namespace advspeech {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kSpeechFilterThreshold = 0.68;

// Per-command synthesis recipe: a harmonic stack shaped by fixed spectral
// bumps, a pitch drift, and optional tremolo/breathiness. Classes differ in
// all four so a small CNN can separate them from MFCCs.
struct Recipe {
  double f0;
  std::vector<std::pair<double, double>> formants;  // {center_hz, weight}
  double pitch_slope;                               // relative drift per word
  double tremolo_hz;
  double breath;
};

const std::map<std::string, Recipe>& recipes() {
  static const std::map<std::string, Recipe> r = {
      {"yes", {115.0, {{500, 1.0}, {1750, 0.7}}, 0.04, 0.0, 0.0}},
      {"no", {140.0, {{420, 1.0}, {950, 0.8}}, -0.06, 0.0, 0.0}},
      {"up", {165.0, {{720, 1.0}, {2100, 0.6}}, 0.18, 0.0, 0.0}},
      {"down", {105.0, {{340, 1.0}, {1150, 0.7}}, -0.20, 0.0, 0.0}},
      {"left", {150.0, {{600, 1.0}, {1650, 0.7}, {2550, 0.4}}, 0.0, 6.0, 0.0}},
      {"right", {128.0, {{820, 1.0}, {1950, 0.6}}, 0.09, 3.0, 0.0}},
      {"on", {172.0, {{460, 1.0}, {1350, 0.8}}, -0.03, 0.0, 0.0}},
      {"off", {98.0, {{560, 1.0}, {2350, 0.5}}, 0.02, 0.0, 0.05}},
      {"stop", {124.0, {{310, 1.0}, {1020, 0.8}, {2750, 0.5}}, -0.12, 0.0, 0.0}},
      {"go", {147.0, {{660, 1.0}, {1080, 0.9}}, 0.12, 0.0, 0.0}},
  };
  return r;
}

double envelope_at(double pos, double len, double attack, double release) {
  if (pos < 0.0 || pos >= len) return 0.0;
  if (pos < attack) return 0.5 * (1.0 - std::cos(kTwoPi / 2.0 * pos / attack));
  if (pos > len - release)
    return 0.5 * (1.0 - std::cos(kTwoPi / 2.0 * (len - pos) / release));
  return 1.0;
}

// Renders one word into out[start, start+len) and returns its peak-normalized
// waveform contribution.
void render_word(std::vector<double>& out, int start, int len,
                 const Recipe& rec, double peak, int sample_rate, Rng& rng) {
  const double f0 = rec.f0 * (1.0 + rng.uniform(-0.06, 0.06));
  const double dur = static_cast<double>(len) / sample_rate;
  const double attack = 0.08 * dur;
  const double release = 0.18 * dur;

  std::vector<double> weights;
  std::vector<double> phases;
  for (int h = 1; h * f0 < 3800.0; ++h) {
    double w = 0.02 / h;
    for (const auto& [center, amp] : rec.formants) {
      const double d = (h * f0 - center) / 230.0;
      w += amp * std::exp(-d * d);
    }
    weights.push_back(w);
    phases.push_back(rng.uniform(0.0, kTwoPi));
  }

  std::vector<double> word(static_cast<size_t>(len), 0.0);
  double raw_peak = 0.0;
  for (int n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    // f(t) = f0 * (1 + slope * t / dur), integrated for the phase.
    const double phase_base = f0 * (t + rec.pitch_slope * t * t / (2.0 * dur));
    double s = 0.0;
    for (size_t h = 0; h < weights.size(); ++h)
      s += weights[h] *
           std::sin(kTwoPi * (h + 1.0) * phase_base + phases[h]);
    double env = envelope_at(t, dur, attack, release);
    if (rec.tremolo_hz > 0.0)
      env *= 1.0 - 0.25 * 0.5 * (1.0 - std::cos(kTwoPi * rec.tremolo_hz * t));
    word[static_cast<size_t>(n)] = env * s;
    raw_peak = std::max(raw_peak, std::abs(word[static_cast<size_t>(n)]));
  }

  const double gain =
      raw_peak > 0.0 ? peak * (1.0 + rng.uniform(-0.15, 0.15)) / raw_peak : 0.0;
  for (int n = 0; n < len; ++n) {
    double v = word[static_cast<size_t>(n)] * gain;
    if (rec.breath > 0.0) {
      const double t = static_cast<double>(n) / sample_rate;
      v += rec.breath * peak * envelope_at(t, dur, attack, release) *
           rng.normal();
    }
    out[static_cast<size_t>(start + n)] += v;
  }
}

// Low noise bed over the whole clip: one-pole filtered white noise so the
// spectrum is not flat. Present on every clip, normal or adversarial.
void add_noise_bed(std::vector<double>& out, Rng& rng) {
  const double amp = 0.0022 * (1.0 + rng.uniform(-0.2, 0.2));
  double state = 0.0;
  double raw_peak = 1e-12;
  std::vector<double> bed(out.size());
  for (size_t i = 0; i < out.size(); ++i) {
    state = 0.92 * state + 0.08 * rng.normal();
    bed[i] = state;
    raw_peak = std::max(raw_peak, std::abs(state));
  }
  for (size_t i = 0; i < out.size(); ++i) out[i] += bed[i] * amp / raw_peak;
}

std::string zero_pad(int v, int width) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%0*d", width, v);
  return std::string(buf);
}

nlohmann::ordered_json clip_to_json(const ClipEntry& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["wav_path"] = e.wav_path;
  j["kind"] = e.kind;
  j["class_name"] = e.class_name;
  j["transcript"] = e.transcript;
  j["duration_s"] = e.duration_s;
  j["speech_ratio"] = e.speech_ratio;
  return j;
}

ClipEntry clip_from_json(const nlohmann::ordered_json& j) {
  try {
    ClipEntry e;
    e.id = j.at("id").get<std::string>();
    e.wav_path = j.at("wav_path").get<std::string>();
    e.kind = j.at("kind").get<std::string>();
    e.class_name = j.at("class_name").get<std::string>();
    e.transcript = j.at("transcript").get<std::string>();
    e.duration_s = j.at("duration_s").get<double>();
    e.speech_ratio = j.at("speech_ratio").get<double>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("corpus manifest entry: ") + ex.what());
  }
}

nlohmann::ordered_json dataset_entry_to_json(const DatasetEntry& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["wav_path"] = e.wav_path;
  j["label"] = e.label;
  j["bucket"] = e.bucket;
  j["target_class"] = e.target_class;
  j["split"] = e.split;
  j["source_id"] = e.source_id;
  j["attack_kind"] = e.attack_kind;
  j["duration_s"] = e.duration_s;
  j["speech_ratio"] = e.speech_ratio;
  return j;
}

DatasetEntry dataset_entry_from_json(const nlohmann::ordered_json& j) {
  try {
    DatasetEntry e;
    e.id = j.at("id").get<std::string>();
    e.wav_path = j.at("wav_path").get<std::string>();
    e.label = j.at("label").get<std::string>();
    e.bucket = j.at("bucket").get<std::string>();
    e.target_class = j.at("target_class").get<std::string>();
    e.split = j.at("split").get<std::string>();
    e.source_id = j.at("source_id").get<std::string>();
    e.attack_kind = j.at("attack_kind").get<std::string>();
    e.duration_s = j.at("duration_s").get<double>();
    e.speech_ratio = j.at("speech_ratio").get<double>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("dataset manifest entry: ") + ex.what());
  }
}

}  // namespace

const std::vector<std::string>& keyword_class_names() {
  static const std::vector<std::string> names = {
      "yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go"};
  return names;
}

const std::vector<TargetSpec>& sequence_targets() {
  static const std::vector<TargetSpec> t = {
      {"short", "open all doors"},
      {"medium", "switch off wifi connection"},
      {"long",
       "i need a reservation for sixteen people at the seafood restaurant "
       "down the street"},
  };
  return t;
}

Waveform synth_keyword_clip(const std::string& class_name, uint64_t seed,
                            int sample_rate) {
  auto it = recipes().find(class_name);
  if (it == recipes().end())
    throw ConfigError("unknown keyword class: " + class_name);
  Rng rng(seed);
  const int len = sample_rate;  // all keyword clips are exactly 1 s
  std::vector<double> samples(static_cast<size_t>(len), 0.0);
  const int start = static_cast<int>(0.10 * sample_rate);
  const int active = static_cast<int>(0.78 * sample_rate);
  render_word(samples, start, active, it->second, 0.30, sample_rate, rng);
  add_noise_bed(samples, rng);
  Waveform w;
  w.samples = std::move(samples);
  w.sample_rate = sample_rate;
  w.label = class_name;
  return w;
}

Waveform synth_sentence_clip(const std::vector<std::string>& words,
                             double duration_s, uint64_t seed,
                             int sample_rate) {
  if (words.empty()) throw ConfigError("sentence needs at least one word");
  Rng rng(seed);
  const int len = static_cast<int>(std::lround(duration_s * sample_rate));
  std::vector<double> samples(static_cast<size_t>(len), 0.0);
  const int edge = static_cast<int>(0.09 * sample_rate);
  const int usable = len - 2 * edge;
  if (usable < static_cast<int>(words.size()) * sample_rate / 5)
    throw ConfigError("sentence duration too small for the word count");
  const double slot = static_cast<double>(usable) / words.size();
  for (size_t wi = 0; wi < words.size(); ++wi) {
    auto it = recipes().find(words[wi]);
    if (it == recipes().end())
      throw ConfigError("unknown keyword class: " + words[wi]);
    const int start = edge + static_cast<int>(wi * slot + 0.05 * slot);
    const int active = static_cast<int>(0.82 * slot);
    render_word(samples, start, active, it->second, 0.30, sample_rate, rng);
  }
  add_noise_bed(samples, rng);
  Waveform w;
  w.samples = std::move(samples);
  w.sample_rate = sample_rate;
  return w;
}

CorpusManifest synth_corpus(const CorpusSpec& spec, uint64_t seed,
                            const std::string& out_dir) {
  // Clip seeds derive from (seed, id), never from draw order, so corpus
  // content is insensitive to generation order.
  fs::create_directories(out_dir);

  CorpusManifest m;
  m.root = out_dir;
  const MfccConfig frame_cfg;

  // Metadata is computed on the quantized samples, i.e. exactly what a
  // reader of the written WAV will see, so independent recomputation from
  // disk reproduces the recorded values bit for bit.
  auto finish_entry = [&](ClipEntry& e, const Waveform& w) {
    const Waveform q = quantize_pcm16(w);
    e.duration_s = q.duration_seconds();
    e.speech_ratio = speech_ratio(q, frame_cfg).speech_ratio;
    m.entries.push_back(e);
  };

  for (const std::string& cls : keyword_class_names()) {
    fs::create_directories(fs::path(out_dir) / "keywords" / cls);
    for (int i = 0; i < spec.keyword_clips_per_class; ++i) {
      ClipEntry e;
      e.id = "kw_" + cls + "_" + zero_pad(i, 3);
      e.wav_path = "keywords/" + cls + "/" + e.id + ".wav";
      e.kind = "keyword";
      e.class_name = cls;
      e.transcript = cls;
      Waveform w = synth_keyword_clip(cls, mix_seed({seed, hash_string(e.id)}),
                                      spec.sample_rate);
      write_wav(w, (fs::path(out_dir) / e.wav_path).string());
      finish_entry(e, w);
    }
  }

  struct BucketDef {
    const char* name;
    double lo, hi;
    int n_words;
  };
  const BucketDef buckets[] = {
      {"short", spec.short_lo, spec.short_hi, 2},
      {"medium", spec.medium_lo, spec.medium_hi, 5},
      {"long", spec.long_lo, spec.long_hi, 9},
  };
  const auto& classes = keyword_class_names();
  for (const BucketDef& b : buckets) {
    fs::create_directories(fs::path(out_dir) / "sentences" / b.name);
    for (int i = 0; i < spec.sentences_per_bucket; ++i) {
      ClipEntry e;
      e.id = std::string("sent_") + b.name + "_" + zero_pad(i, 3);
      Rng rng(mix_seed({seed, hash_string(e.id), hash_string("plan")}));
      std::vector<std::string> words;
      for (int wi = 0; wi < b.n_words; ++wi)
        words.push_back(classes[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(classes.size()) - 1))]);
      const double dur = rng.uniform(b.lo, b.hi);
      e.wav_path = std::string("sentences/") + b.name + "/" + e.id + ".wav";
      e.kind = "sentence";
      e.class_name = "";
      std::string transcript;
      for (size_t wi = 0; wi < words.size(); ++wi)
        transcript += (wi ? " " : "") + words[wi];
      e.transcript = transcript;
      Waveform w = synth_sentence_clip(
          words, dur, mix_seed({seed, hash_string(e.id)}), spec.sample_rate);
      write_wav(w, (fs::path(out_dir) / e.wav_path).string());
      finish_entry(e, w);
    }
  }

  write_corpus_manifest(m,
                        (fs::path(out_dir) / "corpus_manifest.jsonl").string());
  return m;
}

void write_corpus_manifest(const CorpusManifest& m, const std::string& path) {
  std::vector<nlohmann::ordered_json> rows;
  rows.reserve(m.entries.size());
  for (const auto& e : m.entries) rows.push_back(clip_to_json(e));
  write_jsonl(path, rows);
}

CorpusManifest read_corpus_manifest(const std::string& path) {
  CorpusManifest m;
  m.root = fs::path(path).parent_path().string();
  for (const auto& row : read_jsonl(path)) m.entries.push_back(clip_from_json(row));
  return m;
}

void write_dataset_manifest(const DatasetManifest& m, const std::string& path) {
  std::vector<nlohmann::ordered_json> rows;
  rows.reserve(m.entries.size());
  for (const auto& e : m.entries) rows.push_back(dataset_entry_to_json(e));
  write_jsonl(path, rows);
}

DatasetManifest read_dataset_manifest(const std::string& path) {
  DatasetManifest m;
  m.root = fs::path(path).parent_path().string();
  for (const auto& row : read_jsonl(path))
    m.entries.push_back(dataset_entry_from_json(row));
  return m;
}

std::string bucket_of_duration(double duration_s) {
  if (duration_s >= 1.0 && duration_s <= 2.0) return "short";
  if (duration_s >= 3.0 && duration_s <= 4.0) return "medium";
  if (duration_s >= 6.0 && duration_s <= 7.0) return "long";
  return "";
}

BucketResult bucket_by_duration(const std::vector<ClipEntry>& files) {
  BucketResult r;
  for (const auto& e : files) {
    const std::string b = bucket_of_duration(e.duration_s);
    if (b.empty())
      r.excluded.push_back(e);
    else
      r.buckets[b].push_back(e);
  }
  return r;
}

SplitReport split_train_test(DatasetManifest& m, double train_fraction,
                             uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("split_train_test: fraction must be in (0,1)");
  if (m.entries.empty())
    throw ConfigError("split_train_test: empty manifest");

  // Lineage key: the source id for adversarial entries, the entry's own id
  // for normals. All entries of one lineage move together.
  auto lineage = [](const DatasetEntry& e) {
    return e.source_id.empty() ? e.id : e.source_id;
  };

  struct Group {
    std::string key;
    std::vector<size_t> entry_idx;
  };
  // Stratum key: (label, bucket). A lineage never spans strata because all
  // entries of one source share label and bucket.
  std::map<std::string, std::map<std::string, Group>> strata;
  for (size_t i = 0; i < m.entries.size(); ++i) {
    const DatasetEntry& e = m.entries[i];
    const std::string stratum = e.label + "|" + e.bucket;
    Group& g = strata[stratum][lineage(e)];
    g.key = lineage(e);
    g.entry_idx.push_back(i);
  }

  SplitReport report;
  std::vector<Group> deferred;  // groups from strata too small to split

  // Greedy assignment toward an entry-count target; group granularity.
  auto assign = [&](std::vector<Group>& groups, const std::string& label,
                    double target_entries) {
    Rng rng(mix_seed({seed, hash_string("split"), hash_string(label)}));
    rng.shuffle(groups);
    int64_t in_train = 0;
    for (const Group& g : groups) {
      const auto size = static_cast<int64_t>(g.entry_idx.size());
      const bool take =
          std::abs(static_cast<double>(in_train + size) - target_entries) <=
          std::abs(static_cast<double>(in_train) - target_entries);
      for (size_t idx : g.entry_idx)
        m.entries[idx].split = take ? "train" : "test";
      if (take) in_train += size;
    }
    return in_train;
  };

  auto take_groups = [](std::map<std::string, Group>& group_map) {
    std::vector<Group> groups;
    for (auto& [key, g] : group_map) groups.push_back(std::move(g));
    return groups;
  };
  auto entry_count = [](const std::vector<Group>& groups) {
    int64_t n = 0;
    for (const auto& g : groups) n += static_cast<int64_t>(g.entry_idx.size());
    return n;
  };

  // Buckets holding both labels are split pairwise: adversarial lineages are
  // assigned toward the fraction, then exactly as many normal entries join
  // the train side, so both split sides stay balanced per bucket.
  std::set<std::string> bucket_names;
  for (const auto& [name, group_map] : strata)
    bucket_names.insert(name.substr(name.find('|') + 1));

  int64_t train_total = 0;
  for (const std::string& bucket : bucket_names) {
    auto adv_it = strata.find("adversarial|" + bucket);
    auto norm_it = strata.find("normal|" + bucket);
    const bool paired = adv_it != strata.end() && norm_it != strata.end();
    if (!paired) {
      for (auto* it : {&adv_it, &norm_it}) {
        if (*it == strata.end()) continue;
        report.warnings.push_back("stratum " + (*it)->first +
                                  " has no counterpart; deferred to global");
        for (auto& g : take_groups((*it)->second)) deferred.push_back(std::move(g));
      }
      continue;
    }
    std::vector<Group> adv = take_groups(adv_it->second);
    std::vector<Group> norm = take_groups(norm_it->second);
    const int64_t adv_in_train =
        assign(adv, "adversarial|" + bucket,
               train_fraction * static_cast<double>(entry_count(adv)));
    if (adv_in_train == 0 || adv_in_train == entry_count(adv))
      report.warnings.push_back("bucket " + bucket +
                                " is too thin to cover both splits");
    if (entry_count(norm) < adv_in_train)
      report.warnings.push_back("bucket " + bucket +
                                " has fewer normals than adversarial train "
                                "entries; split sides will be unbalanced");
    const int64_t norm_in_train =
        assign(norm, "normal|" + bucket, static_cast<double>(adv_in_train));
    train_total += adv_in_train + norm_in_train;
  }
  if (!deferred.empty()) {
    const double target =
        train_fraction * static_cast<double>(entry_count(deferred));
    train_total += assign(deferred, "global", target);
  }

  report.achieved_fraction =
      static_cast<double>(train_total) / static_cast<double>(m.entries.size());
  if (std::abs(report.achieved_fraction - train_fraction) > 0.02)
    report.warnings.push_back("achieved train fraction deviates by more than 2%");
  return report;
}

ValidationReport validate_manifest(
    const DatasetManifest& m, const MfccConfig& frame_cfg,
    bool check_speech_filter,
    const std::map<std::string, std::string>* source_wavs) {
  ValidationReport r;
  auto fail = [&](const std::string& msg) {
    r.ok = false;
    r.violations.push_back(msg);
  };

  int64_t n_normal = 0, n_adv = 0;
  std::set<std::string> ids;
  std::set<std::string> normal_ids;
  std::set<std::string> adv_sources;
  std::map<std::string, std::set<std::string>> lineage_sides;
  // (split|bucket) -> {normal count, adversarial count}
  std::map<std::string, std::pair<int64_t, int64_t>> cell_counts;

  for (const DatasetEntry& e : m.entries) {
    if (!ids.insert(e.id).second) fail("duplicate id: " + e.id);
    auto& cell = cell_counts[e.split + "|" + e.bucket];
    (e.label == "normal" ? cell.first : cell.second)++;

    if (e.label == "normal") {
      ++n_normal;
      normal_ids.insert(e.id);
      if (!e.source_id.empty())
        fail("normal entry with source_id: " + e.id);
      if (e.attack_kind != "none")
        fail("normal entry with attack_kind: " + e.id);
    } else if (e.label == "adversarial") {
      ++n_adv;
      if (e.source_id.empty())
        fail("adversarial entry without source_id: " + e.id);
      adv_sources.insert(e.source_id);
      if (e.attack_kind != "white_box" && e.attack_kind != "black_box")
        fail("adversarial entry with bad attack_kind: " + e.id);
    } else {
      fail("bad label '" + e.label + "': " + e.id);
    }

    if (e.split != "train" && e.split != "test")
      fail("bad split '" + e.split + "': " + e.id);
    else
      lineage_sides[e.source_id.empty() ? e.id : e.source_id].insert(e.split);

    const std::string wav_abs =
        (fs::path(m.root) / e.wav_path).lexically_normal().string();
    Waveform w;
    try {
      w = read_wav(wav_abs);
    } catch (const std::exception& ex) {
      fail("unreadable wav for " + e.id + ": " + ex.what());
      continue;
    }
    if (std::abs(w.duration_seconds() - e.duration_s) > 1e-6)
      fail("recorded duration mismatch: " + e.id);
    const double ratio = speech_ratio(w, frame_cfg).speech_ratio;
    if (std::abs(ratio - e.speech_ratio) > 1e-6)
      fail("recorded speech_ratio mismatch: " + e.id);
    if (check_speech_filter && !(ratio > kSpeechFilterThreshold))
      fail("fails speech filter: " + e.id);

    // Duration-bucket consistency only applies to duration buckets; dataset B
    // uses command classes as buckets.
    if (e.bucket == "short" || e.bucket == "medium" || e.bucket == "long") {
      if (bucket_of_duration(e.duration_s) != e.bucket)
        fail("bucket does not match duration: " + e.id);
    }

    if (e.label == "adversarial" && source_wavs) {
      auto it = source_wavs->find(e.source_id);
      if (it == source_wavs->end()) {
        fail("unresolvable source for " + e.id + ": " + e.source_id);
      } else {
        Waveform src = read_wav(it->second);
        if (src.samples == w.samples)
          fail("adversarial wav identical to its source: " + e.id);
      }
    }
  }

  if (n_normal != n_adv)
    fail("unbalanced manifest: " + std::to_string(n_normal) + " normal vs " +
         std::to_string(n_adv) + " adversarial");
  for (const auto& [cell, counts] : cell_counts)
    if (counts.first != counts.second)
      fail("unbalanced cell " + cell + ": " + std::to_string(counts.first) +
           " normal vs " + std::to_string(counts.second) + " adversarial");

  for (const auto& [key, sides] : lineage_sides)
    if (sides.size() > 1) fail("source crosses the split: " + key);

  for (const std::string& sid : adv_sources)
    if (normal_ids.count(sid))
      fail("normal entry also used as attack source: " + sid);

  return r;
}

}  // namespace advspeech
