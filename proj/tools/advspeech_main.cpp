#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "advspeech/attacks.hpp"
#include "advspeech/dataset.hpp"
#include "advspeech/dataset_build.hpp"
#include "advspeech/detector.hpp"
#include "advspeech/errors.hpp"
#include "advspeech/eval.hpp"
#include "advspeech/jsonio.hpp"
#include "advspeech/pipeline.hpp"
#include "advspeech/rng.hpp"
#include "advspeech/victim.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace advspeech;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAdversarial = 3;
constexpr int kExitFailure = 4;

// "a.b.c=value" applied into nested JSON; value parsed as JSON when it is
// valid JSON, kept as a string otherwise.
void apply_override(ordered_json& j, const std::string& spec) {
  const size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key.path=value, got: " + spec);
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);

  ordered_json value;
  try {
    value = ordered_json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }

  ordered_json* node = &j;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    const std::string key = path.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("--set has an empty key in: " + spec);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

struct GlobalArgs {
  std::string config_path;
  std::string preset;
  std::string work_dir;
  uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 0;
  std::vector<std::string> overrides;
};

PipelineConfig resolve_config(const GlobalArgs& g) {
  ordered_json j = ordered_json::object();
  if (!g.config_path.empty()) j = read_json_file(g.config_path);

  // Precedence: flags > ADVSPEECH_SEED > config file.
  if (const char* env = std::getenv("ADVSPEECH_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw ConfigError(std::string("ADVSPEECH_SEED is not an integer: ") +
                        env);
    j["master_seed"] = static_cast<uint64_t>(v);
  }
  if (!g.preset.empty()) j["preset"] = g.preset;
  for (const std::string& spec : g.overrides) apply_override(j, spec);
  if (g.seed_given) j["master_seed"] = g.seed;
  if (!g.work_dir.empty()) j["work_dir"] = g.work_dir;
  if (g.jobs > 0) j["jobs"] = g.jobs;
  return pipeline_config_from_json(j);
}

std::string default_path(const PipelineConfig& cfg, const std::string& rel) {
  return (fs::path(cfg.work_dir) / rel).string();
}

void archive_config(const PipelineConfig& cfg, const std::string& out_dir) {
  write_json_file((fs::path(out_dir) / "runconfig.json").string(),
                  pipeline_config_to_json(cfg));
}

std::map<std::string, std::string> corpus_wav_index(const CorpusManifest& c) {
  std::map<std::string, std::string> index;
  for (const ClipEntry& e : c.entries)
    index[e.id] = (fs::path(c.root) / e.wav_path).string();
  return index;
}

// Entries of one split with wav paths resolved, so manifests with different
// roots can be concatenated.
DatasetManifest split_slice(const DatasetManifest& m, const std::string& split) {
  DatasetManifest out;
  for (DatasetEntry e : m.entries) {
    if (e.split != split) continue;
    e.wav_path = (fs::path(m.root) / e.wav_path).lexically_normal().string();
    out.entries.push_back(std::move(e));
  }
  return out;
}

ordered_json attack_result_json(const AttackResult& r) {
  return {{"source_id", r.source_id},
          {"target", r.target},
          {"attack_kind", r.attack_kind},
          {"success", r.success},
          {"iterations_used", r.iterations_used},
          {"final_db_relative", r.final_db_relative},
          {"wav_path", r.wav_path}};
}

int keyword_class_index(const KeywordModel& m, const std::string& name) {
  for (size_t i = 0; i < m.class_names.size(); ++i)
    if (m.class_names[i] == name) return static_cast<int>(i);
  std::string known;
  for (const std::string& c : m.class_names) known += " " + c;
  throw ConfigError("unknown target class '" + name + "'; classes:" + known);
}

int run_cli(int argc, char** argv) {
  CLI::App app{
      "Adversarial-audio detection pipeline: synthetic corpus, victim "
      "models, white/black-box attacks, dataset builds, detector training "
      "and the six-scenario evaluation."};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--config", g.config_path, "JSON run configuration file");
  app.add_option("--preset", g.preset, "Preset: desk or paper-parity");
  auto* seed_opt =
      app.add_option("--seed", g.seed, "Master seed (beats ADVSPEECH_SEED)");
  app.add_option("--jobs", g.jobs, "Worker cap for parallel stages");
  app.add_option("--work-dir", g.work_dir, "Run directory for artifacts");
  app.add_option("--set", g.overrides,
                 "Override any config key (repeatable), e.g. "
                 "--set build_b.bb.population=80")
      ->type_size(1);

  std::string arg_out, arg_corpus, arg_victim, arg_kind = "keyword";
  std::string arg_in, arg_target, arg_manifest_b, arg_detector, arg_split =
      "train";
  std::vector<std::string> arg_manifests;

  auto* c_gen = app.add_subcommand("gen-corpus", "Synthesize the corpus");
  c_gen->add_option("--out", arg_out, "Output directory");

  auto* c_victim =
      app.add_subcommand("train-victim", "Train a victim model");
  c_victim->add_option("--kind", arg_kind, "keyword or sequence")->required();
  c_victim->add_option("--corpus", arg_corpus, "Corpus manifest");
  c_victim->add_option("--out", arg_out, "Checkpoint path");

  auto* c_wb = app.add_subcommand(
      "attack-wb", "White-box attack on one WAV (sequence or keyword victim)");
  c_wb->add_option("--kind", arg_kind, "sequence or keyword");
  c_wb->add_option("--victim", arg_victim, "Victim checkpoint");
  c_wb->add_option("--in", arg_in, "Source WAV")->required();
  c_wb->add_option("--target", arg_target,
                   "Target sentence/class (short|medium|long map to the "
                   "canonical sentences)")
      ->required();
  c_wb->add_option("--out", arg_out, "Adversarial WAV path")->required();

  auto* c_bb = app.add_subcommand(
      "attack-bb", "Black-box genetic attack on one WAV (keyword victim)");
  c_bb->add_option("--victim", arg_victim, "Victim checkpoint");
  c_bb->add_option("--in", arg_in, "Source WAV")->required();
  c_bb->add_option("--target", arg_target, "Target command class")->required();
  c_bb->add_option("--out", arg_out, "Adversarial WAV path")->required();

  auto* c_build_a =
      app.add_subcommand("build-a", "Build dataset A (white-box attacks)");
  c_build_a->add_option("--corpus", arg_corpus, "Corpus manifest");
  c_build_a->add_option("--victim", arg_victim, "Sequence victim checkpoint");
  c_build_a->add_option("--out", arg_out, "Output directory");

  auto* c_build_b =
      app.add_subcommand("build-b", "Build dataset B (black-box attacks)");
  c_build_b->add_option("--corpus", arg_corpus, "Corpus manifest");
  c_build_b->add_option("--victim", arg_victim, "Keyword victim checkpoint");
  c_build_b->add_option("--out", arg_out, "Output directory");

  auto* c_validate =
      app.add_subcommand("validate-manifest", "Deep-check a dataset manifest");
  c_validate->add_option("--manifest", arg_in, "Dataset manifest")->required();
  c_validate->add_option("--corpus", arg_corpus,
                         "Corpus manifest for source comparisons");

  auto* c_det = app.add_subcommand("train-detector",
                                   "Train the detector on train splits");
  c_det->add_option("--manifest", arg_manifests,
                    "Dataset manifest (repeatable)")
      ->required()
      ->type_size(1);
  c_det->add_option("--split", arg_split, "Split to train on");
  c_det->add_option("--out", arg_out, "Checkpoint path");

  auto* c_classify =
      app.add_subcommand("classify", "Classify one WAV; exit 3 if adversarial");
  c_classify->add_option("--detector", arg_detector, "Detector checkpoint");
  c_classify->add_option("--in", arg_in, "WAV to classify")->required();

  auto* c_eval = app.add_subcommand(
      "eval", "Six-scenario protocol plus the unknown-target experiment");
  c_eval->add_option("--dataset-a", arg_corpus, "Dataset A manifest");
  c_eval->add_option("--dataset-b", arg_manifest_b, "Dataset B manifest");
  c_eval->add_option("--out", arg_out, "Output directory");

  auto* c_pipe = app.add_subcommand(
      "pipeline", "Run every stage; completed stages are skipped");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints help or the parse error
    return rc == 0 ? kExitOk : kExitConfig;
  }
  g.seed_given = seed_opt->count() > 0;
  PipelineConfig cfg = resolve_config(g);

  if (c_gen->parsed()) {
    const std::string out =
        arg_out.empty() ? default_path(cfg, "corpus") : arg_out;
    CorpusManifest m =
        synth_corpus(cfg.corpus, stage_seed(cfg.master_seed, "corpus"), out);
    archive_config(cfg, out);
    std::cout << "corpus: " << m.entries.size() << " clips under " << out
              << "\n";
    return kExitOk;
  }

  if (c_victim->parsed()) {
    const std::string corpus_path =
        arg_corpus.empty() ? default_path(cfg, "corpus/corpus_manifest.jsonl")
                           : arg_corpus;
    CorpusManifest corpus = read_corpus_manifest(corpus_path);
    ordered_json rj;
    if (arg_kind == "keyword") {
      const std::string out = arg_out.empty()
                                  ? default_path(cfg, "victims/keyword.ckpt")
                                  : arg_out;
      const uint64_t seed = stage_seed(cfg.master_seed, "victim_keyword");
      KeywordModel m =
          make_keyword_model(keyword_class_names(), cfg.keyword_mfcc, seed);
      TrainReport r = train_keyword_model(m, corpus, cfg.keyword_train, seed);
      save_keyword_model(m, out);
      rj = {{"checkpoint", out},
            {"train_accuracy", r.train_accuracy},
            {"holdout_accuracy", r.holdout_accuracy},
            {"final_loss", r.final_loss}};
    } else if (arg_kind == "sequence") {
      const std::string out = arg_out.empty()
                                  ? default_path(cfg, "victims/sequence.ckpt")
                                  : arg_out;
      const uint64_t seed = stage_seed(cfg.master_seed, "victim_sequence");
      SequenceModel m = make_sequence_model(cfg.sequence_mfcc, seed);
      TrainReport r = train_sequence_model(m, corpus, cfg.sequence_train, seed);
      save_sequence_model(m, out);
      rj = {{"checkpoint", out}, {"final_loss", r.final_loss}};
    } else {
      throw ConfigError("train-victim --kind must be keyword or sequence");
    }
    std::cout << rj.dump(2) << "\n";
    return kExitOk;
  }

  if (c_wb->parsed()) {
    const Waveform x = read_wav(arg_in);
    const std::string source_id = fs::path(arg_in).stem().string();
    AttackResult r;
    if (arg_kind == "sequence") {
      const std::string ckpt =
          arg_victim.empty() ? default_path(cfg, "victims/sequence.ckpt")
                             : arg_victim;
      SequenceModel victim = load_sequence_model(ckpt);
      std::string text = arg_target;
      for (const TargetSpec& t : sequence_targets())
        if (t.class_name == arg_target) text = t.text;
      r = attack_white_box(
          victim, x, text, cfg.build_a.wb,
          attack_seed(cfg.master_seed, "white_box", source_id, text));
    } else if (arg_kind == "keyword") {
      const std::string ckpt = arg_victim.empty()
                                   ? default_path(cfg, "victims/keyword.ckpt")
                                   : arg_victim;
      KeywordModel victim = load_keyword_model(ckpt);
      r = attack_white_box(
          victim, x, keyword_class_index(victim, arg_target), cfg.build_a.wb,
          attack_seed(cfg.master_seed, "white_box", source_id, arg_target));
    } else {
      throw ConfigError("attack-wb --kind must be sequence or keyword");
    }
    write_wav(r.adversarial, arg_out);
    r.wav_path = arg_out;
    std::cout << attack_result_json(r).dump(2) << "\n";
    return kExitOk;
  }

  if (c_bb->parsed()) {
    const std::string ckpt = arg_victim.empty()
                                 ? default_path(cfg, "victims/keyword.ckpt")
                                 : arg_victim;
    KeywordModel victim = load_keyword_model(ckpt);
    const Waveform x = read_wav(arg_in);
    const std::string source_id = fs::path(arg_in).stem().string();
    AttackResult r = attack_black_box(
        victim, x, keyword_class_index(victim, arg_target), cfg.build_b.bb,
        attack_seed(cfg.master_seed, "black_box", source_id, arg_target));
    write_wav(r.adversarial, arg_out);
    r.wav_path = arg_out;
    std::cout << attack_result_json(r).dump(2) << "\n";
    return kExitOk;
  }

  if (c_build_a->parsed() || c_build_b->parsed()) {
    const bool is_a = c_build_a->parsed();
    const std::string corpus_path =
        arg_corpus.empty() ? default_path(cfg, "corpus/corpus_manifest.jsonl")
                           : arg_corpus;
    CorpusManifest corpus = read_corpus_manifest(corpus_path);
    const std::string out =
        arg_out.empty() ? default_path(cfg, is_a ? "dataset_a" : "dataset_b")
                        : arg_out;
    BuildResult br;
    if (is_a) {
      const std::string ckpt =
          arg_victim.empty() ? default_path(cfg, "victims/sequence.ckpt")
                             : arg_victim;
      SequenceModel victim = load_sequence_model(ckpt);
      BuildAConfig bc = cfg.build_a;
      if (cfg.jobs > 0) bc.jobs = cfg.jobs;
      br = build_dataset_A(corpus, victim, hash_file(ckpt), bc,
                           stage_seed(cfg.master_seed, "dataset_a"), out);
    } else {
      const std::string ckpt = arg_victim.empty()
                                   ? default_path(cfg, "victims/keyword.ckpt")
                                   : arg_victim;
      KeywordModel victim = load_keyword_model(ckpt);
      BuildBConfig bc = cfg.build_b;
      if (cfg.jobs > 0) bc.jobs = cfg.jobs;
      br = build_dataset_B(corpus, victim, hash_file(ckpt), bc,
                           stage_seed(cfg.master_seed, "dataset_b"), out);
    }
    archive_config(cfg, out);
    for (const std::string& w : br.warnings) std::cerr << "warning: " << w
                                                       << "\n";
    std::cout << br.summary.dump(2) << "\n";
    return kExitOk;
  }

  if (c_validate->parsed()) {
    DatasetManifest m = read_dataset_manifest(arg_in);
    std::map<std::string, std::string> sources;
    const std::map<std::string, std::string>* sources_ptr = nullptr;
    if (!arg_corpus.empty()) {
      CorpusManifest corpus = read_corpus_manifest(arg_corpus);
      sources = corpus_wav_index(corpus);
      sources_ptr = &sources;
    }
    ValidationReport v = validate_manifest(m, MfccConfig{}, true, sources_ptr);
    if (!v.ok) {
      for (const std::string& viol : v.violations)
        std::cout << "violation: " << viol << "\n";
      return kExitFailure;
    }
    std::cout << "manifest OK: " << m.entries.size() << " entries\n";
    return kExitOk;
  }

  if (c_det->parsed()) {
    DatasetManifest train;
    for (const std::string& path : arg_manifests) {
      DatasetManifest m = read_dataset_manifest(path);
      DatasetManifest part = split_slice(m, arg_split);
      for (DatasetEntry& e : part.entries)
        train.entries.push_back(std::move(e));
    }
    const std::string out =
        arg_out.empty() ? default_path(cfg, "detector.ckpt") : arg_out;
    const uint64_t seed = stage_seed(cfg.master_seed, "detector");
    DetectorModel m = build_detector(cfg.eval.detector, seed);
    DetectorTrainReport r = train_detector(m, train, cfg.eval.train, seed);
    save_detector(m, out);
    ordered_json rj = {{"checkpoint", out},
                       {"entries", train.entries.size()},
                       {"parameters", detector_parameter_count(m)},
                       {"train_accuracy", r.train_accuracy}};
    std::cout << rj.dump(2) << "\n";
    return kExitOk;
  }

  if (c_classify->parsed()) {
    const std::string ckpt =
        arg_detector.empty() ? default_path(cfg, "detector.ckpt") : arg_detector;
    DetectorModel m = load_detector(ckpt);
    DetectorPrediction p = classify(m, read_wav(arg_in));
    ordered_json rj = {
        {"class_index", p.class_index},
        {"label", p.class_index == kDetectorAdversarial ? "adversarial"
                                                        : "normal"},
        {"probs", std::vector<double>(p.probs.data(),
                                      p.probs.data() + p.probs.size())}};
    std::cout << rj.dump(2) << "\n";
    return p.class_index == kDetectorAdversarial ? kExitAdversarial : kExitOk;
  }

  if (c_eval->parsed()) {
    const std::string a_path =
        arg_corpus.empty() ? default_path(cfg, "dataset_a/manifest.jsonl")
                           : arg_corpus;
    const std::string b_path =
        arg_manifest_b.empty() ? default_path(cfg, "dataset_b/manifest.jsonl")
                               : arg_manifest_b;
    DatasetManifest a = read_dataset_manifest(a_path);
    DatasetManifest b = read_dataset_manifest(b_path);
    const std::string out = arg_out.empty() ? default_path(cfg, "eval")
                                            : arg_out;
    EvalConfig ec = cfg.eval;
    if (cfg.jobs > 0) ec.jobs = cfg.jobs;
    run_eval(a, b, ec, cfg.unknown_runs, stage_seed(cfg.master_seed, "eval"),
             out);
    archive_config(cfg, out);
    std::cout << read_text_file((fs::path(out) / "eval_summary.json").string());
    return kExitOk;
  }

  if (c_pipe->parsed()) {
    PipelineResult r = run_pipeline(cfg);
    for (const StageResult& s : r.stages) {
      std::cout << (s.skipped ? "skip " : "done ") << s.name << "  "
                << s.seconds << "s\n";
      for (const std::string& w : s.warnings)
        std::cout << "  warning: " << w << "\n";
    }
    return kExitOk;
  }

  throw ConfigError("no subcommand handled");  // unreachable
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
