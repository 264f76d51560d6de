#include "advspeech/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <functional>

#include "advspeech/attacks.hpp"
#include "advspeech/errors.hpp"
#include "advspeech/jsonio.hpp"
#include "advspeech/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace advspeech {

namespace {

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

// Field-wise readers: only keys present in the JSON override the preset.
template <typename T>
void get_if(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ordered_json corpus_to_json(const CorpusSpec& c) {
  return {{"sample_rate", c.sample_rate},
          {"keyword_clips_per_class", c.keyword_clips_per_class},
          {"sentences_per_bucket", c.sentences_per_bucket},
          {"short_lo", c.short_lo},
          {"short_hi", c.short_hi},
          {"medium_lo", c.medium_lo},
          {"medium_hi", c.medium_hi},
          {"long_lo", c.long_lo},
          {"long_hi", c.long_hi}};
}

void corpus_from_json(const ordered_json& j, CorpusSpec& c) {
  get_if(j, "sample_rate", c.sample_rate);
  get_if(j, "keyword_clips_per_class", c.keyword_clips_per_class);
  get_if(j, "sentences_per_bucket", c.sentences_per_bucket);
  get_if(j, "short_lo", c.short_lo);
  get_if(j, "short_hi", c.short_hi);
  get_if(j, "medium_lo", c.medium_lo);
  get_if(j, "medium_hi", c.medium_hi);
  get_if(j, "long_lo", c.long_lo);
  get_if(j, "long_hi", c.long_hi);
}

void mfcc_from_json_partial(const ordered_json& j, MfccConfig& c) {
  get_if(j, "n_coeffs", c.n_coeffs);
  get_if(j, "frame_length", c.frame_length);
  get_if(j, "hop", c.hop);
  get_if(j, "n_mels", c.n_mels);
  get_if(j, "fft_size", c.fft_size);
  get_if(j, "t_max", c.t_max);
  get_if(j, "log_floor", c.log_floor);
}

ordered_json keyword_train_to_json(const KeywordTrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"holdout_fraction", c.holdout_fraction}};
}

void keyword_train_from_json(const ordered_json& j, KeywordTrainConfig& c) {
  get_if(j, "epochs", c.epochs);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "lr", c.lr);
  get_if(j, "holdout_fraction", c.holdout_fraction);
}

ordered_json sequence_train_to_json(const SequenceTrainConfig& c) {
  return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr}};
}

void sequence_train_from_json(const ordered_json& j, SequenceTrainConfig& c) {
  get_if(j, "epochs", c.epochs);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "lr", c.lr);
}

ordered_json wb_to_json(const WhiteBoxConfig& c) {
  return {{"max_iters", c.max_iters},
          {"lr", c.lr},
          {"c_init", c.c_init},
          {"tau_db", c.tau_db},
          {"tau_decay_db", c.tau_decay_db},
          {"early_stop", c.early_stop},
          {"early_stop_after", c.early_stop_after}};
}

void wb_from_json(const ordered_json& j, WhiteBoxConfig& c) {
  get_if(j, "max_iters", c.max_iters);
  get_if(j, "lr", c.lr);
  get_if(j, "c_init", c.c_init);
  get_if(j, "tau_db", c.tau_db);
  get_if(j, "tau_decay_db", c.tau_decay_db);
  get_if(j, "early_stop", c.early_stop);
  get_if(j, "early_stop_after", c.early_stop_after);
}

ordered_json bb_to_json(const BlackBoxConfig& c) {
  return {{"population", c.population},
          {"max_generations", c.max_generations},
          {"elite_count", c.elite_count},
          {"mutation_prob", c.mutation_prob},
          {"mutation_std", c.mutation_std},
          {"noise_bound", c.noise_bound},
          {"use_log_prob", c.use_log_prob}};
}

void bb_from_json(const ordered_json& j, BlackBoxConfig& c) {
  get_if(j, "population", c.population);
  get_if(j, "max_generations", c.max_generations);
  get_if(j, "elite_count", c.elite_count);
  get_if(j, "mutation_prob", c.mutation_prob);
  get_if(j, "mutation_std", c.mutation_std);
  get_if(j, "noise_bound", c.noise_bound);
  get_if(j, "use_log_prob", c.use_log_prob);
}

ordered_json build_a_to_json(const BuildAConfig& c) {
  return {{"n_per_bucket", c.n_per_bucket},
          {"train_fraction", c.train_fraction},
          {"speech_filter", c.speech_filter},
          {"white_box", wb_to_json(c.wb)}};
}

void build_a_from_json(const ordered_json& j, BuildAConfig& c) {
  get_if(j, "n_per_bucket", c.n_per_bucket);
  get_if(j, "train_fraction", c.train_fraction);
  get_if(j, "speech_filter", c.speech_filter);
  if (j.contains("white_box")) wb_from_json(j.at("white_box"), c.wb);
}

ordered_json build_b_to_json(const BuildBConfig& c) {
  return {{"command_classes", c.command_classes},
          {"n_per_command", c.n_per_command},
          {"train_fraction", c.train_fraction},
          {"speech_filter", c.speech_filter},
          {"black_box", bb_to_json(c.bb)}};
}

void build_b_from_json(const ordered_json& j, BuildBConfig& c) {
  get_if(j, "command_classes", c.command_classes);
  get_if(j, "n_per_command", c.n_per_command);
  get_if(j, "train_fraction", c.train_fraction);
  get_if(j, "speech_filter", c.speech_filter);
  if (j.contains("black_box")) bb_from_json(j.at("black_box"), c.bb);
}

ordered_json detector_to_json(const DetectorConfig& c) {
  return {{"mfcc", mfcc_config_to_json(c.mfcc)},
          {"third_activation", c.third_activation},
          {"pool3_h", c.pool3_h},
          {"pool3_w", c.pool3_w}};
}

void detector_from_json(const ordered_json& j, DetectorConfig& c) {
  if (j.contains("mfcc")) mfcc_from_json_partial(j.at("mfcc"), c.mfcc);
  get_if(j, "third_activation", c.third_activation);
  get_if(j, "pool3_h", c.pool3_h);
  get_if(j, "pool3_w", c.pool3_w);
}

ordered_json detector_train_to_json(const DetectorTrainConfig& c) {
  return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr}};
}

void detector_train_from_json(const ordered_json& j, DetectorTrainConfig& c) {
  get_if(j, "epochs", c.epochs);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "lr", c.lr);
}

ordered_json eval_to_json(const EvalConfig& c) {
  return {{"detector", detector_to_json(c.detector)},
          {"train", detector_train_to_json(c.train)},
          {"runs", c.runs}};
}

void eval_from_json(const ordered_json& j, EvalConfig& c) {
  if (j.contains("detector")) detector_from_json(j.at("detector"), c.detector);
  if (j.contains("train")) detector_train_from_json(j.at("train"), c.train);
  get_if(j, "runs", c.runs);
}

}  // namespace

PipelineConfig desk_preset() {
  PipelineConfig cfg;
  cfg.preset = "desk";
  cfg.master_seed = 1;
  cfg.work_dir = "runs/desk";

  cfg.keyword_mfcc.t_max = 98;  // 1.0 s keyword clips are exactly 98 frames
  cfg.keyword_train.epochs = 8;
  cfg.keyword_train.holdout_fraction = 0.1;

  cfg.sequence_train.epochs = 120;

  cfg.build_a.n_per_bucket = 12;
  cfg.build_a.wb.max_iters = 300;
  cfg.build_a.wb.lr = 0.05;
  cfg.build_a.wb.early_stop = true;
  cfg.build_a.wb.early_stop_after = 3;

  cfg.build_b.command_classes = {"yes", "no", "up", "down", "go"};
  cfg.build_b.n_per_command = 4;
  cfg.build_b.bb.population = 50;
  cfg.build_b.bb.max_generations = 400;
  cfg.build_b.bb.elite_count = 6;
  cfg.build_b.bb.mutation_prob = 0.01;
  cfg.build_b.bb.mutation_std = 0.008;
  cfg.build_b.bb.noise_bound = 0.035;

  cfg.eval.detector.mfcc.hop = 2560;  // long clips fit 44 frames
  cfg.eval.detector.mfcc.t_max = 44;
  cfg.eval.train.epochs = 30;
  cfg.eval.runs = 5;
  cfg.unknown_runs = 3;
  return cfg;
}

PipelineConfig paper_parity_preset() {
  PipelineConfig cfg;
  cfg.preset = "paper-parity";
  cfg.master_seed = 1;
  cfg.work_dir = "runs/paper-parity";

  cfg.corpus.keyword_clips_per_class = 2000;
  cfg.corpus.sentences_per_bucket = 400;

  cfg.keyword_mfcc.t_max = 98;
  cfg.keyword_train.epochs = 30;
  cfg.sequence_train.epochs = 500;

  cfg.build_a.n_per_bucket = 50;
  // Attack defaults already match the full-scale settings.

  cfg.build_b.n_per_command = 25;  // all 10 commands, mutual targeting

  cfg.eval.detector.mfcc.t_max = 698;
  cfg.eval.train.epochs = 100;
  cfg.eval.runs = 10;
  cfg.unknown_runs = 10;
  return cfg;
}

nlohmann::ordered_json pipeline_config_to_json(const PipelineConfig& cfg) {
  ordered_json j;
  j["master_seed"] = cfg.master_seed;
  j["preset"] = cfg.preset;
  j["work_dir"] = cfg.work_dir;
  j["jobs"] = cfg.jobs;
  j["corpus"] = corpus_to_json(cfg.corpus);
  j["keyword_mfcc"] = mfcc_config_to_json(cfg.keyword_mfcc);
  j["keyword_train"] = keyword_train_to_json(cfg.keyword_train);
  j["sequence_mfcc"] = mfcc_config_to_json(cfg.sequence_mfcc);
  j["sequence_train"] = sequence_train_to_json(cfg.sequence_train);
  j["build_a"] = build_a_to_json(cfg.build_a);
  j["build_b"] = build_b_to_json(cfg.build_b);
  j["eval"] = eval_to_json(cfg.eval);
  j["unknown_runs"] = cfg.unknown_runs;
  return j;
}

PipelineConfig pipeline_config_from_json(const nlohmann::ordered_json& j) {
  std::string preset = "desk";
  get_if(j, "preset", preset);
  PipelineConfig cfg;
  if (preset == "desk") {
    cfg = desk_preset();
  } else if (preset == "paper-parity") {
    cfg = paper_parity_preset();
  } else {
    throw ConfigError("unknown preset: " + preset);
  }
  get_if(j, "master_seed", cfg.master_seed);
  get_if(j, "work_dir", cfg.work_dir);
  get_if(j, "jobs", cfg.jobs);
  if (j.contains("corpus")) corpus_from_json(j.at("corpus"), cfg.corpus);
  if (j.contains("keyword_mfcc"))
    mfcc_from_json_partial(j.at("keyword_mfcc"), cfg.keyword_mfcc);
  if (j.contains("keyword_train"))
    keyword_train_from_json(j.at("keyword_train"), cfg.keyword_train);
  if (j.contains("sequence_mfcc"))
    mfcc_from_json_partial(j.at("sequence_mfcc"), cfg.sequence_mfcc);
  if (j.contains("sequence_train"))
    sequence_train_from_json(j.at("sequence_train"), cfg.sequence_train);
  if (j.contains("build_a")) build_a_from_json(j.at("build_a"), cfg.build_a);
  if (j.contains("build_b")) build_b_from_json(j.at("build_b"), cfg.build_b);
  if (j.contains("eval")) eval_from_json(j.at("eval"), cfg.eval);
  get_if(j, "unknown_runs", cfg.unknown_runs);
  return cfg;
}

uint64_t stage_seed(uint64_t master_seed, const std::string& stage) {
  return mix_seed({master_seed, hash_string(stage)});
}

namespace {

struct StageRunner {
  const PipelineConfig& cfg;
  fs::path work;
  PipelineResult& result;

  // Runs `body` unless the stamp proves identical config and intact outputs.
  // `body` returns the stage's output files (relative to the work dir).
  void stage(const std::string& name, const ordered_json& stage_config,
             const std::vector<std::string>& input_files,
             const std::function<std::vector<std::string>()>& body) {
    StageResult sr;
    sr.name = name;
    const double t0 = now_seconds();

    ordered_json key;
    key["config"] = stage_config;
    ordered_json inputs = ordered_json::object();
    for (const std::string& rel : input_files) {
      const fs::path p = work / rel;
      if (!fs::exists(p))
        throw ConfigError("stage " + name + ": missing input: " + rel);
      inputs[rel] = hash_file(p.string());
    }
    key["inputs"] = inputs;
    const std::string config_hash = hash_text(key.dump());

    const fs::path stamp_path = work / "stamps" / (name + ".json");
    const fs::path failed_path = work / "stamps" / (name + ".failed.json");
    if (fs::exists(stamp_path)) {
      bool valid = true;
      try {
        ordered_json stamp = read_json_file(stamp_path.string());
        if (stamp.at("config_hash").get<std::string>() != config_hash) {
          sr.warnings.push_back("config or inputs changed; re-running");
          valid = false;
        } else {
          for (const auto& [rel, h] : stamp.at("outputs").items()) {
            const fs::path p = work / rel;
            if (!fs::exists(p) || hash_file(p.string()) != h.get<std::string>()) {
              sr.warnings.push_back("output " + rel +
                                    " missing or corrupted; re-running");
              valid = false;
              break;
            }
          }
        }
      } catch (const std::exception& e) {
        sr.warnings.push_back(std::string("unreadable stamp; re-running: ") +
                              e.what());
        valid = false;
      }
      if (valid) {
        sr.skipped = true;
        sr.seconds = now_seconds() - t0;
        result.stages.push_back(std::move(sr));
        return;
      }
    }

    std::vector<std::string> outputs;
    try {
      outputs = body();
    } catch (const std::exception& e) {
      ordered_json marker;
      marker["stage"] = name;
      marker["error"] = e.what();
      atomic_write_text(failed_path.string(), marker.dump(2) + "\n");
      throw;
    }

    ordered_json stamp;
    stamp["config_hash"] = config_hash;
    ordered_json outs = ordered_json::object();
    for (const std::string& rel : outputs)
      outs[rel] = hash_file((work / rel).string());
    stamp["outputs"] = outs;
    atomic_write_text(stamp_path.string(), stamp.dump(2) + "\n");
    fs::remove(failed_path);

    sr.seconds = now_seconds() - t0;
    result.stages.push_back(std::move(sr));
  }
};

void require_valid(const DatasetManifest& m, const std::string& name,
                   const std::map<std::string, std::string>& source_wavs) {
  ValidationReport v = validate_manifest(m, MfccConfig{}, true, &source_wavs);
  if (!v.ok) {
    std::string msg = "generated manifest " + name + " fails validation:";
    for (const auto& viol : v.violations) msg += "\n  " + viol;
    throw ConfigError(msg);
  }
}

std::map<std::string, std::string> corpus_wav_index(const CorpusManifest& c) {
  std::map<std::string, std::string> index;
  for (const ClipEntry& e : c.entries)
    index[e.id] = (fs::path(c.root) / e.wav_path).string();
  return index;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  if (cfg.jobs < 1) throw ConfigError("pipeline: jobs must be >= 1");
  PipelineResult result;
  const fs::path work(cfg.work_dir);
  fs::create_directories(work / "stamps");

  // The exact configuration that produced this directory's artifacts.
  atomic_write_text((work / "runconfig.json").string(),
                    pipeline_config_to_json(cfg).dump(2) + "\n");

  StageRunner runner{cfg, work, result};

  ordered_json corpus_cfg;
  corpus_cfg["spec"] = corpus_to_json(cfg.corpus);
  corpus_cfg["seed"] = stage_seed(cfg.master_seed, "corpus");
  runner.stage("corpus", corpus_cfg, {}, [&] {
    synth_corpus(cfg.corpus, stage_seed(cfg.master_seed, "corpus"),
                 (work / "corpus").string());
    return std::vector<std::string>{"corpus/corpus_manifest.jsonl"};
  });

  ordered_json kw_cfg;
  kw_cfg["mfcc"] = mfcc_config_to_json(cfg.keyword_mfcc);
  kw_cfg["train"] = keyword_train_to_json(cfg.keyword_train);
  kw_cfg["seed"] = stage_seed(cfg.master_seed, "victim_keyword");
  runner.stage("victim_keyword", kw_cfg, {"corpus/corpus_manifest.jsonl"}, [&] {
    CorpusManifest corpus =
        read_corpus_manifest((work / "corpus/corpus_manifest.jsonl").string());
    const uint64_t seed = stage_seed(cfg.master_seed, "victim_keyword");
    KeywordModel model =
        make_keyword_model(keyword_class_names(), cfg.keyword_mfcc, seed);
    TrainReport report =
        train_keyword_model(model, corpus, cfg.keyword_train, seed);
    fs::create_directories(work / "victims");
    save_keyword_model(model, (work / "victims/keyword.ckpt").string());
    ordered_json rj;
    rj["train_accuracy"] = report.train_accuracy;
    rj["holdout_accuracy"] = report.holdout_accuracy;
    rj["final_loss"] = report.final_loss;
    rj["epochs"] = report.epochs;
    write_json_file((work / "victims/keyword_train.json").string(), rj);
    return std::vector<std::string>{"victims/keyword.ckpt",
                                    "victims/keyword_train.json"};
  });

  ordered_json seq_cfg;
  seq_cfg["mfcc"] = mfcc_config_to_json(cfg.sequence_mfcc);
  seq_cfg["train"] = sequence_train_to_json(cfg.sequence_train);
  seq_cfg["seed"] = stage_seed(cfg.master_seed, "victim_sequence");
  runner.stage("victim_sequence", seq_cfg, {"corpus/corpus_manifest.jsonl"}, [&] {
    CorpusManifest corpus =
        read_corpus_manifest((work / "corpus/corpus_manifest.jsonl").string());
    const uint64_t seed = stage_seed(cfg.master_seed, "victim_sequence");
    SequenceModel model = make_sequence_model(cfg.sequence_mfcc, seed);
    TrainReport report =
        train_sequence_model(model, corpus, cfg.sequence_train, seed);
    fs::create_directories(work / "victims");
    save_sequence_model(model, (work / "victims/sequence.ckpt").string());
    ordered_json rj;
    rj["final_loss"] = report.final_loss;
    rj["epochs"] = report.epochs;
    write_json_file((work / "victims/sequence_train.json").string(), rj);
    return std::vector<std::string>{"victims/sequence.ckpt",
                                    "victims/sequence_train.json"};
  });

  ordered_json a_cfg;
  a_cfg["build"] = build_a_to_json(cfg.build_a);
  a_cfg["seed"] = stage_seed(cfg.master_seed, "dataset_a");
  runner.stage(
      "dataset_a", a_cfg,
      {"corpus/corpus_manifest.jsonl", "victims/sequence.ckpt"}, [&] {
        CorpusManifest corpus = read_corpus_manifest(
            (work / "corpus/corpus_manifest.jsonl").string());
        SequenceModel victim =
            load_sequence_model((work / "victims/sequence.ckpt").string());
        BuildAConfig bc = cfg.build_a;
        bc.jobs = cfg.jobs;
        build_dataset_A(corpus, victim,
                        hash_file((work / "victims/sequence.ckpt").string()),
                        bc, stage_seed(cfg.master_seed, "dataset_a"),
                        (work / "dataset_a").string());
        DatasetManifest m = read_dataset_manifest(
            (work / "dataset_a/manifest.jsonl").string());
        require_valid(m, "dataset_a", corpus_wav_index(corpus));
        return std::vector<std::string>{"dataset_a/manifest.jsonl",
                                        "dataset_a/attack_records.jsonl",
                                        "dataset_a/attack_summary.json"};
      });

  ordered_json b_cfg;
  b_cfg["build"] = build_b_to_json(cfg.build_b);
  b_cfg["seed"] = stage_seed(cfg.master_seed, "dataset_b");
  runner.stage(
      "dataset_b", b_cfg,
      {"corpus/corpus_manifest.jsonl", "victims/keyword.ckpt"}, [&] {
        CorpusManifest corpus = read_corpus_manifest(
            (work / "corpus/corpus_manifest.jsonl").string());
        KeywordModel victim =
            load_keyword_model((work / "victims/keyword.ckpt").string());
        BuildBConfig bc = cfg.build_b;
        bc.jobs = cfg.jobs;
        build_dataset_B(corpus, victim,
                        hash_file((work / "victims/keyword.ckpt").string()),
                        bc, stage_seed(cfg.master_seed, "dataset_b"),
                        (work / "dataset_b").string());
        DatasetManifest m = read_dataset_manifest(
            (work / "dataset_b/manifest.jsonl").string());
        require_valid(m, "dataset_b", corpus_wav_index(corpus));
        return std::vector<std::string>{"dataset_b/manifest.jsonl",
                                        "dataset_b/attack_records.jsonl",
                                        "dataset_b/attack_summary.json"};
      });

  ordered_json e_cfg;
  e_cfg["eval"] = eval_to_json(cfg.eval);
  e_cfg["unknown_runs"] = cfg.unknown_runs;
  e_cfg["seed"] = stage_seed(cfg.master_seed, "eval");
  runner.stage(
      "eval", e_cfg, {"dataset_a/manifest.jsonl", "dataset_b/manifest.jsonl"},
      [&] {
        DatasetManifest a = read_dataset_manifest(
            (work / "dataset_a/manifest.jsonl").string());
        DatasetManifest b = read_dataset_manifest(
            (work / "dataset_b/manifest.jsonl").string());
        EvalConfig ec = cfg.eval;
        ec.jobs = cfg.jobs;
        std::vector<std::string> names =
            run_eval(a, b, ec, cfg.unknown_runs,
                     stage_seed(cfg.master_seed, "eval"),
                     (work / "eval").string());
        std::vector<std::string> outputs;
        for (const std::string& n : names) outputs.push_back("eval/" + n);
        return outputs;
      });

  return result;
}

std::vector<std::string> run_eval(const DatasetManifest& a,
                                  const DatasetManifest& b,
                                  const EvalConfig& cfg, int unknown_runs,
                                  uint64_t eval_seed,
                                  const std::string& out_dir) {
  const fs::path out(out_dir);
  fs::create_directories(out);
  std::vector<std::string> names;

  std::vector<ScenarioReport> reports = run_all_scenarios(a, b, cfg, eval_seed);
  ordered_json summary;
  ordered_json js = ordered_json::array();
  for (const ScenarioReport& r : reports) {
    const std::string name = "scenario_" + std::to_string(r.id) + ".json";
    write_json_file((out / name).string(), scenario_report_to_json(r));
    names.push_back(name);
    js.push_back({{"id", r.id},
                  {"mean_accuracy", r.mean_accuracy},
                  {"ci95_halfwidth", r.ci95_halfwidth}});
  }
  summary["scenarios"] = std::move(js);

  // Command-by-target matrix for the (train B, test B) scenario.
  atomic_write_text((out / "breakdown_b.csv").string(),
                    breakdown_to_csv(reports[3]));
  names.push_back("breakdown_b.csv");

  EvalConfig uc = cfg;
  uc.runs = unknown_runs;
  ordered_json ju = ordered_json::array();
  ordered_json ju_summary = ordered_json::array();
  for (const TargetSpec& t : sequence_targets()) {
    UnknownTargetReport r = unknown_target_experiment(
        a, t.class_name, uc,
        mix_seed({eval_seed, hash_string("unknown"),
                  hash_string(t.class_name)}));
    ju.push_back(unknown_target_report_to_json(r));
    ju_summary.push_back(
        {{"held_out", r.held_out}, {"mean_accuracy", r.mean_accuracy}});
  }
  ordered_json unknown_doc;
  unknown_doc["configurations"] = std::move(ju);
  write_json_file((out / "unknown_target.json").string(), unknown_doc);
  names.push_back("unknown_target.json");
  summary["unknown_target"] = std::move(ju_summary);

  write_json_file((out / "eval_summary.json").string(), summary);
  names.push_back("eval_summary.json");
  return names;
}

}  // namespace advspeech
