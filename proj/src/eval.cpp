#include "advspeech/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>

#include "advspeech/errors.hpp"
#include "advspeech/pool.hpp"
#include "advspeech/rng.hpp"

namespace fs = std::filesystem;

namespace advspeech {

namespace {

std::string lineage_of(const DatasetEntry& e) {
  return e.source_id.empty() ? e.id : e.source_id;
}

// Entries of one split with wav paths resolved against the dataset root, so
// subsets from different datasets can be concatenated.
std::vector<DatasetEntry> split_entries(const DatasetManifest& m,
                                        const std::string& split) {
  std::vector<DatasetEntry> out;
  for (const DatasetEntry& e : m.entries)
    if (e.split == split) {
      DatasetEntry r = e;
      r.wav_path =
          (fs::path(m.root) / e.wav_path).lexically_normal().string();
      out.push_back(std::move(r));
    }
  return out;
}

DatasetManifest as_manifest(std::vector<DatasetEntry> entries) {
  DatasetManifest m;
  m.root = "";  // wav paths are pre-resolved
  m.entries = std::move(entries);
  return m;
}

// Machine-proved before any training: no source may appear on both sides.
void prove_no_leakage(const std::vector<DatasetEntry>& train,
                      const std::vector<DatasetEntry>& test,
                      const std::string& context) {
  std::set<std::string> train_sources;
  for (const DatasetEntry& e : train) train_sources.insert(lineage_of(e));
  std::vector<std::string> shared;
  for (const DatasetEntry& e : test)
    if (train_sources.count(lineage_of(e))) shared.push_back(lineage_of(e));
  std::sort(shared.begin(), shared.end());
  shared.erase(std::unique(shared.begin(), shared.end()), shared.end());
  if (!shared.empty()) {
    std::string proof;
    for (const auto& s : shared) proof += " " + s;
    throw ConfigError("leakage in " + context +
                      ": sources on both sides of the split:" + proof);
  }
}

void prefill_features(const DetectorModel& probe,
                      const std::vector<const DatasetEntry*>& entries,
                      FeatureCache& cache, int jobs) {
  std::vector<const DatasetEntry*> missing;
  for (const DatasetEntry* e : entries)
    if (!cache.count(e->id)) missing.push_back(e);
  std::sort(missing.begin(), missing.end(),
            [](const DatasetEntry* a, const DatasetEntry* b) {
              return a->id < b->id;
            });
  missing.erase(std::unique(missing.begin(), missing.end(),
                            [](const DatasetEntry* a, const DatasetEntry* b) {
                              return a->id == b->id;
                            }),
                missing.end());
  std::vector<Tensor> computed(missing.size());
  run_indexed_jobs(jobs, static_cast<int>(missing.size()), [&](int i) {
    computed[static_cast<size_t>(i)] = detector_features(
        probe, read_wav(missing[static_cast<size_t>(i)]->wav_path));
  });
  for (size_t i = 0; i < missing.size(); ++i)
    cache.emplace(missing[i]->id, std::move(computed[i]));
}

struct RunOutcome {
  double accuracy = 0.0;
  // per test entry: was the prediction correct
  std::vector<bool> correct;
};

DetectorModel train_one(const std::vector<DatasetEntry>& train,
                        const EvalConfig& cfg, uint64_t run_seed,
                        const FeatureCache& features) {
  DetectorModel det = build_detector(cfg.detector, run_seed);
  FeatureCache local = features;  // prefetched; copy keeps runs independent
  train_detector(det, as_manifest(train), cfg.train, run_seed, &local);
  return det;
}

RunOutcome evaluate_entries(const DetectorModel& det,
                            const std::vector<DatasetEntry>& test,
                            const FeatureCache& features) {
  RunOutcome out;
  out.correct.resize(test.size());
  int64_t n_correct = 0;
  for (size_t i = 0; i < test.size(); ++i) {
    const DatasetEntry& e = test[i];
    auto it = features.find(e.id);
    const Tensor feats = it != features.end()
                             ? it->second
                             : detector_features(det, read_wav(e.wav_path));
    const int want = e.label == "adversarial" ? kDetectorAdversarial
                                              : kDetectorNormal;
    const bool ok = classify_features(det, feats).class_index == want;
    out.correct[i] = ok;
    if (ok) ++n_correct;
  }
  out.accuracy =
      static_cast<double>(n_correct) / static_cast<double>(test.size());
  return out;
}

RunOutcome evaluate_run(const std::vector<DatasetEntry>& train,
                        const std::vector<DatasetEntry>& test,
                        const EvalConfig& cfg, uint64_t run_seed,
                        const FeatureCache& features) {
  return evaluate_entries(train_one(train, cfg, run_seed, features), test,
                          features);
}

// Pooled-over-runs breakdown: each adversarial test entry lands in cell
// (bucket, target_class); normals pair with every cell of their bucket.
void fill_breakdown(ScenarioReport& report,
                    const std::vector<DatasetEntry>& test,
                    const std::vector<RunOutcome>& outcomes) {
  struct Tally {
    int64_t adv = 0, total = 0, correct = 0;
  };
  std::map<std::string, std::map<std::string, Tally>> cells;
  std::map<std::string, std::vector<size_t>> normals_by_bucket;
  for (size_t i = 0; i < test.size(); ++i)
    if (test[i].label == "normal")
      normals_by_bucket[test[i].bucket].push_back(i);

  for (const RunOutcome& run : outcomes) {
    for (size_t i = 0; i < test.size(); ++i) {
      const DatasetEntry& e = test[i];
      if (e.label != "adversarial") continue;
      Tally& t = cells[e.bucket][e.target_class];
      t.adv += 1;
      t.total += 1;
      t.correct += run.correct[i] ? 1 : 0;
    }
    for (auto& [bucket, row] : cells)
      for (auto& [target, t] : row)
        for (size_t i : normals_by_bucket[bucket]) {
          t.total += 1;
          t.correct += run.correct[i] ? 1 : 0;
        }
  }

  const auto n_runs = static_cast<int64_t>(outcomes.size());
  for (const auto& [bucket, row] : cells)
    for (const auto& [target, t] : row) {
      BreakdownCell cell;
      cell.n_adversarial = t.adv / n_runs;
      cell.n_total = t.total / n_runs;
      cell.accuracy =
          static_cast<double>(t.correct) / static_cast<double>(t.total);
      report.breakdown[bucket][target] = cell;
    }
}

std::vector<double> collect_accuracies(const std::vector<RunOutcome>& runs) {
  std::vector<double> acc(runs.size());
  for (size_t i = 0; i < runs.size(); ++i) acc[i] = runs[i].accuracy;
  return acc;
}

ScenarioReport compose_report(int id, const std::vector<DatasetEntry>& test,
                              const std::vector<RunOutcome>& outcomes) {
  ScenarioReport report;
  report.id = id;
  report.runs = static_cast<int>(outcomes.size());
  report.accuracies = collect_accuracies(outcomes);
  if (report.runs >= 2) {
    std::tie(report.mean_accuracy, report.ci95_halfwidth) =
        ci95(report.accuracies);
  } else {
    report.mean_accuracy = report.accuracies[0];
    report.ci95_halfwidth = 0.0;
  }
  fill_breakdown(report, test, outcomes);
  return report;
}

std::string train_signature(const std::vector<std::string>& train_sets) {
  std::string sig;
  for (const auto& s : train_sets) {
    if (!sig.empty()) sig += "+";
    sig += s;
  }
  return sig;
}

}  // namespace

std::vector<ScenarioSpec> table_scenarios() {
  return {{1, {"A"}, "A"},      {2, {"A"}, "B"}, {3, {"B"}, "A"},
          {4, {"B"}, "B"},      {5, {"A", "B"}, "A"},
          {6, {"A", "B"}, "B"}};
}

std::pair<double, double> ci95(const std::vector<double>& accuracies) {
  const auto n = static_cast<int64_t>(accuracies.size());
  if (n < 2) throw ConfigError("ci95: need at least 2 values");
  double mean = 0.0;
  for (double a : accuracies) mean += a;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double a : accuracies) ss += (a - mean) * (a - mean);
  const double stdev = std::sqrt(ss / static_cast<double>(n - 1));
  return {mean, 1.96 * stdev / std::sqrt(static_cast<double>(n))};
}

ScenarioReport run_scenario(const ScenarioSpec& spec, const DatasetManifest& a,
                            const DatasetManifest& b, const EvalConfig& cfg,
                            uint64_t base_seed) {
  if (spec.train_sets.empty())
    throw ConfigError("run_scenario: no training sets");
  if (cfg.runs < 1) throw ConfigError("run_scenario: runs must be >= 1");
  auto dataset_of = [&](const std::string& name) -> const DatasetManifest& {
    if (name == "A") return a;
    if (name == "B") return b;
    throw ConfigError("run_scenario: unknown dataset name: " + name);
  };

  std::vector<DatasetEntry> train;
  for (const std::string& name : spec.train_sets) {
    std::vector<DatasetEntry> part = split_entries(dataset_of(name), "train");
    train.insert(train.end(), part.begin(), part.end());
  }
  std::vector<DatasetEntry> test =
      split_entries(dataset_of(spec.test_set), "test");
  if (train.empty() || test.empty())
    throw ConfigError("run_scenario: empty train or test side");
  prove_no_leakage(train, test,
                   "scenario " + std::to_string(spec.id));

  FeatureCache features;
  DetectorModel probe = build_detector(cfg.detector, base_seed);
  std::vector<const DatasetEntry*> all;
  for (const auto& e : train) all.push_back(&e);
  for (const auto& e : test) all.push_back(&e);
  prefill_features(probe, all, features, cfg.jobs);

  std::vector<RunOutcome> outcomes(static_cast<size_t>(cfg.runs));
  run_indexed_jobs(cfg.jobs, cfg.runs, [&](int r) {
    outcomes[static_cast<size_t>(r)] = evaluate_run(
        train, test, cfg, base_seed + static_cast<uint64_t>(r), features);
  });
  return compose_report(spec.id, test, outcomes);
}

uint64_t scenario_base_seed(uint64_t eval_seed,
                            const std::vector<std::string>& train_sets) {
  return mix_seed(
      {eval_seed, hash_string("train"), hash_string(train_signature(train_sets))});
}

std::vector<ScenarioReport> run_all_scenarios(const DatasetManifest& a,
                                              const DatasetManifest& b,
                                              const EvalConfig& cfg,
                                              uint64_t eval_seed) {
  if (cfg.runs < 1) throw ConfigError("run_all_scenarios: runs must be >= 1");
  const std::vector<ScenarioSpec> specs = table_scenarios();

  FeatureCache features;
  DetectorModel probe = build_detector(cfg.detector, eval_seed);
  std::vector<DatasetEntry> everything;
  for (const auto* m : {&a, &b})
    for (const char* split : {"train", "test"}) {
      std::vector<DatasetEntry> part = split_entries(*m, split);
      everything.insert(everything.end(), part.begin(), part.end());
    }
  std::vector<const DatasetEntry*> all;
  for (const auto& e : everything) all.push_back(&e);
  prefill_features(probe, all, features, cfg.jobs);

  // One detector per (train set, run), shared by scenarios with that train set.
  std::map<std::string, std::vector<const ScenarioSpec*>> groups;
  for (const ScenarioSpec& s : specs)
    groups[train_signature(s.train_sets)].push_back(&s);

  auto dataset_of = [&](const std::string& name) -> const DatasetManifest& {
    return name == "A" ? a : b;
  };

  std::vector<ScenarioReport> reports(specs.size());
  for (const auto& [sig, group] : groups) {
    std::vector<DatasetEntry> train;
    for (const std::string& name : group[0]->train_sets) {
      std::vector<DatasetEntry> part = split_entries(dataset_of(name), "train");
      train.insert(train.end(), part.begin(), part.end());
    }
    std::vector<std::vector<DatasetEntry>> tests(group.size());
    for (size_t g = 0; g < group.size(); ++g) {
      tests[g] = split_entries(dataset_of(group[g]->test_set), "test");
      prove_no_leakage(train, tests[g],
                       "scenario " + std::to_string(group[g]->id));
    }

    const uint64_t base = scenario_base_seed(eval_seed, group[0]->train_sets);
    std::vector<std::vector<RunOutcome>> outcomes(
        group.size(), std::vector<RunOutcome>(static_cast<size_t>(cfg.runs)));
    run_indexed_jobs(cfg.jobs, cfg.runs, [&](int r) {
      DetectorModel det =
          train_one(train, cfg, base + static_cast<uint64_t>(r), features);
      for (size_t g = 0; g < group.size(); ++g)
        outcomes[g][static_cast<size_t>(r)] =
            evaluate_entries(det, tests[g], features);
    });
    for (size_t g = 0; g < group.size(); ++g)
      reports[static_cast<size_t>(group[g]->id - 1)] =
          compose_report(group[g]->id, tests[g], outcomes[g]);
  }
  return reports;
}

UnknownTargetReport unknown_target_experiment(const DatasetManifest& a,
                                              const std::string& held_out,
                                              const EvalConfig& cfg,
                                              uint64_t base_seed) {
  if (cfg.runs < 1)
    throw ConfigError("unknown_target_experiment: runs must be >= 1");
  std::vector<std::string> classes;
  for (const TargetSpec& t : sequence_targets()) classes.push_back(t.class_name);
  if (std::find(classes.begin(), classes.end(), held_out) == classes.end())
    throw ConfigError("unknown_target_experiment: unknown target class: " +
                      held_out);

  // Train: adversarial entries of the other two target classes from the train
  // split, plus an equal count of train normals per bucket. Test: the held-out
  // class from the test split plus matched test normals. Reusing the split
  // keeps sources disjoint even though each source was attacked with every
  // target.
  std::vector<DatasetEntry> train_all = split_entries(a, "train");
  std::vector<DatasetEntry> test_all = split_entries(a, "test");

  auto build_side = [&](const std::vector<DatasetEntry>& all,
                        auto&& keep_target) {
    std::vector<DatasetEntry> adv;
    std::map<std::string, int64_t> adv_per_bucket;
    for (const DatasetEntry& e : all)
      if (e.label == "adversarial" && keep_target(e.target_class)) {
        adv.push_back(e);
        adv_per_bucket[e.bucket]++;
      }
    std::vector<DatasetEntry> side = adv;
    for (const DatasetEntry& e : all) {
      if (e.label != "normal") continue;
      auto it = adv_per_bucket.find(e.bucket);
      if (it != adv_per_bucket.end() && it->second > 0) {
        side.push_back(e);
        it->second--;
      }
    }
    const auto n_adv = static_cast<int64_t>(adv.size());
    const auto n_norm = static_cast<int64_t>(side.size()) - n_adv;
    if (n_adv != n_norm)
      throw ConfigError(
          "unknown_target_experiment: cannot balance side: " +
          std::to_string(n_adv) + " adversarial vs " + std::to_string(n_norm) +
          " normals");
    return side;
  };

  std::vector<DatasetEntry> train = build_side(
      train_all, [&](const std::string& t) { return t != held_out; });
  std::vector<DatasetEntry> test = build_side(
      test_all, [&](const std::string& t) { return t == held_out; });
  if (train.empty() || test.empty())
    throw ConfigError("unknown_target_experiment: empty side");
  prove_no_leakage(train, test, "unknown-target " + held_out);

  FeatureCache features;
  DetectorModel probe = build_detector(cfg.detector, base_seed);
  std::vector<const DatasetEntry*> all;
  for (const auto& e : train) all.push_back(&e);
  for (const auto& e : test) all.push_back(&e);
  prefill_features(probe, all, features, cfg.jobs);

  std::vector<RunOutcome> outcomes(static_cast<size_t>(cfg.runs));
  run_indexed_jobs(cfg.jobs, cfg.runs, [&](int r) {
    outcomes[static_cast<size_t>(r)] = evaluate_run(
        train, test, cfg, base_seed + static_cast<uint64_t>(r), features);
  });

  UnknownTargetReport report;
  report.held_out = held_out;
  report.runs = cfg.runs;
  report.accuracies = collect_accuracies(outcomes);
  if (cfg.runs >= 2) {
    std::tie(report.mean_accuracy, report.ci95_halfwidth) =
        ci95(report.accuracies);
  } else {
    report.mean_accuracy = report.accuracies[0];
    report.ci95_halfwidth = 0.0;
  }
  return report;
}

nlohmann::ordered_json scenario_report_to_json(const ScenarioReport& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["runs"] = r.runs;
  j["accuracies"] = r.accuracies;
  j["mean_accuracy"] = r.mean_accuracy;
  j["ci95_halfwidth"] = r.ci95_halfwidth;
  nlohmann::ordered_json b = nlohmann::ordered_json::object();
  for (const auto& [bucket, row] : r.breakdown) {
    nlohmann::ordered_json jrow = nlohmann::ordered_json::object();
    for (const auto& [target, cell] : row) {
      jrow[target] = {{"n_adversarial", cell.n_adversarial},
                      {"n_total", cell.n_total},
                      {"accuracy", cell.accuracy}};
    }
    b[bucket] = std::move(jrow);
  }
  j["breakdown"] = std::move(b);
  return j;
}

ScenarioReport scenario_report_from_json(const nlohmann::ordered_json& j) {
  try {
    ScenarioReport r;
    r.id = j.at("id").get<int>();
    r.runs = j.at("runs").get<int>();
    r.accuracies = j.at("accuracies").get<std::vector<double>>();
    r.mean_accuracy = j.at("mean_accuracy").get<double>();
    r.ci95_halfwidth = j.at("ci95_halfwidth").get<double>();
    if (r.id < 1 || r.id > 6) throw FormatError("scenario id out of range");
    if (r.runs != static_cast<int>(r.accuracies.size()))
      throw FormatError("scenario runs does not match accuracy count");
    for (double a : r.accuracies)
      if (!(a >= 0.0 && a <= 1.0))
        throw FormatError("scenario accuracy out of [0,1]");
    for (const auto& [bucket, row] : j.at("breakdown").items())
      for (const auto& [target, cell] : row.items()) {
        BreakdownCell c;
        c.n_adversarial = cell.at("n_adversarial").get<int64_t>();
        c.n_total = cell.at("n_total").get<int64_t>();
        c.accuracy = cell.at("accuracy").get<double>();
        r.breakdown[bucket][target] = c;
      }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("scenario report: ") + e.what());
  }
}

nlohmann::ordered_json unknown_target_report_to_json(
    const UnknownTargetReport& r) {
  nlohmann::ordered_json j;
  j["held_out"] = r.held_out;
  j["runs"] = r.runs;
  j["accuracies"] = r.accuracies;
  j["mean_accuracy"] = r.mean_accuracy;
  j["ci95_halfwidth"] = r.ci95_halfwidth;
  return j;
}

std::string breakdown_to_csv(const ScenarioReport& r) {
  std::set<std::string> targets;
  for (const auto& [bucket, row] : r.breakdown)
    for (const auto& [target, cell] : row) targets.insert(target);

  std::string csv = "source";
  for (const auto& t : targets) csv += "," + t;
  csv += "\n";
  for (const auto& [bucket, row] : r.breakdown) {
    csv += bucket;
    for (const auto& t : targets) {
      csv += ",";
      auto it = row.find(t);
      if (it != row.end()) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", it->second.accuracy);
        csv += buf;
      }
    }
    csv += "\n";
  }
  return csv;
}

}  // namespace advspeech
