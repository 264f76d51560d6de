#include "advspeech/victim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "advspeech/ctc.hpp"
#include "advspeech/errors.hpp"
#include "advspeech/rng.hpp"

namespace fs = std::filesystem;

namespace advspeech {

namespace {

constexpr const char* kSequenceVocab = "abcdefghijklmnopqrstuvwxyz ";

std::vector<LayerSpec> keyword_specs(int n_classes) {
  return {conv2d(12, 3, 3), relu(), maxpool2d(2, 2),
          conv2d(24, 3, 3), relu(), maxpool2d(2, 2),
          flatten(),        dense(64), relu(),
          dense(n_classes), softmax()};
}

struct LabeledFeature {
  Tensor input;
  int label;
};

// Loads and caches padded features for every keyword clip in the corpus.
std::vector<LabeledFeature> keyword_training_set(
    const KeywordModel& m, const CorpusManifest& corpus,
    std::vector<std::string>* clip_ids) {
  std::map<std::string, int> class_index;
  for (size_t i = 0; i < m.class_names.size(); ++i)
    class_index[m.class_names[i]] = static_cast<int>(i);

  std::vector<LabeledFeature> items;
  for (const ClipEntry& e : corpus.entries) {
    if (e.kind != "keyword") continue;
    auto it = class_index.find(e.class_name);
    if (it == class_index.end())
      throw ConfigError("corpus class not in model: " + e.class_name);
    Waveform w = read_wav((fs::path(corpus.root) / e.wav_path).string());
    FeatureMap fm = pad_to(mfcc(w, m.mfcc_cfg), m.mfcc_cfg.t_max);
    items.push_back({feature_tensor(fm), it->second});
    if (clip_ids) clip_ids->push_back(e.id);
  }
  return items;
}

}  // namespace

Tensor feature_tensor(const FeatureMap& fm) {
  Tensor t = Tensor::zeros({static_cast<int>(fm.values.rows()),
                            static_cast<int>(fm.values.cols()), 1});
  for (int r = 0; r < fm.values.rows(); ++r)
    for (int c = 0; c < fm.values.cols(); ++c)
      t.values(r * fm.values.cols() + c) = fm.values(r, c);
  return t;
}

nlohmann::ordered_json mfcc_config_to_json(const MfccConfig& cfg) {
  nlohmann::ordered_json j;
  j["n_coeffs"] = cfg.n_coeffs;
  j["frame_length"] = cfg.frame_length;
  j["hop"] = cfg.hop;
  j["n_mels"] = cfg.n_mels;
  j["fft_size"] = cfg.fft_size;
  j["t_max"] = cfg.t_max;
  j["log_floor"] = cfg.log_floor;
  return j;
}

MfccConfig mfcc_config_from_json(const nlohmann::ordered_json& j) {
  try {
    MfccConfig cfg;
    cfg.n_coeffs = j.at("n_coeffs").get<int>();
    cfg.frame_length = j.at("frame_length").get<int>();
    cfg.hop = j.at("hop").get<int>();
    cfg.n_mels = j.at("n_mels").get<int>();
    cfg.fft_size = j.at("fft_size").get<int>();
    cfg.t_max = j.at("t_max").get<int>();
    cfg.log_floor = j.at("log_floor").get<double>();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("mfcc config: ") + e.what());
  }
}

KeywordModel make_keyword_model(const std::vector<std::string>& class_names,
                                const MfccConfig& mfcc_cfg, uint64_t seed) {
  if (class_names.size() < 2)
    throw ConfigError("keyword model needs at least 2 classes");
  KeywordModel m;
  m.class_names = class_names;
  m.mfcc_cfg = mfcc_cfg;
  m.network =
      build_network(keyword_specs(static_cast<int>(class_names.size())),
                    {mfcc_cfg.t_max, mfcc_cfg.n_coeffs, 1}, seed);
  return m;
}

TrainReport train_keyword_model(KeywordModel& m, const CorpusManifest& corpus,
                                const KeywordTrainConfig& cfg, uint64_t seed) {
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw ConfigError("train_keyword_model: bad epochs/batch_size");

  std::vector<LabeledFeature> items = keyword_training_set(m, corpus, nullptr);

  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < items.size(); ++i)
    by_class[items[i].label].push_back(i);
  if (by_class.size() < 2)
    throw ConfigError("insufficient data: need at least 2 classes, got " +
                      std::to_string(by_class.size()));
  for (const auto& [label, idx] : by_class)
    if (idx.size() < 2)
      throw ConfigError("insufficient data: class " +
                        m.class_names[static_cast<size_t>(label)] + " has " +
                        std::to_string(idx.size()) + " clips");

  // Per-class holdout, deterministic in the seed.
  Rng rng(mix_seed({seed, hash_string("train_keyword")}));
  std::vector<size_t> train_idx, holdout_idx;
  for (auto& [label, idx] : by_class) {
    Rng cls = rng.fork("holdout" + std::to_string(label));
    cls.shuffle(idx);
    const auto n_hold = static_cast<size_t>(
        std::floor(cfg.holdout_fraction * static_cast<double>(idx.size())));
    for (size_t i = 0; i < idx.size(); ++i)
      (i < n_hold ? holdout_idx : train_idx).push_back(idx[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(holdout_idx.begin(), holdout_idx.end());

  AdamState adam;
  double last_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order = rng.fork("epoch" + std::to_string(epoch));
    std::vector<size_t> sched = train_idx;
    order.shuffle(sched);

    double epoch_loss = 0.0;
    for (size_t start = 0; start < sched.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(sched.size(), start + static_cast<size_t>(cfg.batch_size));
      Gradients sum;
      for (size_t k = start; k < end; ++k) {
        const LabeledFeature& item = items[sched[k]];
        ForwardCache cache;
        Tensor probs = forward(m.network, item.input, &cache);
        CrossEntropyResult ce = cross_entropy(probs, item.label);
        epoch_loss += ce.loss;
        Gradients g = backward_from_logits(m.network, cache, ce.d_logits);
        if (sum.params.empty()) {
          sum = std::move(g);
        } else {
          for (size_t li = 0; li < g.params.size(); ++li) {
            sum.params[li].w.values += g.params[li].w.values;
            sum.params[li].b.values += g.params[li].b.values;
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& p : sum.params) {
        p.w.values *= inv;
        p.b.values *= inv;
      }
      sgd_adam_step(m.network, sum, cfg.lr, adam);
    }
    last_loss = epoch_loss / static_cast<double>(sched.size());
  }

  auto accuracy = [&](const std::vector<size_t>& idx) {
    if (idx.empty()) return 0.0;
    int hits = 0;
    for (size_t i : idx) {
      Tensor probs = forward(m.network, items[i].input);
      int arg = 0;
      probs.values.maxCoeff(&arg);
      hits += arg == items[i].label ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(idx.size());
  };

  TrainReport r;
  r.train_accuracy = accuracy(train_idx);
  r.holdout_accuracy = accuracy(holdout_idx);
  r.final_loss = last_loss;
  r.epochs = cfg.epochs;
  return r;
}

FeatureMap keyword_features(const KeywordModel& m, const Waveform& w) {
  FeatureMap fm = mfcc(w, m.mfcc_cfg);
  if (fm.frame_count_unpadded > m.mfcc_cfg.t_max)
    throw ConfigError("input exceeds the model's frame budget: " +
                      std::to_string(fm.frame_count_unpadded) + " > " +
                      std::to_string(m.mfcc_cfg.t_max));
  return pad_to(fm, m.mfcc_cfg.t_max);
}

KeywordPrediction predict_keyword_features(const KeywordModel& m,
                                           const FeatureMap& fm) {
  Tensor probs = forward(m.network, feature_tensor(fm));
  KeywordPrediction p;
  p.probs = probs.values;
  int arg = 0;
  probs.values.maxCoeff(&arg);
  p.class_index = arg;
  return p;
}

KeywordPrediction predict_keyword(const KeywordModel& m, const Waveform& w) {
  return predict_keyword_features(m, keyword_features(m, w));
}

void save_keyword_model(const KeywordModel& m, const std::string& path) {
  nlohmann::ordered_json meta;
  meta["model_kind"] = "keyword";
  meta["class_names"] = m.class_names;
  meta["mfcc"] = mfcc_config_to_json(m.mfcc_cfg);
  save_checkpoint(m.network, path, meta);
}

KeywordModel load_keyword_model(const std::string& path) {
  nlohmann::ordered_json meta;
  KeywordModel m;
  m.network = load_checkpoint(path, &meta);
  try {
    if (meta.at("model_kind").get<std::string>() != "keyword")
      throw FormatError("checkpoint is not a keyword model: " + path);
    m.class_names = meta.at("class_names").get<std::vector<std::string>>();
    m.mfcc_cfg = mfcc_config_from_json(meta.at("mfcc"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("keyword checkpoint metadata: " + std::string(e.what()));
  }
  if (m.network.final_shape() !=
      std::vector<int>{static_cast<int>(m.class_names.size())})
    throw FormatError("keyword checkpoint output does not match class count");
  return m;
}

// ---------------------------------------------------------------------------
// Sequence victim
// ---------------------------------------------------------------------------

namespace {

std::vector<LayerSpec> sequence_arch(int n_coeffs, int n_outputs) {
  return {conv2d(16, 5, n_coeffs), relu(), conv2d(n_outputs, 5, 1), softmax()};
}

constexpr int kSequenceTRef = 98;  // reference build; real T varies per clip

}  // namespace

SequenceModel make_sequence_model(const MfccConfig& mfcc_cfg, uint64_t seed) {
  SequenceModel m;
  m.vocab = kSequenceVocab;
  m.mfcc_cfg = mfcc_cfg;
  m.network = build_network(
      sequence_arch(mfcc_cfg.n_coeffs, static_cast<int>(m.vocab.size()) + 1),
      {kSequenceTRef, mfcc_cfg.n_coeffs, 1}, seed);
  return m;
}

const Network& sequence_network_for(const SequenceModel& m, int t_frames) {
  if (t_frames == m.network.input_shape[0]) return m.network;
  auto it = m.per_t_cache.find(t_frames);
  if (it != m.per_t_cache.end()) return it->second;
  Network clone = build_network(m.network.specs,
                                {t_frames, m.network.input_shape[1], 1},
                                m.network.rng_seed);
  clone.params = m.network.params;  // conv params are T-independent
  return m.per_t_cache.emplace(t_frames, std::move(clone)).first->second;
}

Eigen::MatrixXd sequence_log_probs(const SequenceModel& m, const FeatureMap& fm,
                                   ForwardCache* cache) {
  const int t_frames = static_cast<int>(fm.values.rows());
  const Network& net = sequence_network_for(m, t_frames);
  Tensor out = forward(net, feature_tensor(fm), cache);
  const int t_out = out.shape[0];
  const int n_sym = out.shape[2];
  Eigen::MatrixXd log_probs(t_out, n_sym);
  for (int t = 0; t < t_out; ++t)
    for (int c = 0; c < n_sym; ++c)
      log_probs(t, c) =
          std::log(std::max(out.values(t * n_sym + c), 1e-300));
  return log_probs;
}

std::vector<int> encode_text(const std::string& text,
                             const std::string& vocab) {
  std::vector<int> out;
  out.reserve(text.size());
  for (char ch : text) {
    const size_t pos = vocab.find(ch);
    if (pos == std::string::npos)
      throw ConfigError(std::string("character not in vocabulary: '") + ch +
                        "'");
    out.push_back(static_cast<int>(pos));
  }
  return out;
}

std::string collapse_ctc_path(const std::vector<int>& path,
                              const std::string& vocab) {
  const int blank = static_cast<int>(vocab.size());
  std::string out;
  int prev = -1;
  for (int s : path) {
    if (s < 0 || s > blank) throw ConfigError("path symbol out of range");
    if (s != prev && s != blank) out.push_back(vocab[static_cast<size_t>(s)]);
    prev = s;
  }
  return out;
}

std::string transcribe(const SequenceModel& m, const Waveform& w) {
  FeatureMap fm = mfcc(w, m.mfcc_cfg);
  if (fm.frame_count_unpadded > m.mfcc_cfg.t_max)
    throw ConfigError("input exceeds the model's frame budget: " +
                      std::to_string(fm.frame_count_unpadded) + " > " +
                      std::to_string(m.mfcc_cfg.t_max));
  Eigen::MatrixXd log_probs = sequence_log_probs(m, fm);
  std::vector<int> path(static_cast<size_t>(log_probs.rows()));
  for (int t = 0; t < log_probs.rows(); ++t) {
    int arg = 0;
    log_probs.row(t).maxCoeff(&arg);
    path[static_cast<size_t>(t)] = arg;
  }
  return collapse_ctc_path(path, m.vocab);
}

TrainReport train_sequence_model(SequenceModel& m, const CorpusManifest& corpus,
                                 const SequenceTrainConfig& cfg,
                                 uint64_t seed) {
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw ConfigError("train_sequence_model: bad epochs/batch_size");

  struct Item {
    FeatureMap fm;
    std::vector<int> target;
  };
  std::vector<Item> items;
  for (const ClipEntry& e : corpus.entries) {
    if (e.kind != "sentence") continue;
    Waveform w = read_wav((fs::path(corpus.root) / e.wav_path).string());
    Item item;
    item.fm = mfcc(w, m.mfcc_cfg);
    item.target = encode_text(e.transcript, m.vocab);
    items.push_back(std::move(item));
  }
  if (items.size() < 2)
    throw ConfigError("insufficient data: need at least 2 sentence clips");

  Rng rng(mix_seed({seed, hash_string("train_sequence")}));
  AdamState adam;
  double last_loss = 0.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order = rng.fork("epoch" + std::to_string(epoch));
    std::vector<size_t> sched(items.size());
    for (size_t i = 0; i < sched.size(); ++i) sched[i] = i;
    order.shuffle(sched);

    double epoch_loss = 0.0;
    int64_t counted = 0;
    for (size_t start = 0; start < sched.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(sched.size(), start + static_cast<size_t>(cfg.batch_size));
      Gradients sum;
      int in_batch = 0;
      for (size_t k = start; k < end; ++k) {
        const Item& item = items[sched[k]];
        const Network& net =
            sequence_network_for(m, static_cast<int>(item.fm.values.rows()));
        ForwardCache cache;
        Tensor probs_t = forward(net, feature_tensor(item.fm), &cache);

        const int t_out = probs_t.shape[0];
        const int n_sym = probs_t.shape[2];
        CtcInput ci;
        ci.log_probs.resize(t_out, n_sym);
        for (int t = 0; t < t_out; ++t)
          for (int c = 0; c < n_sym; ++c)
            ci.log_probs(t, c) =
                std::log(std::max(probs_t.values(t * n_sym + c), 1e-300));
        ci.target = item.target;
        CtcResult ctc = ctc_loss(ci);
        epoch_loss += ctc.loss;
        ++counted;

        Tensor d_log = Tensor::zeros(probs_t.shape);
        for (int t = 0; t < t_out; ++t)
          for (int c = 0; c < n_sym; ++c)
            d_log.values(t * n_sym + c) = ctc.d_log_probs(t, c);
        Tensor d_logits = logit_grad_from_log_prob_grad(probs_t, d_log);
        Gradients g = backward_from_logits(net, cache, d_logits);
        if (sum.params.empty()) {
          sum = std::move(g);
        } else {
          for (size_t li = 0; li < g.params.size(); ++li) {
            sum.params[li].w.values += g.params[li].w.values;
            sum.params[li].b.values += g.params[li].b.values;
          }
        }
        ++in_batch;
      }
      if (in_batch == 0) continue;
      const double inv = 1.0 / in_batch;
      for (auto& p : sum.params) {
        p.w.values *= inv;
        p.b.values *= inv;
      }
      sgd_adam_step(m.network, sum, cfg.lr, adam);
      m.per_t_cache.clear();  // parameters moved; cached clones are stale
    }
    last_loss = counted ? epoch_loss / static_cast<double>(counted) : 0.0;
  }

  TrainReport r;
  r.final_loss = last_loss;
  r.epochs = cfg.epochs;
  return r;
}

void save_sequence_model(const SequenceModel& m, const std::string& path) {
  nlohmann::ordered_json meta;
  meta["model_kind"] = "sequence";
  meta["vocab"] = m.vocab;
  meta["mfcc"] = mfcc_config_to_json(m.mfcc_cfg);
  save_checkpoint(m.network, path, meta);
}

SequenceModel load_sequence_model(const std::string& path) {
  nlohmann::ordered_json meta;
  SequenceModel m;
  m.network = load_checkpoint(path, &meta);
  try {
    if (meta.at("model_kind").get<std::string>() != "sequence")
      throw FormatError("checkpoint is not a sequence model: " + path);
    m.vocab = meta.at("vocab").get<std::string>();
    m.mfcc_cfg = mfcc_config_from_json(meta.at("mfcc"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("sequence checkpoint metadata: " + std::string(e.what()));
  }
  return m;
}

}  // namespace advspeech
