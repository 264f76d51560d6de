#include "advspeech/detector.hpp"

#include <algorithm>
#include <filesystem>

#include "advspeech/errors.hpp"
#include "advspeech/rng.hpp"
#include "advspeech/victim.hpp"

namespace fs = std::filesystem;

namespace advspeech {

DetectorModel build_detector(const DetectorConfig& cfg, uint64_t seed) {
  if (cfg.mfcc.t_max < 8)
    throw ConfigError("build_detector: T_max must be >= 8, got " +
                      std::to_string(cfg.mfcc.t_max));
  if (cfg.third_activation != "linear" && cfg.third_activation != "selu")
    throw ConfigError("build_detector: third_activation must be linear|selu");
  if (cfg.pool3_h < 1 || cfg.pool3_w < 1)
    throw ConfigError("build_detector: pool3 dims must be >= 1");

  // maxpool(1,1) is a literal identity, kept so the layer sequence matches
  // the published wiring one-for-one.
  std::vector<LayerSpec> specs = {
      conv2d(64, 2, 2), relu(), maxpool2d(1, 3),
      conv2d(64, 2, 2), relu(), maxpool2d(1, 1),
      conv2d(32, 2, 2),
      cfg.third_activation == "selu" ? selu() : linear(),
      maxpool2d(cfg.pool3_h, cfg.pool3_w),
      flatten(), dense(128), relu(), dense(2), softmax()};

  DetectorModel m;
  m.network = build_network(specs, {cfg.mfcc.t_max, cfg.mfcc.n_coeffs, 1}, seed);
  m.mfcc_cfg = cfg.mfcc;
  m.third_activation = cfg.third_activation;
  m.pool3_h = cfg.pool3_h;
  m.pool3_w = cfg.pool3_w;
  return m;
}

int64_t detector_parameter_count(const DetectorModel& m) {
  int64_t n = 0;
  for (const LayerParams& p : m.network.params)
    n += p.w.size() + p.b.size();
  return n;
}

Tensor detector_features(const DetectorModel& m, const Waveform& w) {
  FeatureMap fm = pad_to(mfcc(w, m.mfcc_cfg), m.mfcc_cfg.t_max);
  return feature_tensor(fm);
}

DetectorPrediction classify_features(const DetectorModel& m,
                                     const Tensor& features) {
  ForwardCache cache;
  Tensor out = forward(m.network, features, &cache);
  DetectorPrediction pred;
  pred.probs = out.values;
  int idx = 0;
  out.values.maxCoeff(&idx);
  pred.class_index = idx;
  return pred;
}

DetectorPrediction classify(const DetectorModel& m, const Waveform& w) {
  return classify_features(m, detector_features(m, w));
}

DetectorTrainReport train_detector(DetectorModel& m,
                                   const DatasetManifest& train,
                                   const DetectorTrainConfig& cfg,
                                   uint64_t seed, FeatureCache* cache) {
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.lr > 0.0))
    throw ConfigError("train_detector: bad training config");
  int64_t n_normal = 0, n_adv = 0;
  for (const DatasetEntry& e : train.entries)
    (e.label == "normal" ? n_normal : n_adv)++;
  if (n_normal != n_adv)
    throw ConfigError("train_detector: unbalanced manifest: " +
                      std::to_string(n_normal) + " normal vs " +
                      std::to_string(n_adv) + " adversarial");
  if (train.entries.empty())
    throw ConfigError("train_detector: empty manifest");

  FeatureCache local;
  FeatureCache& feats = cache ? *cache : local;
  std::vector<const Tensor*> inputs(train.entries.size());
  std::vector<int> labels(train.entries.size());
  for (size_t i = 0; i < train.entries.size(); ++i) {
    const DatasetEntry& e = train.entries[i];
    auto it = feats.find(e.id);
    if (it == feats.end()) {
      Waveform w = read_wav(
          (fs::path(train.root) / e.wav_path).lexically_normal().string());
      it = feats.emplace(e.id, detector_features(m, w)).first;
    }
    inputs[i] = &it->second;
    labels[i] = e.label == "adversarial" ? kDetectorAdversarial
                                         : kDetectorNormal;
  }

  Rng rng(seed);
  AdamState adam;
  DetectorTrainReport report;
  std::vector<size_t> order(train.entries.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = rng.fork("epoch" + std::to_string(epoch));
    erng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t stop =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      Gradients sum;
      for (size_t k = start; k < stop; ++k) {
        const size_t i = order[k];
        ForwardCache fc;
        Tensor probs = forward(m.network, *inputs[i], &fc);
        CrossEntropyResult ce = cross_entropy(probs, labels[i]);
        epoch_loss += ce.loss;
        Gradients g = backward_from_logits(m.network, fc, ce.d_logits);
        if (sum.params.empty()) {
          sum = std::move(g);
        } else {
          for (size_t l = 0; l < g.params.size(); ++l) {
            sum.params[l].w.values += g.params[l].w.values;
            sum.params[l].b.values += g.params[l].b.values;
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& g : sum.params) {
        g.w.values *= inv;
        g.b.values *= inv;
      }
      sgd_adam_step(m.network, sum, cfg.lr, adam);
    }
    report.losses.push_back(epoch_loss /
                            static_cast<double>(train.entries.size()));
  }

  int64_t correct = 0;
  for (size_t i = 0; i < train.entries.size(); ++i)
    if (classify_features(m, *inputs[i]).class_index == labels[i]) ++correct;
  report.train_accuracy =
      static_cast<double>(correct) / static_cast<double>(train.entries.size());
  return report;
}

void save_detector(const DetectorModel& m, const std::string& path) {
  nlohmann::ordered_json meta;
  meta["model_kind"] = "detector";
  meta["third_activation"] = m.third_activation;
  meta["pool3_h"] = m.pool3_h;
  meta["pool3_w"] = m.pool3_w;
  meta["mfcc"] = mfcc_config_to_json(m.mfcc_cfg);
  save_checkpoint(m.network, path, meta);
}

DetectorModel load_detector(const std::string& path) {
  nlohmann::ordered_json meta;
  DetectorModel m;
  m.network = load_checkpoint(path, &meta);
  try {
    if (meta.at("model_kind").get<std::string>() != "detector")
      throw FormatError("checkpoint is not a detector: " + path);
    m.third_activation = meta.at("third_activation").get<std::string>();
    m.pool3_h = meta.at("pool3_h").get<int>();
    m.pool3_w = meta.at("pool3_w").get<int>();
    m.mfcc_cfg = mfcc_config_from_json(meta.at("mfcc"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("detector checkpoint metadata: " + std::string(e.what()));
  }
  if (m.network.final_shape() != std::vector<int>{2})
    throw FormatError("detector checkpoint output size is not 2");
  return m;
}

}  // namespace advspeech
