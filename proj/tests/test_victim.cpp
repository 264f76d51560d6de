#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "advspeech/ctc.hpp"
#include "advspeech/dataset.hpp"
#include "advspeech/errors.hpp"
#include "advspeech/jsonio.hpp"
#include "advspeech/rng.hpp"
#include "advspeech/features.hpp"
#include "advspeech/victim.hpp"

#include "helpers.hpp"

using namespace advspeech;
namespace fs = std::filesystem;

namespace {

MfccConfig keyword_cfg() {
  MfccConfig cfg;
  cfg.t_max = 98;  // exactly one second of frames
  return cfg;
}

CorpusManifest tiny_corpus(const std::string& dir, uint64_t seed,
                           int per_class = 3, int per_bucket = 2) {
  CorpusSpec spec;
  spec.keyword_clips_per_class = per_class;
  spec.sentences_per_bucket = per_bucket;
  return synth_corpus(spec, seed, dir);
}

// Oracle by the definition: collapse runs of equal symbols first, then drop
// blanks. The production decoder does both in one pass.
std::string collapse_two_pass(const std::vector<int>& path,
                              const std::string& vocab) {
  const int blank = static_cast<int>(vocab.size());
  std::vector<int> runs;
  for (int p : path)
    if (runs.empty() || runs.back() != p) runs.push_back(p);
  std::string out;
  for (int r : runs)
    if (r != blank) out += vocab[static_cast<size_t>(r)];
  return out;
}

double mean_ctc_loss(const SequenceModel& m, const CorpusManifest& corpus) {
  double total = 0.0;
  int n = 0;
  for (const ClipEntry& e : corpus.entries) {
    if (e.kind != "sentence") continue;
    Waveform w = read_wav((fs::path(corpus.root) / e.wav_path).string());
    FeatureMap fm = mfcc(w, m.mfcc_cfg);
    CtcInput in;
    in.log_probs = sequence_log_probs(m, fm);
    in.target = encode_text(e.transcript, m.vocab);
    total += ctc_loss(in).loss;
    ++n;
  }
  REQUIRE(n > 0);
  return total / n;
}

}  // namespace

TEST_CASE("ctc path collapse matches the two-pass definition") {
  CHECK(collapse_ctc_path({}, "abc") == "");
  CHECK(collapse_ctc_path({3, 3, 3}, "abc") == "");
  CHECK(collapse_ctc_path({0, 0, 3, 0}, "abc") == "aa");
  CHECK(collapse_ctc_path({0, 1, 1, 2}, "abc") == "abc");
  CHECK(collapse_ctc_path({2, 0, 2, 2, 1, 1, 2, 1}, "ab") == "abb");

  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::string vocab =
        std::vector<std::string>{"a", "ab", "abc", "wxyz"}[static_cast<size_t>(
            rng.uniform_int(0, 3))];
    const int blank = static_cast<int>(vocab.size());
    std::vector<int> path(static_cast<size_t>(rng.uniform_int(0, 20)));
    for (int& p : path) p = static_cast<int>(rng.uniform_int(0, blank));
    CHECK(collapse_ctc_path(path, vocab) == collapse_two_pass(path, vocab));
  }
}

TEST_CASE("ctc path collapse rejects out-of-range symbols") {
  CHECK_THROWS_AS(collapse_ctc_path({4}, "abc"), ConfigError);
  CHECK_THROWS_AS(collapse_ctc_path({-1}, "abc"), ConfigError);
}

TEST_CASE("encode_text maps characters to vocabulary indices") {
  CHECK(encode_text("", "abc ") == std::vector<int>{});
  CHECK(encode_text("cab", "abc ") == std::vector<int>{2, 0, 1});
  CHECK(encode_text("a a", "abc ") == std::vector<int>{0, 3, 0});
  CHECK_THROWS_AS(encode_text("ax", "abc "), ConfigError);
}

TEST_CASE("keyword training is deterministic down to checkpoint bytes") {
  const std::string dir = testutil::scratch_dir("victim_kw_det");
  CorpusManifest corpus = tiny_corpus(dir + "/corpus", 5);

  KeywordTrainConfig tc;
  tc.epochs = 3;
  tc.holdout_fraction = 0.34;  // 1 of 3 clips per class held out

  KeywordModel a = make_keyword_model(keyword_class_names(), keyword_cfg(), 9);
  TrainReport ra = train_keyword_model(a, corpus, tc, 9);
  KeywordModel b = make_keyword_model(keyword_class_names(), keyword_cfg(), 9);
  TrainReport rb = train_keyword_model(b, corpus, tc, 9);

  CHECK(ra.train_accuracy == rb.train_accuracy);
  CHECK(ra.holdout_accuracy == rb.holdout_accuracy);
  CHECK(ra.final_loss == rb.final_loss);
  CHECK(ra.epochs == tc.epochs);

  save_keyword_model(a, dir + "/a.ckpt");
  save_keyword_model(b, dir + "/b.ckpt");
  CHECK(read_text_file(dir + "/a.ckpt") == read_text_file(dir + "/b.ckpt"));

  KeywordModel c = make_keyword_model(keyword_class_names(), keyword_cfg(), 10);
  train_keyword_model(c, corpus, tc, 10);
  save_keyword_model(c, dir + "/c.ckpt");
  CHECK(read_text_file(dir + "/a.ckpt") != read_text_file(dir + "/c.ckpt"));
}

TEST_CASE("keyword model learns the tiny corpus above chance") {
  const std::string dir = testutil::scratch_dir("victim_kw_learn");
  CorpusManifest corpus = tiny_corpus(dir + "/corpus", 21);
  KeywordTrainConfig tc;
  tc.epochs = 6;
  KeywordModel m = make_keyword_model(keyword_class_names(), keyword_cfg(), 1);
  TrainReport r = train_keyword_model(m, corpus, tc, 1);
  CHECK(r.train_accuracy > 0.5);  // chance is 0.1 over ten classes
  CHECK(r.holdout_accuracy >= 0.0);
  CHECK(r.holdout_accuracy <= 1.0);

  Waveform w = synth_keyword_clip("stop", 777);
  KeywordPrediction p = predict_keyword(m, w);
  REQUIRE(p.probs.size() == 10);
  CHECK(p.probs.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(p.class_index >= 0);
  CHECK(p.class_index < 10);
}

TEST_CASE("keyword checkpoint round-trips with identical predictions") {
  const std::string dir = testutil::scratch_dir("victim_kw_rt");
  CorpusManifest corpus = tiny_corpus(dir + "/corpus", 3);
  KeywordTrainConfig tc;
  tc.epochs = 1;
  KeywordModel m = make_keyword_model(keyword_class_names(), keyword_cfg(), 4);
  train_keyword_model(m, corpus, tc, 4);
  save_keyword_model(m, dir + "/m.ckpt");
  KeywordModel r = load_keyword_model(dir + "/m.ckpt");

  CHECK(r.class_names == m.class_names);
  CHECK(r.mfcc_cfg.t_max == m.mfcc_cfg.t_max);
  for (uint64_t s : {11u, 12u, 13u}) {
    Waveform w = synth_keyword_clip("left", s);
    KeywordPrediction pm = predict_keyword(m, w);
    KeywordPrediction pr = predict_keyword(r, w);
    CHECK(pm.class_index == pr.class_index);
    CHECK((pm.probs - pr.probs).cwiseAbs().maxCoeff() == 0.0);
  }

  atomic_write_text(dir + "/junk.ckpt", "{\"kind\":\"nonsense\"}");
  CHECK_THROWS_AS(load_keyword_model(dir + "/junk.ckpt"), FormatError);
}

TEST_CASE("keyword model rejects audio beyond its frame budget") {
  KeywordModel m = make_keyword_model(keyword_class_names(), keyword_cfg(), 2);
  Waveform w = synth_sentence_clip({"yes", "no"}, 1.5, 3);
  CHECK_THROWS_AS(keyword_features(m, w), ConfigError);
  CHECK_THROWS_AS(predict_keyword(m, w), ConfigError);
}

TEST_CASE("keyword training rejects unusable corpora") {
  const std::string dir = testutil::scratch_dir("victim_kw_bad");
  CorpusManifest corpus = tiny_corpus(dir + "/corpus", 3);
  CorpusManifest no_keywords;
  no_keywords.root = corpus.root;
  for (const ClipEntry& e : corpus.entries)
    if (e.kind != "keyword") no_keywords.entries.push_back(e);

  KeywordModel m = make_keyword_model(keyword_class_names(), keyword_cfg(), 2);
  KeywordTrainConfig tc;
  CHECK_THROWS_AS(train_keyword_model(m, no_keywords, tc, 2), ConfigError);

  KeywordTrainConfig bad = tc;
  bad.epochs = 0;
  CHECK_THROWS_AS(train_keyword_model(m, corpus, bad, 2), ConfigError);

  CHECK_THROWS_AS(
      make_keyword_model(std::vector<std::string>{"solo"}, keyword_cfg(), 2),
      ConfigError);
}

TEST_CASE("sequence training reduces ctc loss and stays deterministic") {
  const std::string dir = testutil::scratch_dir("victim_seq");
  CorpusManifest corpus = tiny_corpus(dir + "/corpus", 1, 2);

  SequenceModel m = make_sequence_model(MfccConfig{}, 17);
  const double loss_before = mean_ctc_loss(m, corpus);

  SequenceTrainConfig tc;
  tc.epochs = 3;
  TrainReport r = train_sequence_model(m, corpus, tc, 17);
  CHECK(r.epochs == tc.epochs);
  const double loss_after = mean_ctc_loss(m, corpus);
  CHECK(loss_after < loss_before);

  SequenceModel m2 = make_sequence_model(MfccConfig{}, 17);
  TrainReport r2 = train_sequence_model(m2, corpus, tc, 17);
  CHECK(r.final_loss == r2.final_loss);

  Waveform w = synth_sentence_clip({"go", "left"}, 1.6, 99);
  CHECK(transcribe(m, w) == transcribe(m2, w));
}

TEST_CASE("sequence log probs are normalized per frame") {
  SequenceModel m = make_sequence_model(MfccConfig{}, 63);
  Waveform w = synth_sentence_clip({"up", "down"}, 1.4, 5);
  FeatureMap fm = mfcc(w, m.mfcc_cfg);
  Eigen::MatrixXd lp = sequence_log_probs(m, fm);
  // Two valid k=5 convolutions in time: eight frames shaved off.
  CHECK(lp.rows() == fm.values.rows() - 8);
  CHECK(lp.cols() == static_cast<Eigen::Index>(m.vocab.size()) + 1);
  for (Eigen::Index t = 0; t < lp.rows(); ++t) {
    const double mx = lp.row(t).maxCoeff();
    const double lse = mx + std::log((lp.row(t).array() - mx).exp().sum());
    CHECK(std::abs(lse) < 1e-9);
  }
}

TEST_CASE("sequence checkpoint round-trips with identical transcriptions") {
  const std::string dir = testutil::scratch_dir("victim_seq_rt");
  CorpusManifest corpus = tiny_corpus(dir + "/corpus", 1, 2);
  SequenceModel m = make_sequence_model(MfccConfig{}, 29);
  SequenceTrainConfig tc;
  tc.epochs = 1;
  train_sequence_model(m, corpus, tc, 29);
  save_sequence_model(m, dir + "/m.ckpt");
  SequenceModel r = load_sequence_model(dir + "/m.ckpt");

  CHECK(r.vocab == m.vocab);
  for (uint64_t s : {40u, 41u}) {
    Waveform w = synth_sentence_clip({"on", "off", "stop"}, 1.8, s);
    CHECK(transcribe(m, w) == transcribe(r, w));
    FeatureMap fm = mfcc(w, m.mfcc_cfg);
    Eigen::MatrixXd lm = sequence_log_probs(m, fm);
    Eigen::MatrixXd lr = sequence_log_probs(r, fm);
    CHECK((lm - lr).cwiseAbs().maxCoeff() == 0.0);
  }

  atomic_write_text(dir + "/junk.ckpt", "{\"kind\":\"nonsense\"}");
  CHECK_THROWS_AS(load_sequence_model(dir + "/junk.ckpt"), FormatError);
}

TEST_CASE("sequence training rejects unusable corpora") {
  const std::string dir = testutil::scratch_dir("victim_seq_bad");
  CorpusManifest corpus = tiny_corpus(dir + "/corpus", 2, 2);
  CorpusManifest no_sentences;
  no_sentences.root = corpus.root;
  for (const ClipEntry& e : corpus.entries)
    if (e.kind != "sentence") no_sentences.entries.push_back(e);

  SequenceModel m = make_sequence_model(MfccConfig{}, 3);
  SequenceTrainConfig tc;
  CHECK_THROWS_AS(train_sequence_model(m, no_sentences, tc, 3), ConfigError);
}

TEST_CASE("over-length sentences exceed the sequence frame budget") {
  MfccConfig cfg;
  cfg.t_max = 98;
  SequenceModel m = make_sequence_model(cfg, 8);
  Waveform w = synth_sentence_clip({"yes", "no", "go"}, 2.0, 6);
  CHECK_THROWS_AS(transcribe(m, w), ConfigError);
}
