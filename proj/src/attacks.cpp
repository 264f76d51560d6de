#include "advspeech/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "advspeech/ctc.hpp"
#include "advspeech/errors.hpp"
#include "advspeech/jsonio.hpp"
#include "advspeech/pool.hpp"
#include "advspeech/rng.hpp"

namespace fs = std::filesystem;

namespace advspeech {

namespace {

constexpr double kPcmStep = 1.0 / 32768.0;

// One victim evaluation at y = clip(x + delta): loss, dLoss/dy, and whether
// the continuous-domain output already equals the target.
struct PointEval {
  double loss = 0.0;
  std::vector<double> d_samples;
  bool continuous_match = false;
};

struct VictimAdapter {
  std::function<PointEval(const Waveform& y)> eval;
  std::function<bool(const Waveform& y)> matches;  // on quantized audio
};

double sum_squares(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Amplitude bound implied by db_relative(x, delta) < tau, shrunk by a margin
// covering PCM16 rounding so the strict inequality survives quantization.
double projection_bound(double host_db_peak, double tau_db) {
  const double bound_amp = std::pow(10.0, (host_db_peak + tau_db) / 20.0);
  const double margin = std::max(bound_amp * 0.005, 1.5 * kPcmStep);
  return std::max(bound_amp - margin, 0.0);
}

void clip_inplace(std::vector<double>& v, double bound) {
  for (double& x : v) x = std::clamp(x, -bound, bound);
}

AttackResult attack_white_box_impl(const VictimAdapter& victim,
                                   const Waveform& x,
                                   const std::string& target_name,
                                   const WhiteBoxConfig& cfg, uint64_t seed,
                                   WhiteBoxTrace* trace) {
  if (cfg.max_iters < 1)
    throw ConfigError("attack_white_box: max_iters must be >= 1");
  if (cfg.lr <= 0.0 || cfg.c_init <= 0.0 || cfg.tau_decay_db < 0.0)
    throw ConfigError("attack_white_box: lr, c, tau_decay must be positive");
  if (cfg.early_stop_after < 1)
    throw ConfigError("attack_white_box: early_stop_after must be >= 1");
  if (x.samples.empty()) throw ConfigError("attack_white_box: empty source");

  AttackResult r;
  r.source_label = x.label;
  r.target = target_name;
  r.attack_kind = "white_box";
  const size_t n = x.samples.size();
  r.perturbation.deltas.assign(n, 0.0);

  // Zero-delta probe: the victim may already emit the target.
  {
    Waveform y0 = quantize_pcm16(x);
    if (victim.matches(y0)) {
      r.success = true;
      r.iterations_used = 0;
      r.final_db_relative = db_relative(x, r.perturbation);
      r.success_tau_db = cfg.tau_db;
      r.adversarial = y0;
      return r;
    }
  }

  const double host_db = db_peak(x.samples);
  double tau = cfg.tau_db;
  double bound = projection_bound(host_db, tau);
  double c = cfg.c_init;
  double lr = cfg.lr;
  const int window = std::clamp(cfg.max_iters / 10, 1, 40);
  int stall = 0;
  int successes = 0;

  std::vector<double> delta(n, 0.0);

  auto eval_at = [&](const std::vector<double>& d) {
    Perturbation p;
    p.deltas = d;
    Waveform y = apply_and_clip(x, p);
    PointEval e = victim.eval(y);
    if (!std::isfinite(e.loss))
      throw NumericsError("attack_white_box: non-finite loss");
    // Gradient gate of the [-1,1] clip.
    for (size_t i = 0; i < n; ++i)
      if (std::abs(x.samples[i] + d[i]) >= 1.0) e.d_samples[i] = 0.0;
    return e;
  };

  PointEval cur = eval_at(delta);
  double cur_sq = 0.0;
  double cur_obj = cur_sq + c * cur.loss;

  struct Best {
    bool set = false;
    Waveform audio;
    std::vector<double> delta;
    double db = 0.0;
    double tau = 0.0;
  } best;

  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    std::vector<double> grad(n);
    for (size_t i = 0; i < n; ++i)
      grad[i] = 2.0 * delta[i] + c * cur.d_samples[i];

    bool accepted = false;
    double step = lr;
    std::vector<double> cand(n);
    PointEval cand_eval;
    for (int bt = 0; bt < 12; ++bt) {
      for (size_t i = 0; i < n; ++i)
        cand[i] = std::clamp(delta[i] - step * grad[i], -bound, bound);
      cand_eval = eval_at(cand);
      const double cand_sq = sum_squares(cand);
      const double cand_obj = cand_sq + c * cand_eval.loss;
      if (cand_obj <= cur_obj + 1e-12) {
        delta.swap(cand);
        cur = std::move(cand_eval);
        cur_sq = cand_sq;
        cur_obj = cand_obj;
        lr = step * 1.1;
        accepted = true;
        break;
      }
      step *= 0.5;
    }

    ++stall;
    if (accepted) {
      if (trace) {
        trace->objective.push_back(cur_obj);
        trace->c_values.push_back(c);
        trace->tau_values.push_back(tau);
      }
      if (cur.continuous_match) {
        Perturbation p;
        p.deltas = delta;
        Waveform yq = quantize_pcm16(apply_and_clip(x, p));
        if (victim.matches(yq)) {
          Perturbation effective;
          effective.deltas.resize(n);
          for (size_t i = 0; i < n; ++i)
            effective.deltas[i] = yq.samples[i] - x.samples[i];
          const double db = db_relative(x, effective);
          if (!best.set || db < best.db) {
            best.set = true;
            best.audio = yq;
            best.delta = delta;
            best.db = db;
            best.tau = tau;
          }
          tau -= cfg.tau_decay_db;
          bound = projection_bound(host_db, tau);
          clip_inplace(delta, bound);
          c = std::max(c * 0.5, 1e-9);
          stall = 0;
          cur = eval_at(delta);
          cur_sq = sum_squares(delta);
          cur_obj = cur_sq + c * cur.loss;
          if (cfg.early_stop && ++successes >= cfg.early_stop_after) {
            ++it;
            break;
          }
        }
      }
    } else {
      lr *= 0.5;
    }

    if (stall >= window) {
      c = std::min(c * 2.0, 1e9);
      cur_obj = cur_sq + c * cur.loss;
      stall = 0;
    }

    // A zero-init descent that has not verified anything by the half-way
    // point is usually pinned to the projection boundary; one seeded restart
    // from the ball's interior explores a different basin at no extra cost.
    if (it == cfg.max_iters / 2 && !best.set) {
      Rng rng(mix_seed({seed, hash_string("wb_restart")}));
      for (double& d : delta) d = rng.uniform(-0.5 * bound, 0.5 * bound);
      lr = cfg.lr;
      c = cfg.c_init;
      stall = 0;
      cur = eval_at(delta);
      cur_sq = sum_squares(delta);
      cur_obj = cur_sq + c * cur.loss;
    }
  }

  r.iterations_used = it;
  if (best.set) {
    r.success = true;
    r.perturbation.deltas = best.delta;
    r.final_db_relative = best.db;
    r.success_tau_db = best.tau;
    r.adversarial = best.audio;
  } else {
    r.success = false;
    r.perturbation.deltas = delta;
    Perturbation p;
    p.deltas = delta;
    Waveform yq = quantize_pcm16(apply_and_clip(x, p));
    Perturbation effective;
    effective.deltas.resize(n);
    for (size_t i = 0; i < n; ++i)
      effective.deltas[i] = yq.samples[i] - x.samples[i];
    r.final_db_relative = db_relative(x, effective);
    r.adversarial = yq;
  }
  r.adversarial.label = x.label;
  return r;
}

Eigen::MatrixXd tensor_rows(const Tensor& t, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = t.values(r * cols + c);
  return m;
}

}  // namespace

AttackResult attack_white_box(const KeywordModel& victim, const Waveform& x,
                              int target_class, const WhiteBoxConfig& cfg,
                              uint64_t seed, WhiteBoxTrace* trace) {
  const int k = static_cast<int>(victim.class_names.size());
  if (target_class < 0 || target_class >= k)
    throw ConfigError("attack_white_box: target class out of range");
  const MfccConfig& mc = victim.mfcc_cfg;
  if (frame_count(static_cast<int64_t>(x.samples.size()), mc) > mc.t_max)
    throw ConfigError("attack_white_box: source exceeds the frame budget");

  VictimAdapter adapter;
  adapter.eval = [&victim, target_class, &mc](const Waveform& y) {
    MfccWorkspace ws;
    FeatureMap fm = mfcc(y, mc, &ws);
    FeatureMap padded = pad_to(fm, mc.t_max);
    ForwardCache cache;
    Tensor probs = forward(victim.network, feature_tensor(padded), &cache);
    CrossEntropyResult ce = cross_entropy(probs, target_class);
    Gradients g = backward_from_logits(victim.network, cache, ce.d_logits);
    Eigen::MatrixXd d_values =
        tensor_rows(g.input, fm.frame_count_unpadded, mc.n_coeffs);
    PointEval e;
    e.loss = ce.loss;
    e.d_samples = mfcc_backward(static_cast<int64_t>(y.samples.size()), mc,
                                ws, d_values);
    int arg = 0;
    probs.values.maxCoeff(&arg);
    e.continuous_match = arg == target_class;
    return e;
  };
  adapter.matches = [&victim, target_class](const Waveform& y) {
    return predict_keyword(victim, y).class_index == target_class;
  };

  return attack_white_box_impl(
      adapter, x, victim.class_names[static_cast<size_t>(target_class)], cfg,
      seed, trace);
}

AttackResult attack_white_box(const SequenceModel& victim, const Waveform& x,
                              const std::string& target_text,
                              const WhiteBoxConfig& cfg, uint64_t seed,
                              WhiteBoxTrace* trace) {
  SequenceModel local = victim;  // private per-T cache for this attack
  const MfccConfig& mc = local.mfcc_cfg;
  const int frames =
      frame_count(static_cast<int64_t>(x.samples.size()), mc);
  if (frames > mc.t_max)
    throw ConfigError("attack_white_box: source exceeds the frame budget");

  const std::vector<int> target_ids = encode_text(target_text, local.vocab);
  const int t_out = sequence_network_for(local, frames).final_shape()[0];
  const int needed = static_cast<int>(target_ids.size()) +
                     ctc_repeat_count(target_ids);
  if (t_out < needed)
    throw InfeasibleError("attack_white_box: target needs " +
                          std::to_string(needed) + " output frames, source " +
                          "provides " + std::to_string(t_out));

  VictimAdapter adapter;
  adapter.eval = [&local, &target_ids, &target_text, &mc](const Waveform& y) {
    MfccWorkspace ws;
    FeatureMap fm = mfcc(y, mc, &ws);
    const Network& net =
        sequence_network_for(local, fm.frame_count_unpadded);
    ForwardCache cache;
    Tensor probs = forward(net, feature_tensor(fm), &cache);
    const int t_rows = probs.shape[0];
    const int n_sym = probs.shape[2];

    CtcInput ci;
    ci.log_probs.resize(t_rows, n_sym);
    for (int t = 0; t < t_rows; ++t)
      for (int s = 0; s < n_sym; ++s)
        ci.log_probs(t, s) =
            std::log(std::max(probs.values(t * n_sym + s), 1e-300));
    ci.target = target_ids;
    CtcResult ctc = ctc_loss(ci);

    Tensor d_log = Tensor::zeros(probs.shape);
    for (int t = 0; t < t_rows; ++t)
      for (int s = 0; s < n_sym; ++s)
        d_log.values(t * n_sym + s) = ctc.d_log_probs(t, s);
    Tensor d_logits = logit_grad_from_log_prob_grad(probs, d_log);
    Gradients g = backward_from_logits(net, cache, d_logits);
    Eigen::MatrixXd d_values =
        tensor_rows(g.input, fm.frame_count_unpadded, mc.n_coeffs);

    PointEval e;
    e.loss = ctc.loss;
    e.d_samples = mfcc_backward(static_cast<int64_t>(y.samples.size()), mc,
                                ws, d_values);
    std::vector<int> path(static_cast<size_t>(t_rows));
    for (int t = 0; t < t_rows; ++t) {
      int arg = 0;
      ci.log_probs.row(t).maxCoeff(&arg);
      path[static_cast<size_t>(t)] = arg;
    }
    e.continuous_match = collapse_ctc_path(path, local.vocab) == target_text;
    return e;
  };
  adapter.matches = [&local, &target_text](const Waveform& y) {
    return transcribe(local, y) == target_text;
  };

  return attack_white_box_impl(adapter, x, target_text, cfg, seed, trace);
}

AttackResult attack_black_box(const KeywordModel& victim, const Waveform& x,
                              int target_class, const BlackBoxConfig& cfg,
                              uint64_t seed, BlackBoxTrace* trace) {
  const int k = static_cast<int>(victim.class_names.size());
  if (target_class < 0 || target_class >= k)
    throw ConfigError("attack_black_box: target class out of range");
  if (cfg.population < 2 || cfg.elite_count < 1 ||
      cfg.elite_count >= cfg.population)
    throw ConfigError("attack_black_box: need 1 <= elite_count < population");
  if (cfg.mutation_prob < 0.0 || cfg.mutation_prob > 1.0)
    throw ConfigError("attack_black_box: mutation_prob must be in [0,1]");
  if (cfg.max_generations < 1)
    throw ConfigError("attack_black_box: max_generations must be >= 1");
  if (cfg.noise_bound <= kPcmStep)
    throw ConfigError("attack_black_box: noise_bound below the PCM16 step");
  if (x.samples.empty()) throw ConfigError("attack_black_box: empty source");

  const size_t n = x.samples.size();
  // Work bound leaves one PCM step so the stored audio respects noise_bound.
  const double bound = cfg.noise_bound - kPcmStep;

  Rng rng(seed);
  const auto pop_size = static_cast<size_t>(cfg.population);
  std::vector<std::vector<double>> pop(pop_size);
  pop[0].assign(n, 0.0);  // the unperturbed candidate is always present
  for (size_t i = 1; i < pop_size; ++i) {
    pop[i].resize(n);
    for (double& d : pop[i]) d = rng.uniform(-bound / 2.0, bound / 2.0);
  }

  AttackResult r;
  r.source_label = x.label;
  r.target = victim.class_names[static_cast<size_t>(target_class)];
  r.attack_kind = "black_box";

  auto finish = [&](const std::vector<double>& delta, bool success, int gen) {
    Perturbation p;
    p.deltas = delta;
    Waveform yq = quantize_pcm16(apply_and_clip(x, p));
    Perturbation effective;
    effective.deltas.resize(n);
    for (size_t i = 0; i < n; ++i)
      effective.deltas[i] = yq.samples[i] - x.samples[i];
    r.perturbation.deltas = delta;
    r.success = success;
    r.iterations_used = gen;
    r.final_db_relative = db_relative(x, effective);
    r.adversarial = yq;
    r.adversarial.label = x.label;
    return r;
  };

  double overall_best_fitness = -1e300;
  std::vector<double> overall_best = pop[0];

  std::vector<double> fitness(pop_size);
  for (int gen = 0; gen < cfg.max_generations; ++gen) {
    int success_idx = -1;
    for (size_t i = 0; i < pop_size; ++i) {
      Perturbation p;
      p.deltas = pop[i];
      Waveform yq = quantize_pcm16(apply_and_clip(x, p));
      KeywordPrediction pred = predict_keyword(victim, yq);
      const double p_target =
          std::max(pred.probs(target_class), 1e-12);
      const double score =
          (cfg.use_log_prob ? std::log(p_target) : p_target) -
          sum_squares(pop[i]) / static_cast<double>(n);
      fitness[i] = score;
      if (pred.class_index == target_class &&
          (success_idx < 0 || score > fitness[static_cast<size_t>(success_idx)]))
        success_idx = static_cast<int>(i);
      if (score > overall_best_fitness) {
        overall_best_fitness = score;
        overall_best = pop[i];
      }
    }
    if (trace)
      trace->best_fitness.push_back(
          *std::max_element(fitness.begin(), fitness.end()));
    if (success_idx >= 0)
      return finish(pop[static_cast<size_t>(success_idx)], true, gen);

    // Rank by fitness; elites survive unchanged.
    std::vector<size_t> order(pop_size);
    for (size_t i = 0; i < pop_size; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (fitness[a] != fitness[b]) return fitness[a] > fitness[b];
      return a < b;  // stable under fitness ties
    });

    std::vector<std::vector<double>> next;
    next.reserve(pop_size);
    for (int e = 0; e < cfg.elite_count; ++e)
      next.push_back(pop[order[static_cast<size_t>(e)]]);

    // Fitness-proportional selection after shifting by the minimum.
    const double min_fit = *std::min_element(fitness.begin(), fitness.end());
    std::vector<double> cumulative(pop_size);
    double acc = 0.0;
    for (size_t i = 0; i < pop_size; ++i) {
      acc += fitness[i] - min_fit + 1e-9;
      cumulative[i] = acc;
    }
    auto pick = [&]() -> const std::vector<double>& {
      const double u = rng.uniform(0.0, acc);
      const size_t idx = static_cast<size_t>(
          std::lower_bound(cumulative.begin(), cumulative.end(), u) -
          cumulative.begin());
      return pop[std::min(idx, pop_size - 1)];
    };

    while (next.size() < pop_size) {
      const std::vector<double>& pa = pick();
      const std::vector<double>& pb = pick();
      std::vector<double> child(n);
      for (size_t s = 0; s < n; ++s)
        child[s] = rng.bernoulli(0.5) ? pa[s] : pb[s];
      for (size_t s = 0; s < n; ++s)
        if (rng.bernoulli(cfg.mutation_prob)) {
          child[s] += rng.normal(0.0, cfg.mutation_std);
          child[s] = std::clamp(child[s], -bound, bound);
        }
      next.push_back(std::move(child));
    }
    pop = std::move(next);
  }

  return finish(overall_best, false, cfg.max_generations);
}

uint64_t attack_seed(uint64_t master_seed, const std::string& kind,
                     const std::string& source_id, const std::string& target) {
  return mix_seed({master_seed, hash_string(kind), hash_string(source_id),
                   hash_string(target)});
}

AttackBatch batch_attack(
    const std::vector<AttackBatchItem>& items,
    const std::function<AttackResult(const AttackBatchItem&, uint64_t seed)>&
        runner,
    const std::string& kind, uint64_t master_seed, int jobs) {
  std::string missing;
  int n_missing = 0;
  for (const auto& item : items)
    if (!fs::exists(item.source_path)) {
      missing += (n_missing ? ", " : "") + item.source_id;
      ++n_missing;
    }
  if (n_missing)
    throw ConfigError("batch_attack: " + std::to_string(n_missing) +
                      " missing source file(s): " + missing);

  AttackBatch batch;
  batch.results.resize(items.size());
  run_indexed_jobs(jobs, static_cast<int>(items.size()), [&](int i) {
    const AttackBatchItem& item = items[static_cast<size_t>(i)];
    const uint64_t seed =
        attack_seed(master_seed, kind, item.source_id, item.target);
    AttackResult r = runner(item, seed);
    r.source_id = item.source_id;
    batch.results[static_cast<size_t>(i)] = std::move(r);
  });

  struct Cell {
    int n = 0;
    int n_success = 0;
  };
  std::map<std::pair<std::string, std::string>, Cell> cells;
  int n_success = 0;
  for (size_t i = 0; i < items.size(); ++i) {
    Cell& cell = cells[{items[i].bucket, batch.results[i].target}];
    ++cell.n;
    if (batch.results[i].success) {
      ++cell.n_success;
      ++n_success;
    }
  }

  nlohmann::ordered_json summary;
  summary["kind"] = kind;
  summary["n_total"] = items.size();
  summary["n_success"] = n_success;
  summary["success_rate"] =
      items.empty() ? 0.0
                    : static_cast<double>(n_success) /
                          static_cast<double>(items.size());
  summary["cells"] = nlohmann::ordered_json::array();
  for (const auto& [key, cell] : cells) {
    nlohmann::ordered_json c;
    c["bucket"] = key.first;
    c["target"] = key.second;
    c["n"] = cell.n;
    c["n_success"] = cell.n_success;
    c["success_rate"] =
        static_cast<double>(cell.n_success) / static_cast<double>(cell.n);
    summary["cells"].push_back(c);
  }
  batch.summary = summary;
  return batch;
}

void write_attack_records(const std::vector<AttackResult>& results,
                          const std::string& path) {
  std::vector<nlohmann::ordered_json> rows;
  rows.reserve(results.size());
  for (const AttackResult& r : results) {
    nlohmann::ordered_json j;
    j["source_id"] = r.source_id;
    j["source_label"] = r.source_label;
    j["target"] = r.target;
    j["wav_path"] = r.wav_path;
    j["success"] = r.success;
    j["iterations_used"] = r.iterations_used;
    j["final_db_relative"] = r.final_db_relative;
    j["attack_kind"] = r.attack_kind;
    j["victim_checkpoint_hash"] = r.victim_checkpoint_hash;
    j["success_tau_db"] = r.success_tau_db;
    rows.push_back(std::move(j));
  }
  write_jsonl(path, rows);
}

}  // namespace advspeech
