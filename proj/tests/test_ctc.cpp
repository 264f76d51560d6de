#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "advspeech/ctc.hpp"
#include "advspeech/errors.hpp"
#include "advspeech/nn.hpp"
#include "advspeech/rng.hpp"
#include "helpers.hpp"

using namespace advspeech;

namespace {

// Independent oracle: enumerate every alignment path, collapse it (merge
// adjacent repeats, then drop blanks), and sum the probabilities of paths
// that collapse to the target. The gradient comes from the same enumeration:
// d(-log total)/d logP(t,c) = -(mass of matching paths through (t,c)) / total.
std::vector<int> collapse_path(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != blank) out.push_back(s);
    prev = s;
  }
  return out;
}

struct OracleResult {
  double loss = 0.0;
  Eigen::MatrixXd d_log_probs;
};

OracleResult ctc_oracle(const Eigen::MatrixXd& log_probs,
                        const std::vector<int>& target) {
  const int t_len = static_cast<int>(log_probs.rows());
  const int n_sym = static_cast<int>(log_probs.cols());
  const int blank = n_sym - 1;

  double total = 0.0;
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(t_len, n_sym);

  int64_t n_paths = 1;
  for (int t = 0; t < t_len; ++t) n_paths *= n_sym;

  std::vector<int> path(t_len);
  for (int64_t idx = 0; idx < n_paths; ++idx) {
    int64_t rem = idx;
    double lp = 0.0;
    for (int t = 0; t < t_len; ++t) {
      path[t] = static_cast<int>(rem % n_sym);
      rem /= n_sym;
      lp += log_probs(t, path[t]);
    }
    if (collapse_path(path, blank) != target) continue;
    const double p = std::exp(lp);
    total += p;
    for (int t = 0; t < t_len; ++t) mass(t, path[t]) += p;
  }

  OracleResult r;
  r.loss = -std::log(total);
  r.d_log_probs = -(mass / total);
  return r;
}

Eigen::MatrixXd random_log_probs(int t_len, int n_sym, Rng& rng) {
  Eigen::MatrixXd z(t_len, n_sym);
  for (int t = 0; t < t_len; ++t)
    for (int c = 0; c < n_sym; ++c) z(t, c) = rng.uniform(-4.0, 4.0);
  for (int t = 0; t < t_len; ++t) {
    const double m = z.row(t).maxCoeff();
    const double lse = m + std::log((z.row(t).array() - m).exp().sum());
    z.row(t).array() -= lse;
  }
  return z;
}

}  // namespace

TEST_CASE("single frame, uniform distribution") {
  CtcInput in;
  in.log_probs = Eigen::MatrixXd::Constant(1, 2, std::log(0.5));
  in.target = {0};
  CtcResult r = ctc_loss(in);
  CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Only the path [a] matches, so the occupancy of (0, a) is 1.
  CHECK(r.d_log_probs(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r.d_log_probs(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("three frames, two-symbol target against explicit enumeration") {
  Rng rng(404);
  CtcInput in;
  in.log_probs = random_log_probs(3, 3, rng);
  in.target = {0, 1};
  CtcResult got = ctc_loss(in);
  OracleResult want = ctc_oracle(in.log_probs, in.target);
  CHECK(std::abs(got.loss - want.loss) < 1e-10);
  for (int t = 0; t < 3; ++t)
    for (int c = 0; c < 3; ++c)
      CHECK(std::abs(got.d_log_probs(t, c) - want.d_log_probs(t, c)) < 1e-10);
}

TEST_CASE("randomized enumeration oracle: loss and gradient") {
  Rng rng(2025);
  int tested = 0;
  while (tested < 200) {
    const int t_len = static_cast<int>(rng.uniform_int(1, 6));
    const int vocab = static_cast<int>(rng.uniform_int(1, 3));
    const int l_len = static_cast<int>(rng.uniform_int(1, 3));
    std::vector<int> target(l_len);
    for (int& c : target) c = static_cast<int>(rng.uniform_int(0, vocab - 1));
    if (t_len < l_len + ctc_repeat_count(target)) continue;

    CtcInput in;
    in.log_probs = random_log_probs(t_len, vocab + 1, rng);
    in.target = target;
    CtcResult got = ctc_loss(in);
    OracleResult want = ctc_oracle(in.log_probs, in.target);

    INFO("trial ", tested, " T=", t_len, " V=", vocab, " L=", l_len);
    CHECK(std::abs(got.loss - want.loss) <= 1e-9);
    for (int t = 0; t < t_len; ++t)
      for (int c = 0; c <= vocab; ++c)
        CHECK(std::abs(got.d_log_probs(t, c) - want.d_log_probs(t, c)) <=
              1e-9);
    ++tested;
  }
}

TEST_CASE("empty target sums all-blank paths") {
  Rng rng(17);
  CtcInput in;
  in.log_probs = random_log_probs(4, 3, rng);
  in.target = {};
  CtcResult got = ctc_loss(in);
  double expect = 0.0;
  for (int t = 0; t < 4; ++t) expect -= in.log_probs(t, 2);
  CHECK(got.loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("infeasible targets raise InfeasibleError") {
  CtcInput in;
  in.log_probs = Eigen::MatrixXd::Constant(2, 3, std::log(1.0 / 3.0));
  in.target = {0, 0};  // needs T >= 3 because of the repeat
  CHECK_THROWS_AS(ctc_loss(in), InfeasibleError);

  CtcInput in2;
  in2.log_probs = Eigen::MatrixXd::Constant(1, 3, std::log(1.0 / 3.0));
  in2.target = {0, 1};
  CHECK_THROWS_AS(ctc_loss(in2), InfeasibleError);
}

TEST_CASE("input validation") {
  CtcInput in;
  in.log_probs = Eigen::MatrixXd::Constant(2, 3, std::log(1.0 / 3.0));
  in.target = {2};  // blank index may not appear in a target
  CHECK_THROWS_AS(ctc_loss(in), ConfigError);
  in.target = {-1};
  CHECK_THROWS_AS(ctc_loss(in), ConfigError);

  CtcInput bad_rows;
  bad_rows.log_probs = Eigen::MatrixXd::Constant(2, 3, std::log(0.3));
  bad_rows.target = {0};
  CHECK_THROWS_AS(ctc_loss(bad_rows), ConfigError);

  CtcInput empty;
  empty.log_probs = Eigen::MatrixXd(0, 3);
  empty.target = {0};
  CHECK_THROWS_AS(ctc_loss(empty), ConfigError);
}

TEST_CASE("gradient through a softmax front end matches finite differences") {
  Rng rng(88);
  const int t_len = 5, n_sym = 3;
  std::vector<int> target = {0, 1, 0};

  Eigen::MatrixXd logits(t_len, n_sym);
  for (int t = 0; t < t_len; ++t)
    for (int c = 0; c < n_sym; ++c) logits(t, c) = rng.uniform(-2.0, 2.0);

  auto loss_of = [&](const Eigen::MatrixXd& z) {
    Eigen::MatrixXd lp(t_len, n_sym);
    for (int t = 0; t < t_len; ++t) {
      const double m = z.row(t).maxCoeff();
      const double lse = m + std::log((z.row(t).array() - m).exp().sum());
      lp.row(t) = z.row(t).array() - lse;
    }
    CtcInput in;
    in.log_probs = lp;
    in.target = target;
    return ctc_loss(in);
  };

  CtcResult base = loss_of(logits);
  // dz = g - softmax(z) * rowsum(g), row by row.
  Eigen::MatrixXd dz(t_len, n_sym);
  for (int t = 0; t < t_len; ++t) {
    Eigen::ArrayXd p = (logits.row(t).array() - logits.row(t).maxCoeff()).exp();
    p /= p.sum();
    const double s = base.d_log_probs.row(t).sum();
    dz.row(t) = base.d_log_probs.row(t).array() - p.transpose() * s;
  }

  const double eps = 1e-5;
  for (int t = 0; t < t_len; ++t)
    for (int c = 0; c < n_sym; ++c) {
      Eigen::MatrixXd up = logits, down = logits;
      up(t, c) += eps;
      down(t, c) -= eps;
      const double fd = (loss_of(up).loss - loss_of(down).loss) / (2 * eps);
      INFO("logit (", t, ",", c, ")");
      CHECK((testutil::rel_err(dz(t, c), fd) < 1e-4 ||
             std::abs(dz(t, c) - fd) < 1e-7));
    }
}

TEST_CASE("log-domain stability under extreme probabilities") {
  const int t_len = 6, n_sym = 3;
  const double tiny = 1e-22;
  Eigen::MatrixXd lp(t_len, n_sym);
  for (int t = 0; t < t_len; ++t) {
    // One symbol takes nearly all the mass; the others get ~e^-50 each.
    const int big = t % n_sym;
    for (int c = 0; c < n_sym; ++c)
      lp(t, c) = c == big ? std::log1p(-(n_sym - 1) * tiny) : std::log(tiny);
  }
  CtcInput in;
  in.log_probs = lp;
  in.target = {0, 1};
  CtcResult r = ctc_loss(in);
  CHECK(std::isfinite(r.loss));
  CHECK(r.d_log_probs.array().isFinite().all());
}

TEST_CASE("loss is non-negative and near zero for a dominant alignment") {
  Rng rng(321);
  for (int trial = 0; trial < 50; ++trial) {
    const int t_len = static_cast<int>(rng.uniform_int(2, 6));
    CtcInput in;
    in.log_probs = random_log_probs(t_len, 3, rng);
    in.target = {static_cast<int>(rng.uniform_int(0, 1))};
    CHECK(ctc_loss(in).loss >= -1e-9);
  }

  // T == L with no repeats leaves exactly one valid path; give it all the
  // probability mass and the loss collapses toward zero.
  const double leak = 1e-9;
  Eigen::MatrixXd lp(3, 4);
  std::vector<int> target = {0, 1, 2};
  for (int t = 0; t < 3; ++t)
    for (int c = 0; c < 4; ++c)
      lp(t, c) = c == target[t] ? std::log1p(-3 * leak) : std::log(leak);
  CtcInput in;
  in.log_probs = lp;
  in.target = target;
  CHECK(ctc_loss(in).loss < 1e-6);
}
