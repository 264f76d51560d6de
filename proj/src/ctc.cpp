#include "advspeech/ctc.hpp"

#include <cmath>
#include <limits>

#include "advspeech/errors.hpp"

namespace advspeech {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double lse3(double a, double b, double c) { return lse2(lse2(a, b), c); }

}  // namespace

int ctc_repeat_count(const std::vector<int>& target) {
  int repeats = 0;
  for (size_t i = 1; i < target.size(); ++i)
    repeats += target[i] == target[i - 1] ? 1 : 0;
  return repeats;
}

CtcResult ctc_loss(const CtcInput& in) {
  const int t_len = static_cast<int>(in.log_probs.rows());
  const int n_sym = static_cast<int>(in.log_probs.cols());
  const int blank = n_sym - 1;
  const int l_len = static_cast<int>(in.target.size());

  if (t_len < 1 || n_sym < 2)
    throw ConfigError("ctc_loss: log_probs must be T x (V+1) with V >= 1");
  for (int c : in.target)
    if (c < 0 || c >= blank)
      throw ConfigError("ctc_loss: target label out of vocabulary range");
  for (int t = 0; t < t_len; ++t) {
    double m = in.log_probs.row(t).maxCoeff();
    double s = (in.log_probs.row(t).array() - m).exp().sum();
    if (std::abs(m + std::log(s)) > 1e-6)
      throw ConfigError("ctc_loss: row " + std::to_string(t) +
                        " is not a normalized log-distribution");
  }
  if (t_len < l_len + ctc_repeat_count(in.target))
    throw InfeasibleError(
        "ctc_loss: target needs at least " +
        std::to_string(l_len + ctc_repeat_count(in.target)) +
        " frames, got " + std::to_string(t_len));

  // Blank-augmented sequence: blank, l1, blank, l2, ..., blank.
  const int s_len = 2 * l_len + 1;
  auto sym = [&](int s) { return s % 2 == 0 ? blank : in.target[s / 2]; };

  // alpha includes the emission at t; beta excludes it, so
  // logP = lse_s(alpha_t(s) + beta_t(s)) at every t.
  Eigen::MatrixXd alpha(t_len, s_len), beta(t_len, s_len);
  alpha.setConstant(kNegInf);
  beta.setConstant(kNegInf);

  alpha(0, 0) = in.log_probs(0, blank);
  if (s_len > 1) alpha(0, 1) = in.log_probs(0, sym(1));
  for (int t = 1; t < t_len; ++t)
    for (int s = 0; s < s_len; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = lse2(acc, alpha(t - 1, s - 1));
      // Skip transition allowed only into a non-blank that differs from the
      // label two states back.
      if (s >= 2 && sym(s) != blank && sym(s) != sym(s - 2))
        acc = lse2(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc + in.log_probs(t, sym(s));
    }

  double log_p = alpha(t_len - 1, s_len - 1);
  if (s_len > 1) log_p = lse2(log_p, alpha(t_len - 1, s_len - 2));

  beta(t_len - 1, s_len - 1) = 0.0;
  if (s_len > 1) beta(t_len - 1, s_len - 2) = 0.0;
  for (int t = t_len - 2; t >= 0; --t)
    for (int s = 0; s < s_len; ++s) {
      double stay = in.log_probs(t + 1, sym(s)) + beta(t + 1, s);
      double step = s + 1 < s_len
                        ? in.log_probs(t + 1, sym(s + 1)) + beta(t + 1, s + 1)
                        : kNegInf;
      double skip = kNegInf;
      if (s + 2 < s_len && sym(s + 2) != blank && sym(s + 2) != sym(s))
        skip = in.log_probs(t + 1, sym(s + 2)) + beta(t + 1, s + 2);
      beta(t, s) = lse3(stay, step, skip);
    }

  CtcResult r;
  r.loss = -log_p;
  r.d_log_probs = Eigen::MatrixXd::Zero(t_len, n_sym);
  // d(-logP)/d log_probs(t, c) = -sum of state occupancies emitting c at t.
  for (int t = 0; t < t_len; ++t)
    for (int s = 0; s < s_len; ++s) {
      const double g = alpha(t, s) + beta(t, s) - log_p;
      if (g == kNegInf) continue;
      r.d_log_probs(t, sym(s)) -= std::exp(g);
    }
  return r;
}

}  // namespace advspeech
