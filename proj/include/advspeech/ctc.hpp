#pragma once

#include <Eigen/Dense>
#include <vector>

namespace advspeech {

// log_probs: T x (V+1), rows log-sum-exp to 0. Labels index the vocabulary
// [0, V); the blank symbol is the LAST column (index V).
struct CtcInput {
  Eigen::MatrixXd log_probs;
  std::vector<int> target;
};

struct CtcResult {
  double loss;                   // -log p(target | log_probs)
  Eigen::MatrixXd d_log_probs;   // same shape as log_probs
};

// Number of adjacent equal label pairs; the minimum feasible frame count is
// target length plus this.
int ctc_repeat_count(const std::vector<int>& target);

// Log-domain forward-backward over the blank-augmented sequence (2L+1
// states). Gradient is w.r.t. log_probs treated as free variables; callers
// convert to logit gradients via the softmax relation.
CtcResult ctc_loss(const CtcInput& in);

}  // namespace advspeech
