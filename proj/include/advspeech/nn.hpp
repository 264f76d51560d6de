#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace advspeech {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;

// Row-major n-d array. Rank-3 tensors are {height, width, channels}.
struct Tensor {
  std::vector<int> shape;
  Eigen::VectorXd values;

  static Tensor zeros(const std::vector<int>& shape);
  int64_t size() const { return values.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
};

enum class LayerKind {
  conv2d,
  maxpool2d,
  dense,
  flatten,
  relu,
  selu,
  linear,
  softmax
};

std::string layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
  LayerKind kind;
  int size = 0;                    // conv2d out channels / dense units
  int kernel_h = 0, kernel_w = 0;  // conv2d
  int pool_h = 0, pool_w = 0;      // maxpool2d
};

LayerSpec conv2d(int out_channels, int kernel_h, int kernel_w);
LayerSpec maxpool2d(int pool_h, int pool_w);
LayerSpec dense(int units);
LayerSpec flatten();
LayerSpec relu();
LayerSpec selu();
LayerSpec linear();
LayerSpec softmax();

struct LayerParams {
  Tensor w;  // conv2d: {kh, kw, in_c, out_c}; dense: {in, out}
  Tensor b;  // {out_c} / {units}
};

// Feed-forward network with per-layer output shapes fixed at build time.
// Value semantics; copying yields an independent clone safe for concurrent
// inference.
struct Network {
  std::vector<LayerSpec> specs;
  std::vector<LayerParams> params;  // empty tensors for parameterless layers
  std::vector<int> input_shape;
  std::vector<std::vector<int>> output_shapes;  // one per layer
  uint64_t rng_seed = 0;

  const std::vector<int>& final_shape() const { return output_shapes.back(); }
};

// Validates shape composition and initializes weights (He-uniform fan-in
// scaling, zero biases) from the seed.
Network build_network(const std::vector<LayerSpec>& specs,
                      const std::vector<int>& input_shape, uint64_t seed);

// Activations plus per-layer scratch needed by backward.
struct ForwardCache {
  std::vector<Tensor> acts;  // acts[0] = input, acts[i+1] = layer i output
  std::vector<std::vector<int>> pool_argmax;  // flat input index per output
  std::vector<RowMat> conv_patches;           // im2col rows
};

Tensor forward(const Network& net, const Tensor& input,
               ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<LayerParams> params;
  Tensor input;
};

// Full-chain backward from dLoss/dOutput. Softmax uses its exact Jacobian.
Gradients backward(const Network& net, const ForwardCache& cache,
                   const Tensor& d_out);

// Backward that enters below a trailing softmax layer, for losses whose
// gradient is naturally expressed w.r.t. logits (cross-entropy, CTC).
Gradients backward_from_logits(const Network& net, const ForwardCache& cache,
                               const Tensor& d_logits);

// Converts dLoss/d(log probs) to dLoss/d(logits) through log-softmax:
// dz = g - y * sum(g), applied along the last axis.
Tensor logit_grad_from_log_prob_grad(const Tensor& probs,
                                     const Tensor& d_log_probs);

struct AdamState {
  std::vector<LayerParams> m, v;
  int64_t step = 0;
};

// In-place Adam update (beta1 0.9, beta2 0.999, eps 1e-8). The state is
// created lazily on first use. Non-finite gradients raise NumericsError.
void sgd_adam_step(Network& net, const Gradients& grads, double lr,
                   AdamState& state);

struct CrossEntropyResult {
  double loss;
  Tensor d_logits;  // probs - onehot(label)
};

// probs must be a rank-1 softmax output. Loss floors probs[label] at 1e-12.
CrossEntropyResult cross_entropy(const Tensor& probs, int label);

// Checkpoint: magic "ANN1", uint32 descriptor length, JSON descriptor
// (architecture, seed, metadata), then per-layer float32 blobs (weights then
// biases) with declared byte lengths. Round-trips bit-exactly.
void save_checkpoint(const Network& net, const std::string& path,
                     const nlohmann::ordered_json& metadata = {});
Network load_checkpoint(const std::string& path,
                        nlohmann::ordered_json* metadata = nullptr);

}  // namespace advspeech
