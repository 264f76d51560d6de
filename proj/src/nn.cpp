#include "advspeech/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "advspeech/errors.hpp"
#include "advspeech/rng.hpp"

namespace advspeech {

namespace {

constexpr double kSeluAlpha = 1.6732632423543772;
constexpr double kSeluLambda = 1.0507009873554805;

int64_t shape_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(shape[i]);
  return s + ")";
}

Eigen::Map<RowMat> as_matrix(Tensor& t, int64_t rows, int64_t cols) {
  return Eigen::Map<RowMat>(t.values.data(), rows, cols);
}

Eigen::Map<const RowMat> as_matrix(const Tensor& t, int64_t rows,
                                   int64_t cols) {
  return Eigen::Map<const RowMat>(t.values.data(), rows, cols);
}

}  // namespace

Tensor Tensor::zeros(const std::vector<int>& shape) {
  Tensor t;
  t.shape = shape;
  t.values = Eigen::VectorXd::Zero(shape_size(shape));
  return t;
}

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::dense: return "dense";
    case LayerKind::flatten: return "flatten";
    case LayerKind::relu: return "relu";
    case LayerKind::selu: return "selu";
    case LayerKind::linear: return "linear";
    case LayerKind::softmax: return "softmax";
  }
  throw ConfigError("unknown layer kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "conv2d") return LayerKind::conv2d;
  if (name == "maxpool2d") return LayerKind::maxpool2d;
  if (name == "dense") return LayerKind::dense;
  if (name == "flatten") return LayerKind::flatten;
  if (name == "relu") return LayerKind::relu;
  if (name == "selu") return LayerKind::selu;
  if (name == "linear") return LayerKind::linear;
  if (name == "softmax") return LayerKind::softmax;
  throw FormatError("unknown layer kind: " + name);
}

LayerSpec conv2d(int out_channels, int kernel_h, int kernel_w) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.size = out_channels;
  s.kernel_h = kernel_h;
  s.kernel_w = kernel_w;
  return s;
}

LayerSpec maxpool2d(int pool_h, int pool_w) {
  LayerSpec s;
  s.kind = LayerKind::maxpool2d;
  s.pool_h = pool_h;
  s.pool_w = pool_w;
  return s;
}

LayerSpec dense(int units) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.size = units;
  return s;
}

LayerSpec flatten() { return LayerSpec{LayerKind::flatten}; }
LayerSpec relu() { return LayerSpec{LayerKind::relu}; }
LayerSpec selu() { return LayerSpec{LayerKind::selu}; }
LayerSpec linear() { return LayerSpec{LayerKind::linear}; }
LayerSpec softmax() { return LayerSpec{LayerKind::softmax}; }

Network build_network(const std::vector<LayerSpec>& specs,
                      const std::vector<int>& input_shape, uint64_t seed) {
  if (specs.empty()) throw ConfigError("build_network: no layers");
  for (int d : input_shape)
    if (d < 1) throw ConfigError("build_network: non-positive input dim");

  Network net;
  net.specs = specs;
  net.input_shape = input_shape;
  net.rng_seed = seed;
  Rng root(seed);

  std::vector<int> cur = input_shape;
  for (size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    LayerParams p;
    Rng layer_rng = root.fork("layer" + std::to_string(i));
    switch (s.kind) {
      case LayerKind::conv2d: {
        if (cur.size() != 3)
          throw ConfigError("conv2d at layer " + std::to_string(i) +
                            ": input must be rank 3, got " + shape_str(cur));
        if (s.size < 1 || s.kernel_h < 1 || s.kernel_w < 1)
          throw ConfigError("conv2d: size and kernel dims must be >= 1");
        if (s.kernel_h > cur[0] || s.kernel_w > cur[1])
          throw ConfigError("conv2d at layer " + std::to_string(i) +
                            ": kernel " + std::to_string(s.kernel_h) + "x" +
                            std::to_string(s.kernel_w) + " exceeds input " +
                            shape_str(cur));
        const int in_c = cur[2];
        p.w = Tensor::zeros({s.kernel_h, s.kernel_w, in_c, s.size});
        p.b = Tensor::zeros({s.size});
        const double limit =
            std::sqrt(6.0 / (s.kernel_h * s.kernel_w * in_c));
        for (int64_t k = 0; k < p.w.size(); ++k)
          p.w.values(k) = layer_rng.uniform(-limit, limit);
        cur = {cur[0] - s.kernel_h + 1, cur[1] - s.kernel_w + 1, s.size};
        break;
      }
      case LayerKind::maxpool2d: {
        if (cur.size() != 3)
          throw ConfigError("maxpool2d at layer " + std::to_string(i) +
                            ": input must be rank 3, got " + shape_str(cur));
        if (s.pool_h < 1 || s.pool_w < 1)
          throw ConfigError("maxpool2d: pool dims must be >= 1");
        if (cur[0] / s.pool_h < 1 || cur[1] / s.pool_w < 1)
          throw ConfigError("maxpool2d at layer " + std::to_string(i) +
                            ": pool " + std::to_string(s.pool_h) + "x" +
                            std::to_string(s.pool_w) + " exceeds input " +
                            shape_str(cur));
        cur = {cur[0] / s.pool_h, cur[1] / s.pool_w, cur[2]};
        break;
      }
      case LayerKind::dense: {
        if (cur.size() != 1)
          throw ConfigError("dense at layer " + std::to_string(i) +
                            ": input must be rank 1 (flatten first), got " +
                            shape_str(cur));
        if (s.size < 1) throw ConfigError("dense: size must be >= 1");
        const int in = cur[0];
        p.w = Tensor::zeros({in, s.size});
        p.b = Tensor::zeros({s.size});
        const double limit = std::sqrt(6.0 / in);
        for (int64_t k = 0; k < p.w.size(); ++k)
          p.w.values(k) = layer_rng.uniform(-limit, limit);
        cur = {s.size};
        break;
      }
      case LayerKind::flatten: {
        cur = {static_cast<int>(shape_size(cur))};
        break;
      }
      case LayerKind::relu:
      case LayerKind::selu:
      case LayerKind::linear:
      case LayerKind::softmax:
        break;  // shape preserved
    }
    net.params.push_back(std::move(p));
    net.output_shapes.push_back(cur);
  }
  return net;
}

namespace {

void conv2d_forward(const LayerSpec& s, const LayerParams& p, const Tensor& a,
                    Tensor& out, RowMat& patches) {
  const int h = a.shape[0], w = a.shape[1], c = a.shape[2];
  const int oh = h - s.kernel_h + 1, ow = w - s.kernel_w + 1;
  const int k = s.kernel_h * s.kernel_w * c;

  patches.resize(static_cast<int64_t>(oh) * ow, k);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const int64_t r = static_cast<int64_t>(y) * ow + x;
      for (int di = 0; di < s.kernel_h; ++di) {
        const double* src = a.values.data() +
                            (static_cast<int64_t>(y + di) * w + x) * c;
        double* dst = patches.data() + r * k +
                      static_cast<int64_t>(di) * s.kernel_w * c;
        std::memcpy(dst, src, sizeof(double) * s.kernel_w * c);
      }
    }

  out = Tensor::zeros({oh, ow, s.size});
  auto wmap = as_matrix(p.w, k, s.size);
  auto omap = as_matrix(out, static_cast<int64_t>(oh) * ow, s.size);
  omap.noalias() = patches * wmap;
  omap.rowwise() += p.b.values.transpose();
}

void conv2d_backward(const LayerSpec& s, const LayerParams& p,
                     const Tensor& a, const RowMat& patches, const Tensor& g,
                     LayerParams& dp, Tensor& dx) {
  const int h = a.shape[0], w = a.shape[1], c = a.shape[2];
  const int oh = h - s.kernel_h + 1, ow = w - s.kernel_w + 1;
  const int k = s.kernel_h * s.kernel_w * c;

  auto gmap = as_matrix(g, static_cast<int64_t>(oh) * ow, s.size);
  auto wmap = as_matrix(p.w, k, s.size);

  dp.w = Tensor::zeros(p.w.shape);
  dp.b = Tensor::zeros(p.b.shape);
  as_matrix(dp.w, k, s.size).noalias() = patches.transpose() * gmap;
  dp.b.values = gmap.colwise().sum().transpose();

  RowMat d_patches = gmap * wmap.transpose();
  dx = Tensor::zeros(a.shape);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const int64_t r = static_cast<int64_t>(y) * ow + x;
      for (int di = 0; di < s.kernel_h; ++di) {
        double* dst = dx.values.data() +
                      (static_cast<int64_t>(y + di) * w + x) * c;
        const double* src = d_patches.data() + r * k +
                            static_cast<int64_t>(di) * s.kernel_w * c;
        for (int j = 0; j < s.kernel_w * c; ++j) dst[j] += src[j];
      }
    }
}

void maxpool_forward(const LayerSpec& s, const Tensor& a, Tensor& out,
                     std::vector<int>& argmax) {
  const int h = a.shape[0], w = a.shape[1], c = a.shape[2];
  const int oh = h / s.pool_h, ow = w / s.pool_w;
  out = Tensor::zeros({oh, ow, c});
  argmax.assign(out.size(), -1);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int ch = 0; ch < c; ++ch) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = -1;
        for (int di = 0; di < s.pool_h; ++di)
          for (int dj = 0; dj < s.pool_w; ++dj) {
            const int64_t idx =
                (static_cast<int64_t>(y * s.pool_h + di) * w +
                 (x * s.pool_w + dj)) * c + ch;
            if (a.values(idx) > best) {
              best = a.values(idx);
              best_idx = static_cast<int>(idx);
            }
          }
        const int64_t o = (static_cast<int64_t>(y) * ow + x) * c + ch;
        out.values(o) = best;
        argmax[o] = best_idx;
      }
}

void softmax_rows(const Tensor& a, Tensor& out) {
  const int d = a.shape.back();
  const int64_t rows = a.size() / d;
  out = Tensor::zeros(a.shape);
  auto in = as_matrix(a, rows, d);
  auto o = as_matrix(out, rows, d);
  for (int64_t r = 0; r < rows; ++r) {
    const double m = in.row(r).maxCoeff();
    Eigen::ArrayXd e = (in.row(r).array() - m).exp();
    o.row(r) = (e / e.sum()).matrix();
  }
}

}  // namespace

Tensor forward(const Network& net, const Tensor& input, ForwardCache* cache) {
  if (input.shape != net.input_shape)
    throw ConfigError("forward: input shape " + shape_str(input.shape) +
                      " does not match network input " +
                      shape_str(net.input_shape));
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.acts.assign(1, input);
  c.pool_argmax.assign(net.specs.size(), {});
  c.conv_patches.assign(net.specs.size(), {});

  for (size_t i = 0; i < net.specs.size(); ++i) {
    const LayerSpec& s = net.specs[i];
    const Tensor& a = c.acts.back();
    Tensor out;
    switch (s.kind) {
      case LayerKind::conv2d:
        conv2d_forward(s, net.params[i], a, out, c.conv_patches[i]);
        break;
      case LayerKind::maxpool2d:
        maxpool_forward(s, a, out, c.pool_argmax[i]);
        break;
      case LayerKind::dense: {
        const auto& p = net.params[i];
        out = Tensor::zeros({s.size});
        auto wmap = as_matrix(p.w, a.size(), s.size);
        out.values.noalias() = wmap.transpose() * a.values;
        out.values += p.b.values;
        break;
      }
      case LayerKind::flatten:
        out.shape = {static_cast<int>(a.size())};
        out.values = a.values;
        break;
      case LayerKind::relu:
        out.shape = a.shape;
        out.values = a.values.array().max(0.0).matrix();
        break;
      case LayerKind::selu: {
        out = Tensor::zeros(a.shape);
        for (int64_t k = 0; k < a.size(); ++k) {
          const double x = a.values(k);
          out.values(k) = x > 0.0
                              ? kSeluLambda * x
                              : kSeluLambda * kSeluAlpha * (std::exp(x) - 1.0);
        }
        break;
      }
      case LayerKind::linear:
        out = a;
        break;
      case LayerKind::softmax:
        softmax_rows(a, out);
        break;
    }
    c.acts.push_back(std::move(out));
  }
  return c.acts.back();
}

namespace {

// Shared tail of backward()/backward_from_logits(): walk layers
// [start_layer .. 0] with g = dLoss/d(output of start_layer).
Gradients backward_impl(const Network& net, const ForwardCache& cache,
                        Tensor g, int start_layer) {
  if (cache.acts.size() != net.specs.size() + 1)
    throw ConfigError("backward: forward cache missing or stale");

  Gradients grads;
  grads.params.resize(net.specs.size());

  for (int i = start_layer; i >= 0; --i) {
    const LayerSpec& s = net.specs[i];
    const Tensor& a = cache.acts[i];      // layer input
    const Tensor& y = cache.acts[i + 1];  // layer output
    Tensor gx;
    switch (s.kind) {
      case LayerKind::conv2d:
        conv2d_backward(s, net.params[i], a, cache.conv_patches[i], g,
                        grads.params[i], gx);
        break;
      case LayerKind::maxpool2d: {
        gx = Tensor::zeros(a.shape);
        const auto& arg = cache.pool_argmax[i];
        for (int64_t o = 0; o < g.size(); ++o)
          gx.values(arg[o]) += g.values(o);
        break;
      }
      case LayerKind::dense: {
        const auto& p = net.params[i];
        auto& dp = grads.params[i];
        dp.w = Tensor::zeros(p.w.shape);
        dp.b = g;
        dp.b.shape = p.b.shape;
        as_matrix(dp.w, a.size(), s.size).noalias() =
            a.values * g.values.transpose();
        gx = Tensor::zeros(a.shape);
        auto wmap = as_matrix(p.w, a.size(), s.size);
        gx.values.noalias() = wmap * g.values;
        break;
      }
      case LayerKind::flatten:
        gx.shape = a.shape;
        gx.values = g.values;
        break;
      case LayerKind::relu: {
        gx = Tensor::zeros(a.shape);
        for (int64_t k = 0; k < a.size(); ++k)
          gx.values(k) = a.values(k) > 0.0 ? g.values(k) : 0.0;
        break;
      }
      case LayerKind::selu: {
        gx = Tensor::zeros(a.shape);
        for (int64_t k = 0; k < a.size(); ++k) {
          const double x = a.values(k);
          gx.values(k) =
              g.values(k) *
              (x > 0.0 ? kSeluLambda
                       : kSeluLambda * kSeluAlpha * std::exp(x));
        }
        break;
      }
      case LayerKind::linear:
        gx = g;
        break;
      case LayerKind::softmax: {
        // Exact Jacobian along the last axis: dx = y * (g - dot(g, y)).
        const int d = a.shape.back();
        const int64_t rows = a.size() / d;
        gx = Tensor::zeros(a.shape);
        auto ymap = as_matrix(y, rows, d);
        auto gmap = as_matrix(g, rows, d);
        auto xmap = as_matrix(gx, rows, d);
        for (int64_t r = 0; r < rows; ++r) {
          const double dot = gmap.row(r).dot(ymap.row(r));
          xmap.row(r) =
              (ymap.row(r).array() * (gmap.row(r).array() - dot)).matrix();
        }
        break;
      }
    }
    g = std::move(gx);
  }
  grads.input = std::move(g);
  return grads;
}

}  // namespace

Gradients backward(const Network& net, const ForwardCache& cache,
                   const Tensor& d_out) {
  if (d_out.shape != net.final_shape())
    throw ConfigError("backward: gradient shape mismatch");
  return backward_impl(net, cache, d_out,
                       static_cast<int>(net.specs.size()) - 1);
}

Gradients backward_from_logits(const Network& net, const ForwardCache& cache,
                               const Tensor& d_logits) {
  if (net.specs.empty() || net.specs.back().kind != LayerKind::softmax)
    throw ConfigError("backward_from_logits: network must end in softmax");
  if (d_logits.shape != net.final_shape())
    throw ConfigError("backward_from_logits: gradient shape mismatch");
  return backward_impl(net, cache, d_logits,
                       static_cast<int>(net.specs.size()) - 2);
}

Tensor logit_grad_from_log_prob_grad(const Tensor& probs,
                                     const Tensor& d_log_probs) {
  if (probs.shape != d_log_probs.shape)
    throw ConfigError("logit_grad_from_log_prob_grad: shape mismatch");
  const int d = probs.shape.back();
  const int64_t rows = probs.size() / d;
  Tensor out = Tensor::zeros(probs.shape);
  auto ymap = as_matrix(probs, rows, d);
  auto gmap = as_matrix(d_log_probs, rows, d);
  auto omap = as_matrix(out, rows, d);
  for (int64_t r = 0; r < rows; ++r) {
    const double total = gmap.row(r).sum();
    omap.row(r) = gmap.row(r) - total * ymap.row(r);
  }
  return out;
}

void sgd_adam_step(Network& net, const Gradients& grads, double lr,
                   AdamState& state) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (grads.params.size() != net.params.size())
    throw ConfigError("sgd_adam_step: gradient layer count mismatch");

  if (state.m.empty()) {
    state.m.resize(net.params.size());
    state.v.resize(net.params.size());
    for (size_t i = 0; i < net.params.size(); ++i) {
      if (net.params[i].w.size() == 0) continue;
      state.m[i].w = Tensor::zeros(net.params[i].w.shape);
      state.m[i].b = Tensor::zeros(net.params[i].b.shape);
      state.v[i].w = Tensor::zeros(net.params[i].w.shape);
      state.v[i].b = Tensor::zeros(net.params[i].b.shape);
    }
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  auto update = [&](Eigen::VectorXd& w, const Eigen::VectorXd& g,
                    Eigen::VectorXd& m, Eigen::VectorXd& v) {
    if (!g.allFinite())
      throw NumericsError("sgd_adam_step: non-finite gradient");
    m = b1 * m + (1.0 - b1) * g;
    v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
    w -= (lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps)).matrix();
  };

  for (size_t i = 0; i < net.params.size(); ++i) {
    if (net.params[i].w.size() == 0) continue;
    update(net.params[i].w.values, grads.params[i].w.values,
           state.m[i].w.values, state.v[i].w.values);
    update(net.params[i].b.values, grads.params[i].b.values,
           state.m[i].b.values, state.v[i].b.values);
  }
}

CrossEntropyResult cross_entropy(const Tensor& probs, int label) {
  if (probs.rank() != 1)
    throw ConfigError("cross_entropy: probs must be rank 1");
  if (label < 0 || label >= probs.shape[0])
    throw ConfigError("cross_entropy: label out of range");
  CrossEntropyResult r;
  r.loss = -std::log(std::max(probs.values(label), 1e-12));
  r.d_logits = probs;
  r.d_logits.values(label) -= 1.0;
  return r;
}

namespace {

void put_u32(std::ofstream& out, uint32_t v) {
  out.write(reinterpret_cast<char*>(&v), 4);
}

void write_blob(std::ofstream& out, const Tensor& t) {
  for (int64_t i = 0; i < t.size(); ++i) {
    const double v = t.values(i);
    out.write(reinterpret_cast<const char*>(&v), 8);
  }
}

void read_blob(std::ifstream& in, Tensor& t, const std::string& path) {
  for (int64_t i = 0; i < t.size(); ++i) {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    t.values(i) = v;
  }
  if (!in) throw FormatError("checkpoint: truncated blob: " + path);
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path,
                     const nlohmann::ordered_json& metadata) {
  nlohmann::ordered_json desc;
  desc["input_shape"] = net.input_shape;
  desc["rng_seed"] = net.rng_seed;
  desc["layers"] = nlohmann::ordered_json::array();
  for (const LayerSpec& s : net.specs) {
    nlohmann::ordered_json layer;
    layer["kind"] = layer_kind_name(s.kind);
    if (s.kind == LayerKind::conv2d) {
      layer["size"] = s.size;
      layer["kernel"] = {s.kernel_h, s.kernel_w};
    } else if (s.kind == LayerKind::maxpool2d) {
      layer["pool"] = {s.pool_h, s.pool_w};
    } else if (s.kind == LayerKind::dense) {
      layer["size"] = s.size;
    }
    desc["layers"].push_back(layer);
  }
  desc["blobs"] = nlohmann::ordered_json::array();
  for (const LayerParams& p : net.params)
    desc["blobs"].push_back({p.w.size() * 8, p.b.size() * 8});
  desc["metadata"] = metadata.is_null() ? nlohmann::ordered_json::object()
                                        : metadata;

  const std::string body = desc.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write("ANN2", 4);
  put_u32(out, static_cast<uint32_t>(body.size()));
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  for (const LayerParams& p : net.params) {
    write_blob(out, p.w);
    write_blob(out, p.b);
  }
  if (!out) throw IoError("write failed: " + path);
}

Network load_checkpoint(const std::string& path,
                        nlohmann::ordered_json* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "ANN2", 4) != 0)
    throw FormatError("checkpoint: bad magic: " + path);
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  std::string body(len, '\0');
  in.read(body.data(), len);
  if (!in) throw FormatError("checkpoint: truncated descriptor: " + path);

  nlohmann::ordered_json desc;
  try {
    desc = nlohmann::ordered_json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint: bad descriptor JSON: " +
                      std::string(e.what()));
  }

  std::vector<LayerSpec> specs;
  for (const auto& layer : desc.at("layers")) {
    const std::string kind = layer.at("kind").get<std::string>();
    LayerSpec s;
    s.kind = layer_kind_from_name(kind);
    if (s.kind == LayerKind::conv2d) {
      s.size = layer.at("size").get<int>();
      s.kernel_h = layer.at("kernel")[0].get<int>();
      s.kernel_w = layer.at("kernel")[1].get<int>();
    } else if (s.kind == LayerKind::maxpool2d) {
      s.pool_h = layer.at("pool")[0].get<int>();
      s.pool_w = layer.at("pool")[1].get<int>();
    } else if (s.kind == LayerKind::dense) {
      s.size = layer.at("size").get<int>();
    }
    specs.push_back(s);
  }

  Network net = build_network(specs,
                              desc.at("input_shape").get<std::vector<int>>(),
                              desc.at("rng_seed").get<uint64_t>());

  const auto& blobs = desc.at("blobs");
  if (blobs.size() != net.params.size())
    throw FormatError("checkpoint: blob count mismatch: " + path);
  for (size_t i = 0; i < net.params.size(); ++i) {
    if (blobs[i][0].get<int64_t>() != net.params[i].w.size() * 8 ||
        blobs[i][1].get<int64_t>() != net.params[i].b.size() * 8)
      throw FormatError("checkpoint: blob length mismatch at layer " +
                        std::to_string(i) + ": " + path);
    read_blob(in, net.params[i].w, path);
    read_blob(in, net.params[i].b, path);
  }

  if (metadata) *metadata = desc.value("metadata", nlohmann::ordered_json::object());
  return net;
}

}  // namespace advspeech
