#include "advspeech/features.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <tuple>

#include "advspeech/errors.hpp"

namespace advspeech {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Precomputed per-config state for the mfcc hot path. The filterbank rows are
// stored as dense segments over their support; outside it every weight is
// exactly zero, so the segment dot product equals the full-row product.
struct MfccTables {
  std::vector<double> win;
  std::vector<std::complex<double>> twiddle;  // stage len=2..N at len/2-1
  std::vector<int> mel_start;
  std::vector<Eigen::VectorXd> mel_w;
  Eigen::MatrixXd dct;
};

MfccTables build_tables(const MfccConfig& cfg, int sample_rate) {
  MfccTables t;
  t.win = hann_window(cfg.frame_length);
  t.twiddle.resize(static_cast<size_t>(cfg.fft_size) - 1);
  for (int len = 2; len <= cfg.fft_size; len <<= 1) {
    const size_t off = static_cast<size_t>(len / 2) - 1;
    for (int k = 0; k < len / 2; ++k) {
      const double ang = -2.0 * kPi * k / len;
      t.twiddle[off + static_cast<size_t>(k)] = {std::cos(ang), std::sin(ang)};
    }
  }
  const Eigen::MatrixXd fb = mel_filterbank(cfg, sample_rate);
  t.mel_start.resize(static_cast<size_t>(cfg.n_mels));
  t.mel_w.resize(static_cast<size_t>(cfg.n_mels));
  for (int m = 0; m < cfg.n_mels; ++m) {
    int lo = 0, hi = static_cast<int>(fb.cols()) - 1;
    while (lo < hi && fb(m, lo) == 0.0) ++lo;
    while (hi > lo && fb(m, hi) == 0.0) --hi;
    t.mel_start[static_cast<size_t>(m)] = lo;
    t.mel_w[static_cast<size_t>(m)] = fb.row(m).segment(lo, hi - lo + 1);
  }
  t.dct = dct_matrix(cfg.n_coeffs, cfg.n_mels);
  return t;
}

const MfccTables& tables_for(const MfccConfig& cfg, int sample_rate) {
  using Key = std::tuple<int, int, int, int, int>;
  thread_local std::map<Key, MfccTables> cache;
  const Key key{cfg.frame_length, cfg.fft_size, cfg.n_mels, cfg.n_coeffs,
                sample_rate};
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build_tables(cfg, sample_rate)).first;
  return it->second;
}

// Forward FFT with the precomputed twiddle table; matches fft_radix2(a, false).
void fft_forward(std::vector<std::complex<double>>& a,
                 const std::vector<std::complex<double>>& twiddle) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const size_t half = len / 2, off = half - 1;
    for (size_t i = 0; i < n; i += len)
      for (size_t k = 0; k < half; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + half] * twiddle[off + k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
  }
}

}  // namespace

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  if (!is_pow2(static_cast<int>(n)))
    throw ConfigError("fft_radix2: size must be a power of two");

  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  return w;
}

Eigen::MatrixXd mel_filterbank(const MfccConfig& cfg, int sample_rate) {
  const int n_bins = cfg.fft_size / 2 + 1;
  auto hz_to_mel = [](double hz) {
    return 2595.0 * std::log10(1.0 + hz / 700.0);
  };
  auto mel_to_hz = [](double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  };

  const double nyquist = sample_rate / 2.0;
  const double mel_hi = hz_to_mel(nyquist);
  // n_mels + 2 breakpoints, equally spaced in mel.
  std::vector<double> hz(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    hz[i] = mel_to_hz(mel_hi * i / (cfg.n_mels + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = hz[m], center = hz[m + 1], hi = hz[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      double f = static_cast<double>(k) * sample_rate / cfg.fft_size;
      double w = 0.0;
      if (f > lo && f < hi)
        w = f <= center ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
      fb(m, k) = w;
    }
  }
  return fb;
}

Eigen::MatrixXd dct_matrix(int n_coeffs, int n_mels) {
  Eigen::MatrixXd d(n_coeffs, n_mels);
  const double scale0 = std::sqrt(1.0 / n_mels);
  const double scale = std::sqrt(2.0 / n_mels);
  for (int j = 0; j < n_coeffs; ++j)
    for (int m = 0; m < n_mels; ++m)
      d(j, m) = (j == 0 ? scale0 : scale) *
                (j == 0 ? 1.0 : std::cos(kPi * (m + 0.5) * j / n_mels));
  return d;
}

int frame_count(int64_t len, const MfccConfig& cfg) {
  if (len < cfg.frame_length) return 0;
  return static_cast<int>((len - cfg.frame_length) / cfg.hop) + 1;
}

FeatureMap mfcc(const Waveform& w, const MfccConfig& cfg, MfccWorkspace* ws) {
  if (cfg.n_coeffs > cfg.n_mels)
    throw ConfigError("mfcc: n_coeffs must not exceed n_mels");
  if (cfg.frame_length > cfg.fft_size)
    throw ConfigError("mfcc: frame_length must not exceed fft_size");
  if (cfg.hop < 1) throw ConfigError("mfcc: hop must be >= 1");
  const int t = frame_count(static_cast<int64_t>(w.samples.size()), cfg);
  if (t == 0)
    throw ConfigError("mfcc: waveform shorter than one frame");

  const int n_bins = cfg.fft_size / 2 + 1;
  const MfccTables& tab = tables_for(cfg, w.sample_rate);

  FeatureMap fm;
  fm.frame_count_unpadded = t;
  if (ws) {
    ws->spectra.assign(t, {});
    ws->sample_rate = w.sample_rate;
  }

  std::vector<std::complex<double>> buf(cfg.fft_size);
  Eigen::VectorXd power(n_bins);
  Eigen::VectorXd mel(cfg.n_mels);
  fm.values.resize(t, cfg.n_coeffs);
  if (ws) ws->mel_energies.resize(t, cfg.n_mels);
  for (int i = 0; i < t; ++i) {
    const int64_t s = static_cast<int64_t>(i) * cfg.hop;
    for (int n = 0; n < cfg.frame_length; ++n)
      buf[n] = std::complex<double>(w.samples[s + n] * tab.win[n], 0.0);
    std::fill(buf.begin() + cfg.frame_length, buf.end(),
              std::complex<double>(0.0, 0.0));
    fft_forward(buf, tab.twiddle);
    for (int k = 0; k < n_bins; ++k) power(k) = std::norm(buf[k]);

    for (int m = 0; m < cfg.n_mels; ++m) {
      const auto& wgt = tab.mel_w[static_cast<size_t>(m)];
      mel(m) = wgt.dot(power.segment(
          tab.mel_start[static_cast<size_t>(m)], wgt.size()));
    }
    if (ws) {
      ws->spectra[i] = buf;
      ws->mel_energies.row(i) = mel.transpose();
    }
    // Per-frame GEMV keeps identical frames bit-identical in the output.
    fm.values.row(i) =
        (tab.dct * mel.array().max(cfg.log_floor).log().matrix()).transpose();
  }
  return fm;
}

std::vector<double> mfcc_backward(int64_t waveform_len, const MfccConfig& cfg,
                                  const MfccWorkspace& ws,
                                  const Eigen::MatrixXd& d_values) {
  const int t = static_cast<int>(ws.spectra.size());
  if (d_values.rows() != t || d_values.cols() != cfg.n_coeffs)
    throw ConfigError("mfcc_backward: gradient shape mismatch");

  const int n_bins = cfg.fft_size / 2 + 1;
  const std::vector<double> win = hann_window(cfg.frame_length);
  const Eigen::MatrixXd fb = mel_filterbank(cfg, ws.sample_rate);
  const Eigen::MatrixXd dct = dct_matrix(cfg.n_coeffs, cfg.n_mels);

  std::vector<double> dx(waveform_len, 0.0);
  std::vector<std::complex<double>> g(cfg.fft_size);
  for (int i = 0; i < t; ++i) {
    // DCT and log are linear/elementwise; max(E, floor) gates the gradient.
    Eigen::VectorXd d_logmel = dct.transpose() * d_values.row(i).transpose();
    Eigen::VectorXd d_mel(cfg.n_mels);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double e = ws.mel_energies(i, m);
      d_mel(m) = e >= cfg.log_floor ? d_logmel(m) / e : 0.0;
    }
    Eigen::VectorXd d_power = fb.transpose() * d_mel;

    // d|X_k|^2/dz_n for real z: dL/dz_n = 2 Re(sum_k dP_k X_k e^{+i2pikn/N}),
    // i.e. an unnormalized inverse FFT of dP_k * X_k over the one-sided bins.
    std::fill(g.begin(), g.end(), std::complex<double>(0.0, 0.0));
    for (int k = 0; k < n_bins; ++k) g[k] = d_power(k) * ws.spectra[i][k];
    fft_radix2(g, true);

    const int64_t s = static_cast<int64_t>(i) * cfg.hop;
    for (int n = 0; n < cfg.frame_length; ++n)
      dx[s + n] += 2.0 * g[n].real() * win[n];
  }
  return dx;
}

FeatureMap pad_to(const FeatureMap& fm, int t_max) {
  if (fm.values.rows() > t_max)
    throw ConfigError("pad_to: feature map has " +
                      std::to_string(fm.values.rows()) +
                      " frames, exceeds T_max " + std::to_string(t_max));
  if (fm.values.rows() == t_max) return fm;
  FeatureMap out;
  out.frame_count_unpadded = fm.frame_count_unpadded;
  out.values = Eigen::MatrixXd::Zero(t_max, fm.values.cols());
  out.values.topRows(fm.values.rows()) = fm.values;
  return out;
}

void write_feature_map(const FeatureMap& fm, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write("AFM1", 4);
  int32_t t = static_cast<int32_t>(fm.values.rows());
  int32_t f = static_cast<int32_t>(fm.values.cols());
  out.write(reinterpret_cast<char*>(&t), 4);
  out.write(reinterpret_cast<char*>(&f), 4);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < f; ++j) {
      float v = static_cast<float>(fm.values(i, j));
      out.write(reinterpret_cast<char*>(&v), 4);
    }
  if (!out) throw IoError("write failed: " + path);
}

FeatureMap read_feature_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "AFM1", 4) != 0)
    throw FormatError("feature map: bad magic: " + path);
  int32_t t = 0, f = 0;
  in.read(reinterpret_cast<char*>(&t), 4);
  in.read(reinterpret_cast<char*>(&f), 4);
  if (!in || t < 0 || f <= 0)
    throw FormatError("feature map: bad dimensions: " + path);
  FeatureMap fm;
  fm.values.resize(t, f);
  fm.frame_count_unpadded = t;
  for (int32_t i = 0; i < t; ++i)
    for (int32_t j = 0; j < f; ++j) {
      float v;
      in.read(reinterpret_cast<char*>(&v), 4);
      fm.values(i, j) = v;
    }
  if (!in) throw FormatError("feature map: truncated values: " + path);
  return fm;
}

}  // namespace advspeech
