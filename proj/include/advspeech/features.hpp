#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "advspeech/audio.hpp"

namespace advspeech {

struct MfccConfig {
  int n_coeffs = 40;
  int frame_length = 400;  // 25 ms @ 16 kHz
  int hop = 160;           // 10 ms @ 16 kHz
  int n_mels = 64;
  int fft_size = 512;
  int t_max = 698;
  double log_floor = 1e-10;
};

// Cepstral coefficients, frames x coefficients. After pad_to, rows beyond
// frame_count_unpadded are zero.
struct FeatureMap {
  Eigen::MatrixXd values;
  int frame_count_unpadded = 0;
};

// In-place radix-2 FFT; size must be a power of two. inverse=true uses the
// conjugate kernel and applies no 1/N normalization.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);

// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

// Triangular mel filterbank, n_mels x (fft_size/2 + 1). HTK mel scale,
// filters spanning 0 Hz to Nyquist, continuous weights at bin frequencies.
Eigen::MatrixXd mel_filterbank(const MfccConfig& cfg, int sample_rate);

// Orthonormal DCT-II basis, n_coeffs x n_mels (first n_coeffs rows).
Eigen::MatrixXd dct_matrix(int n_coeffs, int n_mels);

// Number of analysis frames for a waveform of len samples.
int frame_count(int64_t len, const MfccConfig& cfg);

// Per-frame intermediates kept for the analytic gradient.
struct MfccWorkspace {
  std::vector<std::vector<std::complex<double>>> spectra;  // fft_size each
  Eigen::MatrixXd mel_energies;                            // t x n_mels, pre-floor
  int sample_rate = 16000;
};

// frame -> Hann window -> |FFT|^2 -> mel filterbank -> log -> DCT-II.
// Output is unpadded (frame_count rows). Pass a workspace to keep the
// intermediates needed by mfcc_backward.
FeatureMap mfcc(const Waveform& w, const MfccConfig& cfg,
                MfccWorkspace* ws = nullptr);

// Gradient of a scalar loss w.r.t. the waveform samples, given the gradient
// w.r.t. the unpadded feature values. The workspace must come from a forward
// pass over the same waveform and config.
std::vector<double> mfcc_backward(int64_t waveform_len, const MfccConfig& cfg,
                                  const MfccWorkspace& ws,
                                  const Eigen::MatrixXd& d_values);

// Zero-pads to exactly t_max rows. A longer map is an error: upstream corpus
// construction guarantees durations fit, so overflow means a pipeline bug.
FeatureMap pad_to(const FeatureMap& fm, int t_max);

// Flat binary dump: magic "AFM1", int32 t, int32 f (little-endian), then
// row-major float32 values. Used by test oracles.
void write_feature_map(const FeatureMap& fm, const std::string& path);
FeatureMap read_feature_map(const std::string& path);

}  // namespace advspeech
