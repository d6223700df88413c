#pragma once

#include <vector>

#include <Eigen/Dense>

namespace ssondo {

struct WaveClip {
  std::vector<double> samples;
  double sample_rate = 32000.0;
};

struct LogMelSpec {
  Eigen::MatrixXd frames;  // T x n_mels
  double frame_rate = 0.0;
};

struct FrontendConfig {
  double sample_rate = 32000.0;
  int window_len = 1024;  // 32 ms
  int hop = 512;          // 16 ms
  int n_mels = 128;
  double f_min = 50.0;
  double f_max = 16000.0;
  double log_floor = 1e-5;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Hann-windowed power spectrogram, frames start at sample 0 without centering.
/// Clips shorter than one window are zero-padded to a single frame.
Eigen::MatrixXd stft_power(const WaveClip& wave, int window_len = 1024, int hop = 512);

/// HTK-scale triangular filters (unit peak), n_mels x fft_bins.
Eigen::MatrixXd mel_filterbank(int n_mels = 128, int fft_bins = 513, double f_min = 50.0, double f_max = 16000.0,
                               double sample_rate = 32000.0);

/// Center frequencies (Hz) of the filters produced by mel_filterbank.
std::vector<double> mel_center_frequencies(int n_mels, double f_min, double f_max);

LogMelSpec log_mel(const WaveClip& wave, const FrontendConfig& config = {});

}  // namespace ssondo
