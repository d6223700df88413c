#include "ssondo/features.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "ssondo/error.hpp"

namespace ssondo {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::MatrixXd stft_power(const WaveClip& wave, int window_len, int hop) {
  if (wave.samples.empty()) throw DataError("stft_power: empty waveform");
  if (window_len < 2 || (window_len & (window_len - 1)) != 0) {
    throw UsageError("stft_power: window length must be a power of two");
  }
  if (hop <= 0) throw UsageError("stft_power: hop must be positive");

  const auto len = static_cast<long>(wave.samples.size());
  const long frames = len < window_len ? 1 : 1 + (len - window_len) / hop;
  const int bins = window_len / 2 + 1;

  // Periodic Hann.
  std::vector<double> window(static_cast<std::size_t>(window_len));
  for (int n = 0; n < window_len; ++n) {
    window[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / window_len);
  }

  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(window_len));
  std::vector<std::complex<double>> spectrum;
  Eigen::MatrixXd power(frames, bins);
  for (long t = 0; t < frames; ++t) {
    const long start = t * hop;
    for (int n = 0; n < window_len; ++n) {
      const long idx = start + n;
      const double x = idx < len ? wave.samples[static_cast<std::size_t>(idx)] : 0.0;
      frame[static_cast<std::size_t>(n)] = x * window[static_cast<std::size_t>(n)];
    }
    fft.fwd(spectrum, frame);
    for (int f = 0; f < bins; ++f) power(t, f) = std::norm(spectrum[static_cast<std::size_t>(f)]);
  }
  return power;
}

std::vector<double> mel_center_frequencies(int n_mels, double f_min, double f_max) {
  const double m_lo = hz_to_mel(f_min);
  const double m_hi = hz_to_mel(f_max);
  std::vector<double> edges(static_cast<std::size_t>(n_mels + 2));
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[static_cast<std::size_t>(i)] = mel_to_hz(m_lo + (m_hi - m_lo) * i / (n_mels + 1));
  }
  return edges;
}

Eigen::MatrixXd mel_filterbank(int n_mels, int fft_bins, double f_min, double f_max, double sample_rate) {
  if (n_mels <= 0 || fft_bins < 2) throw UsageError("mel_filterbank: bad filter or bin count");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw UsageError("mel_filterbank: need 0 <= f_min < f_max <= sample_rate/2");
  }
  const auto edges = mel_center_frequencies(n_mels, f_min, f_max);
  const int n_fft = 2 * (fft_bins - 1);

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, fft_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m + 1)];
    const double hi = edges[static_cast<std::size_t>(m + 2)];
    for (int k = 0; k < fft_bins; ++k) {
      const double f = k * sample_rate / n_fft;
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      fb(m, k) = std::max(0.0, std::min(rise, fall));
    }
    if (!(fb.row(m).sum() > 0.0)) {
      throw UsageError("mel_filterbank: filter " + std::to_string(m) +
                       " covers no FFT bin (frequency range too narrow for the resolution)");
    }
  }
  return fb;
}

LogMelSpec log_mel(const WaveClip& wave, const FrontendConfig& config) {
  if (!(wave.sample_rate > 0.0)) throw DataError("log_mel: sample rate must be positive");
  for (double s : wave.samples) {
    if (!std::isfinite(s)) throw DataError("log_mel: waveform contains non-finite samples");
  }
  const Eigen::MatrixXd power = stft_power(wave, config.window_len, config.hop);
  const Eigen::MatrixXd fb =
      mel_filterbank(config.n_mels, config.window_len / 2 + 1, config.f_min, config.f_max, wave.sample_rate);
  LogMelSpec spec;
  spec.frames = ((power * fb.transpose()).array() + config.log_floor).log().matrix();
  spec.frame_rate = wave.sample_rate / config.hop;
  return spec;
}

}  // namespace ssondo
