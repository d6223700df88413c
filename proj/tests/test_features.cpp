#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "ssondo/error.hpp"
#include "ssondo/features.hpp"
#include "ssondo/wav.hpp"
#include "support/oracles.hpp"

using namespace ssondo;

namespace {

WaveClip sine(double freq, std::size_t n, double amp = 0.5, double sr = 32000.0) {
  WaveClip w;
  w.sample_rate = sr;
  for (std::size_t t = 0; t < n; ++t) w.samples.push_back(amp * std::sin(2 * std::numbers::pi * freq * t / sr));
  return w;
}

WaveClip noise(std::size_t n, std::uint64_t seed, double amp = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, amp);
  WaveClip w;
  for (std::size_t t = 0; t < n; ++t) w.samples.push_back(d(rng));
  return w;
}

}  // namespace

TEST_CASE("stft frame count and shapes") {
  WaveClip zeros;
  zeros.samples.assign(2048, 0.0);
  const auto p = stft_power(zeros);
  CHECK(p.rows() == 3);
  CHECK(p.cols() == 513);
  CHECK(p.isZero(0.0));

  zeros.samples.assign(1024, 0.0);
  CHECK(stft_power(zeros).rows() == 1);
  zeros.samples.assign(100, 0.0);
  CHECK(stft_power(zeros).rows() == 1);

  CHECK_THROWS_AS(stft_power(WaveClip{}), DataError);
  CHECK_THROWS_AS(stft_power(noise(2048, 1), 1000, 512), UsageError);
}

TEST_CASE("stft matches a brute-force DFT of the Hann-windowed frame") {
  const WaveClip w = noise(1024 + 512, 3);
  const auto p = stft_power(w);
  for (int t = 0; t < 2; ++t) {
    std::vector<double> frame(1024);
    for (int n = 0; n < 1024; ++n) {
      frame[n] = w.samples[t * 512 + n] * (0.5 - 0.5 * std::cos(2 * std::numbers::pi * n / 1024));
    }
    const auto ref = oracle::dft_power(frame);
    for (int f = 0; f < 513; ++f) CHECK(p(t, f) == doctest::Approx(ref[f]).epsilon(1e-9));
  }
}

TEST_CASE("sinusoid at an exact bin frequency peaks at that bin") {
  for (int k : {5, 40, 200, 450}) {
    const auto p = stft_power(sine(k * 32000.0 / 1024, 4096));
    for (Eigen::Index t = 0; t < p.rows(); ++t) {
      Eigen::Index arg;
      p.row(t).maxCoeff(&arg);
      CHECK(arg == k);
    }
  }
}

TEST_CASE("stft power is non-negative") {
  CHECK((stft_power(noise(5000, 9)).array() >= 0.0).all());
}

TEST_CASE("mel scale and filterbank") {
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(hz_to_mel(700.0) == doctest::Approx(781.18).epsilon(1e-4));
  CHECK(mel_to_hz(hz_to_mel(1234.5)) == doctest::Approx(1234.5));

  const auto fb = mel_filterbank();
  CHECK(fb.rows() == 128);
  CHECK(fb.cols() == 513);
  CHECK((fb.array() >= 0.0).all());
  CHECK((fb.rowwise().sum().array() > 0.0).all());
  CHECK(fb.maxCoeff() <= 1.0);

  const auto edges = mel_center_frequencies(128, 50.0, 16000.0);
  CHECK(edges.front() == doctest::Approx(50.0));
  CHECK(edges.back() == doctest::Approx(16000.0));
  for (std::size_t i = 1; i < edges.size(); ++i) CHECK(edges[i] > edges[i - 1]);

  CHECK_THROWS_AS(mel_filterbank(128, 513, 16000.0, 50.0, 32000.0), UsageError);
  CHECK_THROWS_AS(mel_filterbank(128, 513, 50.0, 20000.0, 32000.0), UsageError);
}

TEST_CASE("log-mel floor and frame count") {
  WaveClip silence;
  silence.samples.assign(4096, 0.0);
  const auto s = log_mel(silence);
  CHECK(s.frames.cols() == 128);
  CHECK(s.frame_rate == doctest::Approx(62.5));
  CHECK((s.frames.array() - std::log(1e-5)).abs().maxCoeff() < 1e-12);
  CHECK(std::log(1e-5) == doctest::Approx(-11.5129).epsilon(1e-5));

  WaveClip ten_seconds;
  ten_seconds.samples.assign(320000, 0.0);
  CHECK(log_mel(ten_seconds).frames.rows() == 624);
}

TEST_CASE("doubling the amplitude adds at most log 4") {
  const WaveClip quiet = sine(1000.0, 8192, 0.25);
  WaveClip loud = quiet;
  for (double& x : loud.samples) x *= 2.0;
  const auto a = log_mel(quiet).frames;
  const auto b = log_mel(loud).frames;
  const Eigen::ArrayXXd diff = (b - a).array();
  CHECK(diff.maxCoeff() <= std::log(4.0) + 1e-9);
  CHECK(diff.minCoeff() >= 0.0);
  // At the strongest bin power dominates the floor, so the gain is essentially log 4.
  Eigen::Index r, c;
  a.maxCoeff(&r, &c);
  CHECK(diff(r, c) == doctest::Approx(std::log(4.0)).epsilon(1e-6));
}

TEST_CASE("shift covariance by one hop") {
  const WaveClip w = noise(8192, 21);
  WaveClip delayed;
  delayed.samples.assign(512, 0.0);
  delayed.samples.insert(delayed.samples.end(), w.samples.begin(), w.samples.end());
  const auto a = log_mel(w).frames;
  const auto b = log_mel(delayed).frames;
  REQUIRE(b.rows() == a.rows() + 1);
  for (Eigen::Index t = 0; t < a.rows(); ++t) {
    const double rel = (b.row(t + 1) - a.row(t)).cwiseAbs().maxCoeff() / a.row(t).cwiseAbs().maxCoeff();
    CHECK(rel < 1e-6);
  }
}

TEST_CASE("energy monotonicity") {
  const WaveClip w = noise(6000, 5, 0.1);
  const auto base = log_mel(w).frames;
  for (double alpha : {1.01, 1.5, 3.0}) {
    WaveClip scaled = w;
    for (double& x : scaled.samples) x *= alpha;
    CHECK(((log_mel(scaled).frames - base).array() >= 0.0).all());
  }
}

TEST_CASE("wav input") {
  const auto dir = oracle::temp_dir("wav");
  const WaveClip w = sine(440.0, 3200, 0.5);
  write_wav_pcm16(dir / "a.wav", w);
  const auto back = read_wav(dir / "a.wav");
  REQUIRE(back.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(std::abs(back.samples[i] - w.samples[i]) < 1.0 / 16384);

  WaveClip other = w;
  other.sample_rate = 44100;
  write_wav_pcm16(dir / "b.wav", other);
  CHECK_THROWS_WITH_AS(read_wav(dir / "b.wav"), doctest::Contains("sample rate"), DataError);

  // Stereo float32 header.
  std::string bytes = "RIFF";
  auto put32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) bytes.push_back(char((v >> (8 * i)) & 0xFF)); };
  auto put16 = [&](std::uint16_t v) { bytes.push_back(char(v & 0xFF)); bytes.push_back(char(v >> 8)); };
  put32(36 + 8);
  bytes += "WAVEfmt ";
  put32(16); put16(3); put16(2); put32(32000); put32(32000 * 8); put16(8); put16(32);
  bytes += "data";
  put32(8);
  put32(0); put32(0);
  std::ofstream(dir / "stereo.wav", std::ios::binary) << bytes;
  CHECK_THROWS_WITH_AS(read_wav(dir / "stereo.wav"), doctest::Contains("mono"), DataError);

  std::ofstream(dir / "junk.wav") << "not audio";
  CHECK_THROWS_AS(read_wav(dir / "junk.wav"), DataError);
}
