#include "rhrnet/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace rhrnet;

namespace {

AudioClip speechy(std::uint64_t seed, double seconds = 2.0, int rate = 16000) {
  return synth_clean(seed, static_cast<std::size_t>(seconds * rate), rate,
                     CleanProfile::harmonic);
}

// clean = A sin(500 Hz), interference = B sin(1500 Hz). Both frequencies
// complete whole cycles per 30 ms frame at 16 kHz, so every frame sees the
// same SNR of 20 log10(A/B).
std::pair<AudioClip, AudioClip> constant_frame_snr_pair(double amplitude_ratio,
                                                        double seconds = 1.0) {
  const int rate = 16000;
  const std::size_t n = static_cast<std::size_t>(seconds * rate);
  AudioClip clean, enhanced;
  clean.rate = enhanced.rate = rate;
  clean.samples.resize(n);
  enhanced.samples.resize(n);
  const double a = 0.5;
  const double b = a / amplitude_ratio;
  for (std::size_t i = 0; i < n; ++i) {
    clean.samples[i] = a * std::sin(2.0 * std::numbers::pi * 500.0 * i / rate);
    enhanced.samples[i] =
        clean.samples[i] + b * std::sin(2.0 * std::numbers::pi * 1500.0 * i / rate);
  }
  return {clean, enhanced};
}

AudioClip white_noise(std::uint64_t seed, std::size_t n, int rate = 16000, double amp = 0.1) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> dist(0.0, amp);
  AudioClip clip;
  clip.rate = rate;
  clip.samples.resize(n);
  for (double& v : clip.samples) v = dist(gen);
  return clip;
}

AudioClip add_noise_at_snr(const AudioClip& clean, double snr_db, std::uint64_t seed) {
  return mix_at_snr(clean, white_noise(seed, clean.samples.size(), clean.rate), snr_db, seed);
}

}  // namespace

TEST(Ssnr, IdenticalSignalsClampAtCeiling) {
  AudioClip x = speechy(1);
  EXPECT_DOUBLE_EQ(ssnr(x, x), 35.0);
}

TEST(Ssnr, ConstantTenDbConstruction) {
  auto [clean, enhanced] = constant_frame_snr_pair(std::sqrt(10.0));  // 10 dB
  EXPECT_NEAR(ssnr(clean, enhanced), 10.0, 0.1);
}

TEST(Ssnr, HeavyNoiseClampsAtFloor) {
  auto [clean, enhanced] = constant_frame_snr_pair(1e-3);  // -60 dB per frame
  EXPECT_DOUBLE_EQ(ssnr(clean, enhanced), -10.0);
}

TEST(Ssnr, MonotoneUnderNoiseScaling) {
  double prev = 100.0;
  for (double ratio : {100.0, 10.0, 3.0, 1.0, 0.3}) {
    auto [clean, enhanced] = constant_frame_snr_pair(ratio);
    const double v = ssnr(clean, enhanced);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Ssnr, BoundsAlwaysHold) {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int iter = 0; iter < 20; ++iter) {
    AudioClip a, b;
    a.rate = b.rate = 16000;
    a.samples.resize(2000);
    b.samples.resize(2000);
    for (double& v : a.samples) v = dist(gen);
    for (double& v : b.samples) v = dist(gen);
    const double v = ssnr(a, b);
    EXPECT_GE(v, -10.0);
    EXPECT_LE(v, 35.0);
  }
}

TEST(Ssnr, ErrorsAreDistinct) {
  AudioClip x = speechy(5);
  AudioClip shorter = x;
  shorter.samples.pop_back();
  EXPECT_THROW(ssnr(x, shorter), DimensionError);

  AudioClip tiny;
  tiny.rate = 16000;
  tiny.samples.assign(100, 0.5);  // below one 480-sample frame
  EXPECT_THROW(ssnr(tiny, tiny), DegenerateSignalError);

  AudioClip silent;
  silent.rate = 16000;
  silent.samples.assign(2000, 0.0);
  EXPECT_THROW(ssnr(silent, silent), DegenerateSignalError);
}

TEST(Ssnr, SilentFramesSkipped) {
  // Half signal, half exact silence: only the voiced frames count.
  AudioClip clean, enhanced;
  clean.rate = enhanced.rate = 16000;
  clean.samples.assign(16000, 0.0);
  enhanced.samples.assign(16000, 0.0);
  auto [c, e] = constant_frame_snr_pair(std::sqrt(10.0), 0.5);
  std::copy(c.samples.begin(), c.samples.end(), clean.samples.begin());
  std::copy(e.samples.begin(), e.samples.end(), enhanced.samples.begin());
  // Frames fully inside the silent half have zero clean energy; straddling
  // frames still see the same 10 dB ratio, so the mean stays near 10 dB.
  EXPECT_NEAR(ssnr(clean, enhanced), 10.0, 0.1);
}

TEST(Stoi, SelfScoreIsOne) {
  AudioClip x = speechy(7);
  EXPECT_NEAR(stoi(x, x), 1.0, 1e-6);
}

TEST(Stoi, ScaleInvariance) {
  AudioClip x = speechy(11);
  AudioClip y = add_noise_at_snr(x, 10.0, 13);
  const double base = stoi(x, y);
  for (double c : {2.0, 0.5, 1.7, 100.0}) {
    AudioClip scaled = y;
    for (double& v : scaled.samples) v *= c;
    EXPECT_NEAR(stoi(x, scaled), base, 1e-9) << "c=" << c;
  }
}

TEST(Stoi, LightNoiseScoresHigh) {
  for (std::uint64_t seed : {17u, 19u, 23u}) {
    AudioClip x = speechy(seed);
    AudioClip y = add_noise_at_snr(x, 30.0, seed + 100);
    EXPECT_GE(stoi(x, y), 0.95) << "seed " << seed;
  }
}

TEST(Stoi, UnrelatedNoiseScoresLow) {
  for (std::uint64_t seed : {29u, 31u, 37u}) {
    AudioClip x = speechy(seed);
    AudioClip noise = white_noise(seed + 1000, x.samples.size());
    EXPECT_LT(stoi(x, noise), 0.3) << "seed " << seed;
  }
}

TEST(Stoi, NoisierIsWorse) {
  AudioClip x = speechy(41);
  const double high = stoi(x, add_noise_at_snr(x, 20.0, 43));
  const double low = stoi(x, add_noise_at_snr(x, -5.0, 43));
  EXPECT_GT(high, low);
}

TEST(Stoi, ErrorsAreDistinct) {
  AudioClip x = speechy(47);
  AudioClip shorter = x;
  shorter.samples.pop_back();
  EXPECT_THROW(stoi(x, shorter), DimensionError);

  AudioClip brief = speechy(53, 0.2);
  EXPECT_THROW(stoi(brief, brief), SignalTooShortError);

  AudioClip silent;
  silent.rate = 16000;
  silent.samples.assign(32000, 0.0);
  EXPECT_THROW(stoi(silent, silent), DegenerateSignalError);
}

TEST(MetricReport, TableAndCsvShapes) {
  MetricReport report;
  report.rows = {{"a.wav", 12.5, 0.91}, {"b.wav", 3.25, 0.62}};
  EXPECT_NEAR(report.mean_ssnr(), (12.5 + 3.25) / 2, 1e-12);
  EXPECT_NEAR(report.mean_stoi(), (0.91 + 0.62) / 2, 1e-12);

  const std::string table = report.table();
  EXPECT_NE(table.find("a.wav"), std::string::npos);
  EXPECT_NE(table.find("mean"), std::string::npos);

  const std::string csv = report.csv();
  EXPECT_NE(csv.find("file,ssnr,stoi"), std::string::npos);
  EXPECT_NE(csv.find("a.wav,"), std::string::npos);
  std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(lines, 3u);  // header + 2 rows
}
