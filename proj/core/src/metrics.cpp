#include "rhrnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace rhrnet {

namespace {

constexpr double kSsnrFloor = -10.0;
constexpr double kSsnrCeil = 35.0;

// STOI constants from the standard formulation.
constexpr int kStoiRate = 10000;
constexpr std::size_t kFrame = 256;
constexpr std::size_t kHop = 128;
constexpr std::size_t kFft = 512;
constexpr std::size_t kBands = 15;
constexpr double kBandBase = 150.0;    // lowest one-third-octave center, Hz
constexpr std::size_t kSegFrames = 30; // frames per short-time segment
constexpr double kBeta = -15.0;        // clip level, dB
constexpr double kDynRange = 40.0;     // silence threshold below max, dB

void require_comparable(const AudioClip& clean, const AudioClip& enhanced, const char* what) {
  if (clean.rate != enhanced.rate)
    throw DimensionError(std::string(what) + ": sample rates differ (" +
                         std::to_string(clean.rate) + " vs " + std::to_string(enhanced.rate) +
                         ")");
  if (clean.samples.size() != enhanced.samples.size())
    throw DimensionError(std::string(what) + ": lengths differ (" +
                         std::to_string(clean.samples.size()) + " vs " +
                         std::to_string(enhanced.samples.size()) + ")");
}

// Symmetric Hann window, endpoints excluded (MATLAB hanning).
std::vector<double> hanning(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k)
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (k + 1) / (n + 1)));
  return w;
}

// Iterative radix-2 FFT, n a power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Removes frames whose windowed clean energy is more than kDynRange dB below
// the loudest frame, overlap-adding the kept frames of both signals.
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  const std::vector<double> w = hanning(kFrame);
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + kFrame <= x.size(); s += kHop) starts.push_back(s);
  if (starts.empty()) {
    x.clear();
    y.clear();
    return;
  }
  std::vector<double> level(starts.size());
  double max_level = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < starts.size(); ++j) {
    double e = 0.0;
    for (std::size_t k = 0; k < kFrame; ++k) {
      const double v = x[starts[j] + k] * w[k];
      e += v * v;
    }
    level[j] = e > 0.0 ? 10.0 * std::log10(e) : -std::numeric_limits<double>::infinity();
    max_level = std::max(max_level, level[j]);
  }
  std::vector<double> xs(x.size(), 0.0), ys(y.size(), 0.0);
  std::size_t count = 0;
  std::size_t out_end = 0;
  for (std::size_t j = 0; j < starts.size(); ++j) {
    if (!(level[j] - max_level + kDynRange > 0.0)) continue;
    const std::size_t in = starts[j];
    const std::size_t out = count * kHop;
    for (std::size_t k = 0; k < kFrame; ++k) {
      xs[out + k] += x[in + k] * w[k];
      ys[out + k] += y[in + k] * w[k];
    }
    out_end = out + kFrame;
    ++count;
  }
  xs.resize(out_end);
  ys.resize(out_end);
  x = std::move(xs);
  y = std::move(ys);
}

// One-third-octave band edges mapped to FFT bins: band j spans
// [nearest_bin(cf/2^(1/6)), nearest_bin(cf*2^(1/6))) with cf = 150*2^(j/3).
std::vector<std::pair<std::size_t, std::size_t>> band_bins() {
  std::vector<std::pair<std::size_t, std::size_t>> bands(kBands);
  auto nearest_bin = [](double freq) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k <= kFft / 2; ++k) {
      const double f = static_cast<double>(k) * kStoiRate / kFft;
      const double d = (f - freq) * (f - freq);
      if (d < best) {
        best = d;
        arg = k;
      }
    }
    return arg;
  };
  for (std::size_t j = 0; j < kBands; ++j) {
    const double cf = kBandBase * std::pow(2.0, static_cast<double>(j) / 3.0);
    bands[j] = {nearest_bin(cf * std::pow(2.0, -1.0 / 6.0)),
                nearest_bin(cf * std::pow(2.0, 1.0 / 6.0))};
  }
  return bands;
}

// [bands x frames] one-third-octave band envelopes of a signal.
std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x) {
  const std::vector<double> w = hanning(kFrame);
  static const auto bands = band_bins();
  std::vector<std::vector<double>> env(kBands);
  std::vector<std::complex<double>> buf(kFft);
  for (std::size_t s = 0; s + kFrame <= x.size(); s += kHop) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0));
    for (std::size_t k = 0; k < kFrame; ++k) buf[k] = x[s + k] * w[k];
    fft_inplace(buf);
    for (std::size_t j = 0; j < kBands; ++j) {
      double e = 0.0;
      for (std::size_t k = bands[j].first; k < bands[j].second; ++k) e += std::norm(buf[k]);
      env[j].push_back(std::sqrt(e));
    }
  }
  return env;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    dot += da * db;
    na += da * da;
    nb += db * db;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;  // zero-variance vectors contribute 0
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double ssnr(const AudioClip& clean, const AudioClip& enhanced) {
  require_comparable(clean, enhanced, "ssnr");
  const std::size_t frame = static_cast<std::size_t>(std::llround(0.030 * clean.rate));
  const std::size_t hop = frame / 4;
  if (frame == 0 || clean.samples.size() < frame)
    throw DegenerateSignalError("ssnr: no full frames in a " +
                                std::to_string(clean.samples.size()) + "-sample clip");
  double sum = 0.0;
  std::size_t frames = 0;
  for (std::size_t s = 0; s + frame <= clean.samples.size(); s += hop) {
    double ec = 0.0, en = 0.0;
    for (std::size_t k = 0; k < frame; ++k) {
      const double c = clean.samples[s + k];
      const double d = c - enhanced.samples[s + k];
      ec += c * c;
      en += d * d;
    }
    if (ec == 0.0) continue;  // silent clean frame
    double snr = en == 0.0 ? kSsnrCeil : 10.0 * std::log10(ec / en);
    snr = std::clamp(snr, kSsnrFloor, kSsnrCeil);
    sum += snr;
    ++frames;
  }
  if (frames == 0) throw DegenerateSignalError("ssnr: every frame of the clean signal is silent");
  return sum / static_cast<double>(frames);
}

double stoi(const AudioClip& clean, const AudioClip& enhanced) {
  require_comparable(clean, enhanced, "stoi");
  std::vector<double> x, y;
  if (clean.rate != kStoiRate) {
    x = resample(clean, kStoiRate).samples;
    y = resample(enhanced, kStoiRate).samples;
  } else {
    x = clean.samples;
    y = enhanced.samples;
  }

  bool any = false;
  for (double v : x)
    if (v != 0.0) any = true;
  if (!any) throw DegenerateSignalError("stoi: clean signal is silent");

  remove_silent_frames(x, y);

  const auto ex = band_envelopes(x);
  const auto ey = band_envelopes(y);
  const std::size_t frames = ex.empty() ? 0 : ex[0].size();
  if (frames < kSegFrames)
    throw SignalTooShortError("stoi: " + std::to_string(frames) +
                              " frames after silence removal, need at least " +
                              std::to_string(kSegFrames));

  const double clip_gain = 1.0 + std::pow(10.0, -kBeta / 20.0);
  double sum = 0.0;
  std::size_t count = 0;
  std::vector<double> xseg(kSegFrames), yseg(kSegFrames);
  for (std::size_t m = kSegFrames; m <= frames; ++m) {
    for (std::size_t j = 0; j < kBands; ++j) {
      double nx = 0.0, ny = 0.0;
      for (std::size_t k = 0; k < kSegFrames; ++k) {
        xseg[k] = ex[j][m - kSegFrames + k];
        yseg[k] = ey[j][m - kSegFrames + k];
        nx += xseg[k] * xseg[k];
        ny += yseg[k] * yseg[k];
      }
      const double alpha = ny == 0.0 ? 0.0 : std::sqrt(nx / ny);
      for (std::size_t k = 0; k < kSegFrames; ++k)
        yseg[k] = std::min(alpha * yseg[k], xseg[k] * clip_gain);
      sum += correlation(xseg, yseg);
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double MetricReport::mean_ssnr() const {
  double s = 0.0;
  for (const MetricRow& r : rows) s += r.ssnr;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double MetricReport::mean_stoi() const {
  double s = 0.0;
  for (const MetricRow& r : rows) s += r.stoi;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

std::string MetricReport::table() const {
  std::size_t width = 4;
  for (const MetricRow& r : rows) width = std::max(width, r.id.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width) + 2) << "file" << std::right
      << std::setw(10) << "ssnr_db" << std::setw(10) << "stoi" << "\n";
  out << std::fixed << std::setprecision(3);
  for (const MetricRow& r : rows)
    out << std::left << std::setw(static_cast<int>(width) + 2) << r.id << std::right
        << std::setw(10) << r.ssnr << std::setw(10) << r.stoi << "\n";
  out << std::left << std::setw(static_cast<int>(width) + 2) << "mean" << std::right
      << std::setw(10) << mean_ssnr() << std::setw(10) << mean_stoi() << "\n";
  return out.str();
}

std::string MetricReport::csv() const {
  std::ostringstream out;
  out << "file,ssnr,stoi\n";
  out << std::setprecision(10);
  for (const MetricRow& r : rows) out << r.id << "," << r.ssnr << "," << r.stoi << "\n";
  return out.str();
}

}  // namespace rhrnet
