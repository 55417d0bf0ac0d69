#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "rhrnet/audio.hpp"

namespace rhrnet {

namespace {

// Modified Bessel function of the first kind, order zero (series form).
double bessel_i0(double x) {
  double term = 1.0, sum = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < sum * 1e-18) break;
  }
  return sum;
}

// Lowpass prototype: windowed sinc with a Kaiser window, odd length,
// cutoff given as a fraction of the (upsampled) Nyquist rate.
std::vector<double> kaiser_sinc(std::size_t half, double cutoff, double beta) {
  const std::size_t taps = 2 * half + 1;
  std::vector<double> h(taps);
  const double i0_beta = bessel_i0(beta);
  for (std::size_t k = 0; k < taps; ++k) {
    const double m = static_cast<double>(k) - static_cast<double>(half);
    const double x = cutoff * m;
    const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    const double r = m / static_cast<double>(half);
    const double window = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    h[k] = cutoff * sinc * window;
  }
  return h;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (clip.rate <= 0 || target_rate <= 0)
    throw ContractError("resample: rates must be positive");
  if (target_rate == clip.rate) return clip;

  const std::size_t g = std::gcd<std::size_t>(clip.rate, target_rate);
  const std::size_t up = target_rate / g;
  const std::size_t down = clip.rate / g;

  const std::size_t half = 10 * std::max(up, down);
  const double cutoff = 1.0 / static_cast<double>(std::max(up, down));
  const std::vector<double> h = kaiser_sinc(half, cutoff, 5.0);
  const std::size_t taps = h.size();

  const std::size_t in_len = clip.samples.size();
  const auto out_len = static_cast<std::size_t>(std::llround(
      static_cast<double>(in_len) * target_rate / clip.rate));

  AudioClip out;
  out.rate = target_rate;
  out.samples.assign(out_len, 0.0);
  const double gain = static_cast<double>(up);
  for (std::size_t m = 0; m < out_len; ++m) {
    // Center of the filter sits at upsampled index m*down + half.
    const std::size_t center = m * down + half;
    // Contributing inputs n satisfy 0 <= center - n*up <= taps-1.
    const std::size_t n_lo =
        center >= taps - 1 ? (center - (taps - 1) + up - 1) / up : 0;
    const std::size_t n_hi = std::min(in_len - 1, center / up);
    double acc = 0.0;
    for (std::size_t n = n_lo; n <= n_hi; ++n) acc += clip.samples[n] * h[center - n * up];
    out.samples[m] = gain * acc;
  }
  return out;
}

}  // namespace rhrnet
