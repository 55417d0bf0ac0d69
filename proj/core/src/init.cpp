#include "rhrnet/init.hpp"

#include <cmath>

namespace rhrnet {

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw ContractError("uniform_index: n must be positive");
  return static_cast<std::size_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  have_spare_ = true;
  return u * m;
}

std::uint64_t Rng::derive_seed(std::uint64_t seed, std::uint64_t k) {
  // splitmix64 over the combined word
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename T>
Tensor<T> xavier_normal(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw ContractError("xavier_normal: fans must be positive");
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> out({fan_out, fan_in});
  for (std::size_t i = 0; i < out.count(); ++i)
    out[i] = static_cast<T>(std_dev * rng.normal());
  return out;
}

namespace {

// Householder QR of a square matrix, returning Q with columns sign-corrected
// so that diag(R) > 0.
std::vector<double> orthogonal_q(std::size_t n, Rng& rng) {
  std::vector<double> a(n * n);
  for (double& v : a) v = rng.normal();

  std::vector<double> q(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) q[i * n + i] = 1.0;

  std::vector<double> h(n);
  for (std::size_t k = 0; k < n; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += a[i * n + k] * a[i * n + k];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double akk = a[k * n + k];
    const double alpha = akk >= 0 ? -norm : norm;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) {
      h[i] = a[i * n + k];
      if (i == k) h[i] -= alpha;
      vnorm2 += h[i] * h[i];
    }
    if (vnorm2 == 0.0) continue;
    // apply H = I - 2 v v^T / (v^T v) to A (columns k..) and accumulate into Q
    for (std::size_t j = k; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += h[i] * a[i * n + j];
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = k; i < n; ++i) a[i * n + j] -= f * h[i];
    }
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += h[i] * q[j * n + i];
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = k; i < n; ++i) q[j * n + i] -= f * h[i];
    }
  }
  // q now holds Q (because we accumulated Q = Q * H_k with H symmetric, rows
  // of q are Q's rows). Correct column signs by sign(diag(R)) where R = a.
  for (std::size_t j = 0; j < n; ++j) {
    if (a[j * n + j] < 0)
      for (std::size_t i = 0; i < n; ++i) q[i * n + j] = -q[i * n + j];
  }
  return q;
}

}  // namespace

template <typename T>
Tensor<T> orthogonal_init(std::size_t n, Rng& rng) {
  if (n == 0) throw ContractError("orthogonal_init: n must be positive");
  if (n == 1) return Tensor<T>({1, 1}, {rng.normal() >= 0 ? T(1) : T(-1)});
  std::vector<double> q = orthogonal_q(n, rng);
  Tensor<T> out({n, n});
  for (std::size_t i = 0; i < n * n; ++i) out[i] = static_cast<T>(q[i]);
  return out;
}

template Tensor<float> xavier_normal<float>(std::size_t, std::size_t, Rng&);
template Tensor<double> xavier_normal<double>(std::size_t, std::size_t, Rng&);
template Tensor<float> orthogonal_init<float>(std::size_t, Rng&);
template Tensor<double> orthogonal_init<double>(std::size_t, Rng&);

}  // namespace rhrnet
