#pragma once

#include <cstdint>
#include <random>

#include "rhrnet/tensor.hpp"

namespace rhrnet {

// Deterministic random source. Normal variates are generated by the Marsaglia
// polar method on top of mt19937_64 so that the stream does not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  // Standard normal.
  double normal();

  // Splits off an independent seed for sub-stream k (per-file, per-epoch).
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// [fan_out x fan_in] matrix, i.i.d. normal with std = sqrt(2/(fan_in+fan_out)).
template <typename T>
Tensor<T> xavier_normal(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Random n x n orthogonal matrix: QR of a normal matrix with the factors
// sign-corrected so the distribution is uniform over the orthogonal group.
template <typename T>
Tensor<T> orthogonal_init(std::size_t n, Rng& rng);

}  // namespace rhrnet
