#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "rhrnet/layers.hpp"

namespace rhrnet {

// Shape table for the seven-layer hourglass. Layers 1-6 are bidirectional
// with widths[k] total output features (widths[k]/2 per direction); layer 7
// is a single forward GRU with one unit. Time steps halve through the first
// three fold steps and double back out through the three unfolds.
struct ModelConfig {
  std::size_t segment_len = 1024;
  std::array<std::size_t, 7> widths{2, 128, 256, 512, 256, 128, 1};
  // Provenance of scaled(): numerator/denominator applied to the base shape.
  std::size_t scale_num = 1;
  std::size_t scale_den = 1;

  static ModelConfig base() { return ModelConfig{}; }
  // Shrinks the base config by num/den. Interior widths and the segment
  // length must divide exactly; the first width clamps up to the minimum
  // legal even width 2, the last stays 1. scaled(1, 16) is the tiny test
  // config (L=64, widths 2,8,16,32,16,8,1).
  static ModelConfig scaled(std::size_t num, std::size_t den);

  void validate() const;  // throws ConfigError naming the violated invariant

  std::array<std::size_t, 7> time_steps() const;
  std::array<std::size_t, 7> input_features() const;
  std::array<std::size_t, 7> hidden_per_dir() const;

  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  std::array<BiGruParams<T>, 6> layers;  // layers 1..6
  GruParams<T> output_layer;             // layer 7
  PreluSlope<T> alpha5, alpha6;          // residual-site slopes

  // Canonical flat view: l1.fwd.Wx, l1.fwd.Wh, l1.fwd.b, l1.bwd.*, ...,
  // l7.Wx, l7.Wh, l7.b, prelu5.alpha, prelu6.alpha.
  ParameterSet<T> to_set() const;
  static ModelParams from_set(const ModelConfig& config, const ParameterSet<T>& set);

  std::size_t element_count() const;

  template <typename U>
  ModelParams<U> cast() const;
};

// Xavier-normal input kernels per gate block, random orthogonal recurrent
// blocks, zero biases, PReLU slopes 0.25. Deterministic given the seed.
template <typename T>
ModelParams<T> build(const ModelConfig& config, std::uint64_t seed);

// Trainable element count derived from the shape table alone.
std::size_t param_count(const ModelConfig& config);

// Leaf vars for every parameter, in canonical order.
template <typename T>
struct ModelVars {
  std::array<std::pair<GruVars<T>, GruVars<T>>, 6> layers;
  GruVars<T> output_layer;
  Var<T> alpha5, alpha6;
};

template <typename T>
ModelVars<T> model_leaves(Tape<T>& tape, const ModelParams<T>& params);
// Same, but from the canonical flat ParameterSet (order must match to_set()).
template <typename T>
ModelVars<T> model_leaves(Tape<T>& tape, const ParameterSet<T>& set, const ModelConfig& config);

// Full forward pass on a tape: [L x 1] -> [L x 1]. When trace is given, the
// shape after every layer body and every post-step (fold/unfold/merge) is
// appended to it.
template <typename T>
Var<T> forward_on_tape(Tape<T>& tape, const ModelVars<T>& vars, const ModelConfig& config,
                       Var<T> segment, std::vector<Shape>* trace = nullptr);

// Inference entry point.
template <typename T>
Tensor<T> forward(const ModelParams<T>& params, const Tensor<T>& segment,
                  std::vector<Shape>* trace = nullptr);

}  // namespace rhrnet
