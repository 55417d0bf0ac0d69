#pragma once

#include "rhrnet/autodiff.hpp"
#include "rhrnet/tensor.hpp"

namespace rhrnet {

// GRU cell parameters. The 3n rows of Wx/Wh and entries of b are the gate
// blocks in fixed order: update gate z, reset gate r, candidate state.
template <typename T>
struct GruParams {
  Tensor<T> Wx;  // [3n x i]
  Tensor<T> Wh;  // [3n x n]
  Tensor<T> b;   // [3n]

  std::size_t hidden_size() const { return Wh.cols(); }
  std::size_t input_size() const { return Wx.cols(); }
  void validate() const;
};

template <typename T>
struct BiGruParams {
  GruParams<T> fwd;
  GruParams<T> bwd;
  void validate() const;
};

// Per-feature learnable slopes of a PReLU.
template <typename T>
struct PreluSlope {
  Tensor<T> alpha;  // [F]
};

enum class Direction { forward, backward };

// --- sequence layers (eager) ---------------------------------------------

// One cell step: x [i], h_prev [n] -> h [n].
// z = sigma(Wx_z x + Wh_z h + b_z), r = sigma(Wx_r x + Wh_r h + b_r),
// cand = tanh(Wx_c x + Wh_c (r*h) + b_c), h' = z*h + (1-z)*cand.
template <typename T>
Tensor<T> gru_cell_step(const Tensor<T>& x, const Tensor<T>& h_prev, const GruParams<T>& p);

// Runs the recursion over a [T x i] sequence from a zero initial state.
// The backward direction runs over reversed time and returns states
// re-reversed into original time order.
template <typename T>
Tensor<T> gru_forward(const Tensor<T>& seq, const GruParams<T>& p, Direction dir);

// concat_features(forward states, backward states): [T x i] -> [T x 2n].
template <typename T>
Tensor<T> bigru_forward(const Tensor<T>& seq, const BiGruParams<T>& p);

// [T x F] -> [T/2 x 2F]; output row t is input rows 2t and 2t+1 side by side.
// Pure data movement; upsample_unfold is its exact inverse.
template <typename T>
Tensor<T> downsample_fold(const Tensor<T>& seq);

// [T x F] -> [2T x F/2]; exact inverse of downsample_fold.
template <typename T>
Tensor<T> upsample_unfold(const Tensor<T>& seq);

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const PreluSlope<T>& slope) {
  return prelu(x, slope.alpha);
}

// prelu(lower + upper): the residual connection merge.
template <typename T>
Tensor<T> residual_merge(const Tensor<T>& lower, const Tensor<T>& upper,
                         const PreluSlope<T>& slope);

// --- sequence layers (on a tape, for training and gradient checks) --------

template <typename T>
struct GruVars {
  Var<T> Wx, Wh, b;
};

template <typename T>
GruVars<T> gru_leaves(Tape<T>& tape, const GruParams<T>& p);

template <typename T>
Var<T> gru_seq(Tape<T>& tape, Var<T> seq, const GruVars<T>& p, Direction dir);

template <typename T>
Var<T> bigru_seq(Tape<T>& tape, Var<T> seq, const GruVars<T>& fwd, const GruVars<T>& bwd);

template <typename T>
Var<T> fold_on_tape(Tape<T>& tape, Var<T> seq);

template <typename T>
Var<T> unfold_on_tape(Tape<T>& tape, Var<T> seq);

}  // namespace rhrnet
