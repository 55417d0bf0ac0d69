#include "rhrnet/layers.hpp"

namespace rhrnet {

template <typename T>
void GruParams<T>::validate() const {
  if (Wx.rank() != 2 || Wh.rank() != 2 || b.rank() != 1)
    throw DimensionError("GruParams: Wx/Wh must be rank-2 and b rank-1");
  if (Wx.rows() % 3 != 0)
    throw DimensionError("GruParams: Wx has " + std::to_string(Wx.rows()) +
                         " rows, expected a multiple of 3");
  const std::size_t n = Wx.rows() / 3;
  if (Wh.rows() != 3 * n || Wh.cols() != n)
    throw DimensionError("GruParams: Wh is " + shape_str(Wh.shape()) + ", expected " +
                         shape_str({3 * n, n}));
  if (b.count() != 3 * n)
    throw DimensionError("GruParams: b is " + shape_str(b.shape()) + ", expected " +
                         shape_str({3 * n}));
}

template <typename T>
void BiGruParams<T>::validate() const {
  fwd.validate();
  bwd.validate();
  if (fwd.hidden_size() != bwd.hidden_size() || fwd.input_size() != bwd.input_size())
    throw DimensionError("BiGruParams: forward and backward sizes differ");
}

namespace {

// One recurrence step given the precomputed input projection row
// pt = x_t Wx^T + b, shape [1 x 3n].
template <typename T>
Var<T> gru_step(Tape<T>& tape, Var<T> pt, Var<T> h, Var<T> wht_zr, Var<T> wht_c,
                std::size_t n) {
  Var<T> zr = tape.sigmoid(tape.add(tape.slice_cols(pt, 0, 2 * n), tape.matmul(h, wht_zr)));
  Var<T> z = tape.slice_cols(zr, 0, n);
  Var<T> r = tape.slice_cols(zr, n, 2 * n);
  Var<T> cand = tape.tanh(
      tape.add(tape.slice_cols(pt, 2 * n, 3 * n), tape.matmul(tape.mul(r, h), wht_c)));
  return tape.add(tape.mul(z, h), tape.mul(tape.one_minus(z), cand));
}

}  // namespace

template <typename T>
GruVars<T> gru_leaves(Tape<T>& tape, const GruParams<T>& p) {
  return {tape.leaf(p.Wx), tape.leaf(p.Wh), tape.leaf(p.b)};
}

template <typename T>
Var<T> gru_seq(Tape<T>& tape, Var<T> seq, const GruVars<T>& p, Direction dir) {
  const Tensor<T>& sv = tape.value(seq);
  if (sv.rank() != 2)
    throw DimensionError("gru_seq: sequence must be [T x features], got " +
                         shape_str(sv.shape()));
  const Tensor<T>& wx = tape.value(p.Wx);
  if (wx.rank() != 2 || wx.rows() % 3 != 0)
    throw DimensionError("gru_seq: Wx is " + shape_str(wx.shape()));
  const std::size_t n = wx.rows() / 3;
  if (wx.cols() != sv.cols())
    throw DimensionError("gru_seq: input features " + shape_str(sv.shape()) +
                         " do not match Wx " + shape_str(wx.shape()));
  const std::size_t steps = sv.rows();

  Var<T> ordered = dir == Direction::backward ? tape.reverse_rows(seq) : seq;
  Var<T> proj = tape.add_rows(tape.matmul(ordered, tape.transpose(p.Wx)), p.b);  // [T x 3n]
  Var<T> wht_zr = tape.transpose(tape.slice_rows(p.Wh, 0, 2 * n));               // [n x 2n]
  Var<T> wht_c = tape.transpose(tape.slice_rows(p.Wh, 2 * n, 3 * n));            // [n x n]

  Var<T> h = tape.constant(Tensor<T>({1, n}));  // zero initial state
  std::vector<Var<T>> states;
  states.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Var<T> pt = tape.slice_rows(proj, t, t + 1);
    h = gru_step(tape, pt, h, wht_zr, wht_c, n);
    states.push_back(h);
  }
  Var<T> out = tape.stack_rows(std::span<const Var<T>>(states));
  return dir == Direction::backward ? tape.reverse_rows(out) : out;
}

template <typename T>
Var<T> bigru_seq(Tape<T>& tape, Var<T> seq, const GruVars<T>& fwd, const GruVars<T>& bwd) {
  Var<T> f = gru_seq(tape, seq, fwd, Direction::forward);
  Var<T> b = gru_seq(tape, seq, bwd, Direction::backward);
  return tape.concat_features(f, b);
}

template <typename T>
Var<T> fold_on_tape(Tape<T>& tape, Var<T> seq) {
  const Tensor<T>& v = tape.value(seq);
  if (v.rank() != 2) throw DimensionError("downsample_fold: expected rank-2, got " + shape_str(v.shape()));
  if (v.rows() % 2 != 0)
    throw ContractError("downsample_fold: time extent " + std::to_string(v.rows()) + " is odd");
  return tape.reshape(seq, {v.rows() / 2, v.cols() * 2});
}

template <typename T>
Var<T> unfold_on_tape(Tape<T>& tape, Var<T> seq) {
  const Tensor<T>& v = tape.value(seq);
  if (v.rank() != 2) throw DimensionError("upsample_unfold: expected rank-2, got " + shape_str(v.shape()));
  if (v.cols() % 2 != 0)
    throw ContractError("upsample_unfold: feature extent " + std::to_string(v.cols()) + " is odd");
  return tape.reshape(seq, {v.rows() * 2, v.cols() / 2});
}

template <typename T>
Tensor<T> gru_cell_step(const Tensor<T>& x, const Tensor<T>& h_prev, const GruParams<T>& p) {
  p.validate();
  const std::size_t n = p.hidden_size();
  if (x.rank() != 1 || x.count() != p.input_size())
    throw DimensionError("gru_cell_step: x is " + shape_str(x.shape()) + ", expected " +
                         shape_str({p.input_size()}));
  if (h_prev.rank() != 1 || h_prev.count() != n)
    throw DimensionError("gru_cell_step: h_prev is " + shape_str(h_prev.shape()) +
                         ", expected " + shape_str({n}));

  Tape<T> tape(false);
  GruVars<T> v{tape.constant(p.Wx), tape.constant(p.Wh), tape.constant(p.b)};
  Var<T> xr = tape.constant(x.reshaped({1, x.count()}));
  Var<T> pt = tape.add_rows(tape.matmul(xr, tape.transpose(v.Wx)), v.b);
  Var<T> wht_zr = tape.transpose(tape.slice_rows(v.Wh, 0, 2 * n));
  Var<T> wht_c = tape.transpose(tape.slice_rows(v.Wh, 2 * n, 3 * n));
  Var<T> h0 = tape.constant(h_prev.reshaped({1, n}));
  Var<T> h1 = gru_step(tape, pt, h0, wht_zr, wht_c, n);
  return tape.value(h1).reshaped({n});
}

template <typename T>
Tensor<T> gru_forward(const Tensor<T>& seq, const GruParams<T>& p, Direction dir) {
  p.validate();
  Tape<T> tape(false);
  GruVars<T> v{tape.constant(p.Wx), tape.constant(p.Wh), tape.constant(p.b)};
  return tape.value(gru_seq(tape, tape.constant(seq), v, dir));
}

template <typename T>
Tensor<T> bigru_forward(const Tensor<T>& seq, const BiGruParams<T>& p) {
  p.validate();
  Tape<T> tape(false);
  GruVars<T> f{tape.constant(p.fwd.Wx), tape.constant(p.fwd.Wh), tape.constant(p.fwd.b)};
  GruVars<T> b{tape.constant(p.bwd.Wx), tape.constant(p.bwd.Wh), tape.constant(p.bwd.b)};
  return tape.value(bigru_seq(tape, tape.constant(seq), f, b));
}

template <typename T>
Tensor<T> downsample_fold(const Tensor<T>& seq) {
  if (seq.rank() != 2)
    throw DimensionError("downsample_fold: expected rank-2, got " + shape_str(seq.shape()));
  if (seq.rows() % 2 != 0)
    throw ContractError("downsample_fold: time extent " + std::to_string(seq.rows()) + " is odd");
  return seq.reshaped({seq.rows() / 2, seq.cols() * 2});
}

template <typename T>
Tensor<T> upsample_unfold(const Tensor<T>& seq) {
  if (seq.rank() != 2)
    throw DimensionError("upsample_unfold: expected rank-2, got " + shape_str(seq.shape()));
  if (seq.cols() % 2 != 0)
    throw ContractError("upsample_unfold: feature extent " + std::to_string(seq.cols()) + " is odd");
  return seq.reshaped({seq.rows() * 2, seq.cols() / 2});
}

template <typename T>
Tensor<T> residual_merge(const Tensor<T>& lower, const Tensor<T>& upper,
                         const PreluSlope<T>& slope) {
  if (!lower.same_shape(upper))
    throw DimensionError("residual_merge: shape mismatch " + shape_str(lower.shape()) +
                         " vs " + shape_str(upper.shape()));
  return prelu(add(lower, upper), slope.alpha);
}

#define RHRNET_LAYERS_INSTANTIATE(T)                                                     \
  template struct GruParams<T>;                                                          \
  template struct BiGruParams<T>;                                                        \
  template GruVars<T> gru_leaves<T>(Tape<T>&, const GruParams<T>&);                      \
  template Var<T> gru_seq<T>(Tape<T>&, Var<T>, const GruVars<T>&, Direction);            \
  template Var<T> bigru_seq<T>(Tape<T>&, Var<T>, const GruVars<T>&, const GruVars<T>&);  \
  template Var<T> fold_on_tape<T>(Tape<T>&, Var<T>);                                     \
  template Var<T> unfold_on_tape<T>(Tape<T>&, Var<T>);                                   \
  template Tensor<T> gru_cell_step<T>(const Tensor<T>&, const Tensor<T>&,                \
                                      const GruParams<T>&);                              \
  template Tensor<T> gru_forward<T>(const Tensor<T>&, const GruParams<T>&, Direction);   \
  template Tensor<T> bigru_forward<T>(const Tensor<T>&, const BiGruParams<T>&);          \
  template Tensor<T> downsample_fold<T>(const Tensor<T>&);                               \
  template Tensor<T> upsample_unfold<T>(const Tensor<T>&);                               \
  template Tensor<T> residual_merge<T>(const Tensor<T>&, const Tensor<T>&,               \
                                       const PreluSlope<T>&);

RHRNET_LAYERS_INSTANTIATE(float)
RHRNET_LAYERS_INSTANTIATE(double)
#undef RHRNET_LAYERS_INSTANTIATE

}  // namespace rhrnet
