#include "rhrnet/model.hpp"

#include <string>

#include "rhrnet/init.hpp"

namespace rhrnet {

ModelConfig ModelConfig::scaled(std::size_t num, std::size_t den) {
  if (num == 0 || den == 0) throw ConfigError("scale must be a positive rational");
  ModelConfig base;
  ModelConfig out;
  out.scale_num = num;
  out.scale_den = den;
  auto apply = [&](std::size_t v, const char* what) {
    if ((v * num) % den != 0)
      throw ConfigError(std::string("scale ") + std::to_string(num) + "/" + std::to_string(den) +
                        " does not divide " + what + " " + std::to_string(v));
    return v * num / den;
  };
  out.segment_len = apply(base.segment_len, "segment_len");
  for (std::size_t k = 1; k <= 5; ++k) out.widths[k] = apply(base.widths[k], "width");
  out.widths[0] = std::max<std::size_t>(2, (base.widths[0] * num + den - 1) / den);
  out.widths[6] = 1;
  out.validate();
  return out;
}

void ModelConfig::validate() const {
  if (segment_len == 0 || segment_len % 8 != 0)
    throw ConfigError("segment_len " + std::to_string(segment_len) +
                      " must be a positive multiple of 8 (three halvings)");
  for (std::size_t k = 0; k < 6; ++k) {
    if (widths[k] == 0 || widths[k] % 2 != 0)
      throw ConfigError("width " + std::to_string(widths[k]) + " of layer " +
                        std::to_string(k + 1) + " must be even and positive");
  }
  if (widths[6] != 1)
    throw ConfigError("layer 7 width must be 1, got " + std::to_string(widths[6]));
  if (widths[2] != widths[4])
    throw ConfigError("residual shapes: layer-3 width " + std::to_string(widths[2]) +
                      " must equal layer-5 width " + std::to_string(widths[4]));
  if (widths[1] != widths[5])
    throw ConfigError("residual shapes: layer-2 width " + std::to_string(widths[1]) +
                      " must equal layer-6 width " + std::to_string(widths[5]));
}

std::array<std::size_t, 7> ModelConfig::time_steps() const {
  const std::size_t L = segment_len;
  return {L, L / 2, L / 4, L / 8, L / 4, L / 2, L};
}

std::array<std::size_t, 7> ModelConfig::input_features() const {
  return {1,
          2 * widths[0],
          2 * widths[1],
          2 * widths[2],
          widths[3] / 2,
          widths[4] / 2,
          widths[5] / 2};
}

std::array<std::size_t, 7> ModelConfig::hidden_per_dir() const {
  return {widths[0] / 2, widths[1] / 2, widths[2] / 2, widths[3] / 2,
          widths[4] / 2, widths[5] / 2, 1};
}

namespace {

const char* kLayerNames[6] = {"l1", "l2", "l3", "l4", "l5", "l6"};

}  // namespace

template <typename T>
ParameterSet<T> ModelParams<T>::to_set() const {
  ParameterSet<T> set;
  for (std::size_t k = 0; k < 6; ++k) {
    const std::string base = kLayerNames[k];
    set.add(base + ".fwd.Wx", layers[k].fwd.Wx);
    set.add(base + ".fwd.Wh", layers[k].fwd.Wh);
    set.add(base + ".fwd.b", layers[k].fwd.b);
    set.add(base + ".bwd.Wx", layers[k].bwd.Wx);
    set.add(base + ".bwd.Wh", layers[k].bwd.Wh);
    set.add(base + ".bwd.b", layers[k].bwd.b);
  }
  set.add("l7.Wx", output_layer.Wx);
  set.add("l7.Wh", output_layer.Wh);
  set.add("l7.b", output_layer.b);
  set.add("prelu5.alpha", alpha5.alpha);
  set.add("prelu6.alpha", alpha6.alpha);
  return set;
}

template <typename T>
ModelParams<T> ModelParams<T>::from_set(const ModelConfig& config, const ParameterSet<T>& set) {
  config.validate();
  ModelParams<T> out;
  out.config = config;
  for (std::size_t k = 0; k < 6; ++k) {
    const std::string base = kLayerNames[k];
    out.layers[k].fwd = {set[base + ".fwd.Wx"], set[base + ".fwd.Wh"], set[base + ".fwd.b"]};
    out.layers[k].bwd = {set[base + ".bwd.Wx"], set[base + ".bwd.Wh"], set[base + ".bwd.b"]};
    out.layers[k].validate();
  }
  out.output_layer = {set["l7.Wx"], set["l7.Wh"], set["l7.b"]};
  out.output_layer.validate();
  out.alpha5.alpha = set["prelu5.alpha"];
  out.alpha6.alpha = set["prelu6.alpha"];
  return out;
}

template <typename T>
std::size_t ModelParams<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& l : layers)
    n += l.fwd.Wx.count() + l.fwd.Wh.count() + l.fwd.b.count() + l.bwd.Wx.count() +
         l.bwd.Wh.count() + l.bwd.b.count();
  n += output_layer.Wx.count() + output_layer.Wh.count() + output_layer.b.count();
  n += alpha5.alpha.count() + alpha6.alpha.count();
  return n;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.config = config;
  for (std::size_t k = 0; k < 6; ++k) {
    out.layers[k].fwd = {layers[k].fwd.Wx.template cast<U>(), layers[k].fwd.Wh.template cast<U>(),
                         layers[k].fwd.b.template cast<U>()};
    out.layers[k].bwd = {layers[k].bwd.Wx.template cast<U>(), layers[k].bwd.Wh.template cast<U>(),
                         layers[k].bwd.b.template cast<U>()};
  }
  out.output_layer = {output_layer.Wx.template cast<U>(), output_layer.Wh.template cast<U>(),
                      output_layer.b.template cast<U>()};
  out.alpha5.alpha = alpha5.alpha.template cast<U>();
  out.alpha6.alpha = alpha6.alpha.template cast<U>();
  return out;
}

namespace {

// Wx: per-gate Xavier blocks stacked z, r, candidate. Wh: per-gate orthogonal
// blocks. Kernels are drawn in double and narrowed so float and double builds
// from one seed correspond.
template <typename T>
GruParams<T> build_gru(std::size_t n, std::size_t i, Rng& rng) {
  Tensor<T> wx({3 * n, i});
  for (std::size_t gate = 0; gate < 3; ++gate) {
    Tensor<T> block = xavier_normal<T>(i, n, rng);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < i; ++c) wx.at(gate * n + r, c) = block.at(r, c);
  }
  Tensor<T> wh({3 * n, n});
  for (std::size_t gate = 0; gate < 3; ++gate) {
    Tensor<T> block = orthogonal_init<T>(n, rng);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) wh.at(gate * n + r, c) = block.at(r, c);
  }
  return {std::move(wx), std::move(wh), Tensor<T>({3 * n})};
}

}  // namespace

template <typename T>
ModelParams<T> build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const auto n = config.hidden_per_dir();
  const auto i = config.input_features();
  ModelParams<T> out;
  out.config = config;
  for (std::size_t k = 0; k < 6; ++k) {
    out.layers[k].fwd = build_gru<T>(n[k], i[k], rng);
    out.layers[k].bwd = build_gru<T>(n[k], i[k], rng);
  }
  out.output_layer = build_gru<T>(1, i[6], rng);
  out.alpha5.alpha = Tensor<T>::full({config.widths[4]}, T(0.25));
  out.alpha6.alpha = Tensor<T>::full({config.widths[5]}, T(0.25));
  return out;
}

std::size_t param_count(const ModelConfig& config) {
  config.validate();
  const auto n = config.hidden_per_dir();
  const auto i = config.input_features();
  std::size_t total = 0;
  for (std::size_t k = 0; k < 6; ++k)
    total += 2 * 3 * (n[k] * i[k] + n[k] * n[k] + n[k]);
  total += 3 * (i[6] + 1 + 1);              // layer 7, one unit
  total += config.widths[4] + config.widths[5];  // PReLU slopes
  return total;
}

template <typename T>
ModelVars<T> model_leaves(Tape<T>& tape, const ModelParams<T>& params) {
  ModelVars<T> vars;
  for (std::size_t k = 0; k < 6; ++k) {
    vars.layers[k].first = gru_leaves(tape, params.layers[k].fwd);
    vars.layers[k].second = gru_leaves(tape, params.layers[k].bwd);
  }
  vars.output_layer = gru_leaves(tape, params.output_layer);
  vars.alpha5 = tape.leaf(params.alpha5.alpha);
  vars.alpha6 = tape.leaf(params.alpha6.alpha);
  return vars;
}

template <typename T>
ModelVars<T> model_leaves(Tape<T>& tape, const ParameterSet<T>& set, const ModelConfig& config) {
  (void)config;
  ModelVars<T> vars;
  std::size_t idx = 0;
  auto next = [&]() { return tape.leaf(set.item(idx++).second); };
  for (std::size_t k = 0; k < 6; ++k) {
    vars.layers[k].first = {next(), next(), next()};
    vars.layers[k].second = {next(), next(), next()};
  }
  vars.output_layer = {next(), next(), next()};
  vars.alpha5 = next();
  vars.alpha6 = next();
  if (idx != set.size())
    throw ContractError("model_leaves: parameter set has " + std::to_string(set.size()) +
                        " entries, expected " + std::to_string(idx));
  return vars;
}

template <typename T>
Var<T> forward_on_tape(Tape<T>& tape, const ModelVars<T>& vars, const ModelConfig& config,
                       Var<T> segment, std::vector<Shape>* trace) {
  const Tensor<T>& sv = tape.value(segment);
  if (sv.rank() != 2 || sv.cols() != 1 || sv.rows() != config.segment_len)
    throw DimensionError("forward: segment is " + shape_str(sv.shape()) + ", expected " +
                         shape_str({config.segment_len, 1}));
  auto note = [&](Var<T> v) {
    if (trace) trace->push_back(tape.value(v).shape());
    return v;
  };

  Var<T> cur = segment;
  Var<T> tap2, tap3;
  for (std::size_t k = 0; k < 6; ++k) {
    cur = note(bigru_seq(tape, cur, vars.layers[k].first, vars.layers[k].second));
    switch (k) {
      case 0:
        cur = note(fold_on_tape(tape, cur));
        break;
      case 1:
        tap2 = cur;
        cur = note(fold_on_tape(tape, cur));
        break;
      case 2:
        tap3 = cur;
        cur = note(fold_on_tape(tape, cur));
        break;
      case 3:
        cur = note(unfold_on_tape(tape, cur));
        break;
      case 4:
        cur = tape.prelu(tape.add(tap3, cur), vars.alpha5);
        cur = note(unfold_on_tape(tape, cur));
        break;
      case 5:
        cur = tape.prelu(tape.add(tap2, cur), vars.alpha6);
        cur = note(unfold_on_tape(tape, cur));
        break;
    }
  }
  return note(gru_seq(tape, cur, vars.output_layer, Direction::forward));
}

template <typename T>
Tensor<T> forward(const ModelParams<T>& params, const Tensor<T>& segment,
                  std::vector<Shape>* trace) {
  Tape<T> tape(false);
  ModelVars<T> vars = model_leaves(tape, params);
  Var<T> out = forward_on_tape(tape, vars, params.config, tape.constant(segment), trace);
  return tape.value(out);
}

#define RHRNET_MODEL_INSTANTIATE(T)                                                        \
  template struct ModelParams<T>;                                                          \
  template ModelParams<T> build<T>(const ModelConfig&, std::uint64_t);                     \
  template ModelVars<T> model_leaves<T>(Tape<T>&, const ModelParams<T>&);                  \
  template ModelVars<T> model_leaves<T>(Tape<T>&, const ParameterSet<T>&,                  \
                                        const ModelConfig&);                               \
  template Var<T> forward_on_tape<T>(Tape<T>&, const ModelVars<T>&, const ModelConfig&,    \
                                     Var<T>, std::vector<Shape>*);                         \
  template Tensor<T> forward<T>(const ModelParams<T>&, const Tensor<T>&,                   \
                                std::vector<Shape>*);

RHRNET_MODEL_INSTANTIATE(float)
RHRNET_MODEL_INSTANTIATE(double)

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
#undef RHRNET_MODEL_INSTANTIATE

}  // namespace rhrnet
