#include "rhrnet/training.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "rhrnet/init.hpp"

namespace rhrnet {

template <typename T>
T logcosh_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target))
    throw DimensionError("logcosh_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
  const T log2 = std::log(T(2));
  T acc = 0;
  for (std::size_t i = 0; i < pred.count(); ++i) {
    const T e = std::abs(pred[i] - target[i]);
    acc += e + std::log1p(std::exp(T(-2) * e)) - log2;
  }
  return acc / static_cast<T>(pred.count());
}

template <typename T>
void rmsprop_step(ParameterSet<T>& params, const ParameterSet<T>& grads,
                  RmspropState<T>& state, T lr) {
  if (!params.same_layout(grads))
    throw DimensionError("rmsprop_step: gradient layout does not match parameters");
  if (!params.same_layout(state.accum))
    throw DimensionError("rmsprop_step: optimizer state layout does not match parameters");
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& [name, g] = grads.item(p);
    Tensor<T>& theta = params.item(p).second;
    Tensor<T>& s = state.accum.item(p).second;
    for (std::size_t i = 0; i < g.count(); ++i) {
      if (!std::isfinite(g[i]))
        throw TrainingError("non-finite gradient in parameter '" + name + "'");
      s[i] = state.rho * s[i] + (T(1) - state.rho) * g[i] * g[i];
      theta[i] -= lr * g[i] / (std::sqrt(s[i]) + state.epsilon);
    }
  }
}

void TrainSchedule::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (lr_init <= 0 || lr_floor <= 0 || lr_floor > lr_init)
    throw ConfigError("learning rates must satisfy 0 < lr_floor <= lr_init");
  if (decay_factor <= 1.0) throw ConfigError("decay_factor must exceed 1");
  if (plateau_patience == 0 || stop_patience == 0)
    throw ConfigError("patience values must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
}

TrainState TrainState::fresh(const ParameterSet<float>& params, const TrainSchedule& sched) {
  TrainState st;
  st.opt = RmspropState<float>::like(params);
  st.lr = sched.lr_init;
  return st;
}

namespace {

// Mean loss and mean gradient over a batch of segments; fixed accumulation
// order keeps runs bit-reproducible.
double batch_gradients(const ParameterSet<float>& params, const ModelConfig& config,
                       const Dataset& data, const std::vector<std::size_t>& order,
                       std::size_t begin, std::size_t end, ParameterSet<float>& grads_out) {
  const float inv_n = 1.0f / static_cast<float>(end - begin);
  double loss_sum = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    const TrainingPair& pair = data[order[k]];
    Tape<float> tape(true);
    ModelVars<float> vars = model_leaves(tape, params, config);
    Var<float> pred = forward_on_tape(tape, vars, config, tape.constant(pair.noisy));
    Var<float> loss = tape.logcosh_mean(pred, tape.constant(pair.clean));
    Var<float> scaled = tape.scale(loss, inv_n);
    tape.backward(scaled);
    loss_sum += static_cast<double>(tape.value(loss)[0]);

    std::size_t idx = 0;
    auto pull = [&](Var<float> leaf) {
      Tensor<float>& g = grads_out.item(idx++).second;
      Tensor<float> piece = tape.grad_or_zero(leaf);
      for (std::size_t i = 0; i < g.count(); ++i) g[i] += piece[i];
    };
    for (std::size_t l = 0; l < 6; ++l) {
      pull(vars.layers[l].first.Wx);
      pull(vars.layers[l].first.Wh);
      pull(vars.layers[l].first.b);
      pull(vars.layers[l].second.Wx);
      pull(vars.layers[l].second.Wh);
      pull(vars.layers[l].second.b);
    }
    pull(vars.output_layer.Wx);
    pull(vars.output_layer.Wh);
    pull(vars.output_layer.b);
    pull(vars.alpha5);
    pull(vars.alpha6);
  }
  return loss_sum / static_cast<double>(end - begin);
}

void shuffle_indices(std::vector<std::size_t>& order, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(order[i - 1], order[j]);
  }
}

double dataset_loss(const ParameterSet<float>& params, const ModelConfig& config,
                    const Dataset& data) {
  double sum = 0.0;
  for (const TrainingPair& pair : data) {
    Tape<float> tape(false);
    ModelVars<float> vars = model_leaves(tape, params, config);
    Var<float> pred = forward_on_tape(tape, vars, config, tape.constant(pair.noisy));
    sum += static_cast<double>(logcosh_loss(tape.value(pred), pair.clean));
  }
  return sum / static_cast<double>(data.size());
}

}  // namespace

double evaluate_loss(const ModelParams<float>& params, const Dataset& data) {
  if (data.empty()) throw ConfigError("evaluate_loss: empty dataset");
  return dataset_loss(params.to_set(), params.config, data);
}

FitResult fit(ModelParams<float> params, const Dataset& train, const Dataset& val,
              const TrainSchedule& sched, const FitOptions& opts) {
  sched.validate();
  ParameterSet<float> set = params.to_set();
  TrainState state = TrainState::fresh(set, sched);
  return fit(params, state, train, val, sched, opts);
}

FitResult fit(ModelParams<float>& params, TrainState& state, const Dataset& train,
              const Dataset& val, const TrainSchedule& sched, const FitOptions& opts) {
  sched.validate();
  if (train.empty()) throw ConfigError("fit: empty training set");
  if (val.empty()) throw ConfigError("fit: empty validation set");
  const ModelConfig config = params.config;
  for (const TrainingPair& p : train)
    if (p.noisy.shape() != Shape{config.segment_len, 1} || !p.noisy.same_shape(p.clean))
      throw ConfigError("fit: segments must all be [" + std::to_string(config.segment_len) +
                        " x 1] pairs");

  ParameterSet<float> set = params.to_set();
  if (!state.opt.accum.same_layout(set))
    throw ConfigError("fit: trainer state does not match the model");

  FitResult result;
  result.best = params;
  result.best_val = state.best_val;

  std::vector<std::size_t> order(train.size());
  const std::size_t end_epoch = state.next_epoch + sched.max_epochs;
  for (std::size_t epoch = state.next_epoch; epoch < end_epoch; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_indices(order, Rng::derive_seed(opts.seed, epoch));

    double train_loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += sched.batch_size) {
      const std::size_t end = std::min(order.size(), begin + sched.batch_size);
      ParameterSet<float> grads = set.zeros_like();
      const double batch_loss =
          batch_gradients(set, config, train, order, begin, end, grads);
      if (!std::isfinite(batch_loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches));
      rmsprop_step(set, grads, state.opt, static_cast<float>(state.lr));
      train_loss_sum += batch_loss * static_cast<double>(end - begin);
      ++batches;
    }
    const double train_loss = train_loss_sum / static_cast<double>(order.size());
    const double val_loss = dataset_loss(set, config, val);
    if (!std::isfinite(val_loss))
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));

    const bool improved = val_loss < state.best_val;
    if (improved) {
      state.best_val = val_loss;
      state.plateau_wait = 0;
      state.stop_wait = 0;
      result.best = ModelParams<float>::from_set(config, set);
      result.best_epoch = epoch;
      result.best_val = val_loss;
    } else {
      ++state.plateau_wait;
      ++state.stop_wait;
    }

    EpochRow row;
    row.epoch = epoch;
    row.lr = state.lr;
    row.train_loss = train_loss;
    row.val_loss = val_loss;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.rows.push_back(row);
    state.next_epoch = epoch + 1;

    if (opts.log) {
      (*opts.log) << "epoch " << row.epoch << " lr " << row.lr << " train " << row.train_loss
                  << " val " << row.val_loss << "\n";
      opts.log->flush();
    }
    if (opts.on_epoch) opts.on_epoch(row, set, state, improved);

    if (state.stop_wait >= sched.stop_patience) break;
    if (state.plateau_wait >= sched.plateau_patience) {
      state.lr = std::max(sched.lr_floor, state.lr / sched.decay_factor);
      state.plateau_wait = 0;
    }
  }

  params = ModelParams<float>::from_set(config, set);
  return result;
}

template float logcosh_loss<float>(const Tensor<float>&, const Tensor<float>&);
template double logcosh_loss<double>(const Tensor<double>&, const Tensor<double>&);
template void rmsprop_step<float>(ParameterSet<float>&, const ParameterSet<float>&,
                                  RmspropState<float>&, float);
template void rmsprop_step<double>(ParameterSet<double>&, const ParameterSet<double>&,
                                   RmspropState<double>&, double);

}  // namespace rhrnet
