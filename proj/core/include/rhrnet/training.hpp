#pragma once

#include <functional>
#include <iosfwd>
#include <limits>

#include "rhrnet/model.hpp"

namespace rhrnet {

// Mean over all elements of log(cosh(pred - target)), evaluated through the
// overflow-safe form |e| + log1p(exp(-2|e|)) - log 2.
template <typename T>
T logcosh_loss(const Tensor<T>& pred, const Tensor<T>& target);

// Per-parameter squared-gradient running average.
template <typename T>
struct RmspropState {
  ParameterSet<T> accum;
  T rho = T(0.9);
  T epsilon = T(1e-7);

  static RmspropState like(const ParameterSet<T>& params, T rho = T(0.9), T eps = T(1e-7)) {
    return {params.zeros_like(), rho, eps};
  }
};

// s <- rho s + (1-rho) g^2 ; theta <- theta - lr g / (sqrt(s) + eps).
template <typename T>
void rmsprop_step(ParameterSet<T>& params, const ParameterSet<T>& grads,
                  RmspropState<T>& state, T lr);

struct TrainSchedule {
  double lr_init = 1e-4;
  double lr_floor = 1e-8;
  double decay_factor = 10.0;       // lr divides by this on plateau
  std::size_t plateau_patience = 3; // epochs without improvement before decay
  std::size_t stop_patience = 6;    // epochs without improvement before stopping
  std::size_t batch_size = 512;
  std::size_t max_epochs = 200;

  void validate() const;
};

struct EpochRow {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct History {
  std::vector<EpochRow> rows;
};

// One (noisy input, clean target) training segment, each [L x 1].
struct TrainingPair {
  Tensor<float> noisy;
  Tensor<float> clean;
};
using Dataset = std::vector<TrainingPair>;

// Resumable trainer state; serialized into the checkpoint's extra section.
struct TrainState {
  RmspropState<float> opt;
  double lr = 0.0;
  std::size_t next_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t plateau_wait = 0;
  std::size_t stop_wait = 0;

  static TrainState fresh(const ParameterSet<float>& params, const TrainSchedule& sched);
};

struct FitOptions {
  std::uint64_t seed = 0;
  std::ostream* log = nullptr;  // one plain-text line per epoch
  // Called after every epoch; improved marks a new best validation loss.
  std::function<void(const EpochRow&, const ParameterSet<float>&, const TrainState&,
                     bool improved)>
      on_epoch;
};

struct FitResult {
  History history;
  ModelParams<float> best;
  std::size_t best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
};

// Epoch loop: seeded shuffle, minibatch gradient steps, per-epoch validation,
// plateau-driven lr decay down to lr_floor, early stopping, best-checkpoint
// tracking. Deterministic given (seed, dataset, schedule).
FitResult fit(ModelParams<float> params, const Dataset& train, const Dataset& val,
              const TrainSchedule& sched, const FitOptions& opts = {});

// Resumable variant; params and state advance in place.
FitResult fit(ModelParams<float>& params, TrainState& state, const Dataset& train,
              const Dataset& val, const TrainSchedule& sched, const FitOptions& opts = {});

// Mean validation loss of the model on a dataset (no gradients).
double evaluate_loss(const ModelParams<float>& params, const Dataset& data);

}  // namespace rhrnet
