#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rhrnet/tensor.hpp"

namespace rhrnet {

template <typename T>
class Tape;

// Handle to a node on a Tape.
template <typename T>
class Var {
 public:
  Var() = default;
  std::size_t id() const { return id_; }
  bool valid() const { return id_ != std::numeric_limits<std::size_t>::max(); }

 private:
  friend class Tape<T>;
  explicit Var(std::size_t id) : id_(id) {}
  std::size_t id_ = std::numeric_limits<std::size_t>::max();
};

// Reverse-mode tape. Every operation records its forward value; when gradient
// recording is enabled, a backward step per node as well. Construction order
// is the topological order used by backward().
template <typename T>
class Tape {
 public:
  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Non-differentiable input.
  Var<T> constant(Tensor<T> value);
  // Differentiable leaf; grad() is defined for it after backward().
  Var<T> leaf(Tensor<T> value);

  Var<T> matmul(Var<T> a, Var<T> b);
  Var<T> add(Var<T> a, Var<T> b);
  Var<T> sub(Var<T> a, Var<T> b);
  Var<T> mul(Var<T> a, Var<T> b);
  Var<T> sigmoid(Var<T> x);
  Var<T> tanh(Var<T> x);
  Var<T> transpose(Var<T> x);
  Var<T> reverse_rows(Var<T> x);
  Var<T> concat_features(Var<T> a, Var<T> b);
  Var<T> slice_cols(Var<T> x, std::size_t c0, std::size_t c1);
  Var<T> slice_rows(Var<T> x, std::size_t r0, std::size_t r1);
  Var<T> stack_rows(std::span<const Var<T>> rows);
  Var<T> add_rows(Var<T> m, Var<T> v);
  Var<T> reshape(Var<T> x, Shape shape);
  Var<T> one_minus(Var<T> x);
  Var<T> scale(Var<T> x, T factor);
  Var<T> prelu(Var<T> x, Var<T> alpha);
  Var<T> sum(Var<T> x);                            // 1-element result
  Var<T> logcosh_mean(Var<T> pred, Var<T> target); // 1-element result

  const Tensor<T>& value(Var<T> v) const { return nodes_[v.id()].value; }
  // Valid for nodes that participate in gradients, after backward().
  const Tensor<T>& grad(Var<T> v) const;
  // Like grad(), but zeros for nodes backward() never reached.
  Tensor<T> grad_or_zero(Var<T> v) const;

  // Reverse sweep from a 1-element loss node. One sweep per tape.
  void backward(Var<T> loss);

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily during backward
    std::function<void(Tape&)> back;
    bool needs_grad = false;
    bool grad_ready = false;
  };

  Var<T> push(Tensor<T> value, bool needs_grad, std::function<void(Tape&)> back);
  Tensor<T>& grad_buf(std::size_t id);
  bool wants(Var<T> v) const { return nodes_[v.id()].needs_grad; }

  std::vector<Node> nodes_;
  bool record_;
  bool swept_ = false;
};

// Scalar-valued differentiable function of a ParameterSet: receives one leaf
// Var per parameter, in the set's iteration order, and returns the loss node.
template <typename T>
using TapeLoss = std::function<Var<T>(Tape<T>&, const std::vector<Var<T>>&)>;

// Reverse-mode partial derivatives of the scalar loss w.r.t. every parameter
// element. The result has the same names and shapes as params.
template <typename T>
ParameterSet<T> gradients(const TapeLoss<T>& loss, const ParameterSet<T>& params);

// Central finite differences of an arbitrary scalar function of the
// parameters; the independent oracle for the reverse-mode path.
template <typename T>
ParameterSet<T> finite_diff_gradients(const std::function<T(const ParameterSet<T>&)>& loss,
                                      const ParameterSet<T>& params, T step);

// Worst-case relative disagreement between two gradient sets. Denominators
// are floored so that near-zero derivatives are compared absolutely.
struct GradCompareResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

template <typename T>
GradCompareResult compare_gradients(const ParameterSet<T>& analytic,
                                    const ParameterSet<T>& numeric,
                                    double denom_floor = 1e-4);

}  // namespace rhrnet
