#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rhrnet/errors.hpp"

namespace rhrnet {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Dense row-major real tensor. float is the working precision; double is the
// precision used by the gradient checks.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled tensor. Extents must be positive.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T v) { return Tensor({1}, {v}); }
  static Tensor vec(std::initializer_list<T> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows);
  static Tensor full(Shape shape, T v);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t count() const { return data_.size(); }
  std::size_t extent(std::size_t dim) const { return shape_[dim]; }
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;  // rank-2 only

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  // Same elements, new shape; element counts must match.
  Tensor reshaped(Shape new_shape) const&;
  Tensor reshaped(Shape new_shape) &&;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
  std::size_t cols_ = 0;  // cached for rank-2 at()
};

// --- arithmetic primitives ---------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh(const Tensor<T>& x);

template <typename T>
Tensor<T> transpose(const Tensor<T>& x);
template <typename T>
Tensor<T> reverse_rows(const Tensor<T>& x);

// Per-time-step feature concatenation, a's features first.
template <typename T>
Tensor<T> concat_features(const Tensor<T>& a, const Tensor<T>& b);

// Complement of concat_features: splits columns at f1.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_features(const Tensor<T>& x, std::size_t f1);

// Adds a length-F row vector to every row of an [T x F] matrix (bias add).
template <typename T>
Tensor<T> add_rows(const Tensor<T>& m, const Tensor<T>& v);

// y = x for x >= 0, alpha_f * x for x < 0, one slope per column.
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& alpha);

// --- named parameter collection ----------------------------------------------

// Insertion-ordered map of named tensors. Names are unique; iteration order is
// deterministic given the same construction sequence.
template <typename T>
class ParameterSet {
 public:
  using Item = std::pair<std::string, Tensor<T>>;

  void add(std::string name, Tensor<T> value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor<T>& operator[](const std::string& name);
  const Tensor<T>& operator[](const std::string& name) const;

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t total_elements() const;

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  const Item& item(std::size_t i) const { return items_[i]; }
  Item& item(std::size_t i) { return items_[i]; }

  // Same names and shapes, all elements zero.
  ParameterSet zeros_like() const;

  bool same_layout(const ParameterSet& other) const;

 private:
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace rhrnet
