#include "rhrnet/tensor.hpp"

#include <cmath>
#include <numeric>

namespace rhrnet {

std::string shape_str(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out.empty() ? "scalar" : out;
}

namespace {

std::size_t checked_count(const Shape& shape) {
  if (shape.empty()) throw ContractError("tensor shape must have at least one extent");
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw ContractError("tensor extents must be positive, got " + shape_str(shape));
    n *= e;
  }
  return n;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

template <typename T>
void require_rank2(const Tensor<T>& x, const char* op) {
  if (x.rank() != 2)
    throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got " +
                         shape_str(x.shape()));
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_.assign(checked_count(shape_), T(0));
  cols_ = shape_.size() == 2 ? shape_[1] : 0;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (checked_count(shape_) != data_.size())
    throw ContractError("element count " + std::to_string(data_.size()) +
                        " does not match shape " + shape_str(shape_));
  cols_ = shape_.size() == 2 ? shape_[1] : 0;
}

template <typename T>
Tensor<T> Tensor<T>::vec(std::initializer_list<T> values) {
  return Tensor({values.size()}, std::vector<T>(values));
}

template <typename T>
Tensor<T> Tensor<T>::matrix(std::initializer_list<std::initializer_list<T>> rows) {
  std::size_t r = rows.size();
  std::size_t c = rows.begin()->size();
  std::vector<T> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ContractError("ragged matrix initializer");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T v) {
  Tensor out(std::move(shape));
  std::fill(out.data_.begin(), out.data_.end(), v);
  return out;
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor is " + shape_str(shape_) + ", not rank-2");
  return shape_[0];
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor is " + shape_str(shape_) + ", not rank-2");
  return shape_[1];
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape new_shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(new_shape));
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape new_shape) && {
  if (checked_count(new_shape) != data_.size())
    throw DimensionError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(new_shape));
  return Tensor(std::move(new_shape), std::move(data_));
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor<T> c({m, n});
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T aik = pa[i * k + kk];
      const T* brow = pb + kk * n;
      T* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.count(); ++i) out[i] += b[i];
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.count(); ++i) out[i] -= b[i];
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.count(); ++i) out[i] *= b[i];
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (std::size_t i = 0; i < out.count(); ++i) {
    const T v = out[i];
    // Split on sign so exp never overflows.
    out[i] = v >= 0 ? T(1) / (T(1) + std::exp(-v))
                    : std::exp(v) / (T(1) + std::exp(v));
  }
  return out;
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (std::size_t i = 0; i < out.count(); ++i) out[i] = std::tanh(out[i]);
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  require_rank2(x, "transpose");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = x.at(i, j);
  return out;
}

template <typename T>
Tensor<T> reverse_rows(const Tensor<T>& x) {
  require_rank2(x, "reverse_rows");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor<T> out({r, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(r - 1 - i, j) = x.at(i, j);
  return out;
}

template <typename T>
Tensor<T> concat_features(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "concat_features");
  require_rank2(b, "concat_features");
  if (a.rows() != b.rows())
    throw DimensionError("concat_features: time extents differ, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  const std::size_t t = a.rows(), fa = a.cols(), fb = b.cols();
  Tensor<T> out({t, fa + fb});
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < fa; ++j) out.at(i, j) = a.at(i, j);
    for (std::size_t j = 0; j < fb; ++j) out.at(i, fa + j) = b.at(i, j);
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_features(const Tensor<T>& x, std::size_t f1) {
  require_rank2(x, "split_features");
  if (f1 == 0 || f1 >= x.cols())
    throw DimensionError("split_features: split point " + std::to_string(f1) +
                         " outside " + shape_str(x.shape()));
  const std::size_t t = x.rows(), f = x.cols();
  Tensor<T> a({t, f1});
  Tensor<T> b({t, f - f1});
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < f1; ++j) a.at(i, j) = x.at(i, j);
    for (std::size_t j = f1; j < f; ++j) b.at(i, j - f1) = x.at(i, j);
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
Tensor<T> add_rows(const Tensor<T>& m, const Tensor<T>& v) {
  require_rank2(m, "add_rows");
  if (v.rank() != 1 || v.count() != m.cols())
    throw DimensionError("add_rows: row vector " + shape_str(v.shape()) +
                         " does not match matrix " + shape_str(m.shape()));
  Tensor<T> out = m;
  const std::size_t r = m.rows(), c = m.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) += v[j];
  return out;
}

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& alpha) {
  require_rank2(x, "prelu");
  if (alpha.rank() != 1 || alpha.count() != x.cols())
    throw DimensionError("prelu: slope vector " + shape_str(alpha.shape()) +
                         " does not match features of " + shape_str(x.shape()));
  Tensor<T> out = x;
  const std::size_t r = x.rows(), c = x.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const T v = out.at(i, j);
      if (v < 0) out.at(i, j) = alpha[j] * v;
    }
  return out;
}

template <typename T>
void ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (index_.count(name))
    throw ContractError("duplicate parameter name '" + name + "'");
  index_.emplace(name, items_.size());
  items_.emplace_back(std::move(name), std::move(value));
}

template <typename T>
Tensor<T>& ParameterSet<T>::operator[](const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return items_[it->second].second;
}

template <typename T>
const Tensor<T>& ParameterSet<T>::operator[](const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return items_[it->second].second;
}

template <typename T>
std::size_t ParameterSet<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += t.count();
  return n;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::zeros_like() const {
  ParameterSet out;
  for (const auto& [name, t] : items_) out.add(name, Tensor<T>(t.shape()));
  return out;
}

template <typename T>
bool ParameterSet<T>::same_layout(const ParameterSet& other) const {
  if (items_.size() != other.items_.size()) return false;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].first != other.items_[i].first) return false;
    if (!items_[i].second.same_shape(other.items_[i].second)) return false;
  }
  return true;
}

#define RHRNET_INSTANTIATE(T)                                                              \
  template class Tensor<T>;                                                                \
  template class ParameterSet<T>;                                                          \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                         \
  template Tensor<T> tanh<T>(const Tensor<T>&);                                            \
  template Tensor<T> transpose<T>(const Tensor<T>&);                                       \
  template Tensor<T> reverse_rows<T>(const Tensor<T>&);                                    \
  template Tensor<T> concat_features<T>(const Tensor<T>&, const Tensor<T>&);               \
  template std::pair<Tensor<T>, Tensor<T>> split_features<T>(const Tensor<T>&, std::size_t); \
  template Tensor<T> add_rows<T>(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> prelu<T>(const Tensor<T>&, const Tensor<T>&);

RHRNET_INSTANTIATE(float)
RHRNET_INSTANTIATE(double)
#undef RHRNET_INSTANTIATE

}  // namespace rhrnet
