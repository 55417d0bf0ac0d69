#include "rhrnet/autodiff.hpp"

#include <cmath>

namespace rhrnet {

namespace {

template <typename T>
void accumulate(Tensor<T>& into, const Tensor<T>& g) {
  for (std::size_t i = 0; i < into.count(); ++i) into[i] += g[i];
}

}  // namespace

template <typename T>
Var<T> Tape<T>::push(Tensor<T> value, bool needs_grad, std::function<void(Tape&)> back) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = record_ && needs_grad;
  if (node.needs_grad) node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var<T>(nodes_.size() - 1);
}

template <typename T>
Tensor<T>& Tape<T>::grad_buf(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad_ready) {
    n.grad = Tensor<T>(n.value.shape());
    n.grad_ready = true;
  }
  return n.grad;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var<T> v) const {
  const Node& n = nodes_[v.id()];
  if (!n.needs_grad) throw ContractError("grad(): node does not participate in gradients");
  if (!n.grad_ready) throw ContractError("grad(): backward() has not reached this node");
  return n.grad;
}

template <typename T>
Tensor<T> Tape<T>::grad_or_zero(Var<T> v) const {
  const Node& n = nodes_[v.id()];
  if (n.needs_grad && n.grad_ready) return n.grad;
  return Tensor<T>(n.value.shape());
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  return push(std::move(value), false, {});
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value) {
  return push(std::move(value), true, {});
}

template <typename T>
Var<T> Tape<T>::matmul(Var<T> a, Var<T> b) {
  Var<T> y = push(rhrnet::matmul(value(a), value(b)), wants(a) || wants(b), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, a, b](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      if (t.wants(a))
        accumulate(t.grad_buf(a.id()), rhrnet::matmul(g, rhrnet::transpose(t.value(b))));
      if (t.wants(b))
        accumulate(t.grad_buf(b.id()), rhrnet::matmul(rhrnet::transpose(t.value(a)), g));
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::add(Var<T> a, Var<T> b) {
  Var<T> y = push(rhrnet::add(value(a), value(b)), wants(a) || wants(b), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, a, b](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      if (t.wants(a)) accumulate(t.grad_buf(a.id()), g);
      if (t.wants(b)) accumulate(t.grad_buf(b.id()), g);
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::sub(Var<T> a, Var<T> b) {
  Var<T> y = push(rhrnet::sub(value(a), value(b)), wants(a) || wants(b), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, a, b](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      if (t.wants(a)) accumulate(t.grad_buf(a.id()), g);
      if (t.wants(b)) {
        Tensor<T>& gb = t.grad_buf(b.id());
        for (std::size_t i = 0; i < gb.count(); ++i) gb[i] -= g[i];
      }
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::mul(Var<T> a, Var<T> b) {
  Var<T> y = push(rhrnet::mul(value(a), value(b)), wants(a) || wants(b), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, a, b](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      if (t.wants(a)) accumulate(t.grad_buf(a.id()), rhrnet::mul(g, t.value(b)));
      if (t.wants(b)) accumulate(t.grad_buf(b.id()), rhrnet::mul(g, t.value(a)));
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::sigmoid(Var<T> x) {
  Var<T> y = push(rhrnet::sigmoid(value(x)), wants(x), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, x](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      const Tensor<T>& s = t.value(y);
      Tensor<T>& gx = t.grad_buf(x.id());
      for (std::size_t i = 0; i < gx.count(); ++i) gx[i] += g[i] * s[i] * (T(1) - s[i]);
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::tanh(Var<T> x) {
  Var<T> y = push(rhrnet::tanh(value(x)), wants(x), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, x](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      const Tensor<T>& v = t.value(y);
      Tensor<T>& gx = t.grad_buf(x.id());
      for (std::size_t i = 0; i < gx.count(); ++i) gx[i] += g[i] * (T(1) - v[i] * v[i]);
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::transpose(Var<T> x) {
  Var<T> y = push(rhrnet::transpose(value(x)), wants(x), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, x](Tape& t) {
      accumulate(t.grad_buf(x.id()), rhrnet::transpose(t.nodes_[y.id()].grad));
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::reverse_rows(Var<T> x) {
  Var<T> y = push(rhrnet::reverse_rows(value(x)), wants(x), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, x](Tape& t) {
      accumulate(t.grad_buf(x.id()), rhrnet::reverse_rows(t.nodes_[y.id()].grad));
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::concat_features(Var<T> a, Var<T> b) {
  Var<T> y = push(rhrnet::concat_features(value(a), value(b)), wants(a) || wants(b), {});
  if (nodes_[y.id()].needs_grad) {
    const std::size_t fa = value(a).cols();
    nodes_[y.id()].back = [y, a, b, fa](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      auto [ga, gb] = rhrnet::split_features(g, fa);
      if (t.wants(a)) accumulate(t.grad_buf(a.id()), ga);
      if (t.wants(b)) accumulate(t.grad_buf(b.id()), gb);
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::slice_cols(Var<T> x, std::size_t c0, std::size_t c1) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 2 || c0 >= c1 || c1 > xv.cols())
    throw DimensionError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") outside " + shape_str(xv.shape()));
  const std::size_t r = xv.rows();
  Tensor<T> out({r, c1 - c0});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = xv.at(i, j);
  Var<T> y = push(std::move(out), wants(x), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, x, c0](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      Tensor<T>& gx = t.grad_buf(x.id());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gx.at(i, c0 + j) += g.at(i, j);
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::slice_rows(Var<T> x, std::size_t r0, std::size_t r1) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 2 || r0 >= r1 || r1 > xv.rows())
    throw DimensionError("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) +
                         ") outside " + shape_str(xv.shape()));
  const std::size_t c = xv.cols();
  Tensor<T> out({r1 - r0, c});
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i - r0, j) = xv.at(i, j);
  Var<T> y = push(std::move(out), wants(x), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, x, r0](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      Tensor<T>& gx = t.grad_buf(x.id());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gx.at(r0 + i, j) += g.at(i, j);
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::stack_rows(std::span<const Var<T>> rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  const std::size_t c = value(rows[0]).count();
  Tensor<T> out({rows.size(), c});
  bool any = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor<T>& rv = value(rows[i]);
    if (rv.count() != c)
      throw DimensionError("stack_rows: row " + std::to_string(i) + " is " +
                           shape_str(rv.shape()) + ", expected " + std::to_string(c) +
                           " elements");
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = rv[j];
    any = any || wants(rows[i]);
  }
  Var<T> y = push(std::move(out), any, {});
  if (nodes_[y.id()].needs_grad) {
    std::vector<Var<T>> owned(rows.begin(), rows.end());
    nodes_[y.id()].back = [y, owned = std::move(owned)](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      for (std::size_t i = 0; i < owned.size(); ++i) {
        if (!t.wants(owned[i])) continue;
        Tensor<T>& gr = t.grad_buf(owned[i].id());
        for (std::size_t j = 0; j < gr.count(); ++j) gr[j] += g.at(i, j);
      }
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::add_rows(Var<T> m, Var<T> v) {
  Var<T> y = push(rhrnet::add_rows(value(m), value(v)), wants(m) || wants(v), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, m, v](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      if (t.wants(m)) accumulate(t.grad_buf(m.id()), g);
      if (t.wants(v)) {
        Tensor<T>& gv = t.grad_buf(v.id());
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) gv[j] += g.at(i, j);
      }
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::reshape(Var<T> x, Shape shape) {
  const Shape old = value(x).shape();
  Var<T> y = push(value(x).reshaped(std::move(shape)), wants(x), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, x, old](Tape& t) {
      accumulate(t.grad_buf(x.id()), t.nodes_[y.id()].grad.reshaped(old));
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::one_minus(Var<T> x) {
  Tensor<T> out = value(x);
  for (std::size_t i = 0; i < out.count(); ++i) out[i] = T(1) - out[i];
  Var<T> y = push(std::move(out), wants(x), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, x](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      Tensor<T>& gx = t.grad_buf(x.id());
      for (std::size_t i = 0; i < gx.count(); ++i) gx[i] -= g[i];
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::scale(Var<T> x, T factor) {
  Tensor<T> out = value(x);
  for (std::size_t i = 0; i < out.count(); ++i) out[i] *= factor;
  Var<T> y = push(std::move(out), wants(x), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, x, factor](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      Tensor<T>& gx = t.grad_buf(x.id());
      for (std::size_t i = 0; i < gx.count(); ++i) gx[i] += factor * g[i];
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::prelu(Var<T> x, Var<T> alpha) {
  Var<T> y = push(rhrnet::prelu(value(x), value(alpha)), wants(x) || wants(alpha), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, x, alpha](Tape& t) {
      const Tensor<T>& g = t.nodes_[y.id()].grad;
      const Tensor<T>& xv = t.value(x);
      const Tensor<T>& av = t.value(alpha);
      if (t.wants(x)) {
        Tensor<T>& gx = t.grad_buf(x.id());
        for (std::size_t i = 0; i < xv.rows(); ++i)
          for (std::size_t j = 0; j < xv.cols(); ++j)
            gx.at(i, j) += g.at(i, j) * (xv.at(i, j) >= 0 ? T(1) : av[j]);
      }
      if (t.wants(alpha)) {
        Tensor<T>& ga = t.grad_buf(alpha.id());
        for (std::size_t i = 0; i < xv.rows(); ++i)
          for (std::size_t j = 0; j < xv.cols(); ++j)
            if (xv.at(i, j) < 0) ga[j] += g.at(i, j) * xv.at(i, j);
      }
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::sum(Var<T> x) {
  const Tensor<T>& xv = value(x);
  T s = 0;
  for (std::size_t i = 0; i < xv.count(); ++i) s += xv[i];
  Var<T> y = push(Tensor<T>::scalar(s), wants(x), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, x](Tape& t) {
      const T g = t.nodes_[y.id()].grad[0];
      Tensor<T>& gx = t.grad_buf(x.id());
      for (std::size_t i = 0; i < gx.count(); ++i) gx[i] += g;
    };
  }
  return y;
}

template <typename T>
Var<T> Tape<T>::logcosh_mean(Var<T> pred, Var<T> target) {
  const Tensor<T>& pv = value(pred);
  const Tensor<T>& tv = value(target);
  if (!pv.same_shape(tv))
    throw DimensionError("logcosh_mean: shape mismatch " + shape_str(pv.shape()) + " vs " +
                         shape_str(tv.shape()));
  const T log2 = std::log(T(2));
  T acc = 0;
  for (std::size_t i = 0; i < pv.count(); ++i) {
    const T e = std::abs(pv[i] - tv[i]);
    acc += e + std::log1p(std::exp(T(-2) * e)) - log2;
  }
  acc /= static_cast<T>(pv.count());
  Var<T> y = push(Tensor<T>::scalar(acc), wants(pred) || wants(target), {});
  if (nodes_[y.id()].needs_grad) {
    nodes_[y.id()].back = [y, pred, target](Tape& t) {
      const T g = t.nodes_[y.id()].grad[0];
      const Tensor<T>& p = t.value(pred);
      const Tensor<T>& tg = t.value(target);
      const T inv_n = T(1) / static_cast<T>(p.count());
      if (t.wants(pred)) {
        Tensor<T>& gp = t.grad_buf(pred.id());
        for (std::size_t i = 0; i < gp.count(); ++i)
          gp[i] += g * inv_n * std::tanh(p[i] - tg[i]);
      }
      if (t.wants(target)) {
        Tensor<T>& gt = t.grad_buf(target.id());
        for (std::size_t i = 0; i < gt.count(); ++i)
          gt[i] -= g * inv_n * std::tanh(p[i] - tg[i]);
      }
    };
  }
  return y;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (!record_) throw ContractError("backward(): tape was created without gradient recording");
  if (swept_) throw ContractError("backward(): tape already swept");
  if (value(loss).count() != 1)
    throw ContractError("backward(): loss must be a single element, got " +
                        shape_str(value(loss).shape()));
  swept_ = true;
  // A loss that ignores every leaf has all-zero gradients; nothing to sweep.
  if (!nodes_[loss.id()].needs_grad) return;
  grad_buf(loss.id())[0] = T(1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.needs_grad && n.grad_ready && n.back) n.back(*this);
  }
}

template <typename T>
ParameterSet<T> gradients(const TapeLoss<T>& loss, const ParameterSet<T>& params) {
  Tape<T> tape(true);
  std::vector<Var<T>> leaves;
  leaves.reserve(params.size());
  for (const auto& [name, tensor] : params) leaves.push_back(tape.leaf(tensor));
  Var<T> out = loss(tape, leaves);
  if (tape.value(out).count() != 1)
    throw ContractError("gradients(): loss must be scalar, got " +
                        shape_str(tape.value(out).shape()));
  tape.backward(out);
  ParameterSet<T> grads;
  std::size_t i = 0;
  for (const auto& [name, tensor] : params)
    grads.add(name, tape.grad_or_zero(leaves[i++]));
  return grads;
}

template <typename T>
ParameterSet<T> finite_diff_gradients(const std::function<T(const ParameterSet<T>&)>& loss,
                                      const ParameterSet<T>& params, T step) {
  ParameterSet<T> work = params;
  ParameterSet<T> grads = params.zeros_like();
  for (std::size_t p = 0; p < work.size(); ++p) {
    Tensor<T>& t = work.item(p).second;
    Tensor<T>& g = grads.item(p).second;
    for (std::size_t i = 0; i < t.count(); ++i) {
      const T saved = t[i];
      t[i] = saved + step;
      const T up = loss(work);
      t[i] = saved - step;
      const T down = loss(work);
      t[i] = saved;
      g[i] = (up - down) / (T(2) * step);
    }
  }
  return grads;
}

template <typename T>
GradCompareResult compare_gradients(const ParameterSet<T>& analytic,
                                    const ParameterSet<T>& numeric, double denom_floor) {
  if (!analytic.same_layout(numeric))
    throw ContractError("compare_gradients: parameter layouts differ");
  GradCompareResult res;
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    const auto& [name, a] = analytic.item(p);
    const Tensor<T>& n = numeric.item(p).second;
    for (std::size_t i = 0; i < a.count(); ++i) {
      const double av = static_cast<double>(a[i]);
      const double nv = static_cast<double>(n[i]);
      const double denom = std::max({std::abs(av), std::abs(nv), denom_floor});
      const double rel = std::abs(av - nv) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = name;
        res.worst_index = i;
      }
    }
  }
  return res;
}

#define RHRNET_AD_INSTANTIATE(T)                                                          \
  template class Tape<T>;                                                                 \
  template ParameterSet<T> gradients<T>(const TapeLoss<T>&, const ParameterSet<T>&);      \
  template ParameterSet<T> finite_diff_gradients<T>(                                      \
      const std::function<T(const ParameterSet<T>&)>&, const ParameterSet<T>&, T);        \
  template GradCompareResult compare_gradients<T>(const ParameterSet<T>&,                 \
                                                  const ParameterSet<T>&, double);

RHRNET_AD_INSTANTIATE(float)
RHRNET_AD_INSTANTIATE(double)
#undef RHRNET_AD_INSTANTIATE

}  // namespace rhrnet
