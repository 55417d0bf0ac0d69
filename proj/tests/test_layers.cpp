#include "rhrnet/layers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rhrnet/init.hpp"
#include "rhrnet/training.hpp"
#include "test_util.hpp"

using namespace rhrnet;
using rhrnet::testing::random_tensor;

namespace {

template <typename T>
GruParams<T> zero_gru(std::size_t n, std::size_t i) {
  return {Tensor<T>({3 * n, i}), Tensor<T>({3 * n, n}), Tensor<T>({3 * n})};
}

template <typename T>
GruParams<T> random_gru(std::size_t n, std::size_t i, std::mt19937& gen) {
  return {random_tensor<T>({3 * n, i}, gen), random_tensor<T>({3 * n, n}, gen),
          random_tensor<T>({3 * n}, gen)};
}

}  // namespace

TEST(GruCell, AllZeroParamsFromRest) {
  auto p = zero_gru<double>(3, 2);
  Tensor<double> h = gru_cell_step(Tensor<double>({2}), Tensor<double>({3}), p);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(h[i], 0.0);
}

TEST(GruCell, ZeroParamsHalveTheState) {
  // z = sigmoid(0) = 0.5 and the candidate is 0, so h' = 0.5 h.
  auto p = zero_gru<double>(3, 2);
  Tensor<double> h_prev = Tensor<double>::vec({0.4, -1.0, 2.0});
  Tensor<double> h = gru_cell_step(Tensor<double>::vec({1.0, 1.0}), h_prev, p);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(h[i], 0.5 * h_prev[i]);
}

TEST(GruCell, ClosedFormCandidatePath) {
  // n=i=1, Wx feeds only the candidate gate: h = 0.5 tanh(1).
  GruParams<double> p{Tensor<double>::matrix({{0}, {0}, {1}}),
                      Tensor<double>::matrix({{0}, {0}, {0}}), Tensor<double>({3})};
  Tensor<double> h =
      gru_cell_step(Tensor<double>::vec({1.0}), Tensor<double>::vec({0.0}), p);
  EXPECT_NEAR(h[0], 0.5 * std::tanh(1.0), 1e-15);
  EXPECT_NEAR(h[0], 0.3807970779778824, 1e-12);
}

TEST(GruCell, ShapeMismatchRejected) {
  auto p = zero_gru<double>(3, 2);
  EXPECT_THROW(gru_cell_step(Tensor<double>({5}), Tensor<double>({3}), p), DimensionError);
  EXPECT_THROW(gru_cell_step(Tensor<double>({2}), Tensor<double>({4}), p), DimensionError);
}

TEST(GruForward, BackwardIsReversedForwardOfReversedInput) {
  std::mt19937 gen(23);
  auto p = random_gru<double>(3, 2, gen);
  Tensor<double> seq = random_tensor<double>({7, 2}, gen);
  Tensor<double> bwd = gru_forward(seq, p, Direction::backward);
  Tensor<double> expect = reverse_rows(gru_forward(reverse_rows(seq), p, Direction::forward));
  EXPECT_EQ(bwd, expect);
}

TEST(GruForward, SingleStepHasNoDirection) {
  std::mt19937 gen(29);
  auto p = random_gru<double>(4, 3, gen);
  Tensor<double> seq = random_tensor<double>({1, 3}, gen);
  EXPECT_EQ(gru_forward(seq, p, Direction::forward), gru_forward(seq, p, Direction::backward));
}

TEST(GruForward, ZeroParamsGiveZeroStates) {
  std::mt19937 gen(31);
  auto p = zero_gru<double>(2, 3);
  Tensor<double> out = gru_forward(random_tensor<double>({5, 3}, gen), p, Direction::forward);
  for (std::size_t i = 0; i < out.count(); ++i) EXPECT_EQ(out[i], 0.0);
}

TEST(GruForward, CausalityExact) {
  // Perturbing a later input must leave earlier forward states untouched,
  // and symmetrically for the backward direction.
  std::mt19937 gen(37);
  auto p = random_gru<double>(3, 2, gen);
  Tensor<double> seq = random_tensor<double>({6, 2}, gen);
  Tensor<double> fwd = gru_forward(seq, p, Direction::forward);
  Tensor<double> bwd = gru_forward(seq, p, Direction::backward);

  Tensor<double> bumped = seq;
  bumped.at(4, 0) += 0.5;
  Tensor<double> fwd2 = gru_forward(bumped, p, Direction::forward);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(fwd2.at(t, j), fwd.at(t, j));

  Tensor<double> bumped2 = seq;
  bumped2.at(1, 1) -= 0.25;
  Tensor<double> bwd2 = gru_forward(bumped2, p, Direction::backward);
  for (std::size_t t = 2; t < 6; ++t)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(bwd2.at(t, j), bwd.at(t, j));
}

TEST(BiGru, OutputWidthAndZeroCase) {
  std::mt19937 gen(41);
  BiGruParams<double> p{random_gru<double>(3, 2, gen), random_gru<double>(3, 2, gen)};
  Tensor<double> out = bigru_forward(random_tensor<double>({5, 2}, gen), p);
  EXPECT_EQ(out.shape(), (Shape{5, 6}));

  BiGruParams<double> z{zero_gru<double>(2, 2), zero_gru<double>(2, 2)};
  Tensor<double> out0 = bigru_forward(random_tensor<double>({4, 2}, gen), z);
  for (std::size_t i = 0; i < out0.count(); ++i) EXPECT_EQ(out0[i], 0.0);
}

TEST(BiGru, PalindromeSymmetry) {
  // With identical forward/backward parameters on a time-symmetric sequence,
  // the output is its own time mirror with the direction halves swapped.
  std::mt19937 gen(43);
  auto shared = random_gru<double>(3, 2, gen);
  BiGruParams<double> p{shared, shared};
  const std::size_t steps = 6;
  Tensor<double> seq({steps, 2});
  for (std::size_t t = 0; t < steps / 2; ++t)
    for (std::size_t j = 0; j < 2; ++j) {
      const double v = std::sin(0.7 * (t + 1) + 0.3 * j);
      seq.at(t, j) = v;
      seq.at(steps - 1 - t, j) = v;
    }
  Tensor<double> out = bigru_forward(seq, p);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(out.at(t, j), out.at(steps - 1 - t, 3 + j), 1e-12);
    }
}

TEST(Fold, Definition) {
  Tensor<double> x = Tensor<double>::matrix({{1}, {2}, {3}, {4}});
  EXPECT_EQ(downsample_fold(x), Tensor<double>::matrix({{1, 2}, {3, 4}}));
  Tensor<double> big({1024, 2});
  EXPECT_EQ(downsample_fold(big).shape(), (Shape{512, 4}));
}

TEST(Unfold, Definition) {
  Tensor<double> x = Tensor<double>::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(upsample_unfold(x), Tensor<double>::matrix({{1}, {2}, {3}, {4}}));
  Tensor<double> big({128, 512});
  EXPECT_EQ(upsample_unfold(big).shape(), (Shape{256, 256}));
}

TEST(FoldUnfold, MutuallyInverseBitExact) {
  std::mt19937 gen(47);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t t = 2 * (1 + gen() % 8);
    const std::size_t f = 2 * (1 + gen() % 8);
    Tensor<float> x = random_tensor<float>({t, f}, gen);
    EXPECT_EQ(upsample_unfold(downsample_fold(x)), x);
    EXPECT_EQ(downsample_fold(upsample_unfold(x)), x);
  }
}

TEST(FoldUnfold, OddExtentsRejected) {
  EXPECT_THROW(downsample_fold(Tensor<double>({3, 2})), ContractError);
  EXPECT_THROW(upsample_unfold(Tensor<double>({2, 3})), ContractError);
}

TEST(Prelu, Definition) {
  PreluSlope<double> slope{Tensor<double>::vec({0.25})};
  Tensor<double> pos = prelu(Tensor<double>::matrix({{3.0}}), slope);
  EXPECT_EQ(pos.at(0, 0), 3.0);
  Tensor<double> neg = prelu(Tensor<double>::matrix({{-2.0}}), slope);
  EXPECT_EQ(neg.at(0, 0), -0.5);
  EXPECT_THROW(prelu(Tensor<double>({2, 3}), Tensor<double>({2})), DimensionError);
}

TEST(Prelu, ContinuousAtZeroAndIdentityAtUnitSlope) {
  std::mt19937 gen(53);
  PreluSlope<double> unit{Tensor<double>::full({4}, 1.0)};
  Tensor<double> x = random_tensor<double>({3, 4}, gen);
  EXPECT_EQ(prelu(x, unit), x);

  PreluSlope<double> slope{random_tensor<double>({1}, gen)};
  const double eps = 1e-12;
  Tensor<double> lo = prelu(Tensor<double>::matrix({{-eps}}), slope);
  Tensor<double> hi = prelu(Tensor<double>::matrix({{eps}}), slope);
  EXPECT_NEAR(lo.at(0, 0), hi.at(0, 0), 3e-12);
  EXPECT_EQ(prelu(Tensor<double>::matrix({{0.0}}), slope).at(0, 0), 0.0);
}

TEST(ResidualMerge, Basics) {
  std::mt19937 gen(59);
  PreluSlope<double> slope{random_tensor<double>({3}, gen)};
  Tensor<double> upper = random_tensor<double>({4, 3}, gen);
  Tensor<double> zeros({4, 3});
  EXPECT_EQ(residual_merge(zeros, upper, slope), prelu(upper, slope));

  Tensor<double> lower = upper;
  for (std::size_t i = 0; i < lower.count(); ++i) lower[i] = -lower[i];
  Tensor<double> merged = residual_merge(lower, upper, slope);
  for (std::size_t i = 0; i < merged.count(); ++i) EXPECT_EQ(merged[i], 0.0);

  EXPECT_THROW(residual_merge(Tensor<double>({4, 3}), Tensor<double>({4, 2}), slope),
               DimensionError);
}

TEST(LayerGradients, GruSequenceMatchesFiniteDifferences) {
  std::mt19937 gen(61);
  const std::size_t n = 3, in = 2, steps = 5;
  ParameterSet<double> params;
  params.add("Wx", random_tensor<double>({3 * n, in}, gen));
  params.add("Wh", random_tensor<double>({3 * n, n}, gen));
  params.add("b", random_tensor<double>({3 * n}, gen));
  Tensor<double> seq = random_tensor<double>({steps, in}, gen);
  Tensor<double> target = random_tensor<double>({steps, n}, gen);

  for (Direction dir : {Direction::forward, Direction::backward}) {
    auto loss = [&, dir](Tape<double>& t, const std::vector<Var<double>>& leaves) {
      GruVars<double> vars{leaves[0], leaves[1], leaves[2]};
      Var<double> out = gru_seq(t, t.constant(seq), vars, dir);
      return t.logcosh_mean(out, t.constant(target));
    };
    ParameterSet<double> analytic = gradients<double>(loss, params);
    std::function<double(const ParameterSet<double>&)> eval =
        [&](const ParameterSet<double>& p) {
          GruParams<double> gp{p["Wx"], p["Wh"], p["b"]};
          return logcosh_loss(gru_forward(seq, gp, dir), target);
        };
    ParameterSet<double> numeric = finite_diff_gradients<double>(eval, params, 1e-5);
    GradCompareResult cmp = compare_gradients(analytic, numeric);
    EXPECT_LT(cmp.max_rel_err, 1e-5) << "direction " << (dir == Direction::forward ? "f" : "b")
                                     << " worst " << cmp.worst_param;
  }
}

TEST(LayerGradients, BiGruAndResidualPath) {
  std::mt19937 gen(67);
  const std::size_t n = 2, in = 4, steps = 8;
  ParameterSet<double> params;
  params.add("f.Wx", random_tensor<double>({3 * n, in}, gen));
  params.add("f.Wh", random_tensor<double>({3 * n, n}, gen));
  params.add("f.b", random_tensor<double>({3 * n}, gen));
  params.add("b.Wx", random_tensor<double>({3 * n, in}, gen));
  params.add("b.Wh", random_tensor<double>({3 * n, n}, gen));
  params.add("b.b", random_tensor<double>({3 * n}, gen));
  params.add("alpha", random_tensor<double>({2 * n * 2}, gen));
  Tensor<double> seq = random_tensor<double>({steps, in}, gen);
  Tensor<double> target = random_tensor<double>({steps / 2, 2 * n * 2}, gen);

  auto build_graph = [&](Tape<double>& t, const std::vector<Var<double>>& leaves) {
    GruVars<double> f{leaves[0], leaves[1], leaves[2]};
    GruVars<double> b{leaves[3], leaves[4], leaves[5]};
    Var<double> out = bigru_seq(t, t.constant(seq), f, b);
    Var<double> folded = fold_on_tape(t, out);                   // [T/2 x 4n]
    Var<double> merged = t.prelu(t.add(folded, folded), leaves[6]);
    Var<double> back = fold_on_tape(t, unfold_on_tape(t, merged));
    return t.logcosh_mean(back, t.constant(target));
  };
  ParameterSet<double> analytic = gradients<double>(build_graph, params);
  auto eval = [&](const ParameterSet<double>& p) {
    Tape<double> t(false);
    std::vector<Var<double>> leaves;
    for (const auto& [name, tensor] : p) leaves.push_back(t.constant(tensor));
    return t.value(build_graph(t, leaves))[0];
  };
  ParameterSet<double> numeric = finite_diff_gradients<double>(eval, params, 1e-5);
  GradCompareResult cmp = compare_gradients(analytic, numeric);
  EXPECT_LT(cmp.max_rel_err, 1e-5) << "worst " << cmp.worst_param;
}
