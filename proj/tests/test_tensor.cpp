#include "rhrnet/tensor.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

using namespace rhrnet;
using rhrnet::testing::random_tensor;

TEST(Tensor, ShapeAndCount) {
  Tensor<double> t({2, 3});
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.count(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  for (std::size_t i = 0; i < t.count(); ++i) EXPECT_EQ(t[i], 0.0);
}

TEST(Tensor, PositiveExtentsEnforced) {
  EXPECT_THROW(Tensor<double>({0, 3}), ContractError);
  EXPECT_THROW(Tensor<double>(Shape{}), ContractError);
  EXPECT_THROW(Tensor<double>({2, 2}, {1.0, 2.0, 3.0}), ContractError);
}

TEST(Tensor, ReshapeKeepsValues) {
  Tensor<double> t({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> r = t.reshaped({3, 2});
  EXPECT_EQ(r.at(0, 0), 1.0);
  EXPECT_EQ(r.at(2, 1), 6.0);
  EXPECT_THROW(t.reshaped({4, 2}), DimensionError);
}

TEST(Matmul, HandComputedExample) {
  auto a = Tensor<double>::matrix({{1, 2}, {3, 4}});
  auto b = Tensor<double>::matrix({{5}, {6}});
  Tensor<double> c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(c.at(0, 0), 17.0);
  EXPECT_EQ(c.at(1, 0), 39.0);
}

TEST(Matmul, IdentityExact) {
  std::mt19937 gen(7);
  for (std::size_t n : {1u, 3u, 5u}) {
    Tensor<double> eye({n, n});
    for (std::size_t i = 0; i < n; ++i) eye.at(i, i) = 1.0;
    Tensor<double> a = random_tensor<double>({n, n}, gen);
    EXPECT_EQ(matmul(eye, a), a);
    EXPECT_EQ(matmul(a, eye), a);
  }
}

TEST(Matmul, MismatchedInnerExtents) {
  Tensor<double> a({2, 3});
  Tensor<double> b({2, 3});
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos);
  }
}

TEST(Elementwise, Basics) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor<double>::scalar(0.0))[0], 0.5);
  EXPECT_DOUBLE_EQ(rhrnet::tanh(Tensor<double>::scalar(0.0))[0], 0.0);
  Tensor<double> s = add(Tensor<double>::vec({1, 2}), Tensor<double>::vec({3, 4}));
  EXPECT_EQ(s, Tensor<double>::vec({4, 6}));
  EXPECT_THROW(add(Tensor<double>({2}), Tensor<double>({3})), DimensionError);
  EXPECT_THROW(mul(Tensor<double>({2, 2}), Tensor<double>({4})), DimensionError);
}

TEST(Elementwise, SaturatedSigmoidStaysFinite) {
  Tensor<double> big({3}, {1e4, -1e4, 0.0});
  Tensor<double> s = sigmoid(big);
  EXPECT_TRUE(s.all_finite());
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_DOUBLE_EQ(s[1], 0.0);
}

TEST(ConcatFeatures, Definition) {
  Tensor<double> c = concat_features(Tensor<double>::matrix({{1}}), Tensor<double>::matrix({{2}}));
  EXPECT_EQ(c, Tensor<double>::matrix({{1, 2}}));
}

TEST(ConcatFeatures, ShapeAlgebraAndErrors) {
  Tensor<double> a({4, 2});
  Tensor<double> b({4, 3});
  EXPECT_EQ(concat_features(a, b).shape(), (Shape{4, 5}));
  EXPECT_THROW(concat_features(Tensor<double>({2, 1}), Tensor<double>({3, 1})), DimensionError);
}

TEST(ConcatFeatures, SplitRoundTripBitExact) {
  std::mt19937 gen(11);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t t = 1 + gen() % 6;
    const std::size_t fa = 1 + gen() % 5;
    const std::size_t fb = 1 + gen() % 5;
    Tensor<float> a = random_tensor<float>({t, fa}, gen);
    Tensor<float> b = random_tensor<float>({t, fb}, gen);
    auto [a2, b2] = split_features(concat_features(a, b), fa);
    EXPECT_EQ(a2, a);
    EXPECT_EQ(b2, b);
  }
}

TEST(Ops, FiniteInputsGiveFiniteOutputs) {
  std::mt19937 gen(13);
  for (int iter = 0; iter < 100; ++iter) {
    Tensor<double> a = random_tensor<double>({3, 4}, gen);
    Tensor<double> b = random_tensor<double>({4, 2}, gen);
    Tensor<double> c = random_tensor<double>({3, 4}, gen);
    EXPECT_TRUE(matmul(a, b).all_finite());
    EXPECT_TRUE(add(a, c).all_finite());
    EXPECT_TRUE(sub(a, c).all_finite());
    EXPECT_TRUE(mul(a, c).all_finite());
    EXPECT_TRUE(sigmoid(a).all_finite());
    EXPECT_TRUE(rhrnet::tanh(a).all_finite());
    EXPECT_TRUE(prelu(a, random_tensor<double>({4}, gen)).all_finite());
  }
}

TEST(ParameterSet, StableOrderAndUniqueNames) {
  ParameterSet<float> set;
  set.add("b", Tensor<float>({1}));
  set.add("a", Tensor<float>({2}));
  set.add("c", Tensor<float>({3}));
  std::vector<std::string> names;
  for (const auto& [name, t] : set) names.push_back(name);
  EXPECT_EQ(names, (std::vector<std::string>{"b", "a", "c"}));
  EXPECT_EQ(set.total_elements(), 6u);
  EXPECT_THROW(set.add("a", Tensor<float>({1})), ContractError);
  EXPECT_THROW(set["missing"], ContractError);
}
