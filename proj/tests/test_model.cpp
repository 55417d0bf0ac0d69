#include "rhrnet/model.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "rhrnet/checkpoint.hpp"
#include "rhrnet/training.hpp"
#include "test_util.hpp"

using namespace rhrnet;
using rhrnet::testing::random_tensor;

namespace {

ModelConfig tiny() { return ModelConfig::scaled(1, 16); }

// Element count derived directly from the layer table, independent of
// param_count's formula: walks the seven layers like the forward pass does.
std::size_t count_by_table(const ModelConfig& c) {
  std::size_t total = 0;
  std::size_t t = c.segment_len, f = 1;
  for (int layer = 1; layer <= 6; ++layer) {
    const std::size_t n = c.widths[layer - 1] / 2;
    total += 2 * (3 * n * f + 3 * n * n + 3 * n);
    f = c.widths[layer - 1];
    if (layer <= 3) {
      t /= 2;
      f *= 2;
    } else {
      t *= 2;
      f /= 2;
    }
  }
  total += 3 * f + 3 + 3;                   // final unidirectional unit
  total += c.widths[4] + c.widths[5];       // residual-site slopes
  return total;
}

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST(ModelConfig, DefaultsValidate) {
  ModelConfig c = ModelConfig::base();
  c.validate();
  EXPECT_EQ(c.time_steps(), (std::array<std::size_t, 7>{1024, 512, 256, 128, 256, 512, 1024}));
  EXPECT_EQ(c.input_features(), (std::array<std::size_t, 7>{1, 4, 256, 512, 256, 128, 64}));
  EXPECT_EQ(c.hidden_per_dir(), (std::array<std::size_t, 7>{1, 64, 128, 256, 128, 64, 1}));
}

TEST(ModelConfig, ScaledSixteenthIsTinyShape) {
  ModelConfig c = tiny();
  EXPECT_EQ(c.segment_len, 64u);
  EXPECT_EQ(c.widths, (std::array<std::size_t, 7>{2, 8, 16, 32, 16, 8, 1}));
}

TEST(ModelConfig, InvariantViolationsNamed) {
  ModelConfig c;
  c.segment_len = 100;  // not a multiple of 8
  EXPECT_THROW(c.validate(), ConfigError);

  c = ModelConfig();
  c.widths[2] = 250;  // breaks both evenness and the residual pairing
  EXPECT_THROW(c.validate(), ConfigError);

  c = ModelConfig();
  c.widths[6] = 2;
  EXPECT_THROW(c.validate(), ConfigError);

  c = ModelConfig();
  c.widths[4] = 128;  // widths[2] != widths[4]
  EXPECT_THROW(c.validate(), ConfigError);

  EXPECT_THROW(ModelConfig::scaled(1, 3), ConfigError);  // 1024/3 not integral
}

TEST(ParamCount, FrozenDefaults) {
  EXPECT_EQ(param_count(ModelConfig::base()), 1873752u);
  // GRU share alone, without the 384 PReLU slopes.
  EXPECT_EQ(param_count(ModelConfig::base()) - 256 - 128, 1873368u);
  EXPECT_EQ(param_count(tiny()), 7692u);
}

TEST(ParamCount, MatchesIndependentTableWalk) {
  EXPECT_EQ(param_count(ModelConfig::base()), count_by_table(ModelConfig::base()));
  EXPECT_EQ(param_count(tiny()), count_by_table(tiny()));
  ModelConfig half = ModelConfig::scaled(1, 2);
  EXPECT_EQ(param_count(half), count_by_table(half));
}

TEST(ParamCount, LayerSevenShare) {
  // With the default config the final layer sees 64 features: 3*(64+1+1).
  const std::size_t expected_l7 = 3 * (64 + 1 + 1);
  EXPECT_EQ(expected_l7, 198u);
  ModelParams<float> params = build<float>(tiny(), 1);
  EXPECT_EQ(params.output_layer.Wx.count() + params.output_layer.Wh.count() +
                params.output_layer.b.count(),
            3u * (4 + 1 + 1));
}

TEST(ParamCount, ShrinksWithScale) {
  EXPECT_LT(param_count(ModelConfig::scaled(1, 2)), param_count(ModelConfig::base()));
}

TEST(Build, DeterministicAndZeroBiases) {
  ModelParams<float> a = build<float>(tiny(), 42);
  ModelParams<float> b = build<float>(tiny(), 42);
  EXPECT_TRUE(a.to_set().same_layout(b.to_set()));
  auto sa = a.to_set();
  auto sb = b.to_set();
  for (std::size_t i = 0; i < sa.size(); ++i)
    EXPECT_EQ(sa.item(i).second, sb.item(i).second) << sa.item(i).first;

  ModelParams<float> c = build<float>(tiny(), 43);
  EXPECT_NE(c.layers[0].fwd.Wx, a.layers[0].fwd.Wx);

  for (const auto& [name, tensor] : sa) {
    if (name.ends_with(".b"))
      for (std::size_t i = 0; i < tensor.count(); ++i) EXPECT_EQ(tensor[i], 0.0f) << name;
    if (name.starts_with("prelu"))
      for (std::size_t i = 0; i < tensor.count(); ++i) EXPECT_EQ(tensor[i], 0.25f) << name;
  }
  EXPECT_EQ(a.element_count(), param_count(tiny()));
}

TEST(Build, RecurrentGateBlocksOrthogonal) {
  ModelParams<float> params = build<float>(tiny(), 7);
  for (const auto& l : params.layers) {
    for (const GruParams<float>* g : {&l.fwd, &l.bwd}) {
      const std::size_t n = g->hidden_size();
      for (std::size_t gate = 0; gate < 3; ++gate) {
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < n; ++k)
              dot += static_cast<double>(g->Wh.at(gate * n + k, i)) *
                     static_cast<double>(g->Wh.at(gate * n + k, j));
            worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
          }
        EXPECT_LT(worst, 1e-6);
      }
    }
  }
}

TEST(Forward, ZeroParamsGiveSilence) {
  ModelConfig c = tiny();
  ModelParams<float> params = build<float>(c, 3);
  ParameterSet<float> zeros = params.to_set().zeros_like();
  // PReLU slopes don't matter on an all-zero path, so zeroing everything is fine.
  ModelParams<float> silent = ModelParams<float>::from_set(c, zeros);
  std::mt19937 gen(71);
  Tensor<float> out = forward(silent, random_tensor<float>({c.segment_len, 1}, gen));
  for (std::size_t i = 0; i < out.count(); ++i) EXPECT_EQ(out[i], 0.0f);
}

TEST(Forward, TinyShapeTraceMatchesTable) {
  ModelConfig c = tiny();
  ModelParams<float> params = build<float>(c, 5);
  std::mt19937 gen(73);
  std::vector<Shape> trace;
  Tensor<float> out = forward(params, random_tensor<float>({64, 1}, gen), &trace);
  EXPECT_EQ(out.shape(), (Shape{64, 1}));
  const std::vector<Shape> expected = {
      {64, 2},  {32, 4},    // layer 1 and its fold
      {32, 8},  {16, 16},   // layer 2 (tap R2) and fold
      {16, 16}, {8, 32},    // layer 3 (tap R3) and fold
      {8, 32},  {16, 16},   // layer 4 and unfold
      {16, 16}, {32, 8},    // layer 5, merge applied, unfold
      {32, 8},  {64, 4},    // layer 6, merge applied, unfold
      {64, 1},              // layer 7
  };
  EXPECT_EQ(trace, expected);
}

TEST(Forward, WrongSegmentLengthRejected) {
  ModelParams<float> params = build<float>(tiny(), 9);
  EXPECT_THROW(forward(params, Tensor<float>({32, 1})), DimensionError);
}

TEST(Forward, Deterministic) {
  ModelParams<float> params = build<float>(tiny(), 11);
  std::mt19937 gen(79);
  Tensor<float> seg = random_tensor<float>({64, 1}, gen);
  EXPECT_EQ(forward(params, seg), forward(params, seg));
}

TEST(Forward, RandomValidConfigsKeepResidualShapesCompatible) {
  std::mt19937 gen(83);
  for (int iter = 0; iter < 10; ++iter) {
    ModelConfig c;
    c.segment_len = 8u * (1 + gen() % 4);
    const std::size_t w1 = 2u * (1 + gen() % 3);
    const std::size_t w2 = 2u * (1 + gen() % 3);
    const std::size_t w3 = 2u * (1 + gen() % 3);
    c.widths = {2, w1, w2, w3, w2, w1, 1};
    c.validate();
    ModelParams<float> params = build<float>(c, iter);
    Tensor<float> seg = random_tensor<float>({c.segment_len, 1}, gen);
    EXPECT_NO_THROW(forward(params, seg));
  }
}

TEST(Forward, EndToEndGradientsMatchFiniteDifferences) {
  // Small (1/32) model so the full finite-difference sweep stays fast here;
  // the acceptance suite runs the tiny config at full size.
  ModelConfig c = ModelConfig::scaled(1, 32);
  ModelParams<double> params = build<double>(c, 123);
  std::mt19937 gen(89);
  Tensor<double> noisy = random_tensor<double>({c.segment_len, 1}, gen);
  Tensor<double> clean = random_tensor<double>({c.segment_len, 1}, gen);
  ParameterSet<double> set = params.to_set();

  auto loss = [&](Tape<double>& t, const std::vector<Var<double>>& leaves) {
    std::size_t idx = 0;
    ModelVars<double> vars;
    for (std::size_t k = 0; k < 6; ++k) {
      vars.layers[k].first = {leaves[idx], leaves[idx + 1], leaves[idx + 2]};
      vars.layers[k].second = {leaves[idx + 3], leaves[idx + 4], leaves[idx + 5]};
      idx += 6;
    }
    vars.output_layer = {leaves[idx], leaves[idx + 1], leaves[idx + 2]};
    vars.alpha5 = leaves[idx + 3];
    vars.alpha6 = leaves[idx + 4];
    Var<double> pred = forward_on_tape(t, vars, c, t.constant(noisy));
    return t.logcosh_mean(pred, t.constant(clean));
  };
  ParameterSet<double> analytic = gradients<double>(loss, set);
  auto eval = [&](const ParameterSet<double>& p) {
    return logcosh_loss(forward(ModelParams<double>::from_set(c, p), noisy), clean);
  };
  ParameterSet<double> numeric = finite_diff_gradients<double>(eval, set, 1e-5);
  GradCompareResult cmp = compare_gradients(analytic, numeric);
  EXPECT_LT(cmp.max_rel_err, 1e-5) << "worst " << cmp.worst_param << "[" << cmp.worst_index
                                   << "]";
}

TEST(Checkpoint, RoundTripBitExact) {
  const auto path = temp_path("rhrnet_test_roundtrip.ckpt");
  ModelParams<float> params = build<float>(tiny(), 21);
  save_checkpoint(path, params, 21);
  LoadedCheckpoint loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.seed, 21u);
  EXPECT_FALSE(loaded.extra.has_value());
  auto a = params.to_set();
  auto b = loaded.params.to_set();
  ASSERT_TRUE(a.same_layout(b));
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(a.item(i).second, b.item(i).second) << a.item(i).first;
  std::filesystem::remove(path);
}

TEST(Checkpoint, ExtraStateRoundTrips) {
  const auto path = temp_path("rhrnet_test_extra.ckpt");
  ModelParams<float> params = build<float>(tiny(), 4);
  CheckpointExtra extra;
  extra.arrays = params.to_set().zeros_like();
  extra.scalars = {{"epoch", 12.0}, {"lr", 1e-5}};
  save_checkpoint(path, params, 4, &extra);
  LoadedCheckpoint loaded = load_checkpoint(path);
  ASSERT_TRUE(loaded.extra.has_value());
  EXPECT_EQ(loaded.extra->scalars.at("epoch"), 12.0);
  EXPECT_TRUE(loaded.extra->arrays.same_layout(extra.arrays));
  std::filesystem::remove(path);
}

TEST(Checkpoint, TruncationDetected) {
  const auto path = temp_path("rhrnet_test_trunc.ckpt");
  ModelParams<float> params = build<float>(tiny(), 8);
  save_checkpoint(path, params, 8);
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 128);  // cut into the last array
  try {
    load_checkpoint(path);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::Truncated);
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, BadMagicAndVersionDetected) {
  const auto path = temp_path("rhrnet_test_magic.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint at all";
  }
  try {
    load_checkpoint(path);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::BadMagic);
  }

  ModelParams<float> params = build<float>(tiny(), 8);
  save_checkpoint(path, params, 8);
  {
    std::fstream io(path, std::ios::binary | std::ios::in | std::ios::out);
    io.seekp(4);
    const std::uint32_t bad_version = 99;
    io.write(reinterpret_cast<const char*>(&bad_version), sizeof bad_version);
  }
  try {
    load_checkpoint(path);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::VersionMismatch);
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, LoadedModelRuns) {
  const auto path = temp_path("rhrnet_test_fwd.ckpt");
  ModelConfig c = tiny();
  ModelParams<float> params = build<float>(c, 30);
  save_checkpoint(path, params, 30);
  LoadedCheckpoint loaded = load_checkpoint(path);
  std::mt19937 gen(97);
  Tensor<float> seg = random_tensor<float>({c.segment_len, 1}, gen);
  EXPECT_EQ(forward(loaded.params, seg), forward(params, seg));
  std::filesystem::remove(path);
}
