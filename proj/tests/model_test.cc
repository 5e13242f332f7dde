// Copyright 2026 The seqrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "gradcheck.h"
#include "seqrec/errors.h"
#include "seqrec/layers.h"
#include "seqrec/model.h"

namespace seqrec {
namespace {

using nn::ForwardContext;
using nn::kPadToken;
using nn::Parameter;
using nn::Tape;
using nn::Tensor;
using nn::Var;

void RandomizeAll(const std::vector<Parameter*>& params, Rng& rng,
                  double scale = 1.0) {
  for (Parameter* p : params) {
    for (double& v : p->value.values()) v = scale * (2.0 * rng.Uniform() - 1.0);
  }
}

void ZeroAll(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->value.Fill(0.0);
}

double GeluOracle(double x) { return x * 0.5 * std::erfc(-x / std::sqrt(2.0)); }

ModelConfig TinyConfig(EncoderKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.num_items = 6;
  c.dim = 4;
  c.max_len = 3;
  c.blocks = 1;
  c.heads = 2;
  c.dropout = 0.0;
  return c;
}

TEST(EmbedSequence, ZeroTableWithoutPositionsIsZero) {
  ModelConfig c = TinyConfig(EncoderKind::kGru);
  c.embedding_norm = false;
  SequenceModel m = SequenceModel::Create(c, 1);
  m.table().items.value.Fill(0.0);
  Tape tape;
  std::vector<int32_t> frame = {0, 3, 5};
  const Tensor& e = m.EmbedFrame(tape, frame, {}).value();
  for (double v : e.values()) EXPECT_EQ(v, 0.0);
}

TEST(EmbedSequence, LookupStacksRows) {
  ModelConfig c = TinyConfig(EncoderKind::kGru);
  c.num_items = 8;
  c.dim = 3;
  c.embedding_norm = false;
  SequenceModel m = SequenceModel::Create(c, 1);
  for (size_t r = 0; r < 8; ++r) {
    for (size_t k = 0; k < 3; ++k) m.table().items.value.at(r, k) = 10.0 * r + k;
  }
  Tape tape;
  std::vector<int32_t> frame = {2, 7};
  const Tensor& e = m.EmbedFrame(tape, frame, {}).value();
  ASSERT_EQ(e.shape(), (nn::Shape{2, 3}));
  for (size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(e.at(0, k), 20.0 + k);
    EXPECT_EQ(e.at(1, k), 70.0 + k);
  }
}

TEST(EmbedSequence, ShortSequenceIsLeftPadded) {
  ModelConfig c = TinyConfig(EncoderKind::kTransformer);
  c.max_len = 5;
  SequenceModel m = SequenceModel::Create(c, 4);
  Tape tape;
  std::vector<int32_t> frame = {kPadToken, kPadToken, 1, 2, 3};
  const Tensor& e = m.EmbedFrame(tape, frame, {}).value();
  ASSERT_EQ(e.rows(), 5u);
  for (size_t r = 0; r < 2; ++r) {
    for (double v : e.row(r)) EXPECT_EQ(v, 0.0);
  }
  for (size_t r = 2; r < 5; ++r) {
    double norm = 0.0;
    for (double v : e.row(r)) norm += v * v;
    EXPECT_GT(norm, 0.0);
  }
}

TEST(EmbedSequence, OutOfRangeIndexThrows) {
  SequenceModel m = SequenceModel::Create(TinyConfig(EncoderKind::kGru), 1);
  Tape tape;
  std::vector<int32_t> frame = {0, 6};
  EXPECT_THROW(m.EmbedFrame(tape, frame, {}), IndexError);
}

TEST(EncodeTransformer, ZeroWeightsCollapseToGeluOfBias) {
  ModelConfig c = TinyConfig(EncoderKind::kTransformer);
  SequenceModel m = SequenceModel::Create(c, 2);
  std::vector<Parameter*> enc;
  m.encoder().Collect(enc);
  ZeroAll(enc);
  for (auto& block : m.encoder().blocks) {
    block.attention_norm.gain.value.Fill(1.0);
    block.output_norm.gain.value.Fill(1.0);
  }
  const std::vector<double> b = {0.7, -1.3, 0.0, 2.1};
  for (size_t k = 0; k < 4; ++k) m.encoder().projection.bias.value[k] = b[k];
  std::vector<int32_t> history = {1, 4};
  std::vector<double> state = m.InferUserState(history);
  for (size_t k = 0; k < 4; ++k) EXPECT_NEAR(state[k], GeluOracle(b[k]), 1e-15);
}

TEST(EncodeTransformer, FullLengthInputAppendsMaskRow) {
  ModelConfig c;
  c.kind = EncoderKind::kTransformer;
  c.num_items = 60;
  c.dim = 8;
  c.max_len = 50;
  c.dropout = 0.0;
  SequenceModel m = SequenceModel::Create(c, 3);
  std::vector<int32_t> history(50);
  for (int i = 0; i < 50; ++i) history[i] = i;
  Tape tape;
  EncoderActivations acts;
  Var state = m.UserState(tape, history, {}, &acts);
  EXPECT_EQ(state.value().size(), 8u);
  ASSERT_EQ(acts.hidden.size(), c.blocks + 1);
  ASSERT_EQ(acts.post_attention.size(), c.blocks);
  for (const Tensor& h : acts.hidden) EXPECT_EQ(h.shape(), (nn::Shape{51, 8}));
  for (const Tensor& a : acts.post_attention) {
    EXPECT_EQ(a.shape(), (nn::Shape{51, 8}));
  }
}

TEST(EncodeTransformer, HeadCountMustDivideDimension) {
  ModelConfig c = TinyConfig(EncoderKind::kTransformer);
  c.heads = 3;
  EXPECT_THROW(SequenceModel::Create(c, 1), ConfigError);
}

TEST(EncodeTransformer, MaskedFrameMatchesCompactPath) {
  ModelConfig c = TinyConfig(EncoderKind::kTransformer);
  c.max_len = 6;
  c.blocks = 2;
  SequenceModel m = SequenceModel::Create(c, 5);
  Rng rng(17);
  RandomizeAll(m.Parameters(), rng);
  std::vector<int32_t> frame = {kPadToken, kPadToken, kPadToken, 3, 0, 5};
  std::vector<int32_t> history = {3, 0, 5};
  Tape t1, t2;
  const Tensor& full = m.UserStateFromFrame(t1, frame, {}).value();
  const Tensor& compact = m.UserState(t2, history, {}).value();
  for (size_t k = 0; k < 4; ++k) EXPECT_NEAR(full[k], compact[k], 1e-12);
}

TEST(Attention, MaskedKeysDoNotInfluenceValidRows) {
  Rng rng(8);
  auto mha = nn::MultiHeadAttention::Create("mha", 4, 2, {0.5, 2.0}, rng);
  Tensor x = Tensor::Matrix(5, 4);
  for (double& v : x.values()) v = 2.0 * rng.Uniform() - 1.0;
  std::vector<bool> valid = {false, true, false, true, true};
  // Swap the two masked rows and scramble one of them.
  Tensor y = x;
  for (size_t k = 0; k < 4; ++k) {
    std::swap(y.at(0, k), y.at(2, k));
    y.at(0, k) *= -3.0;
  }
  Tape t1, t2;
  const Tensor& ox = mha.Forward(t1, t1.Constant(x), valid).value();
  const Tensor& oy = mha.Forward(t2, t2.Constant(y), valid).value();
  for (size_t r : {1, 3, 4}) {
    for (size_t k = 0; k < 4; ++k) EXPECT_EQ(ox.at(r, k), oy.at(r, k));
  }
}

TEST(EncodeTransformer, InferenceIsBitwiseRepeatable) {
  ModelConfig c = TinyConfig(EncoderKind::kTransformer);
  c.dropout = 0.3;
  SequenceModel m = SequenceModel::Create(c, 9);
  std::vector<int32_t> history = {1, 2, 3};
  std::vector<double> a = m.InferUserState(history);
  std::vector<double> b = m.InferUserState(history);
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(double)));
}

TEST(EncodeGru, ZeroWeightsGiveZeroState) {
  ModelConfig c = TinyConfig(EncoderKind::kGru);
  SequenceModel m = SequenceModel::Create(c, 1);
  ZeroAll(m.Parameters());
  std::vector<int32_t> history = {0, 1, 2};
  for (double v : m.InferUserState(history)) EXPECT_EQ(v, 0.0);
}

TEST(EncodeGru, SingleStepMatchesHandComputedGates) {
  Rng rng(1);
  nn::GruCell cell = nn::GruCell::Create("gru", 1, {}, rng);
  const double wz = 0.3, wr = -0.4, wh = 0.9, bz = 0.1, br = 0.2, bh = -0.05;
  const double uz = 0.6, ur = -0.7, uh = 1.1;
  cell.input_weight.value = Tensor::FromRows({{wz, wr, wh}});
  cell.input_bias.value = Tensor::FromRows({{bz, br, bh}});
  cell.gate_weight.value = Tensor::FromRows({{uz, ur}});
  cell.candidate_weight.value = Tensor::FromRows({{uh}});
  const double x = 0.8, h = -0.25;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double z = sig(x * wz + h * uz + bz);
  const double r = sig(x * wr + h * ur + br);
  const double cand = std::tanh(x * wh + (r * h) * uh + bh);
  const double expected = (1.0 - z) * h + z * cand;
  Tape tape;
  Var out = cell.Step(tape, tape.Constant(Tensor::FromRows({{x}})),
                      tape.Constant(Tensor::FromRows({{h}})));
  EXPECT_NEAR(out.value()[0], expected, 1e-12);
}

TEST(EncodeGru, PrefixPaddingDoesNotChangeState) {
  ModelConfig c = TinyConfig(EncoderKind::kGru);
  c.max_len = 5;
  SequenceModel m = SequenceModel::Create(c, 12);
  Rng rng(3);
  RandomizeAll(m.Parameters(), rng);
  std::vector<int32_t> frame = {kPadToken, kPadToken, 4, 1, 2};
  std::vector<int32_t> history = {4, 1, 2};
  Tape t1, t2;
  const Tensor& padded = m.UserStateFromFrame(t1, frame, {}).value();
  const Tensor& plain = m.UserState(t2, history, {}).value();
  EXPECT_TRUE(padded.BitwiseEqual(plain));
}

TEST(EncodeGru, SingleItemWindowIsOneStepFromZero) {
  ModelConfig c = TinyConfig(EncoderKind::kGru);
  SequenceModel m = SequenceModel::Create(c, 12);
  Rng rng(3);
  RandomizeAll(m.Parameters(), rng, 0.5);
  std::vector<int32_t> history = {2};
  Tape tape;
  Var e = EmbedTokens(tape, m.table(), history, 0, {});
  Var h = m.encoder().gru.Step(tape, e, tape.Constant(Tensor::Matrix(1, 4)));
  std::vector<double> state = m.InferUserState(history);
  for (size_t k = 0; k < 4; ++k) EXPECT_EQ(state[k], h.value()[k]);
}

TEST(Score, UnitVectors) {
  ModelConfig c = TinyConfig(EncoderKind::kGru);
  c.num_items = 2;
  c.dim = 2;
  SequenceModel m = SequenceModel::Create(c, 1);
  m.table().items.value = Tensor::FromRows({{1, 0}, {0, 1}});
  std::vector<double> state = {1, 0};
  std::vector<int32_t> items = {0, 1};
  std::vector<double> s = m.ScoreItems(state, items);
  EXPECT_EQ(s[0], 1.0);
  EXPECT_EQ(s[1], 0.0);
}

TEST(Score, ZeroStateGivesBias) {
  ModelConfig c = TinyConfig(EncoderKind::kGru);
  SequenceModel m = SequenceModel::Create(c, 1);
  for (size_t j = 0; j < 6; ++j) m.table().item_bias.value[j] = 0.5 * j - 1.0;
  Tape tape;
  const Tensor& s =
      ScoreAll(tape, m.table(), tape.Constant(Tensor::Matrix(1, 4))).value();
  for (size_t j = 0; j < 6; ++j) EXPECT_EQ(s[j], 0.5 * j - 1.0);
}

TEST(Score, RankingMatchesBruteForceDotProducts) {
  ModelConfig c = TinyConfig(EncoderKind::kGru);
  c.num_items = 5;
  SequenceModel m = SequenceModel::Create(c, 1);
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    RandomizeAll({&m.table().items}, rng);
    Tensor state = Tensor::Matrix(1, 4);
    for (double& v : state.values()) v = 2.0 * rng.Uniform() - 1.0;
    Tape tape;
    const Tensor& s = ScoreAll(tape, m.table(), tape.Constant(state)).value();
    std::vector<double> brute(5);
    for (size_t j = 0; j < 5; ++j) {
      for (size_t k = 0; k < 4; ++k) {
        brute[j] += state[k] * m.table().items.value.at(j, k);
      }
    }
    std::vector<int> a(5), b(5);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    std::stable_sort(a.begin(), a.end(), [&](int x, int y) { return s[x] > s[y]; });
    std::stable_sort(b.begin(), b.end(),
                     [&](int x, int y) { return brute[x] > brute[y]; });
    EXPECT_EQ(a, b);
  }
}

TEST(Score, LookupAndScoringShareStorage) {
  ModelConfig c = TinyConfig(EncoderKind::kGru);
  c.embedding_norm = false;
  SequenceModel m = SequenceModel::Create(c, 1);
  std::vector<int32_t> frame = {3};
  std::vector<double> state = {1, 1, 1, 1};
  std::vector<int32_t> item = {3};
  Tape before;
  const double embed_before = m.EmbedFrame(before, frame, {}).value()[0];
  const double score_before = m.ScoreItems(state, item)[0];
  for (double& v : m.table().items.value.row(3)) v += 1.0;
  Tape after;
  EXPECT_EQ(m.EmbedFrame(after, frame, {}).value()[0], embed_before + 1.0);
  EXPECT_NEAR(m.ScoreItems(state, item)[0], score_before + 4.0, 1e-12);
}

class ModelGradients : public ::testing::TestWithParam<EncoderKind> {};

// Next-item loss through the whole model: lookup, positions, norm, encoder,
// projection and scoring against the shared table.
TEST_P(ModelGradients, TinyModelMatchesFiniteDifferences) {
  ModelConfig c = TinyConfig(GetParam());
  SequenceModel m = SequenceModel::Create(c, 21);
  Rng rng(5);
  RandomizeAll(m.Parameters(), rng, 0.5);
  std::vector<int32_t> history = {2, 0, 5};
  std::vector<int32_t> target = {4};
  auto build = [&](Tape& tape) {
    Var state = m.UserState(tape, history, {});
    return nn::SoftmaxCrossEntropy(ScoreAll(tape, m.table(), state), target);
  };
  auto result = testing::CheckParameterGradients(build, m.Parameters());
  EXPECT_LT(result.max_rel_error, 1e-4) << result.worst_name;
  EXPECT_EQ(result.checked_tensors, m.Parameters().size());
}

TEST_P(ModelGradients, EveryInputItemRowReceivesGradient) {
  ModelConfig c = TinyConfig(GetParam());
  SequenceModel m = SequenceModel::Create(c, 21);
  Rng rng(6);
  RandomizeAll(m.Parameters(), rng, 0.5);
  std::vector<int32_t> history = {2, 0, 5};
  std::vector<int32_t> target = {4};
  Tape tape;
  Var loss = nn::SoftmaxCrossEntropy(
      ScoreAll(tape, m.table(), m.UserState(tape, history, {})), target);
  tape.Backward(loss);
  nn::GradientBuffer grads;
  tape.AccumulateInto(grads);
  const Tensor* g = grads.Find(m.table().items);
  ASSERT_NE(g, nullptr);
  // Rows of items never seen in the input get only the scoring gradient, so
  // compare against a run that scores without reading the history.
  Tape score_only;
  Var state = score_only.Constant(m.UserState(score_only, history, {}).value());
  score_only.Backward(nn::SoftmaxCrossEntropy(
      ScoreAll(score_only, m.table(), state), target));
  nn::GradientBuffer scoring;
  score_only.AccumulateInto(scoring);
  for (int32_t item : history) {
    double diff = 0.0;
    for (size_t k = 0; k < 4; ++k) {
      diff += std::abs(g->at(item, k) - scoring.Find(m.table().items)->at(item, k));
    }
    EXPECT_GT(diff, 1e-8) << "item " << item;
  }
  const Tensor* mask_grad = grads.Find(m.table().mask);
  const bool mask_used = GetParam() == EncoderKind::kTransformer;
  double mask_norm = 0.0;
  if (mask_grad) {
    for (double v : mask_grad->values()) mask_norm += std::abs(v);
  }
  EXPECT_EQ(mask_norm > 0.0, mask_used);
}

TEST_P(ModelGradients, ActivationsStayFiniteUnderRandomWeights) {
  ModelConfig c = TinyConfig(GetParam());
  SequenceModel m = SequenceModel::Create(c, 1);
  Rng rng(99);
  std::vector<int32_t> history(3);
  for (int draw = 0; draw < 10000; ++draw) {
    RandomizeAll(m.Parameters(), rng);
    for (int32_t& t : history) t = static_cast<int32_t>(rng.UniformInt(6));
    Tape tape(false);
    EncoderActivations acts;
    Var s = m.UserState(tape, history, {}, &acts);
    ASSERT_TRUE(s.value().AllFinite()) << "draw " << draw;
    for (const Tensor& h : acts.hidden) ASSERT_TRUE(h.AllFinite());
    for (const Tensor& a : acts.post_attention) ASSERT_TRUE(a.AllFinite());
    ASSERT_TRUE(ScoreAll(tape, m.table(), s).value().AllFinite());
  }
}

INSTANTIATE_TEST_SUITE_P(Variants, ModelGradients,
                         ::testing::Values(EncoderKind::kGru,
                                           EncoderKind::kTransformer),
                         [](const auto& info) {
                           return EncoderKindName(info.param);
                         });

TEST(LayerGradients, AttentionWithMaskedKeys) {
  Rng rng(31);
  auto mha = nn::MultiHeadAttention::Create("mha", 4, 2, {0.5, 2.0}, rng);
  Parameter x{"x", Tensor::Matrix(4, 4)};
  RandomizeAll({&x}, rng);
  std::vector<Parameter*> params = {&x};
  mha.Collect(params);
  std::vector<bool> valid = {true, false, true, true};
  auto build = [&](Tape& t) {
    return Sum(Mul(mha.Forward(t, t.Param(x), valid), t.Param(x)));
  };
  auto result = testing::CheckParameterGradients(build, params);
  EXPECT_LT(result.max_rel_error, 1e-4) << result.worst_name;
}

TEST(LayerGradients, FeedForwardAndNorm) {
  Rng rng(32);
  auto ff = nn::FeedForward::Create("ff", 4, {0.5, 2.0}, rng);
  auto ln = nn::LayerNormParams::Create("ln", 4);
  Parameter x{"x", Tensor::Matrix(3, 4)};
  RandomizeAll({&x, &ln.gain, &ln.bias}, rng);
  std::vector<Parameter*> params = {&x};
  ff.Collect(params);
  ln.Collect(params);
  auto build = [&](Tape& t) {
    Var y = ln.Forward(t, ff.Forward(t, t.Param(x)));
    return Sum(Mul(y, y));
  };
  auto result = testing::CheckParameterGradients(build, params);
  EXPECT_LT(result.max_rel_error, 1e-4) << result.worst_name;
}

TEST(LayerGradients, GruCellOverThreeSteps) {
  Rng rng(33);
  auto cell = nn::GruCell::Create("gru", 3, {0.5, 2.0}, rng);
  Parameter x{"x", Tensor::Matrix(3, 3)};
  RandomizeAll({&x}, rng);
  std::vector<Parameter*> params = {&x};
  cell.Collect(params);
  RandomizeAll(params, rng);
  auto build = [&](Tape& t) {
    Var h = t.Constant(Tensor::Matrix(1, 3));
    for (size_t s = 0; s < 3; ++s) h = cell.Step(t, SliceRows(t.Param(x), s, 1), h);
    return Sum(Mul(h, h));
  };
  auto result = testing::CheckParameterGradients(build, params);
  EXPECT_LT(result.max_rel_error, 1e-4) << result.worst_name;
}

TEST(AppendItem, ExtendsTableAndBias) {
  SequenceModel m = SequenceModel::Create(TinyConfig(EncoderKind::kGru), 1);
  std::vector<double> row = {1, 2, 3, 4};
  const int32_t idx = m.AppendItem(row);
  EXPECT_EQ(idx, 6);
  EXPECT_EQ(m.table().num_items(), 7u);
  EXPECT_EQ(m.table().item_bias.value[6], 0.0);
  std::vector<double> state = {1, 0, 0, 0};
  std::vector<int32_t> item = {6};
  EXPECT_EQ(m.ScoreItems(state, item)[0], 1.0);
}

}  // namespace
}  // namespace seqrec
