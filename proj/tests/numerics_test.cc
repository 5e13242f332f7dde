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

#include <cmath>
#include <vector>

#include "gradcheck.h"
#include "seqrec/adam.h"
#include "seqrec/autodiff.h"
#include "seqrec/errors.h"

namespace seqrec::nn {
namespace {

Parameter RandomParam(const std::string& name, Shape shape, Rng& rng,
                      double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * (2.0 * rng.Uniform() - 1.0);
  return Parameter{name, std::move(t)};
}

TEST(MatMul, IdentityTimesColumn) {
  Tape tape;
  Var a = tape.Constant(Tensor::FromRows({{1, 0}, {0, 1}}));
  Var b = tape.Constant(Tensor::FromRows({{3}, {4}}));
  Var c = MatMul(a, b);
  EXPECT_EQ(c.value().shape(), (Shape{2, 1}));
  EXPECT_EQ(c.value()[0], 3.0);
  EXPECT_EQ(c.value()[1], 4.0);
}

TEST(MatMul, RowTimesColumn) {
  Tape tape;
  Var c = MatMul(tape.Constant(Tensor::FromRows({{1, 2}})),
                 tape.Constant(Tensor::FromRows({{3}, {4}})));
  EXPECT_EQ(c.value()[0], 11.0);
}

TEST(MatMul, ShapeMismatchNamesBothShapes) {
  Tape tape;
  Var a = tape.Constant(Tensor::Matrix(2, 3));
  Var b = tape.Constant(Tensor::Matrix(4, 5));
  try {
    MatMul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

TEST(MatMul, GradientOfSumIsOnesTimesBTranspose) {
  Rng rng(3);
  Parameter a = RandomParam("a", {3, 4}, rng);
  Parameter b = RandomParam("b", {4, 2}, rng);
  auto build = [&](Tape& t) { return Sum(MatMul(t.Param(a), t.Param(b))); };

  Tape tape;
  Var loss = build(tape);
  tape.Backward(loss);
  GradientBuffer grads;
  tape.AccumulateInto(grads);
  const Tensor& ga = *grads.Find(a);
  for (size_t i = 0; i < 3; ++i) {
    for (size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(ga.at(i, k), b.value.at(k, 0) + b.value.at(k, 1), 1e-14);
    }
  }
  auto result = testing::CheckParameterGradients(build, {&a, &b});
  EXPECT_LT(result.max_rel_error, 1e-6) << result.worst_name;
}

TEST(Softmax, SymmetricPair) {
  Tape tape;
  Var y = Softmax(tape.Constant(Tensor::Vector({0, 0})));
  EXPECT_DOUBLE_EQ(y.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(y.value()[1], 0.5);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  Tape tape;
  Var y = Softmax(tape.Constant(Tensor::Vector({1000, 0})));
  EXPECT_TRUE(y.value().AllFinite());
  EXPECT_NEAR(y.value()[0], 1.0, 1e-12);
  EXPECT_NEAR(y.value()[1], 0.0, 1e-12);
}

TEST(Softmax, TwoZeroMatchesDirectEvaluation) {
  // e^2 / (e^2 + 1) computed independently.
  const double p = std::exp(2.0) / (std::exp(2.0) + 1.0);
  Tape tape;
  Var y = Softmax(tape.Constant(Tensor::Vector({2, 0})));
  EXPECT_NEAR(y.value()[0], 0.8808, 1e-4);
  EXPECT_NEAR(y.value()[1], 0.1192, 1e-4);
  EXPECT_NEAR(y.value()[0], p, 1e-15);
}

TEST(Softmax, RowsSumToOneAlongEitherAxis) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x = Tensor::Matrix(3, 7);
    for (double& v : x.values()) v = 50.0 * (2.0 * rng.Uniform() - 1.0);
    for (int axis : {0, 1}) {
      Tape tape;
      const Tensor& y = Softmax(tape.Constant(x), axis).value();
      const size_t outer = axis == 1 ? 3 : 7;
      const size_t n = axis == 1 ? 7 : 3;
      for (size_t o = 0; o < outer; ++o) {
        double s = 0.0;
        for (size_t j = 0; j < n; ++j) {
          const double v = axis == 1 ? y.at(o, j) : y.at(j, o);
          EXPECT_GE(v, 0.0);
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
    }
  }
}

TEST(LayerNorm, ConstantRowMapsToZero) {
  Tape tape;
  Var y = LayerNorm(tape.Constant(Tensor::Vector({5, 5, 5})),
                    tape.Constant(Tensor::Vector({1, 1, 1})),
                    tape.Constant(Tensor::Vector({0, 0, 0})));
  for (double v : y.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, PlusMinusOneIsAlreadyNormalized) {
  Tape tape;
  Var y = LayerNorm(tape.Constant(Tensor::Vector({1, -1})),
                    tape.Constant(Tensor::Vector({1, 1})),
                    tape.Constant(Tensor::Vector({0, 0})), 1e-15);
  EXPECT_NEAR(y.value()[0], 1.0, 1e-12);
  EXPECT_NEAR(y.value()[1], -1.0, 1e-12);
}

TEST(LayerNorm, ZeroGainGivesBias) {
  Tape tape;
  Var y = LayerNorm(tape.Constant(Tensor::FromRows({{3, -2, 8}, {1, 1, 0}})),
                    tape.Constant(Tensor::Vector({0, 0, 0})),
                    tape.Constant(Tensor::Vector({0.5, -1, 2})));
  for (size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(y.value().at(r, 0), 0.5);
    EXPECT_EQ(y.value().at(r, 1), -1.0);
    EXPECT_EQ(y.value().at(r, 2), 2.0);
  }
}

TEST(LayerNorm, RowsHaveZeroMeanUnitVariance) {
  Rng rng(5);
  Tensor x = Tensor::Matrix(4, 6);
  for (double& v : x.values()) v = 10.0 * rng.Uniform() - 3.0;
  Tape tape;
  const Tensor& y = LayerNorm(tape.Constant(x),
                              tape.Constant(Tensor::Matrix(1, 6, 1.0)),
                              tape.Constant(Tensor::Matrix(1, 6, 0.0)), 1e-12)
                        .value();
  for (size_t r = 0; r < 4; ++r) {
    double mean = 0, var = 0;
    for (size_t c = 0; c < 6; ++c) mean += y.at(r, c) / 6.0;
    for (size_t c = 0; c < 6; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean) / 6.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-9);
  }
}

TEST(Gelu, KnownValues) {
  Tape tape;
  const Tensor& y =
      Gelu(tape.Constant(Tensor::Vector({0.0, 1.0, 30.0, -30.0}))).value();
  EXPECT_EQ(y[0], 0.0);
  // x * Phi(x) with Phi from erf, evaluated independently.
  const double phi1 = 0.5 * std::erfc(-1.0 / std::sqrt(2.0));
  EXPECT_NEAR(y[1], 0.8413, 1e-3);
  EXPECT_NEAR(y[1], phi1, 1e-15);
  EXPECT_NEAR(y[2], 30.0, 1e-9);
  EXPECT_NEAR(y[3], 0.0, 1e-9);
}

TEST(Dropout, RateZeroAndInferenceAreIdentity) {
  Rng rng(1);
  Tape tape;
  Var x = tape.Constant(Tensor::Vector({1, 2, 3}));
  EXPECT_EQ(Dropout(x, 0.0, true, &rng).id(), x.id());
  EXPECT_EQ(Dropout(x, 0.9, false, &rng).id(), x.id());
}

TEST(Dropout, RejectsRateOutsideUnitInterval) {
  Rng rng(1);
  Tape tape;
  Var x = tape.Constant(Tensor::Vector({1}));
  EXPECT_THROW(Dropout(x, 1.0, true, &rng), ParameterError);
  EXPECT_THROW(Dropout(x, -0.1, false, &rng), ParameterError);
}

TEST(Dropout, HalfRateZeroesHalfAndRescalesSurvivors) {
  Rng rng(2024);
  Tape tape;
  const Tensor& y =
      Dropout(tape.Constant(Tensor({100000}, 1.0)), 0.5, true, &rng).value();
  size_t zeros = 0;
  for (double v : y.values()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      EXPECT_EQ(v, 2.0);
    }
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 1e5, 0.5, 0.01);
}

TEST(Dropout, SameSeedSameMask) {
  Tensor x({1000}, 1.0);
  Rng r1(9), r2(9);
  Tape t1, t2;
  EXPECT_TRUE(Dropout(t1.Constant(x), 0.3, true, &r1)
                  .value()
                  .BitwiseEqual(Dropout(t2.Constant(x), 0.3, true, &r2).value()));
}

TEST(Backward, SumGivesOnes) {
  Tape tape;
  Var x = tape.Leaf(Tensor::Vector({1, 2, 3}));
  tape.Backward(Sum(x));
  for (double g : x.grad().values()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareAtThreeGivesSix) {
  Tape tape;
  Var x = tape.Leaf(Tensor::Scalar(3.0));
  tape.Backward(Mul(x, x));
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, DisconnectedParameterHasZeroGradient) {
  Parameter used{"used", Tensor::Vector({1, 2})};
  Parameter unused{"unused", Tensor::Vector({5})};
  Tape tape;
  Var u = tape.Param(unused);
  tape.Backward(Sum(tape.Param(used)));
  for (double g : u.grad().values()) EXPECT_EQ(g, 0.0);
  GradientBuffer grads;
  tape.AccumulateInto(grads);
  if (const Tensor* g = grads.Find(unused)) {
    for (double v : g->values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Backward, ReplaysEachRecordedOpOnce) {
  Tape tape;
  Var x = tape.Leaf(Tensor::Vector({0.3, -0.2}));
  Var y = Tanh(x);          // op 1
  Var z = Mul(y, y);        // op 2
  Var w = Add(z, x);        // op 3
  Var loss = Sum(w);        // op 4
  EXPECT_EQ(tape.Backward(loss), 4u);
}

TEST(Backward, ParamIsMemoizedPerTape) {
  Parameter p{"p", Tensor::Vector({2.0})};
  Tape tape;
  EXPECT_EQ(tape.Param(p).id(), tape.Param(p).id());
  Var loss = Mul(tape.Param(p), tape.Param(p));
  tape.Backward(loss);
  GradientBuffer grads;
  tape.AccumulateInto(grads);
  EXPECT_EQ((*grads.Find(p))[0], 4.0);
}

TEST(Backward, FrozenParameterIsConstant) {
  Parameter p{"p", Tensor::Vector({2.0}), /*frozen=*/true};
  Tape tape;
  Var loss = Mul(tape.Param(p), tape.Param(p));
  EXPECT_EQ(tape.Backward(loss), 0u);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape tape;
  Var x = tape.Leaf(Tensor::Vector({1, 2}));
  EXPECT_THROW(tape.Backward(x), DimensionError);
}

// Finite-difference checks of every primitive with a nontrivial adjoint.
class PrimitiveGradients : public ::testing::Test {
 protected:
  Rng rng_{17};
};

TEST_F(PrimitiveGradients, ElementwiseAndBroadcast) {
  Parameter a = RandomParam("a", {3, 4}, rng_);
  Parameter b = RandomParam("b", {3, 4}, rng_);
  Parameter row = RandomParam("row", {1, 4}, rng_);
  Parameter w = RandomParam("w", {3, 4}, rng_);
  auto build = [&](Tape& t) {
    Var x = Mul(Sub(t.Param(a), Scale(t.Param(b), 0.7)),
                Add(Sigmoid(t.Param(b)), Tanh(t.Param(a))));
    x = AddRow(Gelu(x), t.Param(row));
    return Sum(Mul(x, t.Param(w)));
  };
  auto r = testing::CheckParameterGradients(build, {&a, &b, &row, &w});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst_name;
}

TEST_F(PrimitiveGradients, SoftmaxBothAxes) {
  Parameter x = RandomParam("x", {3, 5}, rng_, 2.0);
  Parameter w = RandomParam("w", {3, 5}, rng_);
  for (int axis : {0, 1}) {
    auto build = [&](Tape& t) {
      return Sum(Mul(Softmax(t.Param(x), axis), t.Param(w)));
    };
    auto r = testing::CheckParameterGradients(build, {&x, &w});
    EXPECT_LT(r.max_rel_error, 1e-6) << "axis " << axis << " " << r.worst_name;
  }
}

TEST_F(PrimitiveGradients, LayerNormAllInputs) {
  Parameter x = RandomParam("x", {4, 6}, rng_, 3.0);
  Parameter gain = RandomParam("gain", {1, 6}, rng_);
  Parameter bias = RandomParam("bias", {1, 6}, rng_);
  Parameter w = RandomParam("w", {4, 6}, rng_);
  auto build = [&](Tape& t) {
    return Sum(Mul(LayerNorm(t.Param(x), t.Param(gain), t.Param(bias)),
                   t.Param(w)));
  };
  auto r = testing::CheckParameterGradients(build, {&x, &gain, &bias, &w});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst_name;
}

TEST_F(PrimitiveGradients, MatMulTransposedAndCrossEntropy) {
  Parameter a = RandomParam("a", {3, 4}, rng_);
  Parameter b = RandomParam("b", {6, 4}, rng_);
  const std::vector<int32_t> targets{2, 0, 5};
  auto build = [&](Tape& t) {
    return SoftmaxCrossEntropy(MatMulBT(t.Param(a), t.Param(b)), targets);
  };
  auto r = testing::CheckParameterGradients(build, {&a, &b});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst_name;
}

TEST_F(PrimitiveGradients, GatherSliceConcatMean) {
  Parameter table = RandomParam("table", {5, 3}, rng_);
  Parameter mask = RandomParam("mask", {1, 3}, rng_);
  Parameter target = RandomParam("target", {1, 5}, rng_);
  const std::vector<int32_t> tokens{kPadToken, 4, 1, kMaskToken, 4};
  auto build = [&](Tape& t) {
    Var rows = GatherRows(t.Param(table), t.Param(mask), tokens);
    Var left = SliceCols(rows, 0, 2);
    Var right = SliceCols(rows, 1, 2);
    Var both = ConcatCols({left, Tanh(right), SliceCols(rows, 2, 1)});
    Var stacked = ConcatRows({SliceRows(both, 1, 2), SliceRows(both, 3, 2)});
    return SquaredDistance(MeanRows(stacked), t.Param(target));
  };
  auto r = testing::CheckParameterGradients(build, {&table, &mask, &target});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst_name;
}

TEST(GatherRows, PadRowIsZeroAndOutOfRangeThrows) {
  Parameter table{"t", Tensor::FromRows({{1, 2}, {3, 4}})};
  Tape tape;
  const std::vector<int32_t> tokens{kPadToken, 1};
  const Tensor& y =
      GatherRows(tape.Param(table), Var(), tokens).value();
  EXPECT_EQ(y.at(0, 0), 0.0);
  EXPECT_EQ(y.at(0, 1), 0.0);
  EXPECT_EQ(y.at(1, 0), 3.0);
  const std::vector<int32_t> bad{2};
  EXPECT_THROW(GatherRows(tape.Param(table), Var(), bad), IndexError);
}

// ---- Adam -------------------------------------------------------------------

TEST(Adam, StepZeroHasZeroLearningRate) {
  Parameter p{"p", Tensor::Vector({1.0, -2.0})};
  Adam adam({.peak_lr = 0.1, .warmup_steps = 10}, {&p});
  EXPECT_EQ(adam.LearningRate(), 0.0);
  GradientBuffer g;
  g.Add(p, Tensor::Vector({1.0, 1.0}));
  const Tensor before = p.value;
  adam.Step(g);
  EXPECT_TRUE(p.value.BitwiseEqual(before));
  EXPECT_EQ(adam.state().step, 1);
}

TEST(Adam, WarmupEndpointReachesPeak) {
  Parameter p{"p", Tensor::Vector({1.0})};
  Adam adam({.peak_lr = 0.01, .warmup_steps = 4}, {&p});
  EXPECT_DOUBLE_EQ(adam.ScheduledRate(4), 0.01);
  EXPECT_DOUBLE_EQ(adam.ScheduledRate(2), 0.005);
  EXPECT_DOUBLE_EQ(adam.ScheduledRate(400), 0.01);
}

TEST(Adam, MatchesHandRolledReference) {
  // Reference: scalar Adam with linear warmup and l2 penalty, written out
  // independently of the library.
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, l2 = 0.01;
  const int warmup = 10;
  double ref = 0.7, m = 0.0, v = 0.0;
  Parameter p{"p", Tensor::Vector({0.7})};
  Adam adam({.peak_lr = lr, .warmup_steps = warmup, .beta1 = b1, .beta2 = b2,
             .epsilon = eps, .l2 = l2},
            {&p});
  for (int t = 0; t < 100; ++t) {
    const double g = 1.0 + l2 * ref;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t + 1));
    const double vh = v / (1 - std::pow(b2, t + 1));
    const double rate = lr * std::min(1.0, static_cast<double>(t) / warmup);
    ref -= rate * mh / (std::sqrt(vh) + eps);

    GradientBuffer grads;
    grads.Add(p, Tensor::Vector({1.0}));
    adam.Step(grads);
    ASSERT_NEAR(p.value[0], ref, 1e-10) << "step " << t;
  }
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  Rng rng(4);
  Parameter p = RandomParam("p", {3, 3}, rng);
  const Tensor before = p.value;
  Adam adam({.peak_lr = 0.0, .l2 = 0.1}, {&p});
  for (int i = 0; i < 5; ++i) {
    GradientBuffer g;
    g.Add(p, Tensor(p.value.shape(), 0.3));
    adam.Step(g);
  }
  EXPECT_TRUE(p.value.BitwiseEqual(before));
}

TEST(Adam, NanGradientAbortsStep) {
  Parameter p{"p", Tensor::Vector({1.0, 2.0})};
  Parameter q{"q", Tensor::Vector({3.0})};
  Adam adam({.peak_lr = 0.1}, {&p, &q});
  GradientBuffer g;
  g.Add(p, Tensor::Vector({0.5, 0.5}));
  g.Add(q, Tensor::Vector({std::nan("")}));
  EXPECT_THROW(adam.Step(g), NumericError);
  EXPECT_EQ(p.value[0], 1.0);
  EXPECT_EQ(adam.state().step, 0);
}

TEST(Adam, FrozenParametersAreSkipped) {
  Parameter p{"p", Tensor::Vector({1.0}), /*frozen=*/true};
  Adam adam({.peak_lr = 0.1}, {&p});
  EXPECT_TRUE(adam.params().empty());
}

}  // namespace
}  // namespace seqrec::nn
