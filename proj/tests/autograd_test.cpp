#include <gtest/gtest.h>

#include "srender/autograd.hpp"
#include "test_support.hpp"

namespace srender {
namespace {

using testing::numeric_gradient;
using testing::random_tensor;
using testing::relative_gap;

// Builds a scalar from `inputs` via `fn` and compares tape gradients against
// central differences for every input.
void check_gradients(std::vector<Tensor> inputs, const std::function<Var(Tape&, std::vector<Var>&)>& fn,
                     double tol = 1e-6) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
  Var out = fn(tape, vars);
  tape.backward(out);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto f = [&]() {
      Tape t2;
      std::vector<Var> v2;
      for (const Tensor& t : inputs) v2.push_back(t2.constant(t));
      return fn(t2, v2).value()[0];
    };
    const std::vector<double> numeric = numeric_gradient(inputs[k], f);
    const Tensor& analytic = tape.grad(vars[k].id);
    ASSERT_EQ(analytic.size(), numeric.size());
    EXPECT_LT(relative_gap(analytic.values(), numeric), tol) << "input " << k;
  }
}

// Distance to a fixed random target so every output element gets a distinct
// upstream gradient.
Var probe(Tape& tape, Var x, std::uint64_t seed = 7) {
  Rng rng(seed);
  return l2_distance(x, tape.constant(random_tensor(x.value().dims(), rng)));
}

TEST(Autograd, Conv2dGradients) {
  Rng rng(1);
  for (const auto& [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{2, 0}}) {
    check_gradients({random_tensor({2, 7, 6}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)},
                    [&](Tape& t, std::vector<Var>& v) { return probe(t, conv2d(v[0], v[1], v[2], stride, pad)); });
  }
}

TEST(Autograd, ConvTransposeGradients) {
  Rng rng(2);
  check_gradients({random_tensor({2, 4, 3}, rng), random_tensor({2, 3, 3, 3}, rng), random_tensor({3}, rng)},
                  [](Tape& t, std::vector<Var>& v) { return probe(t, conv_transpose2d(v[0], v[1], v[2], 2, 1, 1)); });
}

TEST(Autograd, ConvTransposeIsAdjointOfConv) {
  // <conv(x), y> == <x, convT(y)> for shared weights and no bias.
  Rng rng(3);
  const Tensor x = random_tensor({2, 8, 8}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tape tape;
  Var cx = conv2d(tape.constant(x), tape.constant(w), tape.constant(Tensor({3})), 2, 1);
  const Tensor y = random_tensor(cx.value().dims(), rng);
  Var ty = conv_transpose2d(tape.constant(y), tape.constant(w), tape.constant(Tensor({2})), 2, 1, 1);
  ASSERT_EQ(ty.value().dims(), x.dims());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += cx.value()[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * ty.value()[i];
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Autograd, NormalizationAndActivations) {
  Rng rng(4);
  check_gradients({random_tensor({3, 5, 4}, rng)}, [](Tape& t, std::vector<Var>& v) { return probe(t, instance_norm(v[0])); });
  check_gradients({random_tensor({2, 4, 4}, rng)}, [](Tape& t, std::vector<Var>& v) { return probe(t, tanh(v[0])); });
  check_gradients({random_tensor({2, 4, 4}, rng)}, [](Tape& t, std::vector<Var>& v) { return probe(t, sigmoid(v[0])); });
  check_gradients({random_tensor({2, 4, 4}, rng, 0.1, 1.0)},
                  [](Tape& t, std::vector<Var>& v) { return probe(t, leaky_relu(affine(v[0], -1.0, 0.5), 0.2)); });
  check_gradients({random_tensor({2, 4, 4}, rng, 0.1, 1.0)},
                  [](Tape& t, std::vector<Var>& v) { return sum(log_clamped(v[0], 1e-8)); });
}

TEST(Autograd, StructuralOps) {
  Rng rng(5);
  check_gradients({random_tensor({1, 4, 6}, rng), random_tensor({2, 4, 6}, rng)},
                  [](Tape& t, std::vector<Var>& v) { return probe(t, concat_channels(v[0], v[1])); });
  check_gradients({random_tensor({2, 6, 4}, rng)}, [](Tape& t, std::vector<Var>& v) { return probe(t, avg_pool2(v[0])); });
  check_gradients({random_tensor({2, 6, 5}, rng)},
                  [](Tape& t, std::vector<Var>& v) { return probe(t, crop(v[0], 1, 2, 3, 3)); });
  check_gradients({random_tensor({3, 2, 2}, rng)}, [](Tape& t, std::vector<Var>& v) {
    return probe(t, global_avg_pool(v[0]));
  });
  check_gradients({random_tensor({4, 1, 1}, rng), random_tensor({3, 4}, rng), random_tensor({3}, rng)},
                  [](Tape& t, std::vector<Var>& v) { return probe(t, linear(v[0], v[1], v[2])); });
  check_gradients({random_tensor({2, 3, 3}, rng), random_tensor({2, 3, 3}, rng)},
                  [](Tape&, std::vector<Var>& v) { return l2_distance(v[0], v[1]); });
  check_gradients({random_tensor({7, 1, 1}, rng)},
                  [](Tape&, std::vector<Var>& v) { return softmax_cross_entropy(v[0], 3); });
}

TEST(Autograd, ParameterGradientsAccumulate) {
  Parameter p("p", Tensor({1, 1, 1}, 2.0));
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(sum(affine(tape.parameter(p), 3.0, 0.0)));
  }
  EXPECT_DOUBLE_EQ(p.grad[0], 6.0);
}

TEST(Autograd, UntrackedParametersReceiveNothing) {
  Parameter p("p", Tensor({1, 1, 1}, 2.0));
  Tape tape;
  Var x = tape.variable(Tensor({1, 1, 1}, 1.0));
  tape.backward(sum(add(x, tape.parameter(p, false))));
  EXPECT_DOUBLE_EQ(p.grad[0], 0.0);
  EXPECT_DOUBLE_EQ(tape.grad(x.id)[0], 1.0);
}

TEST(Autograd, SigmoidStaysInsideOpenInterval) {
  Tape tape;
  Var s = sigmoid(tape.constant(Tensor({1, 1, 3}, std::vector<double>{-30.0, 0.0, 30.0})));
  for (double v : s.value().values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Autograd, ShapeErrors) {
  Tape tape;
  Var a = tape.constant(Tensor::chw(1, 4, 4));
  Var b = tape.constant(Tensor::chw(1, 4, 5));
  EXPECT_SRENDER_ERROR(add(a, b), Errc::ShapeMismatch);
  EXPECT_SRENDER_ERROR(avg_pool2(tape.constant(Tensor::chw(1, 3, 4))), Errc::OddDimensions);
}

}  // namespace
}  // namespace srender
