#include <doctest.h>

#include <random>

#include "random_nets.hpp"
#include "rlrp/errors.hpp"
#include "rlrp/network.hpp"

using namespace rlrp;

namespace {

Network single(Layer layer, Shape in, std::size_t outputs) {
  Network net;
  net.input_shape = std::move(in);
  net.num_outputs = outputs;
  net.layers.push_back(std::move(layer));
  return net;
}

}  // namespace

TEST_CASE("forward hand examples") {
  CHECK(forward_logits(single(ReLU{}, {2}, 2), Tensor({2}, {-1, 2})).data() ==
        std::vector<double>{0, 2});
  const Network identity =
      single(Dense{Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, 1.0)}, {2}, 2);
  CHECK(forward_logits(identity, Tensor({2})).data() == std::vector<double>{1, 1});

  ResidualBlock zero_branch{{Dense{Tensor({3, 3}), Tensor({3})}}, std::nullopt};
  const Network res = single(zero_branch, {3}, 3);
  const Tensor x({3}, {0.5, -2, 7});
  CHECK(forward_logits(res, x) == x);
}

TEST_CASE("predict_class") {
  CHECK(argmax(std::vector<double>{0.1, 0.9}) == 1);
  CHECK(argmax(std::vector<double>{3, 3}) == 0);
  const Network constant = single(Dense{Tensor({2, 3}), Tensor({2}, {0, 5})}, {3}, 2);
  CHECK(predict_class(constant, Tensor({3}, {4, -1, 2})) == 1);
}

TEST_CASE("forward records a trace per layer") {
  std::mt19937_64 rng(7);
  const Network net = testing::random_conv_net(rng);
  const Tensor x = testing::random_input(net, rng);
  const ForwardResult r = forward(net, x);
  REQUIRE(r.trace.layers.size() == net.layers.size());
  CHECK(r.trace.layers.front().input == x);
  CHECK(r.trace.layers.back().output == r.logits);
  for (std::size_t i = 1; i < net.layers.size(); ++i)
    CHECK(r.trace.layers[i].input == r.trace.layers[i - 1].output);
  // determinism
  CHECK(forward(net, x).logits == r.logits);
}

TEST_CASE("flatten preserves values") {
  std::mt19937_64 rng(8);
  const Tensor x = testing::random_tensor({2, 3, 2}, rng);
  const Tensor y = forward_logits(single(Flatten{}, {2, 3, 2}, 12), x);
  CHECK(y.data() == x.data());
}

TEST_CASE("shape errors") {
  CHECK_THROWS_AS(forward(single(ReLU{}, {2}, 2), Tensor({3})), DimensionError);
  Network bad = single(Dense{Tensor({2, 3}), Tensor({2})}, {4}, 2);
  CHECK_THROWS_AS(bad.validate(), ModelShapeError);
  Network wrong_outputs = single(Dense{Tensor({2, 3}), Tensor({2})}, {3}, 5);
  CHECK_THROWS_AS(wrong_outputs.validate(), ModelShapeError);
  // projection must be a bias-free 1x1 stride-2 convolution
  ResidualBlock proj{{Conv2D{Tensor({2, 1, 1, 1}, 1.0), Tensor({2}), 2, 2, Padding::valid}},
                     Conv2D{Tensor({2, 1, 1, 1}, 1.0), Tensor(), 1, 1, Padding::valid}};
  Network p = single(proj, {4, 4, 1}, 0);
  p.layers.push_back(Flatten{});
  p.num_outputs = 32;
  CHECK_THROWS_AS(p.validate(), ModelShapeError);
  std::get<ResidualBlock>(p.layers[0].kind).projection->stride_h = 2;
  std::get<ResidualBlock>(p.layers[0].kind).projection->stride_w = 2;
  p.num_outputs = 8;
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("non-finite activations name the layer") {
  Network net = single(Dense{Tensor({1, 1}, 1e308), Tensor({1})}, {1}, 1);
  net.layers.push_back(Dense{Tensor({1, 1}, 1e308), Tensor({1})});
  try {
    forward(net, Tensor({1}, 1.0));
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(e.layer() == 1);
  }
}

TEST_CASE("centered preprocessing") {
  Network net = single(ReLU{}, {1, 1, 3}, 3);
  net.preprocessing = {PreprocessMode::centered, {100, 50, 0}};
  const Tensor raw({1, 1, 3}, {1.0, 0.0, 0.5});
  CHECK(preprocess(net, raw).data() == std::vector<double>{155, -50, 127.5});
  net.preprocessing.channel_means = {1, 2};
  CHECK_THROWS_AS(net.validate(), ModelShapeError);
}
