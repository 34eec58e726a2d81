#include <doctest.h>

#include <random>

#include "random_nets.hpp"
#include "rlrp/dag_oracle.hpp"
#include "rlrp/errors.hpp"
#include "rlrp/model_io.hpp"
#include "rlrp/relevance.hpp"

using namespace rlrp;
using namespace rlrp::oracle;
using testing::random_tensor;

namespace {

Network single(Layer layer, Shape in, std::size_t outputs) {
  Network net;
  net.input_shape = std::move(in);
  net.num_outputs = outputs;
  net.layers.push_back(std::move(layer));
  return net;
}

std::vector<double> oracle_map(const Network& net, const Tensor& x, std::size_t k, OracleRule rule) {
  const EdgeGraph g = explode(net, x);
  return source_values(g, oracle_attribute(g, oracle_forward(g, x), k, rule));
}

}  // namespace

TEST_CASE("explode edge counts") {
  const Network dense = single(Dense{Tensor({3, 2}, 1.0), Tensor({3})}, {2}, 3);
  CHECK(explode(dense, Tensor({2}, 1.0)).edges().size() == 6);
  Network conv = single(Conv2D{Tensor({1, 3, 3, 1}, 1.0), Tensor({1}), 1, 1, Padding::valid},
                        {4, 4, 1}, 4);
  conv.layers.push_back(Flatten{});
  const EdgeGraph g = explode(conv, Tensor({4, 4, 1}, 1.0));
  std::size_t conv_edges = 0;
  for (const auto& e : g.edges())
    if (g.vertices()[e.to].layer == 1) ++conv_edges;
  CHECK(conv_edges == 36);
}

TEST_CASE("graph checks") {
  EdgeGraph g;
  const auto a = g.add_vertex({}), b = g.add_vertex({}), c = g.add_vertex({});
  g.add_edge(a, b, 1.0);
  g.add_edge(b, c, 1.0);
  CHECK(g.topological_order() == std::vector<std::size_t>{a, b, c});
  CHECK(g.sources() == std::vector<std::size_t>{a});
  CHECK(g.sinks() == std::vector<std::size_t>{c});
  g.add_edge(c, a, 1.0);
  CHECK_THROWS_AS(g.topological_order(), DomainError);

  EdgeGraph lonely;
  lonely.add_vertex({});
  CHECK_THROWS_AS(lonely.topological_order(), DomainError);
}

TEST_CASE("vertex cap") {
  const Network big = single(Dense{Tensor({100, 100}), Tensor({100})}, {100}, 100);
  CHECK_THROWS_AS(explode(big, Tensor({100}), 150), SizeError);
}

TEST_CASE("oracle hand examples") {
  const Network net = single(Dense{Tensor({1, 2}, {3, 4}), Tensor({1})}, {2}, 1);
  const Tensor x({2}, {1, 2});
  CHECK(oracle_map(net, x, 0, OracleRule::lrp0) == std::vector<double>{3, 8});
  CHECK(oracle_map(net, x, 0, OracleRule::rlrp) == std::vector<double>{16.5, 44});

  const Network unit = single(Dense{Tensor({1, 1}, 1.0), Tensor({1})}, {1}, 1);
  CHECK(oracle_map(unit, Tensor({1}, 1.0), 0, OracleRule::rlrp) == std::vector<double>{1.0});

  const Network zero = single(Dense{Tensor({1, 2}, {1, -1}), Tensor({1}, 1.0)}, {2}, 1);
  CHECK_THROWS_AS(oracle_map(zero, Tensor({2}, 1.0), 0, OracleRule::lrp0), GuardedDenominatorError);
}

TEST_CASE("engine matches the oracle on a 4x4 input with a 2x2 kernel") {
  std::mt19937_64 rng(41);
  Network net = single(Conv2D{random_tensor({2, 2, 2, 1}, rng), random_tensor({2}, rng, 0, 0.2), 1,
                              1, Padding::valid},
                       {4, 4, 1}, 0);
  net.layers.push_back(ReLU{});
  net.layers.push_back(Flatten{});
  net.layers.push_back(Dense{random_tensor({2, 18}, rng), Tensor({2})});
  net.num_outputs = 2;
  const Tensor x = random_tensor({4, 4, 1}, rng, 0, 1);
  const ForwardResult fr = forward(net, x);
  const auto engine = attribute(net, fr.trace, 1, MethodConfig{RLrp{}});
  CHECK(max_relative_difference(engine.values.values(), oracle_map(net, x, 1, OracleRule::rlrp)) <=
        1e-10);
}

TEST_CASE("oracle forward agrees with the engine on committed fixtures") {
  const std::string dir = RLRP_FIXTURE_DIR;
  std::mt19937_64 rng(42);
  for (const char* stem : {"dense2", "conv_pool", "detector"}) {
    const Network net = load_model(dir + "/" + stem + ".json", dir + "/" + stem + ".bin");
    const Tensor x = testing::random_input(net, rng);
    const EdgeGraph g = explode(net, x);
    const auto acts = oracle_forward(g, x);
    const auto sinks = g.sinks();
    const Tensor logits = forward_logits(net, x);
    REQUIRE(sinks.size() == logits.size());
    for (std::size_t i = 0; i < sinks.size(); ++i)
      CHECK(std::abs(acts[sinks[i]] - logits[i]) <= 1e-12 * std::max(1.0, std::abs(logits[i])));
  }
}

TEST_CASE("oracle rejects residual networks") {
  const std::string dir = RLRP_FIXTURE_DIR;
  const Network net = load_model(dir + "/residual.json", dir + "/residual.bin");
  CHECK_THROWS_AS(explode(net, Tensor(net.input_shape, 0.5)), DomainError);
}

TEST_CASE("max_relative_difference") {
  CHECK(max_relative_difference(std::vector<double>{1, 2}, std::vector<double>{1, 4}) == 0.5);
  CHECK(max_relative_difference(std::vector<double>{0}, std::vector<double>{0}) == 0.0);
  CHECK(std::isinf(max_relative_difference(std::vector<double>{1}, std::vector<double>{0})));
}
