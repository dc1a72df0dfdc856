#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "spikegrad/data.hpp"
#include "spikegrad/snn.hpp"
#include "spikegrad/train.hpp"

using namespace spikegrad;

namespace {

DenseLifLayer single(double w, LifParams p = {}) { return DenseLifLayer(Matrix(1, 1, w), p); }

SpikeTrain train_of(std::vector<std::uint8_t> bits) {
  const std::size_t n = bits.size();
  return SpikeTrain(1, n, std::move(bits));
}

// Random multi-layer network with input, for property checks.
struct RandomCase {
  Network net;
  SpikeTrain input;
};

RandomCase random_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t depth = rng.uniform_int(1, 3);
  std::size_t fan_in = rng.uniform_int(1, 10);
  const std::size_t steps = rng.uniform_int(1, 40);
  const std::size_t n_in = fan_in;
  std::vector<DenseLifLayer> layers;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t n_out = rng.uniform_int(1, 10);
    Matrix w(n_out, fan_in);
    for (double& v : w.values()) v = rng.uniform(-1.0, 3.0);
    layers.emplace_back(std::move(w), LifParams{});
    fan_in = n_out;
  }
  return {Network(std::move(layers)), bernoulli_train(n_in, steps, 0.4, rng)};
}

}  // namespace

TEST_CASE("heaviside uses H(0) = 0") {
  CHECK(heaviside(-0.3) == 0);
  CHECK(heaviside(0.5) == 1);
  CHECK(heaviside(0.0) == 0);
}

TEST_CASE("lif_step") {
  const LifParams p;
  CHECK(lif_step(0.0, 0, 0.0, p) == 0.0);
  CHECK(lif_step(0.6, 1, 0.2, p) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(lif_step(0.6, 0, 0.2, p) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("filter_step") {
  CHECK(filter_step(0.0, 1, 2.0) == 0.5);
  CHECK(filter_step(0.5, 0, 2.0) == 0.25);
  CHECK(filter_step(0.5, 1, 2.0) == 0.75);
}

TEST_CASE("filter_spike_train") {
  CHECK(filter_spike_train(SpikeTrain(3, 5), 2.0) == Matrix(3, 5));
  CHECK(filter_spike_train(train_of({1, 0, 0}), 2.0).values() ==
        std::vector<double>{0.5, 0.25, 0.125});
  CHECK(filter_spike_train(train_of({1, 1}), 2.0).values() == std::vector<double>{0.5, 0.75});
}

TEST_CASE("domain type invariants") {
  CHECK_THROWS_AS(SpikeTrain(0, 3), DimensionError);
  CHECK_THROWS_AS(SpikeTrain(2, 0), DimensionError);
  CHECK_THROWS_AS(SpikeTrain(1, 2, {0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(SpikeTrain(1, 2, {0, 1, 1}), DimensionError);

  CHECK_NOTHROW(LifParams{}.validate());
  CHECK_THROWS(LifParams{1.0, 2.0, 1.0, 0.3}.validate());
  CHECK_THROWS(LifParams{6.0, 0.5, 1.0, 0.3}.validate());
  CHECK_THROWS(LifParams{6.0, 2.0, 0.0, 0.3}.validate());
  CHECK_THROWS(LifParams{6.0, 2.0, 1.0, 0.0}.validate());

  CHECK_THROWS(DenseLifLayer(Matrix(1, 2, std::vector<double>{1.0, NAN}), LifParams{}));
  CHECK_THROWS(DenseLifLayer(Matrix(1, 2, std::vector<double>{1.0, INFINITY}), LifParams{}));

  std::vector<DenseLifLayer> bad{DenseLifLayer(Matrix(3, 2), {}), DenseLifLayer(Matrix(1, 4), {})};
  CHECK_THROWS_AS(Network(std::move(bad)), DimensionError);
}

TEST_CASE("simulate_layer: zero weights give a silent trace") {
  Rng rng(3);
  const Matrix a_in = filter_spike_train(bernoulli_train(4, 12, 0.5, rng), 2.0);
  const auto tr = simulate_layer(DenseLifLayer(Matrix(2, 4), {}), a_in);
  CHECK(tr.u == Matrix(2, 12));
  CHECK(tr.a == Matrix(2, 12));
  CHECK(tr.s.total() == 0);
}

TEST_CASE("simulate_layer: hand-stepped single neuron") {
  const Matrix a_in = filter_spike_train(train_of({1, 0, 0, 0}), 2.0);
  CHECK(a_in.values() == std::vector<double>{0.5, 0.25, 0.125, 0.0625});
  const auto tr = simulate_layer(single(3.0), a_in);
  CHECK(tr.u.values() == std::vector<double>{0.0, 1.5, 0.75, 1.0});
  CHECK(tr.s == train_of({0, 1, 0, 0}));
  CHECK(tr.a.values() == std::vector<double>{0.0, 0.5, 0.25, 0.125});
}

TEST_CASE("simulate_layer: input reaches the membrane one step later") {
  // A spike at the last step never affects the potential.
  const auto tr = simulate_layer(single(10.0), filter_spike_train(train_of({0, 0, 1}), 2.0));
  CHECK(tr.u == Matrix(1, 3));
}

TEST_CASE("simulate_layer: shape errors") {
  CHECK_THROWS_AS(simulate_layer(DenseLifLayer(Matrix(2, 3), {}), Matrix(2, 5)), DimensionError);
  Network net({DenseLifLayer(Matrix(2, 3), {})});
  CHECK_THROWS_AS(simulate_network(net, SpikeTrain(4, 5)), DimensionError);
}

TEST_CASE("simulate_network composes layers") {
  Rng rng(11);
  const SpikeTrain input = bernoulli_train(5, 30, 0.3, rng);
  Matrix w(3, 5);
  for (double& v : w.values()) v = rng.uniform(0.0, 2.0);

  SUBCASE("single layer equals simulate_layer on the filtered input") {
    Network net({DenseLifLayer(w, {})});
    const auto traces = simulate_network(net, input);
    REQUIRE(traces.size() == 1);
    const auto direct = simulate_layer(net.layer(0), filter_spike_train(input, 2.0));
    CHECK(traces[0].u == direct.u);
    CHECK(traces[0].s == direct.s);
    CHECK(traces[0].a == direct.a);
  }
  SUBCASE("zero second-layer weights silence the second layer") {
    Network net({DenseLifLayer(w, {}), DenseLifLayer(Matrix(2, 3), {})});
    const auto traces = simulate_network(net, input);
    CHECK(traces[0].s.total() > 0);
    CHECK(traces[1].s.total() == 0);
    CHECK(traces[1].u == Matrix(2, 30));
  }
}

TEST_CASE("toy network fires under the default initialization") {
  for (std::uint64_t seed : {0u, 1u, 2u, 7u}) {
    TrainConfig cfg;
    cfg.seed = seed;
    const auto problem = make_toy_problem(cfg);
    CHECK(problem.net.n_inputs() == 50);
    CHECK(problem.input.n_steps() == 100);
    const auto traces = simulate_network(problem.net, problem.input);
    CHECK(traces.back().s.total() >= 1);
  }
}

TEST_CASE("trace properties over random networks") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CAPTURE(seed);
    const auto c = random_case(seed);
    const auto traces = simulate_network(c.net, c.input);
    Matrix a_in = filter_spike_train(c.input, 2.0);
    for (std::size_t l = 0; l < traces.size(); ++l) {
      const auto& tr = traces[l];
      const auto& p = c.net.layer(l).params();
      const Matrix& w = c.net.layer(l).weights();
      for (std::size_t i = 0; i < tr.u.rows(); ++i)
        for (std::size_t t = 0; t < tr.u.cols(); ++t) {
          // spike/potential consistency
          REQUIRE(tr.s(i, t) == heaviside(tr.u(i, t) - p.theta));
          // filter boundedness
          REQUIRE(tr.a(i, t) >= 0.0);
          REQUIRE(tr.a(i, t) <= 1.0);
          // reset annihilates the decayed potential
          if (tr.s(i, t) == 1 && t + 1 < tr.u.cols()) {
            double drive = 0.0;
            for (std::size_t j = 0; j < w.cols(); ++j) drive += w(i, j) * a_in(j, t);
            REQUIRE(tr.u(i, t + 1) == drive);
          }
        }
      a_in = tr.a;
    }
    // determinism
    const auto again = simulate_network(c.net, c.input);
    for (std::size_t l = 0; l < traces.size(); ++l) {
      REQUIRE(again[l].u == traces[l].u);
      REQUIRE(again[l].s == traces[l].s);
      REQUIRE(again[l].a == traces[l].a);
    }
    // zero-input fixpoint
    const auto silent = simulate_network(c.net, SpikeTrain(c.input.n_neurons(), c.input.n_steps()));
    for (const auto& tr : silent) {
      REQUIRE(tr.u == Matrix(tr.u.rows(), tr.u.cols()));
      REQUIRE(tr.a == Matrix(tr.a.rows(), tr.a.cols()));
      REQUIRE(tr.s.total() == 0);
    }
  }
}
