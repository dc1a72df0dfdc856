#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "spikegrad/train.hpp"

using namespace spikegrad;

namespace {

const std::filesystem::path kData = SPIKEGRAD_TEST_DATA;

LabeledImages mnist_subset() {
  return load_idx(kData / "mnist-subset-images-idx3-ubyte", kData / "mnist-subset-labels-idx1-ubyte");
}

}  // namespace

TEST_CASE("sgd_step") {
  const std::vector<Matrix> w{Matrix(1, 1, 1.0)};
  CHECK(sgd_step(w, {Matrix(1, 1, 2.0)}, 0.005)[0](0, 0) == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(sgd_step(w, {Matrix(1, 1)}, 0.3) == w);

  Rng rng(2);
  std::vector<Matrix> x{Matrix(3, 4), Matrix(2, 3)}, g{Matrix(3, 4), Matrix(2, 3)};
  for (auto* ms : {&x, &g})
    for (auto& m : *ms)
      for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
  // two steps with a fixed gradient equal one step with the summed gradient
  const auto twice = sgd_step(sgd_step(x, g, 0.1), g, 0.1);
  const auto once = sgd_step(x, g, 0.2);
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t k = 0; k < x[l].size(); ++k)
      CHECK(twice[l].values()[k] == doctest::Approx(once[l].values()[k]).epsilon(1e-14));

  CHECK_THROWS_AS(sgd_step(x, {g[0]}, 0.1), DimensionError);
  CHECK_THROWS_AS(sgd_step({Matrix(2, 2)}, {Matrix(2, 3)}, 0.1), DimensionError);
}

TEST_CASE("init_weights") {
  Rng rng(0);
  const LifParams lif;
  const Matrix u = init_weights({}, 20, 50, lif, 0.1, rng);
  const double hi = 2.0 * lif.theta / (50 * 0.1 * lif.tau_m);
  CHECK(hi == doctest::Approx(0.0667).epsilon(1e-3));
  for (double v : u.values()) CHECK((v >= 0.0 && v < hi));

  const Matrix g = init_weights({WeightInit::Scheme::gaussian_fan_in, 1.0}, 200, 400, lif, 0.1, rng);
  double sq = 0.0;
  for (double v : g.values()) sq += v * v;
  CHECK(std::sqrt(sq / static_cast<double>(g.size())) == doctest::Approx(1.0 / 20.0).epsilon(0.02));
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.iterations = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.lr = -1.0;
  CHECK_THROWS(cfg.validate());
  ClassifierConfig cc;
  CHECK_NOTHROW(cc.validate());
  cc.batch = 0;
  CHECK_THROWS(cc.validate());
}

TEST_CASE("toy problem layout") {
  TrainConfig cfg;
  cfg.seed = 5;
  const ToyProblem p = make_toy_problem(cfg);
  CHECK(p.input.n_neurons() == 50);
  CHECK(p.input.n_steps() == 100);
  CHECK(p.target.n_neurons() == 1);
  CHECK(p.net.depth() == 1);
  CHECK(p.net.layer(0).weights().rows() == 1);
  CHECK(p.net.layer(0).weights().cols() == 50);

  Rng rng(5);
  CHECK(p.input == bernoulli_train(50, 100, 0.1, rng));
  CHECK(p.target == bernoulli_train(1, 100, 0.05, rng));
}

TEST_CASE("run_toy_trial invariants") {
  TrainConfig cfg;
  cfg.iterations = 50;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const TrialResult r = run_toy_trial(cfg);
    REQUIRE(r.losses.size() == 50);
    for (double l : r.losses) CHECK(l >= 0.0);
    if (r.converged_at) CHECK(r.losses[*r.converged_at] == 0.0);
    for (std::size_t k = 0; r.converged_at && k < *r.converged_at; ++k) CHECK(r.losses[k] > 0.0);
  }
}

TEST_CASE("zero learning rate freezes weights and loss") {
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.iterations = 10;
  cfg.seed = 3;
  const TrialResult r = run_toy_trial(cfg);
  for (double l : r.losses) CHECK(l == r.losses[0]);
  CHECK(r.final_weights == make_toy_problem(cfg).net.weights());
}

TEST_CASE("toy trials reduce the loss") {
  TrainConfig cfg;
  std::size_t improved = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    cfg.seed = seed;
    const TrialResult r = run_toy_trial(cfg);
    improved += r.losses.back() < r.losses.front();
  }
  CHECK(improved >= 48);
}

TEST_CASE("run_trials aggregation") {
  TrainConfig cfg;
  cfg.iterations = 20;
  const auto dup = run_trials(cfg, {4, 4, 4});
  for (double s : dup.curves.std) CHECK(s == 0.0);

  const auto two = run_trials(cfg, {1, 2});
  for (std::size_t k = 0; k < 20; ++k) {
    const double a = two.trials[0].losses[k], b = two.trials[1].losses[k];
    CHECK(two.curves.mean[k] == doctest::Approx((a + b) / 2));
    CHECK(two.curves.std[k] == doctest::Approx(std::abs(a - b) / 2));
  }
  CHECK_THROWS_AS(run_trials(cfg, {}), std::invalid_argument);

  std::vector<std::uint64_t> seeds(20);
  for (std::size_t k = 0; k < seeds.size(); ++k) seeds[k] = k;
  const auto x = run_trials(cfg, seeds);
  const auto y = run_trials(cfg, seeds);
  CHECK(x.curves.mean == y.curves.mean);
  CHECK(x.curves.std == y.curves.std);
  for (double s : x.curves.std) CHECK(s >= 0.0);
}

TEST_CASE("lr_sweep pairing") {
  TrainConfig cfg;
  cfg.iterations = 15;
  const auto sweep = lr_sweep(cfg, {0.01}, {6});
  REQUIRE(sweep.cells.size() == 2);
  const auto& on = sweep.cell(0.01, true);
  const auto& off = sweep.cell(0.01, false);
  CHECK(on.with_reset_term);
  CHECK_FALSE(off.with_reset_term);
  CHECK(on.trials[0].losses[0] == off.trials[0].losses[0]);

  const auto grid = lr_sweep(cfg, {0.001, 0.02}, {0, 1, 2});
  REQUIRE(grid.cells.size() == 4);
  CHECK(grid.cells[0].lr == 0.001);
  CHECK(grid.cells[0].with_reset_term);
  CHECK(grid.cells[3].lr == 0.02);
  CHECK_FALSE(grid.cells[3].with_reset_term);
  for (const auto& c : grid.cells) {
    REQUIRE(c.trials.size() == 3);
    for (std::size_t s = 0; s < 3; ++s)
      CHECK(c.trials[s].losses[0] == grid.cells[0].trials[s].losses[0]);
  }
  CHECK_THROWS(grid.cell(0.5, true));
}

TEST_CASE("untrained classifier is near chance") {
  const auto test = mnist_subset().slice(1000, 300);
  ClassifierConfig cfg;
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    sum += evaluate(make_classifier(cfg, 784), test, cfg, 4);
  }
  CHECK(std::abs(sum / 5 - 0.1) <= 0.05);
}

TEST_CASE("classifier smoke run") {
  const auto all = mnist_subset();
  ClassifierConfig cfg;
  cfg.hidden = {16};
  cfg.epochs = 1;
  cfg.n_steps = 10;
  const auto runs = train_classifier(all.slice(0, 64), all.slice(64, 32), cfg);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].with_reset_term);
  CHECK_FALSE(runs[1].with_reset_term);
  for (const auto& r : runs) {
    REQUIRE(r.epochs.size() == 2);
    for (const auto& e : r.epochs) {
      CHECK((e.train_acc >= 0.0 && e.train_acc <= 1.0));
      CHECK((e.test_acc >= 0.0 && e.test_acc <= 1.0));
      CHECK(e.train_loss >= 0.0);
    }
    CHECK(r.final_weights.size() == 2);
  }
  CHECK(runs[0].epochs[0].test_acc == runs[1].epochs[0].test_acc);
  CHECK(runs[0].epochs[0].train_loss == runs[1].epochs[0].train_loss);

  const auto again = train_classifier_variant(all.slice(0, 64), all.slice(64, 32), cfg, true);
  CHECK(again.final_weights == runs[0].final_weights);
}
