#include "spikegrad/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "parallel.hpp"

namespace spikegrad {

std::string WeightInit::describe() const {
  std::ostringstream os;
  os << (scheme == Scheme::uniform_drive ? "uniform_drive" : "gaussian_fan_in")
     << "(gain=" << gain << ")";
  return os.str();
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw std::invalid_argument("TrainConfig: lr must be >= 0");
  if (iterations < 1) throw std::invalid_argument("TrainConfig: iterations must be >= 1");
  lif.validate();
  grad.validate();
}

void ClassifierConfig::validate() const {
  if (!(lr >= 0.0)) throw std::invalid_argument("ClassifierConfig: lr must be >= 0");
  if (batch < 1) throw std::invalid_argument("ClassifierConfig: batch must be >= 1");
  if (n_steps < 2) throw std::invalid_argument("ClassifierConfig: need at least 2 steps");
  if (n_classes < 1) throw std::invalid_argument("ClassifierConfig: need at least 1 class");
  lif.validate();
}

const SweepCell& SweepResult::cell(double lr, bool with_reset_term) const {
  for (const auto& c : cells)
    if (c.lr == lr && c.with_reset_term == with_reset_term) return c;
  throw std::out_of_range("SweepResult: no such cell");
}

std::vector<Matrix> sgd_step(const std::vector<Matrix>& weights, const std::vector<Matrix>& grads,
                             double lr) {
  if (weights.size() != grads.size())
    throw DimensionError("sgd_step: layer count mismatch");
  std::vector<Matrix> out = weights;
  for (std::size_t l = 0; l < out.size(); ++l) {
    require_same_shape(weights[l], grads[l], "sgd_step");
    auto& w = out[l].values();
    const auto& g = grads[l].values();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
  }
  return out;
}

Matrix init_weights(const WeightInit& init, std::size_t n_out, std::size_t n_in,
                    const LifParams& lif, double p_in, Rng& rng) {
  Matrix w(n_out, n_in);
  if (init.scheme == WeightInit::Scheme::uniform_drive) {
    if (!(p_in > 0.0)) throw std::invalid_argument("init_weights: p_in must be > 0");
    const double hi = init.gain * lif.theta / (static_cast<double>(n_in) * p_in * lif.tau_m);
    for (double& v : w.values()) v = rng.uniform(0.0, hi);
  } else {
    const double sd = init.gain / std::sqrt(static_cast<double>(n_in));
    for (double& v : w.values()) v = sd * rng.normal();
  }
  return w;
}

ToyProblem make_toy_problem(const TrainConfig& cfg, const ToySetup& setup) {
  Rng rng(cfg.seed);
  SpikeTrain input = bernoulli_train(setup.n_inputs, setup.n_steps, setup.p_input, rng);
  SpikeTrain target = bernoulli_train(1, setup.n_steps, setup.p_target, rng);
  Matrix w = init_weights(cfg.weight_init, 1, setup.n_inputs, cfg.lif, setup.p_input, rng);
  std::vector<DenseLifLayer> layers;
  layers.emplace_back(std::move(w), cfg.lif);
  return {std::move(input), std::move(target), Network(std::move(layers))};
}

TrialResult run_toy_trial(const TrainConfig& cfg, const ToySetup& setup) {
  cfg.validate();
  ToyProblem problem = make_toy_problem(cfg, setup);
  Network net = std::move(problem.net);
  const Matrix input_filtered = filter_spike_train(problem.input, cfg.lif.tau_s);

  TrialResult result;
  result.losses.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto traces = simulate_network(net, problem.input);
    result.losses.push_back(network_loss(net, traces, problem.target).total);
    if (!result.converged_at && traces.back().s == problem.target) result.converged_at = it;
    result.last_report = bptt(net, traces, input_filtered, problem.target, cfg.grad);
    net = net.with_weights(sgd_step(net.weights(), result.last_report.weight_grads, cfg.lr));
  }
  result.final_weights = net.weights();
  return result;
}

CurveStats aggregate(const std::vector<TrialResult>& trials) {
  if (trials.empty()) throw std::invalid_argument("aggregate: no trials");
  const std::size_t n = trials.front().losses.size();
  CurveStats stats{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t k = 0; k < n; ++k) {
    // Welford updates; identical curves give exactly zero spread.
    double mean = 0.0, m2 = 0.0, seen = 0.0;
    for (const auto& t : trials) {
      const double x = t.losses.at(k);
      seen += 1.0;
      const double delta = x - mean;
      mean += delta / seen;
      m2 += delta * (x - mean);
    }
    stats.mean[k] = mean;
    stats.std[k] = std::sqrt(m2 / seen);
  }
  return stats;
}

TrialsResult run_trials(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds,
                        const ToySetup& setup) {
  if (seeds.empty()) throw std::invalid_argument("run_trials: empty seed list");
  std::vector<TrialResult> trials(seeds.size());
  detail::parallel_for(seeds.size(), [&](std::size_t i) {
    TrainConfig c = cfg;
    c.seed = seeds[i];
    trials[i] = run_toy_trial(c, setup);
  });
  CurveStats curves = aggregate(trials);
  return {std::move(curves), std::move(trials)};
}

SweepResult lr_sweep(const TrainConfig& base, const std::vector<double>& lrs,
                     const std::vector<std::uint64_t>& seeds, const ToySetup& setup) {
  if (lrs.empty() || seeds.empty()) throw std::invalid_argument("lr_sweep: empty grid");
  SweepResult sweep;
  sweep.seeds = seeds;
  for (double lr : lrs)
    for (bool reset : {true, false}) {
      SweepCell cell;
      cell.lr = lr;
      cell.with_reset_term = reset;
      sweep.cells.push_back(std::move(cell));
    }
  // One job per (cell, seed).
  const std::size_t n_seeds = seeds.size();
  std::vector<TrialResult> flat(sweep.cells.size() * n_seeds);
  detail::parallel_for(flat.size(), [&](std::size_t job) {
    const SweepCell& cell = sweep.cells[job / n_seeds];
    TrainConfig c = base;
    c.lr = cell.lr;
    c.grad.with_reset_term = cell.with_reset_term;
    c.seed = seeds[job % n_seeds];
    flat[job] = run_toy_trial(c, setup);
  });
  for (std::size_t c = 0; c < sweep.cells.size(); ++c) {
    auto first = flat.begin() + static_cast<std::ptrdiff_t>(c * n_seeds);
    sweep.cells[c].trials.assign(std::make_move_iterator(first),
                                 std::make_move_iterator(first + static_cast<std::ptrdiff_t>(n_seeds)));
    sweep.cells[c].curves = aggregate(sweep.cells[c].trials);
  }
  return sweep;
}

// --- classifier -----------------------------------------------------------

namespace {

// Seed streams for the classifier.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kTrainEncodeStream = 100;  // + epoch
constexpr std::uint64_t kEvalTrainStream = 3;
constexpr std::uint64_t kEvalTestStream = 4;

SpikeTrain encode(const LabeledImages& set, std::size_t idx, const ClassifierConfig& cfg,
                  std::uint64_t stream) {
  Rng rng(derive_seed(cfg.seed, stream, idx));
  return rate_encode_image(set.image(idx), cfg.n_steps, cfg.p_max, rng);
}

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

EvalResult evaluate_set(const Network& net, const LabeledImages& set,
                        const ClassifierConfig& cfg, std::uint64_t stream) {
  if (set.size() == 0) return {};
  std::vector<int> correct(set.size(), 0);
  std::vector<double> losses(set.size(), 0.0);
  detail::parallel_for(set.size(), [&](std::size_t i) {
    const auto traces = simulate_network(net, encode(set, i, cfg, stream));
    const SpikeTrain target =
        class_target_train(set.labels[i], cfg.n_classes, cfg.n_steps, cfg.target_period);
    losses[i] = network_loss(net, traces, target).total;
    correct[i] = decode_spike_count(traces.back().s) == set.labels[i] ? 1 : 0;
  });
  const double n = static_cast<double>(set.size());
  return {std::accumulate(correct.begin(), correct.end(), 0) / n,
          std::accumulate(losses.begin(), losses.end(), 0.0) / n};
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(0, i - 1)]);
  return order;
}

}  // namespace

Network make_classifier(const ClassifierConfig& cfg, std::size_t n_inputs) {
  Rng rng(derive_seed(cfg.seed, kInitStream));
  std::vector<std::size_t> sizes{n_inputs};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(cfg.n_classes);
  std::vector<DenseLifLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    layers.emplace_back(init_weights(cfg.weight_init, sizes[l + 1], sizes[l], cfg.lif, cfg.p_max, rng),
                        cfg.lif);
  return Network(std::move(layers));
}

double evaluate(const Network& net, const LabeledImages& set, const ClassifierConfig& cfg,
                std::uint64_t stream) {
  return evaluate_set(net, set, cfg, stream).accuracy;
}

ClassifierRun train_classifier_variant(const LabeledImages& train, const LabeledImages& test,
                                       const ClassifierConfig& cfg, bool with_reset_term) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("train_classifier: empty training set");
  if (train.image_size() != test.image_size())
    throw DimensionError("train_classifier: train and test image sizes differ");

  Network net = make_classifier(cfg, train.image_size());
  const GradConfig grad{with_reset_term, cfg.lif.temp};

  ClassifierRun run;
  run.with_reset_term = with_reset_term;
  auto record = [&](std::size_t epoch) {
    const EvalResult tr = evaluate_set(net, train, cfg, kEvalTrainStream);
    const EvalResult te = evaluate_set(net, test, cfg, kEvalTestStream);
    run.epochs.push_back({epoch, tr.accuracy, te.accuracy, tr.mean_loss});
  };
  record(0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled_order(train.size(), derive_seed(cfg.seed, kShuffleStream, epoch));
    for (std::size_t first = 0; first < order.size(); first += cfg.batch) {
      const std::size_t count = std::min(cfg.batch, order.size() - first);
      std::vector<std::vector<Matrix>> grads(count);
      detail::parallel_for(count, [&](std::size_t b) {
        const std::size_t idx = order[first + b];
        const SpikeTrain input = encode(train, idx, cfg, kTrainEncodeStream + epoch);
        const SpikeTrain target =
            class_target_train(train.labels[idx], cfg.n_classes, cfg.n_steps, cfg.target_period);
        const auto traces = simulate_network(net, input);
        grads[b] = bptt(net, traces, filter_spike_train(input, cfg.lif.tau_s), target, grad)
                       .weight_grads;
      });
      // Ordered reduction keeps the sum independent of thread scheduling.
      std::vector<Matrix> mean = std::move(grads[0]);
      for (std::size_t b = 1; b < count; ++b)
        for (std::size_t l = 0; l < mean.size(); ++l) {
          auto& acc = mean[l].values();
          const auto& g = grads[b][l].values();
          for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
        }
      for (auto& m : mean)
        for (double& v : m.values()) v /= static_cast<double>(count);
      net = net.with_weights(sgd_step(net.weights(), mean, cfg.lr));
    }
    record(epoch);
  }
  run.final_weights = net.weights();
  return run;
}

std::vector<ClassifierRun> train_classifier(const LabeledImages& train, const LabeledImages& test,
                                            const ClassifierConfig& cfg) {
  std::vector<ClassifierRun> runs;
  runs.push_back(train_classifier_variant(train, test, cfg, true));
  runs.push_back(train_classifier_variant(train, test, cfg, false));
  return runs;
}

}  // namespace spikegrad
