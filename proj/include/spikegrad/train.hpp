#pragma once

// Plain-SGD training: the single-neuron toy experiment, multi-seed
// aggregation, learning-rate sweeps and a small dense MNIST classifier.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spikegrad/data.hpp"
#include "spikegrad/gradients.hpp"
#include "spikegrad/snn.hpp"

namespace spikegrad {

/// How initial weights are drawn.
///   uniform_drive:   U[0, gain * theta / (n_in * p_in * tau_m)], which puts
///                    the expected free membrane potential at gain/2 * theta.
///   gaussian_fan_in: N(0, (gain / sqrt(n_in))^2).
struct WeightInit {
  enum class Scheme { uniform_drive, gaussian_fan_in };
  Scheme scheme = Scheme::uniform_drive;
  double gain = 2.0;

  std::string describe() const;
};

struct TrainConfig {
  double lr = 0.005;
  std::size_t iterations = 200;
  LifParams lif;
  GradConfig grad;
  std::uint64_t seed = 0;
  WeightInit weight_init;

  void validate() const;
};

/// Fixed shape of the single-neuron experiment.
struct ToySetup {
  std::size_t n_inputs = 50;
  std::size_t n_steps = 100;
  double p_input = 0.1;
  double p_target = 0.05;
};

struct TrialResult {
  std::vector<double> losses;           // loss before the update of each iteration
  std::optional<std::size_t> converged_at;  // first iteration with output == target
  std::vector<Matrix> final_weights;
  GradientReport last_report;           // gradients of the final iteration
};

struct CurveStats {
  std::vector<double> mean;
  std::vector<double> std;  // population standard deviation
};

struct SweepCell {
  double lr = 0.0;
  bool with_reset_term = true;
  CurveStats curves;
  std::vector<TrialResult> trials;  // in seed order
};

struct SweepResult {
  std::vector<std::uint64_t> seeds;
  std::vector<SweepCell> cells;  // lr-major, reset on before reset off

  const SweepCell& cell(double lr, bool with_reset_term) const;
};

/// w - lr * g, layer by layer.
std::vector<Matrix> sgd_step(const std::vector<Matrix>& weights, const std::vector<Matrix>& grads,
                             double lr);

/// Draws an n_out x n_in matrix according to `init`; `p_in` is the expected
/// input rate used by uniform_drive.
Matrix init_weights(const WeightInit& init, std::size_t n_out, std::size_t n_in,
                    const LifParams& lif, double p_in, Rng& rng);

/// Input train, target train and initial weights of a toy trial, drawn in
/// that order from one Rng seeded with `seed`.
struct ToyProblem {
  SpikeTrain input;
  SpikeTrain target;
  Network net;
};

ToyProblem make_toy_problem(const TrainConfig& cfg, const ToySetup& setup = {});

TrialResult run_toy_trial(const TrainConfig& cfg, const ToySetup& setup = {});

/// One toy trial per seed; mean and population std of the loss curves.
CurveStats aggregate(const std::vector<TrialResult>& trials);

struct TrialsResult {
  CurveStats curves;
  std::vector<TrialResult> trials;
};

/// Runs `cfg` once per seed (cfg.seed is replaced). Throws
/// std::invalid_argument for an empty seed list.
TrialsResult run_trials(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds,
                        const ToySetup& setup = {});

/// Every lr crossed with reset on/off, sharing seeds between the two
/// variants of each lr.
SweepResult lr_sweep(const TrainConfig& base, const std::vector<double>& lrs,
                     const std::vector<std::uint64_t>& seeds, const ToySetup& setup = {});

struct ClassifierConfig {
  std::vector<std::size_t> hidden = {100};
  std::size_t n_classes = 10;
  std::size_t n_steps = 30;
  double p_max = 0.5;
  std::size_t target_period = 5;
  std::size_t epochs = 10;
  std::size_t batch = 32;
  double lr = 0.01;
  LifParams lif;
  std::uint64_t seed = 0;
  WeightInit weight_init{WeightInit::Scheme::gaussian_fan_in, 1.0};

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the untrained network
  double train_acc = 0.0;
  double test_acc = 0.0;
  double train_loss = 0.0;  // mean per-sample loss on the training set
};

struct ClassifierRun {
  bool with_reset_term = true;
  std::vector<EpochRecord> epochs;
  std::vector<Matrix> final_weights;
};

/// Rate-coded images in, Van Rossum loss against class_target_train,
/// spike-count decoding out. Runs reset on and off from the same seed, so
/// both variants share initial weights, encodings and batch order.
std::vector<ClassifierRun> train_classifier(const LabeledImages& train, const LabeledImages& test,
                                            const ClassifierConfig& cfg);

/// Single variant of train_classifier.
ClassifierRun train_classifier_variant(const LabeledImages& train, const LabeledImages& test,
                                       const ClassifierConfig& cfg, bool with_reset_term);

/// Builds the untrained classifier network for `cfg` and `n_inputs` pixels.
Network make_classifier(const ClassifierConfig& cfg, std::size_t n_inputs);

/// Fraction of `set` classified correctly, each image encoded with its own
/// stream derived from (cfg.seed, stream, index).
double evaluate(const Network& net, const LabeledImages& set, const ClassifierConfig& cfg,
                std::uint64_t stream);

}  // namespace spikegrad
