#pragma once

// Discrete-time leaky integrate-and-fire (LIF) layers and their forward
// simulation.
//
// Per layer, with membrane decay dm = 1 - 1/tau_m and trace decay
// ds = 1 - 1/tau_s:
//
//   U[t+1] = dm * (1 - S[t]) * U[t] + W * a_in[t]
//   S[t+1] = H(U[t+1] - theta)
//   a[t+1] = ds * a[t] + S[t+1] / tau_s
//
// with U, S, a all zero at t = 0 and H(0) = 0. Input at step t reaches the
// membrane at t+1. Layer l+1 is driven by the a-trace of layer l; the first
// layer is driven by the filtered input spike train.

#include <cstdint>
#include <vector>

#include "spikegrad/matrix.hpp"

namespace spikegrad {

struct LifParams {
  double tau_m = 6.0;   // membrane time constant, steps
  double tau_s = 2.0;   // synaptic time constant, steps
  double theta = 1.0;   // firing threshold
  double temp = 0.3;    // surrogate sigmoid temperature

  double membrane_decay() const { return 1.0 - 1.0 / tau_m; }
  double trace_decay() const { return 1.0 - 1.0 / tau_s; }

  /// Throws std::invalid_argument unless tau_m, tau_s > 1 and theta, temp > 0.
  void validate() const;
};

/// Binary spike raster, neurons x time-steps.
class SpikeTrain {
 public:
  SpikeTrain() = default;
  /// All-silent train. Both dimensions must be >= 1.
  SpikeTrain(std::size_t n_neurons, std::size_t n_steps);
  /// Row-major 0/1 values; anything else is rejected.
  SpikeTrain(std::size_t n_neurons, std::size_t n_steps, std::vector<std::uint8_t> bits);

  std::size_t n_neurons() const { return n_neurons_; }
  std::size_t n_steps() const { return n_steps_; }

  std::uint8_t operator()(std::size_t i, std::size_t t) const {
    return bits_[i * n_steps_ + t];
  }
  void set(std::size_t i, std::size_t t, bool spike) {
    bits_[i * n_steps_ + t] = spike ? 1 : 0;
  }

  std::size_t count(std::size_t neuron) const;
  std::size_t total() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  friend bool operator==(const SpikeTrain&, const SpikeTrain&) = default;

 private:
  std::size_t n_neurons_ = 0;
  std::size_t n_steps_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct LayerTrace {
  Matrix u;      // membrane potential
  SpikeTrain s;  // output spikes
  Matrix a;      // filtered spike trace, in [0, 1]
};

class DenseLifLayer {
 public:
  /// `weights` is n_out x n_in and must be finite.
  DenseLifLayer(Matrix weights, LifParams params);

  std::size_t n_in() const { return weights_.cols(); }
  std::size_t n_out() const { return weights_.rows(); }
  const Matrix& weights() const { return weights_; }
  Matrix& weights() { return weights_; }
  const LifParams& params() const { return params_; }

 private:
  Matrix weights_;
  LifParams params_;
};

class Network {
 public:
  Network() = default;
  /// Throws DimensionError when adjacent layers do not chain.
  explicit Network(std::vector<DenseLifLayer> layers);

  std::size_t depth() const { return layers_.size(); }
  std::size_t n_inputs() const { return layers_.front().n_in(); }
  std::size_t n_outputs() const { return layers_.back().n_out(); }
  std::size_t n_weights() const;

  const DenseLifLayer& layer(std::size_t l) const { return layers_[l]; }
  DenseLifLayer& layer(std::size_t l) { return layers_[l]; }
  const std::vector<DenseLifLayer>& layers() const { return layers_; }

  std::vector<Matrix> weights() const;
  /// Copy of this network with replaced weights (shapes must match).
  Network with_weights(std::vector<Matrix> weights) const;

 private:
  std::vector<DenseLifLayer> layers_;
};

/// Step function with H(0) = 0.
inline std::uint8_t heaviside(double x) { return x > 0.0 ? 1 : 0; }

/// One membrane update: u_prev * dm * (1 - s_prev) + drive.
double lif_step(double u_prev, std::uint8_t s_prev, double drive, const LifParams& params);

/// One trace update: a_prev * (1 - 1/tau_s) + s_next / tau_s.
double filter_step(double a_prev, std::uint8_t s_next, double tau_s);

/// Causal first-order filtering of every row, zero initial state. Step 0
/// already includes the spike at step 0.
Matrix filter_spike_train(const SpikeTrain& s, double tau_s);

LayerTrace simulate_layer(const DenseLifLayer& layer, const Matrix& a_in);

std::vector<LayerTrace> simulate_network(const Network& net, const SpikeTrain& input);

}  // namespace spikegrad
