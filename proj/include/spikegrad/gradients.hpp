#pragma once

// Van Rossum loss and surrogate-gradient BPTT for DenseLifLayer networks.
//
// The spike nonlinearity S = H(U - theta) is differentiated through the
// temperature-T sigmoid surrogate. The reset factor (1 - S[t]) in the
// membrane update gives the temporal Jacobian
//
//   dU[t+1]/dU[t] = dm * [(1 - S[t]) - U[t] * sigma_T'(U[t] - theta)]
//
// whose second summand is the reset term. GradConfig::with_reset_term
// switches it on and off; with it off the Jacobian is dm * (1 - S[t]).

#include <vector>

#include "spikegrad/matrix.hpp"
#include "spikegrad/snn.hpp"

namespace spikegrad {

struct GradConfig {
  bool with_reset_term = true;
  double temp = 0.3;  // surrogate temperature T

  void validate() const;
};

struct LossValue {
  double total = 0.0;
  std::vector<double> per_step;
};

/// Weight gradients dL/dW (not the descent direction) and the output-layer
/// gradient phases, each n_out x n_steps:
///   phase_a  filtered output minus filtered target
///   phase_b  dL/da after the trace recurrence
///   phase_c  spatial part of dL/dU
///   phase_d  full dL/dU including the temporal term
struct GradientReport {
  std::vector<Matrix> weight_grads;
  Matrix phase_a;
  Matrix phase_b;
  Matrix phase_c;
  Matrix phase_d;
};

/// 1 / (1 + exp(-x / temp)), evaluated without overflow for any finite x.
double sigmoid_t(double x, double temp);

/// (1/temp) * sigmoid_t * (1 - sigmoid_t); peaks at 1/(4 temp) for x = 0.
double sigmoid_t_deriv(double x, double temp);

/// Half the squared distance between filtered trains, summed over neurons
/// per step, then over all steps.
LossValue van_rossum_loss(const Matrix& out_filtered, const Matrix& target_filtered);

/// dL/d(out_filtered) = out_filtered - target_filtered.
Matrix loss_grad_filtered(const Matrix& out_filtered, const Matrix& target_filtered);

double temporal_jacobian(double u, std::uint8_t s, const LifParams& params,
                         const GradConfig& cfg);

/// Loss of a simulated network against `target`. The output a-trace is the
/// filtered output train.
LossValue network_loss(const Network& net, const std::vector<LayerTrace>& traces,
                       const SpikeTrain& target);

/// Full-sequence BPTT. `input_filtered` is the first layer's input trace as
/// fed to simulate_network. Throws ConsistencyError when traces, target or
/// input do not fit the network.
GradientReport bptt(const Network& net, const std::vector<LayerTrace>& traces,
                    const Matrix& input_filtered, const SpikeTrain& target,
                    const GradConfig& cfg);

/// BPTT from an explicit output seed dL/d(a_out) instead of a target train.
GradientReport bptt_seeded(const Network& net, const std::vector<LayerTrace>& traces,
                           const Matrix& input_filtered, const Matrix& seed,
                           const GradConfig& cfg);

}  // namespace spikegrad
