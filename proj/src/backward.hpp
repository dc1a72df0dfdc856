#pragma once

// Shared backward recurrence for the hard (spiking) and soft (sigmoid)
// forward models. Spikes are passed as doubles so the soft model can reuse
// the same sweep.

#include <vector>

#include "spikegrad/matrix.hpp"
#include "spikegrad/snn.hpp"

namespace spikegrad::detail {

struct LayerState {
  const Matrix* u;
  const Matrix* s;
  const Matrix* a_in;
};

struct LayerBackward {
  Matrix da;       // dL/da after the trace recurrence
  Matrix spatial;  // spatial contribution to dL/dU
  Matrix du;       // full dL/dU
  Matrix dw;       // dL/dW
};

/// Runs BPTT over all layers, output layer last in `layers`. `seed` is
/// dL/da of the output layer.
std::vector<LayerBackward> backward(const Network& net, const std::vector<LayerState>& layers,
                                    const Matrix& seed, double temp, bool with_reset_term);

}  // namespace spikegrad::detail
