#pragma once

// Finite-difference verification of the BPTT recurrences.
//
// The soft model replaces every H(U - theta) in the forward pass (the reset
// factor and the trace injection) with sigma_T(U - theta). That model is
// differentiable, so its BPTT gradient must agree with central differences,
// and it only does so when the reset term is part of the temporal Jacobian.

#include <cstdint>
#include <vector>

#include "spikegrad/matrix.hpp"
#include "spikegrad/snn.hpp"

namespace spikegrad {

struct SoftTrace {
  Matrix u;
  Matrix s_soft;  // sigma_T(U - theta), strictly inside (0, 1)
  Matrix a;
};

struct Coordinate {
  std::size_t layer = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Coordinate&, const Coordinate&) = default;
};

struct CheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  Coordinate worst_coordinate;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// Relative-error floor in compare().
inline constexpr double kRelErrFloor = 1e-12;
/// Default central-difference step.
inline constexpr double kDefaultFdStep = 1e-5;

std::vector<SoftTrace> soft_forward(const Network& net, const SpikeTrain& input, double temp);

/// Van Rossum loss of the soft model.
double soft_loss(const Network& net, const SpikeTrain& input, const SpikeTrain& target,
                 double temp);

/// Analytic dL/dW of the soft model, flattened layer by layer in row-major
/// order. `with_reset_term = false` drops the reset term from the temporal
/// Jacobian; the result is then no longer the exact gradient.
std::vector<double> soft_bptt(const Network& net, const std::vector<SoftTrace>& soft_traces,
                              const SpikeTrain& input, const SpikeTrain& target, double temp,
                              bool with_reset_term = true);

/// Arithmetic used to evaluate the loss inside central_fd. In binary64 the
/// loss cannot resolve a perturbation whose effect is below its ulp, so
/// components smaller than roughly ulp(L) / h (about 1e-6 for L ~ 1,
/// h = 1e-5) drown in rounding. binary128 pushes that floor below 1e-20.
enum class FdPrecision { binary64, binary128 };

/// Central differences (L(w + h) - L(w - h)) / 2h of the soft loss in every
/// weight. Perturbations are applied to a scratch copy of each weight row;
/// `net` itself is never modified.
std::vector<double> central_fd(const Network& net, const SpikeTrain& input, const SpikeTrain& target,
                               double temp, double h = kDefaultFdStep,
                               FdPrecision precision = FdPrecision::binary128);

/// Per-coordinate |a - n| / max(|a|, |n|, 1e-12). Without `net`, the worst
/// coordinate is reported as (0, 0, flat index).
CheckReport compare(const std::vector<double>& analytic, const std::vector<double>& numeric,
                    const Network* net = nullptr);

/// True when some soft spike in (0.1, 0.9) sits at a step where the reset
/// term carries gradient, i.e. U[t] != 0 and dL/dU[t+1] != 0.
bool reset_term_active(const Network& net, const std::vector<SoftTrace>& soft_traces,
                       const SpikeTrain& input, const SpikeTrain& target, double temp);

/// One seeded random instance of the oracle suite: 1-3 layers, 1-8 neurons
/// per layer and input, 2-20 steps, weights ~ N(0, 0.5^2), default LIF
/// constants.
struct OracleInstance {
  std::uint64_t seed = 0;
  Network net;
  SpikeTrain input;
  SpikeTrain target;
};

OracleInstance make_oracle_instance(std::uint64_t seed);

struct OracleResult {
  std::uint64_t seed = 0;
  std::size_t layers = 0;
  double max_rel_err = 0.0;           // soft_bptt vs central_fd
  double max_rel_err_no_reset = 0.0;  // reset term dropped vs central_fd
  bool reset_active = false;          // reset_term_active()
};

OracleResult run_oracle_instance(std::uint64_t seed, double temp = 0.3,
                                 double h = kDefaultFdStep,
                                 FdPrecision precision = FdPrecision::binary128);

}  // namespace spikegrad
