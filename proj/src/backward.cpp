#include "backward.hpp"

#include <algorithm>

#include "spikegrad/gradients.hpp"

namespace spikegrad::detail {

std::vector<LayerBackward> backward(const Network& net, const std::vector<LayerState>& layers,
                                    const Matrix& seed, double temp, bool with_reset_term) {
  const std::size_t depth = layers.size();
  const std::size_t steps = seed.cols();
  std::vector<LayerBackward> out(depth);

  for (std::size_t l = depth; l-- > 0;) {
    const auto& p = net.layer(l).params();
    const Matrix& u = *layers[l].u;
    const Matrix& s = *layers[l].s;
    const Matrix& a_in = *layers[l].a_in;
    const std::size_t n = u.rows();
    const bool is_output = l + 1 == depth;
    const double ds = p.trace_decay();
    const double dm = p.membrane_decay();

    LayerBackward lb{Matrix(n, steps), Matrix(n, steps), Matrix(n, steps),
                     Matrix(n, a_in.rows())};
    // dL/da contributions from the next layer's drive, one column per step.
    std::vector<double> from_next(n, 0.0);

    for (std::size_t t = steps; t-- > 0;) {
      std::fill(from_next.begin(), from_next.end(), 0.0);
      if (!is_output && t + 1 < steps) {
        const Matrix& w_next = net.layer(l + 1).weights();
        const Matrix& du_next = out[l + 1].du;
        for (std::size_t k = 0; k < w_next.rows(); ++k) {
          const double g = du_next(k, t + 1);
          if (g == 0.0) continue;
          auto wk = w_next.row(k);
          for (std::size_t i = 0; i < n; ++i) from_next[i] += wk[i] * g;
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        double da = from_next[i];
        if (is_output) da += seed(i, t);
        if (t + 1 < steps) da += ds * lb.da(i, t + 1);
        lb.da(i, t) = da;

        const double surrogate = sigmoid_t_deriv(u(i, t) - p.theta, temp);
        const double spatial = da / p.tau_s * surrogate;
        lb.spatial(i, t) = spatial;

        double du = spatial;
        if (t + 1 < steps) {
          double jac = 1.0 - s(i, t);
          if (with_reset_term) jac -= u(i, t) * surrogate;
          du += lb.du(i, t + 1) * dm * jac;
        }
        lb.du(i, t) = du;
      }
    }

    // dL/dW = sum_t outer(dU[t+1], a_in[t])
    for (std::size_t i = 0; i < n; ++i) {
      auto du_i = lb.du.row(i);
      auto dw_i = lb.dw.row(i);
      for (std::size_t j = 0; j < a_in.rows(); ++j) {
        auto a_j = a_in.row(j);
        double acc = 0.0;
        for (std::size_t t = 0; t + 1 < steps; ++t) acc += du_i[t + 1] * a_j[t];
        dw_i[j] = acc;
      }
    }
    out[l] = std::move(lb);
  }
  return out;
}

}  // namespace spikegrad::detail
