#include "spikegrad/gradients.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "backward.hpp"

namespace spikegrad {

void GradConfig::validate() const {
  if (!(temp > 0.0)) throw std::invalid_argument("GradConfig: temp must be > 0");
}

double sigmoid_t(double x, double temp) {
  const double z = x / temp;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double sigmoid_t_deriv(double x, double temp) {
  // sigma(z)(1 - sigma(z)) = e / (1 + e)^2 with e = exp(-|z|)
  const double e = std::exp(-std::abs(x / temp));
  const double d = 1.0 + e;
  return e / (d * d) / temp;
}

LossValue van_rossum_loss(const Matrix& out_filtered, const Matrix& target_filtered) {
  require_same_shape(out_filtered, target_filtered, "van_rossum_loss");
  LossValue loss;
  loss.per_step.assign(out_filtered.cols(), 0.0);
  for (std::size_t i = 0; i < out_filtered.rows(); ++i)
    for (std::size_t t = 0; t < out_filtered.cols(); ++t) {
      const double diff = target_filtered(i, t) - out_filtered(i, t);
      loss.per_step[t] += 0.5 * diff * diff;
    }
  for (double e : loss.per_step) loss.total += e;
  return loss;
}

Matrix loss_grad_filtered(const Matrix& out_filtered, const Matrix& target_filtered) {
  require_same_shape(out_filtered, target_filtered, "loss_grad_filtered");
  Matrix g(out_filtered.rows(), out_filtered.cols());
  for (std::size_t k = 0; k < g.size(); ++k)
    g.values()[k] = out_filtered.values()[k] - target_filtered.values()[k];
  return g;
}

double temporal_jacobian(double u, std::uint8_t s, const LifParams& params,
                         const GradConfig& cfg) {
  double j = 1.0 - s;
  if (cfg.with_reset_term) j -= u * sigmoid_t_deriv(u - params.theta, cfg.temp);
  return params.membrane_decay() * j;
}

LossValue network_loss(const Network& net, const std::vector<LayerTrace>& traces,
                       const SpikeTrain& target) {
  if (traces.empty()) throw ConsistencyError("network_loss: no traces");
  const Matrix target_filtered = filter_spike_train(target, net.layers().back().params().tau_s);
  return van_rossum_loss(traces.back().a, target_filtered);
}

namespace {

Matrix spikes_as_matrix(const SpikeTrain& s) {
  Matrix m(s.n_neurons(), s.n_steps());
  for (std::size_t k = 0; k < m.size(); ++k) m.values()[k] = s.bits()[k];
  return m;
}

void check_traces(const Network& net, const std::vector<LayerTrace>& traces,
                  const Matrix& input_filtered) {
  if (traces.size() != net.depth())
    throw ConsistencyError("bptt: " + std::to_string(traces.size()) + " traces for " +
                           std::to_string(net.depth()) + " layers");
  const std::size_t steps = input_filtered.cols();
  if (input_filtered.rows() != net.n_inputs())
    throw ConsistencyError("bptt: input trace does not match first layer");
  for (std::size_t l = 0; l < traces.size(); ++l) {
    const auto& tr = traces[l];
    const std::size_t n = net.layer(l).n_out();
    if (tr.u.rows() != n || tr.a.rows() != n || tr.s.n_neurons() != n || tr.u.cols() != steps ||
        tr.a.cols() != steps || tr.s.n_steps() != steps)
      throw ConsistencyError("bptt: trace " + std::to_string(l) + " does not match network");
  }
}

}  // namespace

GradientReport bptt_seeded(const Network& net, const std::vector<LayerTrace>& traces,
                           const Matrix& input_filtered, const Matrix& seed,
                           const GradConfig& cfg) {
  cfg.validate();
  check_traces(net, traces, input_filtered);
  if (!seed.same_shape(traces.back().a))
    throw ConsistencyError("bptt: seed does not match output trace");

  std::vector<Matrix> spikes;
  spikes.reserve(traces.size());
  for (const auto& tr : traces) spikes.push_back(spikes_as_matrix(tr.s));

  std::vector<detail::LayerState> states;
  for (std::size_t l = 0; l < traces.size(); ++l)
    states.push_back({&traces[l].u, &spikes[l], l == 0 ? &input_filtered : &traces[l - 1].a});

  auto layers = detail::backward(net, states, seed, cfg.temp, cfg.with_reset_term);

  GradientReport report;
  report.phase_a = seed;
  report.phase_b = std::move(layers.back().da);
  report.phase_c = std::move(layers.back().spatial);
  report.phase_d = std::move(layers.back().du);
  for (auto& lb : layers) report.weight_grads.push_back(std::move(lb.dw));
  return report;
}

GradientReport bptt(const Network& net, const std::vector<LayerTrace>& traces,
                    const Matrix& input_filtered, const SpikeTrain& target,
                    const GradConfig& cfg) {
  if (traces.empty()) throw ConsistencyError("bptt: no traces");
  const auto& out = traces.back();
  if (target.n_neurons() != out.a.rows() || target.n_steps() != out.a.cols())
    throw ConsistencyError("bptt: target shape does not match output layer");
  const Matrix target_filtered = filter_spike_train(target, net.layers().back().params().tau_s);
  return bptt_seeded(net, traces, input_filtered, loss_grad_filtered(out.a, target_filtered), cfg);
}

}  // namespace spikegrad
