#include "spikegrad/snn.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace spikegrad {

void LifParams::validate() const {
  if (!(tau_m > 1.0)) throw std::invalid_argument("tau_m must be > 1");
  if (!(tau_s > 1.0)) throw std::invalid_argument("tau_s must be > 1");
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be > 0");
  if (!(temp > 0.0)) throw std::invalid_argument("temp must be > 0");
}

SpikeTrain::SpikeTrain(std::size_t n_neurons, std::size_t n_steps)
    : SpikeTrain(n_neurons, n_steps, std::vector<std::uint8_t>(n_neurons * n_steps, 0)) {}

SpikeTrain::SpikeTrain(std::size_t n_neurons, std::size_t n_steps,
                       std::vector<std::uint8_t> bits)
    : n_neurons_(n_neurons), n_steps_(n_steps), bits_(std::move(bits)) {
  if (n_neurons == 0 || n_steps == 0)
    throw DimensionError("SpikeTrain: needs at least one neuron and one step");
  if (bits_.size() != n_neurons * n_steps)
    throw DimensionError("SpikeTrain: bit count does not match shape");
  for (auto b : bits_)
    if (b > 1) throw std::invalid_argument("SpikeTrain: entries must be 0 or 1");
}

std::size_t SpikeTrain::count(std::size_t neuron) const {
  auto first = bits_.begin() + static_cast<std::ptrdiff_t>(neuron * n_steps_);
  return static_cast<std::size_t>(
      std::accumulate(first, first + static_cast<std::ptrdiff_t>(n_steps_), std::size_t{0}));
}

std::size_t SpikeTrain::total() const {
  return std::accumulate(bits_.begin(), bits_.end(), std::size_t{0});
}

DenseLifLayer::DenseLifLayer(Matrix weights, LifParams params)
    : weights_(std::move(weights)), params_(params) {
  params_.validate();
  if (weights_.rows() == 0 || weights_.cols() == 0)
    throw DimensionError("DenseLifLayer: empty weight matrix");
  for (double w : weights_.values())
    if (!std::isfinite(w)) throw std::invalid_argument("DenseLifLayer: non-finite weight");
}

Network::Network(std::vector<DenseLifLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw DimensionError("Network: no layers");
  for (std::size_t l = 1; l < layers_.size(); ++l)
    if (layers_[l].n_in() != layers_[l - 1].n_out())
      throw DimensionError("Network: layer " + std::to_string(l) + " expects " +
                           std::to_string(layers_[l].n_in()) + " inputs, previous layer has " +
                           std::to_string(layers_[l - 1].n_out()) + " outputs");
}

std::size_t Network::n_weights() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights().size();
  return n;
}

std::vector<Matrix> Network::weights() const {
  std::vector<Matrix> out;
  out.reserve(layers_.size());
  for (const auto& layer : layers_) out.push_back(layer.weights());
  return out;
}

Network Network::with_weights(std::vector<Matrix> weights) const {
  if (weights.size() != layers_.size())
    throw DimensionError("Network::with_weights: layer count mismatch");
  std::vector<DenseLifLayer> layers;
  layers.reserve(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    require_same_shape(weights[l], layers_[l].weights(), "Network::with_weights");
    layers.emplace_back(std::move(weights[l]), layers_[l].params());
  }
  return Network(std::move(layers));
}

double lif_step(double u_prev, std::uint8_t s_prev, double drive, const LifParams& params) {
  return u_prev * params.membrane_decay() * (1.0 - s_prev) + drive;
}

double filter_step(double a_prev, std::uint8_t s_next, double tau_s) {
  return a_prev * (1.0 - 1.0 / tau_s) + s_next / tau_s;
}

Matrix filter_spike_train(const SpikeTrain& s, double tau_s) {
  Matrix out(s.n_neurons(), s.n_steps());
  for (std::size_t i = 0; i < s.n_neurons(); ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < s.n_steps(); ++t) {
      acc = filter_step(acc, s(i, t), tau_s);
      out(i, t) = acc;
    }
  }
  return out;
}

LayerTrace simulate_layer(const DenseLifLayer& layer, const Matrix& a_in) {
  if (a_in.rows() != layer.n_in())
    throw DimensionError("simulate_layer: layer expects " + std::to_string(layer.n_in()) +
                         " input rows, got " + std::to_string(a_in.rows()));
  if (a_in.cols() == 0) throw DimensionError("simulate_layer: no time-steps");

  const auto& p = layer.params();
  const Matrix& w = layer.weights();
  const std::size_t n_out = layer.n_out();
  const std::size_t n_in = layer.n_in();
  const std::size_t steps = a_in.cols();

  Matrix u(n_out, steps);
  Matrix a(n_out, steps);
  std::vector<std::uint8_t> s(n_out * steps, 0);
  std::vector<double> column(n_in);

  for (std::size_t t = 0; t + 1 < steps; ++t) {
    for (std::size_t j = 0; j < n_in; ++j) column[j] = a_in(j, t);
    for (std::size_t i = 0; i < n_out; ++i) {
      auto wi = w.row(i);
      double drive = 0.0;
      for (std::size_t j = 0; j < n_in; ++j) drive += wi[j] * column[j];
      const double next = lif_step(u(i, t), s[i * steps + t], drive, p);
      const std::uint8_t spike = heaviside(next - p.theta);
      u(i, t + 1) = next;
      s[i * steps + t + 1] = spike;
      a(i, t + 1) = filter_step(a(i, t), spike, p.tau_s);
    }
  }
  return {std::move(u), SpikeTrain(n_out, steps, std::move(s)), std::move(a)};
}

std::vector<LayerTrace> simulate_network(const Network& net, const SpikeTrain& input) {
  if (input.n_neurons() != net.n_inputs())
    throw DimensionError("simulate_network: input has " + std::to_string(input.n_neurons()) +
                         " neurons, network expects " + std::to_string(net.n_inputs()));
  std::vector<LayerTrace> traces;
  traces.reserve(net.depth());
  const Matrix first = filter_spike_train(input, net.layer(0).params().tau_s);
  for (std::size_t l = 0; l < net.depth(); ++l)
    traces.push_back(simulate_layer(net.layer(l), l == 0 ? first : traces.back().a));
  return traces;
}

}  // namespace spikegrad
