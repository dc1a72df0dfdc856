#include "spikegrad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <quadmath.h>

#include "backward.hpp"
#include "spikegrad/data.hpp"
#include "spikegrad/gradients.hpp"

namespace spikegrad {

namespace {

inline double real_exp(double x) { return std::exp(x); }
inline __float128 real_exp(__float128 x) { return expq(x); }

// Same formula as sigmoid_t, generic over the floating-point type.
template <class Real>
Real soft_spike(Real x, Real temp) {
  const Real z = x / temp;
  if (z >= Real(0)) return Real(1) / (Real(1) + real_exp(-z));
  const Real e = real_exp(z);
  return e / (Real(1) + e);
}

template <class Real>
struct SoftLayerState {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> u, s, a;  // row-major, rows x cols
};

// `perturb` adds `delta` to weight `perturb_index` of this layer when set.
template <class Real>
SoftLayerState<Real> soft_layer(const DenseLifLayer& layer, const std::vector<Real>& a_in,
                                std::size_t steps, Real temp, std::size_t perturb_index = -1,
                                Real delta = Real(0)) {
  if (a_in.size() != layer.n_in() * steps)
    throw DimensionError("soft_forward: layer expects " + std::to_string(layer.n_in()) +
                         " input rows");
  const auto& p = layer.params();
  const Real dm = Real(p.membrane_decay());
  const Real ds = Real(p.trace_decay());
  const Real tau_s = Real(p.tau_s);
  const Real theta = Real(p.theta);
  const std::size_t n_out = layer.n_out();
  const std::size_t n_in = layer.n_in();
  std::vector<Real> w(layer.weights().values().begin(), layer.weights().values().end());
  if (perturb_index < w.size()) w[perturb_index] += delta;

  SoftLayerState<Real> st{n_out, steps, std::vector<Real>(n_out * steps, Real(0)),
                          std::vector<Real>(n_out * steps, Real(0)),
                          std::vector<Real>(n_out * steps, Real(0))};
  for (std::size_t i = 0; i < n_out; ++i) st.s[i * steps] = soft_spike(-theta, temp);
  for (std::size_t t = 0; t + 1 < steps; ++t)
    for (std::size_t i = 0; i < n_out; ++i) {
      Real drive = Real(0);
      for (std::size_t j = 0; j < n_in; ++j) drive += w[i * n_in + j] * a_in[j * steps + t];
      const std::size_t k = i * steps + t;
      const Real u = dm * (Real(1) - st.s[k]) * st.u[k] + drive;
      const Real s = soft_spike(u - theta, temp);
      st.u[k + 1] = u;
      st.s[k + 1] = s;
      st.a[k + 1] = ds * st.a[k] + s / tau_s;
    }
  return st;
}

template <class Real>
std::vector<Real> to_real(const Matrix& m) {
  return {m.values().begin(), m.values().end()};
}

// Soft-model loss with one weight perturbed, evaluated entirely in Real.
template <class Real>
Real soft_loss_in(const Network& net, const SpikeTrain& input, const Matrix& target_filtered,
                  Real temp, std::size_t layer, std::size_t index, Real delta) {
  const std::size_t steps = input.n_steps();
  std::vector<Real> a = to_real<Real>(filter_spike_train(input, net.layer(0).params().tau_s));
  for (std::size_t l = 0; l < net.depth(); ++l)
    a = soft_layer<Real>(net.layer(l), a, steps, temp, l == layer ? index : std::size_t(-1),
                         delta)
            .a;
  Real total = Real(0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Real diff = Real(target_filtered.values()[k]) - a[k];
    total += Real(0.5) * diff * diff;
  }
  return total;
}

template <class Real>
std::vector<double> central_fd_in(const Network& net, const SpikeTrain& input,
                                  const SpikeTrain& target, double temp, double h) {
  const Matrix target_filtered = filter_spike_train(target, net.layers().back().params().tau_s);
  std::vector<double> grad;
  grad.reserve(net.n_weights());
  const Real step = Real(h);
  for (std::size_t l = 0; l < net.depth(); ++l)
    for (std::size_t k = 0; k < net.layer(l).weights().size(); ++k) {
      const Real plus = soft_loss_in<Real>(net, input, target_filtered, Real(temp), l, k, step);
      const Real minus = soft_loss_in<Real>(net, input, target_filtered, Real(temp), l, k, -step);
      grad.push_back(static_cast<double>((plus - minus) / (Real(2) * step)));
    }
  return grad;
}

SoftTrace to_soft_trace(SoftLayerState<double>&& st) {
  return {Matrix(st.rows, st.cols, std::move(st.u)), Matrix(st.rows, st.cols, std::move(st.s)),
          Matrix(st.rows, st.cols, std::move(st.a))};
}

Matrix soft_seed(const Network& net, const std::vector<SoftTrace>& traces,
                 const SpikeTrain& target) {
  const Matrix target_filtered = filter_spike_train(target, net.layers().back().params().tau_s);
  return loss_grad_filtered(traces.back().a, target_filtered);
}

std::vector<detail::LayerBackward> soft_backward(const Network& net,
                                                 const std::vector<SoftTrace>& traces,
                                                 const SpikeTrain& input,
                                                 const SpikeTrain& target, double temp,
                                                 bool with_reset_term, Matrix& input_filtered) {
  if (traces.size() != net.depth())
    throw ConsistencyError("soft_bptt: trace count does not match network depth");
  input_filtered = filter_spike_train(input, net.layer(0).params().tau_s);
  std::vector<detail::LayerState> states;
  for (std::size_t l = 0; l < traces.size(); ++l) {
    if (traces[l].u.rows() != net.layer(l).n_out() ||
        traces[l].u.cols() != input_filtered.cols())
      throw ConsistencyError("soft_bptt: trace " + std::to_string(l) +
                             " does not match network");
    states.push_back({&traces[l].u, &traces[l].s_soft,
                      l == 0 ? &input_filtered : &traces[l - 1].a});
  }
  return detail::backward(net, states, soft_seed(net, traces, target), temp, with_reset_term);
}

}  // namespace

std::vector<SoftTrace> soft_forward(const Network& net, const SpikeTrain& input, double temp) {
  if (!(temp > 0.0)) throw std::invalid_argument("soft_forward: temp must be > 0");
  if (input.n_neurons() != net.n_inputs())
    throw DimensionError("soft_forward: input does not match first layer");
  std::vector<SoftTrace> traces;
  const Matrix first = filter_spike_train(input, net.layer(0).params().tau_s);
  for (std::size_t l = 0; l < net.depth(); ++l)
    traces.push_back(to_soft_trace(soft_layer<double>(
        net.layer(l), l == 0 ? first.values() : traces.back().a.values(), input.n_steps(), temp)));
  return traces;
}

double soft_loss(const Network& net, const SpikeTrain& input, const SpikeTrain& target,
                 double temp) {
  const auto traces = soft_forward(net, input, temp);
  const Matrix target_filtered = filter_spike_train(target, net.layers().back().params().tau_s);
  return van_rossum_loss(traces.back().a, target_filtered).total;
}

std::vector<double> soft_bptt(const Network& net, const std::vector<SoftTrace>& soft_traces,
                              const SpikeTrain& input, const SpikeTrain& target, double temp,
                              bool with_reset_term) {
  Matrix input_filtered;
  const auto layers =
      soft_backward(net, soft_traces, input, target, temp, with_reset_term, input_filtered);
  std::vector<double> flat;
  flat.reserve(net.n_weights());
  for (const auto& lb : layers)
    flat.insert(flat.end(), lb.dw.values().begin(), lb.dw.values().end());
  return flat;
}

std::vector<double> central_fd(const Network& net, const SpikeTrain& input, const SpikeTrain& target,
                               double temp, double h, FdPrecision precision) {
  if (!(h > 0.0)) throw std::invalid_argument("central_fd: h must be > 0");
  if (!(temp > 0.0)) throw std::invalid_argument("central_fd: temp must be > 0");
  if (input.n_neurons() != net.n_inputs())
    throw DimensionError("central_fd: input does not match first layer");
  if (target.n_neurons() != net.n_outputs() || target.n_steps() != input.n_steps())
    throw DimensionError("central_fd: target does not match output layer");
  if (precision == FdPrecision::binary128)
    return central_fd_in<__float128>(net, input, target, temp, h);
  return central_fd_in<double>(net, input, target, temp, h);
}

CheckReport compare(const std::vector<double>& analytic, const std::vector<double>& numeric,
                    const Network* net) {
  if (analytic.size() != numeric.size())
    throw DimensionError("compare: " + std::to_string(analytic.size()) + " analytic vs " +
                         std::to_string(numeric.size()) + " numeric components");
  CheckReport report;
  report.analytic = analytic;
  report.numeric = numeric;
  std::size_t worst = 0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double abs_err = std::abs(analytic[k] - numeric[k]);
    const double scale = std::max({std::abs(analytic[k]), std::abs(numeric[k]), kRelErrFloor});
    const double rel_err = abs_err / scale;
    report.max_abs_err = std::max(report.max_abs_err, abs_err);
    if (rel_err > report.max_rel_err) {
      report.max_rel_err = rel_err;
      worst = k;
    }
  }
  report.worst_coordinate = {0, 0, worst};
  if (net != nullptr) {
    std::size_t offset = worst;
    for (std::size_t l = 0; l < net->depth(); ++l) {
      const Matrix& w = net->layer(l).weights();
      if (offset < w.size()) {
        report.worst_coordinate = {l, offset / w.cols(), offset % w.cols()};
        break;
      }
      offset -= w.size();
    }
  }
  return report;
}

bool reset_term_active(const Network& net, const std::vector<SoftTrace>& soft_traces,
                       const SpikeTrain& input, const SpikeTrain& target, double temp) {
  Matrix input_filtered;
  const auto layers = soft_backward(net, soft_traces, input, target, temp, true, input_filtered);
  for (std::size_t l = 0; l < soft_traces.size(); ++l) {
    const auto& tr = soft_traces[l];
    for (std::size_t i = 0; i < tr.u.rows(); ++i)
      for (std::size_t t = 0; t + 1 < tr.u.cols(); ++t) {
        const double s = tr.s_soft(i, t);
        if (s > 0.1 && s < 0.9 && tr.u(i, t) != 0.0 && layers[l].du(i, t + 1) != 0.0)
          return true;
      }
  }
  return false;
}

OracleInstance make_oracle_instance(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t depth = rng.uniform_int(1, 3);
  const std::size_t n_in = rng.uniform_int(1, 8);
  const std::size_t steps = rng.uniform_int(2, 20);
  std::vector<DenseLifLayer> layers;
  std::size_t fan_in = n_in;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t n_out = rng.uniform_int(1, 8);
    Matrix w(n_out, fan_in);
    for (double& v : w.values()) v = 0.5 * rng.normal();
    layers.emplace_back(std::move(w), LifParams{});
    fan_in = n_out;
  }
  OracleInstance inst;
  inst.seed = seed;
  inst.net = Network(std::move(layers));
  inst.input = bernoulli_train(n_in, steps, 0.3, rng);
  inst.target = bernoulli_train(fan_in, steps, 0.2, rng);
  return inst;
}

OracleResult run_oracle_instance(std::uint64_t seed, double temp, double h,
                                 FdPrecision precision) {
  const OracleInstance inst = make_oracle_instance(seed);
  const auto traces = soft_forward(inst.net, inst.input, temp);
  const auto numeric = central_fd(inst.net, inst.input, inst.target, temp, h, precision);
  const auto exact = soft_bptt(inst.net, traces, inst.input, inst.target, temp, true);
  const auto no_reset = soft_bptt(inst.net, traces, inst.input, inst.target, temp, false);
  OracleResult r;
  r.seed = seed;
  r.layers = inst.net.depth();
  r.max_rel_err = compare(exact, numeric).max_rel_err;
  r.max_rel_err_no_reset = compare(no_reset, numeric).max_rel_err;
  r.reset_active = reset_term_active(inst.net, traces, inst.input, inst.target, temp);
  return r;
}

}  // namespace spikegrad
