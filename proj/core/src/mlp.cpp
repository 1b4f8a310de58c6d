#include "fairscrub/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairscrub/error.hpp"

namespace fairscrub {

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation hidden)
    : sizes_(std::move(layer_sizes)), hidden_(hidden) {
  if (sizes_.size() < 2) throw DimensionError("Mlp: need at least input and output sizes");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] == 0 || sizes_[l + 1] == 0) throw DimensionError("Mlp: zero-width layer");
    LayerShape shape;
    shape.in = sizes_[l];
    shape.out = sizes_[l + 1];
    shape.weight_offset = offset;
    offset += shape.in * shape.out;
    shape.bias_offset = offset;
    offset += shape.out;
    layers_.push_back(shape);
  }
  params_.assign(offset, 0.0);
}

Mlp Mlp::glorot(std::vector<std::size_t> layer_sizes, Activation hidden, Rng& rng) {
  Mlp net(std::move(layer_sizes), hidden);
  for (const auto& shape : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(shape.in + shape.out));
    for (std::size_t k = 0; k < shape.in * shape.out; ++k) {
      net.params_[shape.weight_offset + k] = rng.uniform(-limit, limit);
    }
  }
  return net;
}

Mlp Mlp::identity(std::size_t dim) {
  Mlp net({dim, dim}, Activation::Identity);
  for (std::size_t i = 0; i < dim; ++i) net.set_weight(0, i, i, 1.0);
  return net;
}

void GradientTape::zero() {
  std::fill(params.begin(), params.end(), 0.0);
  std::fill(input.data().begin(), input.data().end(), 0.0);
}

void GradientTape::accumulate(const GradientTape& other) {
  if (params.size() != other.params.size()) {
    throw DimensionError("GradientTape::accumulate: parameter count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i] += other.params[i];
  add_inplace(input, other.input);
}

namespace {

void check_input(const Mlp& net, const Matrix& batch) {
  if (net.num_layers() == 0) throw UsageError("forward: empty network");
  if (batch.cols() != net.input_dim()) {
    throw DimensionError("forward: batch has " + std::to_string(batch.cols()) +
                         " columns, network expects " + std::to_string(net.input_dim()));
  }
}

// out = in * W + b for one layer, then the hidden activation if requested.
Matrix apply_layer(const Mlp& net, std::size_t l, const Matrix& in, bool activate) {
  const LayerShape& shape = net.layer(l);
  const double* w = net.params().data() + shape.weight_offset;
  const double* b = net.params().data() + shape.bias_offset;
  Matrix out(in.rows(), shape.out);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const double* x = in.row(r).data();
    double* y = out.row(r).data();
    std::copy(b, b + shape.out, y);
    for (std::size_t i = 0; i < shape.in; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* wi = w + i * shape.out;
      for (std::size_t j = 0; j < shape.out; ++j) y[j] += xi * wi[j];
    }
    if (activate && net.hidden_activation() == Activation::ReLU) {
      for (std::size_t j = 0; j < shape.out; ++j) y[j] = y[j] > 0.0 ? y[j] : 0.0;
    }
  }
  return out;
}

}  // namespace

ForwardPass forward(const Mlp& net, const Matrix& batch) {
  check_input(net, batch);
  ForwardPass pass;
  pass.cache.net = &net;
  pass.cache.version = net.version();
  pass.cache.layer_inputs.reserve(net.num_layers());
  pass.cache.layer_inputs.push_back(batch);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const bool last = l + 1 == net.num_layers();
    Matrix out = apply_layer(net, l, pass.cache.layer_inputs.back(), !last);
    if (last) {
      pass.output = std::move(out);
    } else {
      pass.cache.layer_inputs.push_back(std::move(out));
    }
  }
  if (!pass.output.all_finite()) throw NumericalError("forward: non-finite output");
  return pass;
}

Matrix infer(const Mlp& net, const Matrix& batch) {
  check_input(net, batch);
  Matrix current = apply_layer(net, 0, batch, net.num_layers() > 1);
  for (std::size_t l = 1; l < net.num_layers(); ++l) {
    current = apply_layer(net, l, current, l + 1 < net.num_layers());
  }
  if (!current.all_finite()) throw NumericalError("infer: non-finite output");
  return current;
}

GradientTape backward(const Mlp& net, const ForwardCache& cache, const Matrix& upstream) {
  if (cache.net != &net || cache.version != net.version() ||
      cache.layer_inputs.size() != net.num_layers()) {
    throw UsageError("backward: cache does not belong to this network state");
  }
  const std::size_t batch = cache.layer_inputs.front().rows();
  if (upstream.rows() != batch || upstream.cols() != net.output_dim()) {
    throw DimensionError("backward: upstream gradient shape mismatch");
  }

  GradientTape tape;
  tape.params.assign(net.num_params(), 0.0);
  Matrix grad = upstream;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const LayerShape& shape = net.layer(l);
    const Matrix& in = cache.layer_inputs[l];
    const double* w = net.params().data() + shape.weight_offset;
    double* dw = tape.params.data() + shape.weight_offset;
    double* db = tape.params.data() + shape.bias_offset;
    Matrix grad_in(batch, shape.in);
    for (std::size_t r = 0; r < batch; ++r) {
      const double* g = grad.row(r).data();
      const double* x = in.row(r).data();
      double* gx = grad_in.row(r).data();
      for (std::size_t j = 0; j < shape.out; ++j) db[j] += g[j];
      for (std::size_t i = 0; i < shape.in; ++i) {
        const double* wi = w + i * shape.out;
        double* dwi = dw + i * shape.out;
        const double xi = x[i];
        double acc = 0.0;
        for (std::size_t j = 0; j < shape.out; ++j) {
          dwi[j] += xi * g[j];
          acc += g[j] * wi[j];
        }
        gx[i] = acc;
      }
    }
    // Layer l's input is the activated output of layer l-1.
    if (l > 0 && net.hidden_activation() == Activation::ReLU) {
      for (std::size_t r = 0; r < batch; ++r) {
        const double* x = in.row(r).data();
        double* gx = grad_in.row(r).data();
        for (std::size_t i = 0; i < shape.in; ++i) {
          if (!(x[i] > 0.0)) gx[i] = 0.0;
        }
      }
    }
    grad = std::move(grad_in);
  }
  tape.input = std::move(grad);
  return tape;
}

}  // namespace fairscrub
