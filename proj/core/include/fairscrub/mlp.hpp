#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fairscrub/matrix.hpp"
#include "fairscrub/rng.hpp"

namespace fairscrub {

/// Activation applied after every hidden layer. The output layer is always
/// linear so networks emit raw logits.
enum class Activation { ReLU, Identity };

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;  // in x out, row-major
  std::size_t bias_offset = 0;    // out
};

// Feed-forward network with all parameters in one contiguous buffer, so
// optimizers, checkpoints and finite-difference checks see a flat vector.
class Mlp {
 public:
  Mlp() = default;

  /// All parameters zero. layer_sizes = {input, hidden..., output}.
  Mlp(std::vector<std::size_t> layer_sizes, Activation hidden);

  /// Glorot-uniform weights, zero biases.
  static Mlp glorot(std::vector<std::size_t> layer_sizes, Activation hidden, Rng& rng);

  /// Single linear layer with identity weights (in == out) and zero bias.
  static Mlp identity(std::size_t dim);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t num_layers() const { return layers_.size(); }
  const LayerShape& layer(std::size_t l) const { return layers_[l]; }
  std::size_t input_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }
  std::size_t output_dim() const { return sizes_.empty() ? 0 : sizes_.back(); }
  Activation hidden_activation() const { return hidden_; }

  std::size_t num_params() const { return params_.size(); }
  std::span<const double> params() const { return params_; }
  /// Mutable access invalidates every ForwardCache taken from this network.
  std::span<double> mutable_params() {
    ++version_;
    return params_;
  }

  double weight(std::size_t l, std::size_t i, std::size_t j) const {
    return params_[layers_[l].weight_offset + i * layers_[l].out + j];
  }
  double bias(std::size_t l, std::size_t j) const {
    return params_[layers_[l].bias_offset + j];
  }
  void set_weight(std::size_t l, std::size_t i, std::size_t j, double v) {
    ++version_;
    params_[layers_[l].weight_offset + i * layers_[l].out + j] = v;
  }
  void set_bias(std::size_t l, std::size_t j, double v) {
    ++version_;
    params_[layers_[l].bias_offset + j] = v;
  }

  std::uint64_t version() const { return version_; }

  bool same_parameters(const Mlp& other) const {
    return sizes_ == other.sizes_ && hidden_ == other.hidden_ && params_ == other.params_;
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<LayerShape> layers_;
  std::vector<double> params_;
  Activation hidden_ = Activation::ReLU;
  std::uint64_t version_ = 0;
};

/// Per-layer inputs recorded by forward(); layer_inputs[l] is what layer l
/// consumed (post-activation of layer l-1, or the batch for l = 0).
struct ForwardCache {
  const Mlp* net = nullptr;
  std::uint64_t version = 0;
  std::vector<Matrix> layer_inputs;
};

struct ForwardPass {
  Matrix output;
  ForwardCache cache;
};

/// Gradients mirroring an Mlp's flat parameter buffer, plus the gradient
/// with respect to the network input for chaining through composed nets.
struct GradientTape {
  std::vector<double> params;
  Matrix input;

  void zero();
  /// this += other; shapes must match.
  void accumulate(const GradientTape& other);
};

/// Forward pass keeping the activations needed by backward().
ForwardPass forward(const Mlp& net, const Matrix& batch);

/// Forward pass without a cache.
Matrix infer(const Mlp& net, const Matrix& batch);

/// Backpropagates dL/d(output) through the network. The cache must come from
/// forward() on this very network with no parameter mutation in between.
GradientTape backward(const Mlp& net, const ForwardCache& cache, const Matrix& upstream);

}  // namespace fairscrub
