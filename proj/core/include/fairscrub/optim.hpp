#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fairscrub {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

/// First/second moment buffers for one parameter group.
struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// One AdamW update with decoupled weight decay and bias-corrected moments:
///   p <- p - lr*wd*p
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Moment buffers are lazily sized on the first call.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                double learning_rate, const AdamWConfig& cfg);

/// L2 norm over several gradient buffers taken together.
double global_norm(std::span<const std::span<const double>> grads);

/// Rescales every buffer so the global norm is at most max_norm. Returns the
/// norm before clipping.
double clip_global_norm(std::span<const std::span<double>> grads, double max_norm);

}  // namespace fairscrub
