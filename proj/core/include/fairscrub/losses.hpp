#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fairscrub/matrix.hpp"
#include "fairscrub/ops.hpp"
#include "fairscrub/rng.hpp"

namespace fairscrub {

/// Weights of the scrubber objective L_c - lambda1 * sum_n H_n + lambda2 * sum_n delta_n.
struct LossConfig {
  double lambda1 = 1.0;  // entropy weight
  double lambda2 = 0.0;  // delta weight; off by default for binary attributes
  double tau = 1.0;      // Gumbel-softmax temperature
  bool gumbel_noise = true;
  std::size_t num_attrs = 1;

  void validate() const;
};

/// One-hot row selecting the true protected class.
struct OutputMask {
  std::vector<double> m;

  static OutputMask for_label(Label z, std::size_t num_classes);
  double dot(std::span<const double> probs) const;
};

/// Cross-entropy of the bias discriminator against the protected labels.
LossAndGrad discriminator_loss(const Matrix& disc_logits, std::span<const Label> z);

/// Batch-mean entropy (nats) of softmax(disc_logits) and its gradient.
LossAndGrad entropy_term(const Matrix& disc_logits);

/// Per-example delta = mask . gumbel_softmax(log_softmax(logits), tau).
std::vector<double> delta_per_example(const Matrix& disc_logits, std::span<const Label> z,
                                      const LossConfig& cfg, Rng& rng);

/// Batch-mean delta and its gradient. Gumbel draws are held constant in the
/// gradient (reparameterisation).
LossAndGrad delta_loss(const Matrix& disc_logits, std::span<const Label> z,
                       const LossConfig& cfg, Rng& rng);

struct ScrubberLoss {
  double total = 0.0;    // L_s
  double task = 0.0;     // L_c
  double entropy = 0.0;  // sum_n mean H(d_n(u))
  double delta = 0.0;    // sum_n mean delta(d_n(u))
  Matrix task_grad;               // dL_s / d task logits
  std::vector<Matrix> disc_grads; // dL_s / d disc logits, one per attribute
};

/// Composite scrubber loss over N protected attributes.
ScrubberLoss scrubber_loss(const Matrix& task_logits, std::span<const Matrix> disc_logits,
                           std::span<const Label> y,
                           std::span<const std::vector<Label>> z_per_attr,
                           const LossConfig& cfg, Rng& rng);

}  // namespace fairscrub
