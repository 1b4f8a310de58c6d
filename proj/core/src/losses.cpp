#include "fairscrub/losses.hpp"

#include <cmath>

#include "fairscrub/error.hpp"

namespace fairscrub {

void LossConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw DomainError("LossConfig: lambda1 and lambda2 must be non-negative");
  }
  if (!(tau > 0.0)) throw DomainError("LossConfig: tau must be positive");
  if (num_attrs == 0) throw DomainError("LossConfig: num_attrs must be at least 1");
}

OutputMask OutputMask::for_label(Label z, std::size_t num_classes) {
  if (z < 0 || static_cast<std::size_t>(z) >= num_classes) {
    throw DomainError("OutputMask: label out of range");
  }
  OutputMask mask;
  mask.m.assign(num_classes, 0.0);
  mask.m[static_cast<std::size_t>(z)] = 1.0;
  return mask;
}

double OutputMask::dot(std::span<const double> probs) const {
  if (probs.size() != m.size()) throw DimensionError("OutputMask::dot: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) s += m[k] * probs[k];
  return s;
}

LossAndGrad discriminator_loss(const Matrix& disc_logits, std::span<const Label> z) {
  return cross_entropy(disc_logits, z);
}

LossAndGrad entropy_term(const Matrix& disc_logits) {
  if (disc_logits.rows() == 0) throw UsageError("entropy_term: empty batch");
  const double inv_m = 1.0 / static_cast<double>(disc_logits.rows());
  LossAndGrad out{0.0, Matrix(disc_logits.rows(), disc_logits.cols())};
  for (std::size_t r = 0; r < disc_logits.rows(); ++r) {
    const auto lp = log_softmax(disc_logits.row(r));
    double h = 0.0;
    for (double l : lp) h -= std::exp(l) * l;
    // dH/dz_j = -p_j (log p_j + H)
    for (std::size_t j = 0; j < lp.size(); ++j) {
      out.grad(r, j) = -std::exp(lp[j]) * (lp[j] + h) * inv_m;
    }
    out.loss += h;
  }
  out.loss *= inv_m;
  return out;
}

namespace {

// Relaxed sample q for one row; deterministic when noise is off.
std::vector<double> relaxed_row(std::span<const double> logits, const LossConfig& cfg, Rng& rng) {
  const auto lp = log_softmax(logits);
  return cfg.gumbel_noise ? gumbel_softmax(lp, cfg.tau, rng) : gumbel_softmax(lp, cfg.tau);
}

void check_delta_inputs(const Matrix& disc_logits, std::span<const Label> z,
                        const LossConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw DomainError("delta_loss: tau must be positive");
  if (z.size() != disc_logits.rows()) throw DimensionError("delta_loss: label count mismatch");
  check_labels(z, disc_logits.cols(), "delta_loss");
}

}  // namespace

std::vector<double> delta_per_example(const Matrix& disc_logits, std::span<const Label> z,
                                      const LossConfig& cfg, Rng& rng) {
  check_delta_inputs(disc_logits, z, cfg);
  std::vector<double> out(disc_logits.rows());
  for (std::size_t r = 0; r < disc_logits.rows(); ++r) {
    const auto q = relaxed_row(disc_logits.row(r), cfg, rng);
    out[r] = OutputMask::for_label(z[r], q.size()).dot(q);
  }
  return out;
}

LossAndGrad delta_loss(const Matrix& disc_logits, std::span<const Label> z,
                       const LossConfig& cfg, Rng& rng) {
  check_delta_inputs(disc_logits, z, cfg);
  if (disc_logits.rows() == 0) throw UsageError("delta_loss: empty batch");
  const double inv_m = 1.0 / static_cast<double>(disc_logits.rows());
  LossAndGrad out{0.0, Matrix(disc_logits.rows(), disc_logits.cols())};
  for (std::size_t r = 0; r < disc_logits.rows(); ++r) {
    const auto q = relaxed_row(disc_logits.row(r), cfg, rng);
    const auto k = static_cast<std::size_t>(z[r]);
    const double qk = q[k];
    out.loss += qk;
    // The log_softmax Jacobian drops out because sum_j d(q_k)/d(a_j) = 0.
    for (std::size_t j = 0; j < q.size(); ++j) {
      out.grad(r, j) = qk * ((j == k ? 1.0 : 0.0) - q[j]) / cfg.tau * inv_m;
    }
  }
  out.loss *= inv_m;
  return out;
}

ScrubberLoss scrubber_loss(const Matrix& task_logits, std::span<const Matrix> disc_logits,
                           std::span<const Label> y,
                           std::span<const std::vector<Label>> z_per_attr,
                           const LossConfig& cfg, Rng& rng) {
  cfg.validate();
  if (disc_logits.size() != z_per_attr.size() || disc_logits.size() != cfg.num_attrs) {
    throw UsageError("scrubber_loss: need one discriminator output and one label set per attribute");
  }
  ScrubberLoss out;
  auto task = cross_entropy(task_logits, y);
  out.task = task.loss;
  out.task_grad = std::move(task.grad);
  out.total = out.task;
  for (std::size_t n = 0; n < disc_logits.size(); ++n) {
    if (disc_logits[n].rows() != task_logits.rows()) {
      throw DimensionError("scrubber_loss: discriminator batch size mismatch");
    }
    auto h = entropy_term(disc_logits[n]);
    auto d = delta_loss(disc_logits[n], z_per_attr[n], cfg, rng);
    out.entropy += h.loss;
    out.delta += d.loss;
    Matrix grad(disc_logits[n].rows(), disc_logits[n].cols());
    axpy_inplace(grad, -cfg.lambda1, h.grad);
    axpy_inplace(grad, cfg.lambda2, d.grad);
    out.disc_grads.push_back(std::move(grad));
  }
  out.total = out.task - cfg.lambda1 * out.entropy + cfg.lambda2 * out.delta;
  return out;
}

}  // namespace fairscrub
