#include "fairscrub/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairscrub/error.hpp"

namespace fairscrub {
namespace {

double checked_max(std::span<const double> logits) {
  if (logits.empty()) throw DomainError("softmax: empty input");
  double mx = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw DomainError("softmax: non-finite logit");
    mx = std::max(mx, v);
  }
  return mx;
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = checked_max(logits);
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - mx);
    sum += out[j];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double mx = checked_max(logits);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double log_norm = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) out[j] = logits[j] - log_norm;
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto p = softmax(logits.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

double entropy(std::span<const double> p) {
  if (p.empty()) throw DomainError("entropy: empty distribution");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("entropy: negative or non-finite mass");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DomainError("entropy: masses do not sum to 1");
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(std::max(v, kLogFloor));
  }
  return std::max(h, 0.0);
}

std::vector<double> gumbel_softmax(std::span<const double> log_probs, double tau) {
  if (!(tau > 0.0)) throw DomainError("gumbel_softmax: temperature must be positive");
  std::vector<double> scaled(log_probs.size());
  for (std::size_t j = 0; j < log_probs.size(); ++j) scaled[j] = log_probs[j] / tau;
  return softmax(scaled);
}

std::vector<double> gumbel_softmax(std::span<const double> log_probs, double tau, Rng& rng) {
  if (!(tau > 0.0)) throw DomainError("gumbel_softmax: temperature must be positive");
  std::vector<double> scaled(log_probs.size());
  for (std::size_t j = 0; j < log_probs.size(); ++j) {
    const double u = std::clamp(rng.uniform(), kLogFloor, 1.0 - kLogFloor);
    const double g = -std::log(-std::log(u));
    scaled[j] = (log_probs[j] + g) / tau;
  }
  return softmax(scaled);
}

void check_labels(std::span<const Label> labels, std::size_t num_classes, const char* what) {
  for (Label y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DomainError(std::string(what) + ": label " + std::to_string(y) +
                        " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

std::vector<double> cross_entropy_per_example(const Matrix& logits,
                                              std::span<const Label> labels) {
  if (labels.size() != logits.rows()) throw DimensionError("cross_entropy: label count mismatch");
  check_labels(labels, logits.cols(), "cross_entropy");
  std::vector<double> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    out[r] = -log_softmax(logits.row(r))[static_cast<std::size_t>(labels[r])];
  }
  return out;
}

LossAndGrad cross_entropy(const Matrix& logits, std::span<const Label> labels) {
  if (labels.size() != logits.rows()) throw DimensionError("cross_entropy: label count mismatch");
  if (logits.rows() == 0) throw UsageError("cross_entropy: empty batch");
  check_labels(labels, logits.cols(), "cross_entropy");
  const double inv_m = 1.0 / static_cast<double>(logits.rows());
  LossAndGrad out{0.0, Matrix(logits.rows(), logits.cols())};
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto lp = log_softmax(logits.row(r));
    const auto label = static_cast<std::size_t>(labels[r]);
    out.loss -= lp[label];
    for (std::size_t j = 0; j < lp.size(); ++j) {
      out.grad(r, j) = (std::exp(lp[j]) - (j == label ? 1.0 : 0.0)) * inv_m;
    }
  }
  out.loss *= inv_m;
  return out;
}

}  // namespace fairscrub
