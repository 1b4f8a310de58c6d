#pragma once

#include <span>
#include <vector>

#include "fairscrub/matrix.hpp"
#include "fairscrub/rng.hpp"

namespace fairscrub {

using Label = int;

// Smallest argument ever passed to a log of a probability.
inline constexpr double kLogFloor = 1e-12;

/// Max-subtracted softmax. Throws DomainError on non-finite logits.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);
Matrix softmax_rows(const Matrix& logits);

/// Shannon entropy in nats. Throws DomainError unless p is a distribution.
double entropy(std::span<const double> p);

/// softmax((log_probs + g) / tau) with g = 0 (deterministic mode).
std::vector<double> gumbel_softmax(std::span<const double> log_probs, double tau);

/// softmax((log_probs + g) / tau) with g_j = -log(-log U_j), U_j ~ U(0,1)
/// clamped to (1e-12, 1 - 1e-12).
std::vector<double> gumbel_softmax(std::span<const double> log_probs, double tau, Rng& rng);

/// A batch-mean loss together with its gradient w.r.t. the logits.
struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

/// Mean over rows of -log softmax(logits)[label]; gradient is
/// (softmax - onehot) / rows.
LossAndGrad cross_entropy(const Matrix& logits, std::span<const Label> labels);

/// Per-row cross-entropy without reduction.
std::vector<double> cross_entropy_per_example(const Matrix& logits,
                                              std::span<const Label> labels);

void check_labels(std::span<const Label> labels, std::size_t num_classes, const char* what);

}  // namespace fairscrub
