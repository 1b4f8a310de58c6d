#include "fairscrub/optim.hpp"

#include <cmath>

#include "fairscrub/error.hpp"

namespace fairscrub {

void AdamWConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("AdamW: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("AdamW: eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("AdamW: weight decay must be non-negative");
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                double learning_rate, const AdamWConfig& cfg) {
  if (params.size() != grads.size()) throw DimensionError("adamw_step: gradient size mismatch");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adamw_step: optimizer state does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - learning_rate * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] = params[i] * decay - learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

double global_norm(std::span<const std::span<const double>> grads) {
  double sq = 0.0;
  for (auto g : grads) {
    for (double v : g) sq += v * v;
  }
  return std::sqrt(sq);
}

double clip_global_norm(std::span<const std::span<double>> grads, double max_norm) {
  double sq = 0.0;
  for (auto g : grads) {
    for (double v : g) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto g : grads) {
      for (double& v : g) v *= scale;
    }
  }
  return norm;
}

}  // namespace fairscrub
