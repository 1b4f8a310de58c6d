#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairscrub/dataset.hpp"
#include "fairscrub/losses.hpp"
#include "fairscrub/model.hpp"
#include "fairscrub/optim.hpp"

namespace fairscrub {

enum class Regime { Ads, NoAdversary };

std::string_view regime_name(Regime regime);
Regime parse_regime(std::string_view name);

struct TrainConfig {
  LossConfig loss;
  double learning_rate = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  AdamWConfig adamw;
  Regime regime = Regime::Ads;
  std::size_t disc_steps = 1;  // discriminator updates per scrubber update
  double clip_norm = 5.0;      // global-norm clipping per phase; <= 0 disables
  /// Stop after this many scrubber updates even if epochs remain.
  std::optional<std::size_t> max_iterations;

  void validate() const;
};

/// One scrubber update. disc_loss is empty when no discriminator was trained.
/// disc_loss, entropy and delta are summed over protected attributes.
struct TrainRecord {
  std::size_t iter = 0;
  std::optional<double> disc_loss;
  double task_loss = 0.0;
  double entropy = 0.0;
  double delta = 0.0;
  double scrubber_loss = 0.0;
};

struct TrainTrace {
  std::vector<TrainRecord> records;

  /// Columns iter,L_d,L_c,H,delta,L_s; L_d is "NA" when absent.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Gradients of the discriminator loss w.r.t. each theta_d, with u = s(h(x))
/// held fixed.
struct DiscriminatorGradients {
  std::vector<GradientTape> tapes;
  double loss = 0.0;  // summed over attributes
};

DiscriminatorGradients discriminator_gradients(const AdsModel& model, const Dataset& batch);

/// Gradients of the scrubber objective w.r.t. theta_c, theta_s, theta_h with
/// every theta_d fixed. NoAdversary ignores the adversarial terms entirely.
struct ScrubberGradients {
  GradientTape encoder;
  GradientTape scrubber;
  GradientTape task;
  ScrubberLoss loss;
};

ScrubberGradients scrubber_gradients(const AdsModel& model, const Dataset& batch,
                                     const LossConfig& loss, Regime regime, Rng& gumbel_rng);

/// Owns the optimizer state for one model and applies the two-phase
/// alternating update: discriminators first, then encoder/scrubber/task.
class Trainer {
 public:
  Trainer(AdsModel& model, TrainConfig cfg);

  TrainRecord step(const Dataset& minibatch);

  std::size_t iterations() const { return iter_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  AdsModel& model_;
  TrainConfig cfg_;
  AdamWState encoder_state_;
  AdamWState scrubber_state_;
  AdamWState task_state_;
  std::vector<AdamWState> disc_states_;
  Rng gumbel_rng_;
  std::size_t iter_ = 0;
};

struct TrainResult {
  AdsModel model;
  TrainTrace trace;
};

/// Epoch-wise shuffled minibatch training. Deterministic for a fixed seed.
TrainResult train(AdsModel model, const Dataset& data, const TrainConfig& cfg);

}  // namespace fairscrub
