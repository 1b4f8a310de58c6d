#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "fairscrub/matrix.hpp"
#include "fairscrub/mlp.hpp"

namespace fairscrub {

struct ModelDims {
  std::size_t input = 64;
  std::size_t embed = 32;
  std::size_t scrubbed = 32;
  std::size_t hidden = 32;
  std::size_t num_targets = 2;
  std::vector<std::size_t> protected_arities{2};
};

/// Which representation an evaluation probes. The three encoder taps read
/// h(x) from models trained under different regimes; AdsScrubbed reads s(h(x)).
enum class RepresentationTap { PretrainedEncoder, FinetunedEncoder, AdsEncoder, AdsScrubbed };

inline constexpr RepresentationTap kAllTaps[] = {
    RepresentationTap::PretrainedEncoder, RepresentationTap::FinetunedEncoder,
    RepresentationTap::AdsEncoder, RepresentationTap::AdsScrubbed};

std::string_view tap_name(RepresentationTap tap);
RepresentationTap parse_tap(std::string_view name);

/// Encoder h, scrubber s, task classifier c and one bias discriminator per
/// protected attribute. Each network owns a disjoint parameter group.
class AdsModel {
 public:
  AdsModel(Mlp encoder, Mlp scrubber, Mlp task, std::vector<Mlp> discriminators);

  /// Encoder and scrubber are two-layer ReLU nets; c and every d_n are single
  /// linear layers. Each network draws from its own derived seed.
  static AdsModel create(const ModelDims& dims, std::uint64_t seed);

  const Mlp& encoder() const { return encoder_; }
  const Mlp& scrubber() const { return scrubber_; }
  const Mlp& task() const { return task_; }
  const Mlp& discriminator(std::size_t n) const;
  const std::vector<Mlp>& discriminators() const { return discriminators_; }

  Mlp& encoder() { return encoder_; }
  Mlp& scrubber() { return scrubber_; }
  Mlp& task() { return task_; }
  Mlp& discriminator(std::size_t n);

  std::size_t num_attrs() const { return discriminators_.size(); }
  std::size_t input_dim() const { return encoder_.input_dim(); }
  std::size_t num_params() const;

  bool same_parameters(const AdsModel& other) const;

 private:
  Mlp encoder_;
  Mlp scrubber_;
  Mlp task_;
  std::vector<Mlp> discriminators_;
};

Matrix encode(const AdsModel& model, const Matrix& batch);
Matrix scrub(const AdsModel& model, const Matrix& embeddings);
Matrix predict_task(const AdsModel& model, const Matrix& scrubbed);
Matrix predict_bias(const AdsModel& model, const Matrix& scrubbed, std::size_t attr);

/// Representations for the given tap: h(x) for encoder taps, s(h(x)) for
/// AdsScrubbed. The caller is responsible for passing the model trained under
/// the regime the tap names.
Matrix tap(const AdsModel& model, const Matrix& batch, RepresentationTap kind);

}  // namespace fairscrub
