#include "fairscrub/model.hpp"

#include <string>

#include "fairscrub/error.hpp"
#include "fairscrub/rng.hpp"

namespace fairscrub {

std::string_view tap_name(RepresentationTap tap) {
  switch (tap) {
    case RepresentationTap::PretrainedEncoder: return "pretrained-encoder";
    case RepresentationTap::FinetunedEncoder: return "finetuned-encoder";
    case RepresentationTap::AdsEncoder: return "ads-encoder";
    case RepresentationTap::AdsScrubbed: return "ads-scrubbed";
  }
  return "unknown";
}

RepresentationTap parse_tap(std::string_view name) {
  for (auto tap : kAllTaps) {
    if (tap_name(tap) == name) return tap;
  }
  throw UsageError("unknown representation tap '" + std::string(name) + "'");
}

AdsModel::AdsModel(Mlp encoder, Mlp scrubber, Mlp task, std::vector<Mlp> discriminators)
    : encoder_(std::move(encoder)),
      scrubber_(std::move(scrubber)),
      task_(std::move(task)),
      discriminators_(std::move(discriminators)) {
  if (encoder_.num_layers() == 0 || scrubber_.num_layers() == 0 || task_.num_layers() == 0) {
    throw DimensionError("AdsModel: empty network");
  }
  if (discriminators_.empty()) throw DimensionError("AdsModel: need at least one discriminator");
  if (encoder_.output_dim() != scrubber_.input_dim()) {
    throw DimensionError("AdsModel: encoder output does not match scrubber input");
  }
  if (task_.input_dim() != scrubber_.output_dim()) {
    throw DimensionError("AdsModel: task classifier input does not match scrubber output");
  }
  for (const auto& d : discriminators_) {
    if (d.input_dim() != scrubber_.output_dim()) {
      throw DimensionError("AdsModel: discriminator input does not match scrubber output");
    }
    if (d.output_dim() < 2) throw DimensionError("AdsModel: protected attribute needs >= 2 classes");
  }
  if (task_.output_dim() < 2) throw DimensionError("AdsModel: target needs >= 2 classes");
}

AdsModel AdsModel::create(const ModelDims& dims, std::uint64_t seed) {
  Rng enc_rng(derive_seed(seed, "init/encoder"));
  Rng scr_rng(derive_seed(seed, "init/scrubber"));
  Rng task_rng(derive_seed(seed, "init/task"));
  auto encoder = Mlp::glorot({dims.input, dims.hidden, dims.embed}, Activation::ReLU, enc_rng);
  auto scrubber =
      Mlp::glorot({dims.embed, dims.hidden, dims.scrubbed}, Activation::ReLU, scr_rng);
  auto task = Mlp::glorot({dims.scrubbed, dims.num_targets}, Activation::Identity, task_rng);
  std::vector<Mlp> discs;
  for (std::size_t n = 0; n < dims.protected_arities.size(); ++n) {
    Rng d_rng(derive_seed(seed, "init/discriminator", n));
    discs.push_back(
        Mlp::glorot({dims.scrubbed, dims.protected_arities[n]}, Activation::Identity, d_rng));
  }
  return AdsModel(std::move(encoder), std::move(scrubber), std::move(task), std::move(discs));
}

const Mlp& AdsModel::discriminator(std::size_t n) const {
  if (n >= discriminators_.size()) throw UsageError("discriminator index out of range");
  return discriminators_[n];
}

Mlp& AdsModel::discriminator(std::size_t n) {
  if (n >= discriminators_.size()) throw UsageError("discriminator index out of range");
  return discriminators_[n];
}

std::size_t AdsModel::num_params() const {
  std::size_t total = encoder_.num_params() + scrubber_.num_params() + task_.num_params();
  for (const auto& d : discriminators_) total += d.num_params();
  return total;
}

bool AdsModel::same_parameters(const AdsModel& other) const {
  if (num_attrs() != other.num_attrs()) return false;
  if (!encoder_.same_parameters(other.encoder_) || !scrubber_.same_parameters(other.scrubber_) ||
      !task_.same_parameters(other.task_)) {
    return false;
  }
  for (std::size_t n = 0; n < num_attrs(); ++n) {
    if (!discriminators_[n].same_parameters(other.discriminators_[n])) return false;
  }
  return true;
}

Matrix encode(const AdsModel& model, const Matrix& batch) { return infer(model.encoder(), batch); }

Matrix scrub(const AdsModel& model, const Matrix& embeddings) {
  return infer(model.scrubber(), embeddings);
}

Matrix predict_task(const AdsModel& model, const Matrix& scrubbed) {
  return infer(model.task(), scrubbed);
}

Matrix predict_bias(const AdsModel& model, const Matrix& scrubbed, std::size_t attr) {
  return infer(model.discriminator(attr), scrubbed);
}

Matrix tap(const AdsModel& model, const Matrix& batch, RepresentationTap kind) {
  Matrix e = encode(model, batch);
  if (kind == RepresentationTap::AdsScrubbed) return scrub(model, e);
  return e;
}

}  // namespace fairscrub
