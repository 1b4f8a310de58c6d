#include "fairscrub/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fairscrub/error.hpp"

namespace fairscrub {

std::string_view regime_name(Regime regime) {
  return regime == Regime::Ads ? "ads" : "no-adversary";
}

Regime parse_regime(std::string_view name) {
  if (name == "ads") return Regime::Ads;
  if (name == "no-adversary") return Regime::NoAdversary;
  throw UsageError("unknown regime '" + std::string(name) + "' (expected ads|no-adversary)");
}

void TrainConfig::validate() const {
  loss.validate();
  adamw.validate();
  if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (disc_steps < 1) throw ConfigError("TrainConfig: disc_steps must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("TrainConfig: learning rate must be >= 0");
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void check_batch(const AdsModel& model, const Dataset& batch) {
  if (batch.size() == 0) throw UsageError("empty minibatch");
  if (batch.num_attrs() != model.num_attrs()) {
    throw UsageError("minibatch has " + std::to_string(batch.num_attrs()) +
                     " protected attributes, model has " + std::to_string(model.num_attrs()));
  }
}

}  // namespace

std::string TrainTrace::to_csv() const {
  std::string out = "iter,L_d,L_c,H,delta,L_s\n";
  for (const auto& r : records) {
    out += std::to_string(r.iter);
    out += ',';
    out += r.disc_loss ? format_double(*r.disc_loss) : std::string("NA");
    for (double v : {r.task_loss, r.entropy, r.delta, r.scrubber_loss}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void TrainTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv();
}

DiscriminatorGradients discriminator_gradients(const AdsModel& model, const Dataset& batch) {
  check_batch(model, batch);
  const Matrix u = scrub(model, encode(model, batch.x));
  DiscriminatorGradients out;
  for (std::size_t n = 0; n < model.num_attrs(); ++n) {
    auto pass = forward(model.discriminator(n), u);
    auto ce = discriminator_loss(pass.output, batch.z[n]);
    out.loss += ce.loss;
    out.tapes.push_back(backward(model.discriminator(n), pass.cache, ce.grad));
  }
  return out;
}

ScrubberGradients scrubber_gradients(const AdsModel& model, const Dataset& batch,
                                     const LossConfig& loss, Regime regime, Rng& gumbel_rng) {
  check_batch(model, batch);
  auto enc = forward(model.encoder(), batch.x);
  auto scr = forward(model.scrubber(), enc.output);
  auto task = forward(model.task(), scr.output);

  ScrubberGradients out;
  std::vector<ForwardPass> disc_passes;
  if (regime == Regime::Ads) {
    std::vector<Matrix> disc_logits;
    for (std::size_t n = 0; n < model.num_attrs(); ++n) {
      disc_passes.push_back(forward(model.discriminator(n), scr.output));
      disc_logits.push_back(disc_passes.back().output);
    }
    LossConfig cfg = loss;
    cfg.num_attrs = model.num_attrs();
    out.loss = scrubber_loss(task.output, disc_logits, batch.y, batch.z, cfg, gumbel_rng);
  } else {
    auto ce = cross_entropy(task.output, batch.y);
    out.loss.task = ce.loss;
    out.loss.total = ce.loss;
    out.loss.task_grad = std::move(ce.grad);
  }

  out.task = backward(model.task(), task.cache, out.loss.task_grad);
  Matrix du = out.task.input;
  const bool adversarial = regime == Regime::Ads && (loss.lambda1 != 0.0 || loss.lambda2 != 0.0);
  if (adversarial) {
    for (std::size_t n = 0; n < model.num_attrs(); ++n) {
      auto tape = backward(model.discriminator(n), disc_passes[n].cache, out.loss.disc_grads[n]);
      add_inplace(du, tape.input);
    }
  }
  out.scrubber = backward(model.scrubber(), scr.cache, du);
  out.encoder = backward(model.encoder(), enc.cache, out.scrubber.input);
  return out;
}

Trainer::Trainer(AdsModel& model, TrainConfig cfg)
    : model_(model),
      cfg_(std::move(cfg)),
      disc_states_(model.num_attrs()),
      gumbel_rng_(derive_seed(cfg_.seed, "gumbel")) {
  cfg_.validate();
  if (cfg_.regime == Regime::NoAdversary) {
    cfg_.loss.lambda1 = 0.0;
    cfg_.loss.lambda2 = 0.0;
  }
  cfg_.loss.num_attrs = model.num_attrs();
}

TrainRecord Trainer::step(const Dataset& minibatch) {
  TrainRecord record;
  record.iter = iter_;

  // Phase 1: theta_d only.
  if (cfg_.regime == Regime::Ads) {
    for (std::size_t k = 0; k < cfg_.disc_steps; ++k) {
      auto grads = discriminator_gradients(model_, minibatch);
      if (!std::isfinite(grads.loss)) {
        throw NumericalError("iteration " + std::to_string(iter_) +
                             ": non-finite discriminator loss");
      }
      if (k == 0) record.disc_loss = grads.loss;
      std::vector<std::span<double>> bufs;
      for (auto& t : grads.tapes) bufs.emplace_back(t.params);
      clip_global_norm(bufs, cfg_.clip_norm);
      for (std::size_t n = 0; n < model_.num_attrs(); ++n) {
        adamw_step(model_.discriminator(n).mutable_params(), grads.tapes[n].params,
                   disc_states_[n], cfg_.learning_rate, cfg_.adamw);
      }
    }
  }

  // Phase 2: theta_h, theta_s, theta_c against the freshly updated theta_d.
  auto grads = scrubber_gradients(model_, minibatch, cfg_.loss, cfg_.regime, gumbel_rng_);
  record.task_loss = grads.loss.task;
  record.entropy = grads.loss.entropy;
  record.delta = grads.loss.delta;
  record.scrubber_loss = grads.loss.total;
  if (!std::isfinite(record.scrubber_loss)) {
    throw NumericalError("iteration " + std::to_string(iter_) + ": non-finite scrubber loss (L_c=" +
                         format_double(record.task_loss) + ", H=" + format_double(record.entropy) +
                         ", delta=" + format_double(record.delta) + ")");
  }
  std::vector<std::span<double>> bufs{grads.encoder.params, grads.scrubber.params,
                                      grads.task.params};
  clip_global_norm(bufs, cfg_.clip_norm);
  adamw_step(model_.encoder().mutable_params(), grads.encoder.params, encoder_state_,
             cfg_.learning_rate, cfg_.adamw);
  adamw_step(model_.scrubber().mutable_params(), grads.scrubber.params, scrubber_state_,
             cfg_.learning_rate, cfg_.adamw);
  adamw_step(model_.task().mutable_params(), grads.task.params, task_state_, cfg_.learning_rate,
             cfg_.adamw);
  ++iter_;
  return record;
}

TrainResult train(AdsModel model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.size() == 0) throw UsageError("train: empty dataset");
  if (data.dim() != model.input_dim()) throw DimensionError("train: dataset dim != model input");
  if (data.num_targets > model.task().output_dim()) {
    throw UsageError("train: target arity exceeds task classifier outputs");
  }
  for (std::size_t n = 0; n < data.num_attrs() && n < model.num_attrs(); ++n) {
    if (data.protected_arities[n] > model.discriminator(n).output_dim()) {
      throw UsageError("train: protected arity exceeds discriminator outputs");
    }
  }

  TrainTrace trace;
  Trainer trainer(model, cfg);
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (cfg.max_iterations && trainer.iterations() >= *cfg.max_iterations) {
        return {std::move(model), std::move(trace)};
      }
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const Dataset batch =
          data.subset(std::span<const std::size_t>(order.data() + start, end - start));
      trace.records.push_back(trainer.step(batch));
    }
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace fairscrub
