#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairscrub/matrix.hpp"
#include "fairscrub/mlp.hpp"
#include "fairscrub/ops.hpp"

namespace fairscrub {

/// Cumulative dataset fractions at which the online code retrains its probe.
struct FractionSchedule {
  std::vector<double> fractions{0.001, 0.002, 0.004, 0.008, 0.016, 0.032,
                                0.0625, 0.125, 0.25, 0.5, 1.0};

  /// Strictly increasing, in (0, 1], last element 1.0.
  void validate() const;

  /// Block end indices t_1 < ... < t_S = n, each fraction rounded up to at
  /// least one example. Throws ConfigError if a block would be empty.
  std::vector<std::size_t> block_ends(std::size_t n) const;

  /// Comma-separated fractions, e.g. "0.1,0.5,1".
  static FractionSchedule parse(const std::string& text);
};

/// Probe hyperparameters. One hidden ReLU layer trained with AdamW and
/// early stopping on a held-out slice of its training rows.
struct ProbeConfig {
  std::size_t hidden = 100;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  std::size_t batch_size = 200;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double tol = 1e-4;
  double validation_fraction = 0.1;
};

/// Trained probe q. Inputs are standardized with training-set statistics.
/// When the training labels contain a single class, q degenerates to a
/// Laplace-smoothed label-frequency predictor and `majority_fallback()` is set.
class Probe {
 public:
  static Probe fit(const Matrix& reps, std::span<const Label> labels, std::size_t num_classes,
                   std::uint64_t seed, const ProbeConfig& cfg = {});

  Matrix predict_proba(const Matrix& reps) const;
  std::vector<Label> predict(const Matrix& reps) const;

  bool majority_fallback() const { return !net_.has_value(); }
  std::size_t epochs_trained() const { return epochs_; }
  std::size_t num_classes() const { return num_classes_; }

 private:
  std::optional<Mlp> net_;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::vector<double> prior_;
  std::size_t num_classes_ = 0;
  std::size_t epochs_ = 0;
};

struct ProbeEvaluation {
  Probe probe;
  std::vector<std::size_t> heldout_rows;
  std::vector<Label> predictions;  // on heldout_rows
  std::vector<Label> truth;
};

/// Seeded 80/20 split; fits a probe on the 80% and predicts the 20%.
ProbeEvaluation train_probe(const Matrix& reps, std::span<const Label> labels,
                            std::size_t num_classes, std::uint64_t seed,
                            const ProbeConfig& cfg = {});

struct MdlResult {
  double total_bits = 0.0;
  std::vector<double> block_bits;     // block 0 is the uniform code
  std::vector<std::size_t> block_ends;
  std::size_t fallback_blocks = 0;    // probes that degenerated to label frequencies
};

/// Worker count for online_mdl: FAIRSCRUB_THREADS if set, else hardware
/// concurrency; always >= 1.
std::size_t probe_threads_from_env();

/// Online-code description length of `labels` given `reps`, in bits. Rows
/// are shuffled by `seed`; block i > 0 is coded by a fresh probe trained on
/// all rows before it. Results do not depend on `threads`.
MdlResult online_mdl(const Matrix& reps, std::span<const Label> labels,
                     const FractionSchedule& schedule, std::size_t num_classes,
                     std::uint64_t seed, const ProbeConfig& cfg = {}, std::size_t threads = 1);

/// Bits per 1000 labels.
double normalized_mdl(double mdl_bits, std::size_t dataset_size);

/// Percent-valued classification metrics; macro averages run over every
/// class present in either the labels or the predictions.
struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double delta_z = 0.0;  // accuracy - random baseline, in points
};

ClassificationMetrics metrics(std::span<const Label> predictions, std::span<const Label> labels,
                              double random_baseline_percent);

struct ProbeReport {
  std::string attribute;  // "y", "z1", ...
  bool is_protected = false;
  std::size_t num_examples = 0;
  std::size_t num_classes = 0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  std::optional<double> delta_z;  // protected attributes only
  double mdl_bits = 0.0;
  double normalized_mdl = 0.0;
  std::vector<double> per_block_codelengths;
  std::vector<std::size_t> block_ends;
  bool majority_fallback = false;

  std::string to_json() const;
  static ProbeReport from_json(const std::string& text);
};

/// Probe F1 plus online-code MDL for one (representation, attribute) pair.
/// The random baseline is 100 / num_classes (balanced labels).
ProbeReport evaluate_representation(const Matrix& reps, std::span<const Label> labels,
                                    std::size_t num_classes, const std::string& attribute,
                                    bool is_protected, std::uint64_t seed,
                                    const FractionSchedule& schedule = {},
                                    const ProbeConfig& cfg = {}, std::size_t threads = 1);

/// Aligned text table: one row per setting, and per attribute an F1 column
/// and an MDL column (kbits) with the expected direction arrows.
std::string render_table(const std::vector<std::string>& row_names,
                         const std::vector<std::vector<ProbeReport>>& rows);

}  // namespace fairscrub
