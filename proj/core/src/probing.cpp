#include "fairscrub/probing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "fairscrub/error.hpp"
#include "fairscrub/optim.hpp"
#include "fairscrub/rng.hpp"
#include "json.hpp"

namespace fairscrub {

// ---------------------------------------------------------------- schedule

void FractionSchedule::validate() const {
  if (fractions.empty()) throw ConfigError("FractionSchedule: empty schedule");
  double prev = 0.0;
  for (double f : fractions) {
    if (!(f > prev) || f > 1.0) {
      throw ConfigError("FractionSchedule: fractions must be strictly increasing within (0, 1]");
    }
    prev = f;
  }
  if (fractions.back() != 1.0) throw ConfigError("FractionSchedule: last fraction must be 1.0");
}

std::vector<std::size_t> FractionSchedule::block_ends(std::size_t n) const {
  validate();
  if (n == 0) throw ConfigError("FractionSchedule: empty dataset");
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    std::size_t t = n;
    if (i + 1 < fractions.size()) {
      // The epsilon keeps exact products such as 0.001 * 2000 from rounding up.
      const double raw = std::ceil(fractions[i] * static_cast<double>(n) - 1e-9);
      t = std::max<std::size_t>(1, static_cast<std::size_t>(raw));
    }
    if (!ends.empty() && t <= ends.back()) {
      throw ConfigError("FractionSchedule: block " + std::to_string(i) + " is empty for n = " +
                        std::to_string(n));
    }
    ends.push_back(t);
  }
  return ends;
}

FractionSchedule FractionSchedule::parse(const std::string& text) {
  FractionSchedule schedule;
  schedule.fractions.clear();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      schedule.fractions.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("FractionSchedule: cannot parse '" + item + "'");
    }
  }
  schedule.validate();
  return schedule;
}

// ------------------------------------------------------------------- probe

namespace {

double mean_cross_entropy(const Mlp& net, const Matrix& x, std::span<const Label> y) {
  return cross_entropy(infer(net, x), y).loss;
}

}  // namespace

Probe Probe::fit(const Matrix& reps, std::span<const Label> labels, std::size_t num_classes,
                 std::uint64_t seed, const ProbeConfig& cfg) {
  if (reps.rows() != labels.size()) throw DimensionError("Probe::fit: row/label count mismatch");
  if (num_classes < 2) throw DomainError("Probe::fit: need at least two classes");
  check_labels(labels, num_classes, "Probe::fit");

  Probe probe;
  probe.num_classes_ = num_classes;
  const std::size_t n = reps.rows();
  const std::size_t dim = reps.cols();

  std::vector<double> counts(num_classes, 0.0);
  for (Label y : labels) counts[static_cast<std::size_t>(y)] += 1.0;
  probe.prior_.resize(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    probe.prior_[k] = (counts[k] + 1.0) / (static_cast<double>(n) + static_cast<double>(num_classes));
  }

  probe.mean_.assign(dim, 0.0);
  probe.scale_.assign(dim, 1.0);
  if (n > 0) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < dim; ++c) probe.mean_[c] += reps(r, c);
    }
    for (double& m : probe.mean_) m /= static_cast<double>(n);
    std::vector<double> var(dim, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < dim; ++c) {
        const double d = reps(r, c) - probe.mean_[c];
        var[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < dim; ++c) {
      const double sd = std::sqrt(var[c] / static_cast<double>(n));
      probe.scale_[c] = sd > 1e-8 ? 1.0 / sd : 1.0;
    }
  }

  const auto distinct = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; });
  if (n < 2 || distinct < 2) return probe;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(seed, "probe/validation"));
  split_rng.shuffle(std::span<std::size_t>(order));
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(cfg.validation_fraction * static_cast<double>(n))));
  const std::size_t n_train = n - n_val;

  Matrix standardized(n, dim);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      standardized(r, c) = (reps(r, c) - probe.mean_[c]) * probe.scale_[c];
    }
  }
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> val_rows(order.begin() + static_cast<long>(n_train), order.end());
  const Matrix x_train = gather_rows(standardized, train_rows);
  const Matrix x_val = gather_rows(standardized, val_rows);
  std::vector<Label> y_train, y_val;
  for (auto r : train_rows) y_train.push_back(labels[r]);
  for (auto r : val_rows) y_val.push_back(labels[r]);
  if (std::all_of(y_train.begin(), y_train.end(), [&](Label v) { return v == y_train.front(); })) {
    return probe;
  }

  Rng init_rng(derive_seed(seed, "probe/init"));
  Mlp net = Mlp::glorot({dim, cfg.hidden, num_classes}, Activation::ReLU, init_rng);
  {
    // Zero output layer: the untrained probe predicts the uniform code, and
    // early stopping can never select anything worse on validation.
    auto params = net.mutable_params();
    const auto& out = net.layer(1);
    std::fill(params.begin() + static_cast<long>(out.weight_offset),
              params.begin() + static_cast<long>(out.bias_offset + out.out), 0.0);
  }

  AdamWConfig adamw;
  adamw.weight_decay = cfg.weight_decay;
  AdamWState state;
  std::vector<double> best_params(net.params().begin(), net.params().end());
  double best_loss = mean_cross_entropy(net, x_val, y_val);
  std::size_t stale = 0;
  std::size_t best_epoch = 0;
  const std::size_t batch = std::max<std::size_t>(1, std::min(cfg.batch_size, n_train));
  std::vector<std::size_t> perm(n_train);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(seed, "probe/shuffle"));
  std::size_t epoch = 0;
  while (epoch < cfg.max_epochs) {
    ++epoch;
    shuffle_rng.shuffle(std::span<std::size_t>(perm));
    for (std::size_t start = 0; start < n_train; start += batch) {
      const std::size_t end = std::min(n_train, start + batch);
      std::span<const std::size_t> idx(perm.data() + start, end - start);
      const Matrix xb = gather_rows(x_train, idx);
      std::vector<Label> yb;
      for (auto i : idx) yb.push_back(y_train[i]);
      auto pass = forward(net, xb);
      auto ce = cross_entropy(pass.output, yb);
      auto tape = backward(net, pass.cache, ce.grad);
      adamw_step(net.mutable_params(), tape.params, state, cfg.learning_rate, adamw);
    }
    const double val_loss = mean_cross_entropy(net, x_val, y_val);
    if (val_loss < best_loss - cfg.tol) {
      best_loss = val_loss;
      best_epoch = epoch;
      std::copy(net.params().begin(), net.params().end(), best_params.begin());
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  auto params = net.mutable_params();
  std::copy(best_params.begin(), best_params.end(), params.begin());
  probe.net_ = std::move(net);
  probe.epochs_ = best_epoch;
  return probe;
}

Matrix Probe::predict_proba(const Matrix& reps) const {
  if (reps.cols() != mean_.size()) throw DimensionError("Probe::predict_proba: wrong input width");
  if (!net_) {
    Matrix out(reps.rows(), num_classes_);
    for (std::size_t r = 0; r < reps.rows(); ++r) {
      std::copy(prior_.begin(), prior_.end(), out.row(r).begin());
    }
    return out;
  }
  Matrix standardized(reps.rows(), reps.cols());
  for (std::size_t r = 0; r < reps.rows(); ++r) {
    for (std::size_t c = 0; c < reps.cols(); ++c) {
      standardized(r, c) = (reps(r, c) - mean_[c]) * scale_[c];
    }
  }
  return softmax_rows(infer(*net_, standardized));
}

std::vector<Label> Probe::predict(const Matrix& reps) const {
  const Matrix proba = predict_proba(reps);
  std::vector<Label> out(reps.rows());
  for (std::size_t r = 0; r < reps.rows(); ++r) {
    auto row = proba.row(r);
    out[r] = static_cast<Label>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

ProbeEvaluation train_probe(const Matrix& reps, std::span<const Label> labels,
                            std::size_t num_classes, std::uint64_t seed,
                            const ProbeConfig& cfg) {
  if (reps.rows() != labels.size()) throw DimensionError("train_probe: row/label count mismatch");
  if (reps.rows() < 2) throw UsageError("train_probe: need at least two rows");
  const std::size_t n = reps.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "probe/heldout"));
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_test = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> fit_rows(order.begin(), order.end() - static_cast<long>(n_test));
  std::vector<std::size_t> test_rows(order.end() - static_cast<long>(n_test), order.end());
  std::sort(fit_rows.begin(), fit_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  std::vector<Label> fit_labels;
  for (auto r : fit_rows) fit_labels.push_back(labels[r]);
  ProbeEvaluation eval{Probe::fit(gather_rows(reps, fit_rows), fit_labels, num_classes,
                                  derive_seed(seed, "probe/fit"), cfg),
                       test_rows, {}, {}};
  eval.predictions = eval.probe.predict(gather_rows(reps, test_rows));
  for (auto r : test_rows) eval.truth.push_back(labels[r]);
  return eval;
}

// --------------------------------------------------------------------- MDL

std::size_t probe_threads_from_env() {
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FAIRSCRUB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) threads = std::min(threads, static_cast<std::size_t>(v));
  }
  return threads;
}

MdlResult online_mdl(const Matrix& reps, std::span<const Label> labels,
                     const FractionSchedule& schedule, std::size_t num_classes,
                     std::uint64_t seed, const ProbeConfig& cfg, std::size_t threads) {
  if (reps.rows() != labels.size()) throw DimensionError("online_mdl: row/label count mismatch");
  if (num_classes < 2) throw DomainError("online_mdl: need C >= 2");
  check_labels(labels, num_classes, "online_mdl");
  const std::size_t n = reps.rows();

  MdlResult result;
  result.block_ends = schedule.block_ends(n);
  const std::size_t blocks = result.block_ends.size();
  result.block_bits.assign(blocks, 0.0);
  result.block_bits[0] = static_cast<double>(result.block_ends[0]) *
                         std::log2(static_cast<double>(num_classes));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "mdl/order"));
  rng.shuffle(std::span<std::size_t>(order));
  const Matrix x = gather_rows(reps, order);
  std::vector<Label> y;
  y.reserve(n);
  for (auto r : order) y.push_back(labels[r]);

  std::vector<char> fallback(blocks, 0);
  auto code_block = [&](std::size_t i) {
    const std::size_t prefix = result.block_ends[i - 1];
    const std::size_t end = result.block_ends[i];
    std::vector<std::size_t> fit_idx(prefix);
    std::iota(fit_idx.begin(), fit_idx.end(), std::size_t{0});
    std::vector<std::size_t> code_idx(end - prefix);
    std::iota(code_idx.begin(), code_idx.end(), prefix);
    const Probe probe =
        Probe::fit(gather_rows(x, fit_idx), std::span<const Label>(y.data(), prefix), num_classes,
                   derive_seed(seed, "mdl/block", i), cfg);
    fallback[i] = probe.majority_fallback() ? 1 : 0;
    const Matrix proba = probe.predict_proba(gather_rows(x, code_idx));
    double bits = 0.0;
    for (std::size_t r = 0; r < code_idx.size(); ++r) {
      const double p = proba(r, static_cast<std::size_t>(y[prefix + r]));
      bits -= std::log2(std::max(p, kLogFloor));
    }
    result.block_bits[i] = bits;
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, blocks - 1));
  if (workers <= 1) {
    for (std::size_t i = 1; i < blocks; ++i) code_block(i);
  } else {
    // Largest prefixes first so the long jobs start early.
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t k = next.fetch_add(1);
          if (k + 1 >= blocks) return;
          try {
            code_block(blocks - 1 - k);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  result.fallback_blocks = static_cast<std::size_t>(std::count(fallback.begin(), fallback.end(), 1));
  for (double b : result.block_bits) result.total_bits += b;
  return result;
}

double normalized_mdl(double mdl_bits, std::size_t dataset_size) {
  if (dataset_size == 0) throw DomainError("normalized_mdl: dataset size must be positive");
  return 1000.0 * mdl_bits / static_cast<double>(dataset_size);
}

// ----------------------------------------------------------------- metrics

ClassificationMetrics metrics(std::span<const Label> predictions, std::span<const Label> labels,
                              double random_baseline_percent) {
  if (predictions.size() != labels.size()) throw UsageError("metrics: length mismatch");
  if (labels.empty()) throw UsageError("metrics: empty input");
  std::set<Label> classes(labels.begin(), labels.end());
  classes.insert(predictions.begin(), predictions.end());

  ClassificationMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  m.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
  for (Label c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool pred = predictions[i] == c;
      const bool truth = labels[i] == c;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    m.precision += p;
    m.recall += r;
    m.f1 += f;
  }
  const double k = static_cast<double>(classes.size());
  m.precision *= 100.0 / k;
  m.recall *= 100.0 / k;
  m.f1 *= 100.0 / k;
  m.delta_z = m.accuracy - random_baseline_percent;
  return m;
}

// ------------------------------------------------------------------ report

std::string ProbeReport::to_json() const {
  nlohmann::ordered_json j;
  j["attribute"] = attribute;
  j["protected"] = is_protected;
  j["num_examples"] = num_examples;
  j["num_classes"] = num_classes;
  j["f1"] = f1;
  j["precision"] = precision;
  j["recall"] = recall;
  j["accuracy"] = accuracy;
  j["delta_z"] = delta_z ? nlohmann::ordered_json(*delta_z) : nlohmann::ordered_json(nullptr);
  j["mdl_bits"] = mdl_bits;
  j["normalized_mdl"] = normalized_mdl;
  j["per_block_codelengths"] = per_block_codelengths;
  j["block_ends"] = block_ends;
  j["majority_fallback"] = majority_fallback;
  return j.dump(2) + "\n";
}

ProbeReport ProbeReport::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ProbeReport r;
    r.attribute = j.at("attribute").get<std::string>();
    r.is_protected = j.at("protected").get<bool>();
    r.num_examples = j.at("num_examples").get<std::size_t>();
    r.num_classes = j.at("num_classes").get<std::size_t>();
    r.f1 = j.at("f1").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    if (!j.at("delta_z").is_null()) r.delta_z = j.at("delta_z").get<double>();
    r.mdl_bits = j.at("mdl_bits").get<double>();
    r.normalized_mdl = j.at("normalized_mdl").get<double>();
    r.per_block_codelengths = j.at("per_block_codelengths").get<std::vector<double>>();
    r.block_ends = j.at("block_ends").get<std::vector<std::size_t>>();
    r.majority_fallback = j.at("majority_fallback").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("probe report: malformed JSON: ") + e.what());
  }
}

ProbeReport evaluate_representation(const Matrix& reps, std::span<const Label> labels,
                                    std::size_t num_classes, const std::string& attribute,
                                    bool is_protected, std::uint64_t seed,
                                    const FractionSchedule& schedule, const ProbeConfig& cfg,
                                    std::size_t threads) {
  ProbeReport report;
  report.attribute = attribute;
  report.is_protected = is_protected;
  report.num_examples = reps.rows();
  report.num_classes = num_classes;

  const auto eval = train_probe(reps, labels, num_classes, derive_seed(seed, "eval/f1"), cfg);
  const auto m = metrics(eval.predictions, eval.truth, 100.0 / static_cast<double>(num_classes));
  report.f1 = m.f1;
  report.precision = m.precision;
  report.recall = m.recall;
  report.accuracy = m.accuracy;
  if (is_protected) report.delta_z = m.delta_z;
  report.majority_fallback = eval.probe.majority_fallback();

  const auto mdl =
      online_mdl(reps, labels, schedule, num_classes, derive_seed(seed, "eval/mdl"), cfg, threads);
  report.mdl_bits = mdl.total_bits;
  report.normalized_mdl = normalized_mdl(mdl.total_bits, reps.rows());
  report.per_block_codelengths = mdl.block_bits;
  report.block_ends = mdl.block_ends;
  return report;
}

std::string render_table(const std::vector<std::string>& row_names,
                         const std::vector<std::vector<ProbeReport>>& rows) {
  if (row_names.size() != rows.size()) throw UsageError("render_table: row name count mismatch");
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Setup"};
  if (!rows.empty()) {
    for (const auto& r : rows.front()) {
      header.push_back(r.attribute + (r.is_protected ? " F1(lower)" : " F1(higher)"));
      header.push_back(r.attribute + (r.is_protected ? " MDL(higher)" : " MDL(lower)"));
    }
  }
  cells.push_back(header);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> line{row_names[i]};
    for (const auto& r : rows[i]) {
      std::ostringstream f1, mdl;
      f1 << std::fixed << std::setprecision(1) << r.f1;
      mdl << std::fixed << std::setprecision(1) << r.mdl_bits / 1000.0;
      line.push_back(f1.str());
      line.push_back(mdl.str());
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> widths;
  for (const auto& line : cells) {
    if (widths.size() < line.size()) widths.resize(line.size(), 0);
    for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());
  }
  std::ostringstream out;
  for (std::size_t l = 0; l < cells.size(); ++l) {
    for (std::size_t c = 0; c < cells[l].size(); ++c) {
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(widths[c])) << cells[l][c];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(widths[c])) << cells[l][c];
      }
    }
    out << '\n';
    if (l == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < widths.size(); ++c) total += widths[c] + (c ? 2 : 0);
      out << std::string(total, '-') << '\n';
    }
  }
  out << "MDL in kbits.\n";
  return out.str();
}

}  // namespace fairscrub
