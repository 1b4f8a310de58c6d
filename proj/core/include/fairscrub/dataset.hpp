#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fairscrub/matrix.hpp"
#include "fairscrub/ops.hpp"

namespace fairscrub {

struct LabeledExample {
  std::vector<double> x;
  Label y = 0;
  std::vector<Label> z;
};

/// Column-oriented collection of labeled examples. z[n][i] is the n-th
/// protected label of example i.
struct Dataset {
  Matrix x;
  std::vector<Label> y;
  std::vector<std::vector<Label>> z;
  std::size_t num_targets = 2;
  std::vector<std::size_t> protected_arities;

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return x.cols(); }
  std::size_t num_attrs() const { return z.size(); }

  /// Labels of attribute `attr` where attr 0 is y and attr n >= 1 is z_n.
  std::span<const Label> labels(std::size_t attr) const;
  std::size_t arity(std::size_t attr) const;

  LabeledExample example(std::size_t i) const;
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Keeps only the listed protected attributes (1-based, in the given order).
  Dataset select_attributes(std::span<const std::size_t> attrs) const;

  /// Throws ConfigError if labels fall outside declared arities or x holds
  /// non-finite values.
  void validate() const;

  static Dataset from_examples(const std::vector<LabeledExample>& examples, std::size_t dim,
                               std::size_t num_targets,
                               std::vector<std::size_t> protected_arities);
};

/// One JSON object per line: {"x":[...],"y":int,"z":[int,...]}.
void write_jsonl(const std::filesystem::path& path, const Dataset& data);
std::string to_jsonl(const Dataset& data);

/// Reads a JSONL dataset. Arities are inferred as max label + 1 unless given.
Dataset read_jsonl(const std::filesystem::path& path);

/// Per-class counts for one attribute (0 = y, n = z_n).
std::vector<std::size_t> label_counts(const Dataset& data, std::size_t attr);

}  // namespace fairscrub
