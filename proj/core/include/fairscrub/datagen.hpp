#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "fairscrub/dataset.hpp"

namespace fairscrub {

/// Synthetic biased corpus. Every label owns a set of class means along
/// orthonormal directions; the strengths scale those means against
/// isotropic Gaussian noise, and `overlap` tilts each protected-attribute
/// direction toward the target subspace (cosine = overlap).
struct SynthSpec {
  std::size_t n = 1000;
  std::size_t dim = 64;
  std::size_t y_arity = 2;
  std::vector<std::size_t> z_arities{2};
  double y_strength = 0.8;
  std::vector<double> z_strengths{0.8};
  double overlap = 0.0;
  double noise_sigma = 0.7;
  std::uint64_t seed = 0;

  void validate() const;
};

/// x = y_strength*mu_y(y) + sum_n z_strength_n*mu_zn(z_n) + noise. Labels
/// are assigned round-robin over the joint label space (so every marginal is
/// balanced and y, z_1..z_N are mutually independent), then shuffled.
Dataset generate(const SynthSpec& spec);

struct FeaturizeResult {
  Dataset data;
  std::size_t skipped = 0;  // malformed rows
};

/// Lower-cased tokens split on anything that is not a letter or digit.
std::vector<std::string> tokenize(std::string_view text);

/// Signed feature hashing of one document into `dim` buckets, L2-normalized.
/// Empty text maps to the zero vector.
std::vector<double> hash_features(std::string_view text, std::size_t dim, std::uint64_t seed);

/// TSV rows: text \t y \t z1 [\t z2 ...]. Rows with a wrong field count or
/// non-integer labels are skipped and counted.
FeaturizeResult featurize_text(std::istream& tsv, std::size_t dim, std::uint64_t seed);

struct SplitResult {
  Dataset train;
  Dataset dev;
  Dataset test;
  bool stratified = true;  // false when the fallback to an unstratified split fired
};

/// Split stratified by the joint (y, z...) label. Totals are
/// round(r0*n), round((r0+r1)*n) - round(r0*n), and the rest.
SplitResult split(const Dataset& data, std::array<double, 3> ratios, std::uint64_t seed);

}  // namespace fairscrub
