#include "fairscrub/datagen.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include "fairscrub/error.hpp"
#include "fairscrub/rng.hpp"

namespace fairscrub {

void SynthSpec::validate() const {
  if (dim == 0) throw ConfigError("SynthSpec: dim must be positive");
  if (y_arity < 2) throw ConfigError("SynthSpec: y_arity must be >= 2");
  if (z_arities.empty()) throw ConfigError("SynthSpec: need at least one protected attribute");
  if (z_arities.size() != z_strengths.size()) {
    throw ConfigError("SynthSpec: z_arities and z_strengths differ in length");
  }
  std::size_t needed = y_arity;
  for (std::size_t k : z_arities) {
    if (k < 2) throw ConfigError("SynthSpec: protected arities must be >= 2");
    needed += k;
  }
  if (needed > dim) {
    throw ConfigError("SynthSpec: label subspaces need " + std::to_string(needed) +
                      " dimensions but dim = " + std::to_string(dim));
  }
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(y_strength) || !unit(overlap)) {
    throw ConfigError("SynthSpec: y_strength and overlap must lie in [0, 1]");
  }
  for (double s : z_strengths) {
    if (!unit(s)) throw ConfigError("SynthSpec: z_strengths must lie in [0, 1]");
  }
  if (!(noise_sigma > 0.0)) throw ConfigError("SynthSpec: noise_sigma must be positive");
}

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(Vec& v) {
  const double norm = std::sqrt(dot(v, v));
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
}

// `count` orthonormal vectors in R^dim via Gram-Schmidt on Gaussian draws.
std::vector<Vec> random_orthonormal(std::size_t count, std::size_t dim, Rng& rng) {
  std::vector<Vec> basis;
  while (basis.size() < count) {
    Vec v(dim);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      const double p = dot(v, b);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= p * b[i];
    }
    const double norm = std::sqrt(dot(v, v));
    if (norm < 1e-8) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

// Class means from K directions: centered so they average to zero, then
// scaled to unit norm. For K = 2 this is +/- (d0 - d1)/sqrt(2).
std::vector<Vec> class_means(const std::vector<Vec>& dirs) {
  const std::size_t k = dirs.size();
  const std::size_t dim = dirs.front().size();
  Vec centroid(dim, 0.0);
  for (const auto& d : dirs) {
    for (std::size_t i = 0; i < dim; ++i) centroid[i] += d[i] / static_cast<double>(k);
  }
  std::vector<Vec> means;
  for (const auto& d : dirs) {
    Vec m(dim);
    for (std::size_t i = 0; i < dim; ++i) m[i] = d[i] - centroid[i];
    normalize(m);
    means.push_back(std::move(m));
  }
  return means;
}

}  // namespace

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  Rng basis_rng(derive_seed(spec.seed, "datagen/basis"));
  std::size_t total_dirs = spec.y_arity;
  for (std::size_t k : spec.z_arities) total_dirs += k;
  const auto basis = random_orthonormal(total_dirs, spec.dim, basis_rng);

  std::vector<Vec> y_dirs(basis.begin(), basis.begin() + static_cast<long>(spec.y_arity));
  const auto y_means = class_means(y_dirs);

  std::vector<std::vector<Vec>> z_means;
  std::size_t offset = spec.y_arity;
  const double own = std::sqrt(1.0 - spec.overlap * spec.overlap);
  for (std::size_t k : spec.z_arities) {
    std::vector<Vec> dirs;
    for (std::size_t c = 0; c < k; ++c) {
      // Tilt toward the target subspace: cos(z_dir, y_dir) = overlap.
      Vec d(spec.dim);
      const auto& mine = basis[offset + c];
      const auto& shared = y_dirs[c % spec.y_arity];
      for (std::size_t i = 0; i < spec.dim; ++i) d[i] = own * mine[i] + spec.overlap * shared[i];
      dirs.push_back(std::move(d));
    }
    z_means.push_back(class_means(dirs));
    offset += k;
  }

  std::vector<std::size_t> order(spec.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng order_rng(derive_seed(spec.seed, "datagen/order"));
  order_rng.shuffle(std::span<std::size_t>(order));

  Rng noise_rng(derive_seed(spec.seed, "datagen/noise"));
  Dataset data;
  data.num_targets = spec.y_arity;
  data.protected_arities = spec.z_arities;
  data.x = Matrix(spec.n, spec.dim);
  data.y.resize(spec.n);
  data.z.assign(spec.z_arities.size(), std::vector<Label>(spec.n));
  for (std::size_t slot = 0; slot < spec.n; ++slot) {
    // Mixed-radix decomposition of the round-robin index.
    std::size_t code = slot;
    const std::size_t i = order[slot];
    const auto y = code % spec.y_arity;
    code /= spec.y_arity;
    data.y[i] = static_cast<Label>(y);
    auto row = data.x.row(i);
    for (std::size_t d = 0; d < spec.dim; ++d) row[d] = spec.y_strength * y_means[y][d];
    for (std::size_t n = 0; n < spec.z_arities.size(); ++n) {
      const auto z = code % spec.z_arities[n];
      code /= spec.z_arities[n];
      data.z[n][i] = static_cast<Label>(z);
      for (std::size_t d = 0; d < spec.dim; ++d) row[d] += spec.z_strengths[n] * z_means[n][z][d];
    }
  }
  // Noise drawn in row order so it does not depend on the label permutation.
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (double& v : data.x.row(i)) v += spec.noise_sigma * noise_rng.normal();
  }
  return data;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    // Bytes >= 0x80 are kept so UTF-8 words survive as tokens.
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

std::uint64_t token_hash(std::string_view token, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // Finalizer so low bits (the bucket) depend on every input byte.
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

bool parse_label(std::string_view field, Label& out) {
  while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.remove_suffix(1);
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  if (field.empty()) return false;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end && out >= 0;
}

}  // namespace

std::vector<double> hash_features(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim == 0 || (dim & (dim - 1)) != 0) {
    throw ConfigError("hash_features: dim must be a power of two");
  }
  std::vector<double> v(dim, 0.0);
  for (const auto& token : tokenize(text)) {
    const auto h = token_hash(token, seed);
    v[h & (dim - 1)] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

FeaturizeResult featurize_text(std::istream& tsv, std::size_t dim, std::uint64_t seed) {
  if (dim == 0 || (dim & (dim - 1)) != 0) {
    throw ConfigError("featurize_text: dim must be a power of two");
  }
  FeaturizeResult result;
  std::vector<LabeledExample> examples;
  std::optional<std::size_t> num_attrs;
  std::string line;
  while (std::getline(tsv, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() < 3 || (num_attrs && fields.size() - 2 != *num_attrs)) {
      ++result.skipped;
      continue;
    }
    LabeledExample ex;
    bool ok = parse_label(fields[1], ex.y);
    for (std::size_t f = 2; ok && f < fields.size(); ++f) {
      Label z = 0;
      ok = parse_label(fields[f], z);
      ex.z.push_back(z);
    }
    if (!ok) {
      ++result.skipped;
      continue;
    }
    num_attrs = fields.size() - 2;
    ex.x = hash_features(fields[0], dim, seed);
    examples.push_back(std::move(ex));
  }
  std::size_t num_targets = 2;
  std::vector<std::size_t> arities(num_attrs.value_or(0), 2);
  for (const auto& ex : examples) {
    num_targets = std::max(num_targets, static_cast<std::size_t>(ex.y) + 1);
    for (std::size_t n = 0; n < ex.z.size(); ++n) {
      arities[n] = std::max(arities[n], static_cast<std::size_t>(ex.z[n]) + 1);
    }
  }
  result.data = Dataset::from_examples(examples, dim, num_targets, std::move(arities));
  return result;
}

SplitResult split(const Dataset& data, std::array<double, 3> ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ConfigError("split: ratios must be non-negative");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ConfigError("split: ratios must sum to 1");
  }
  const std::size_t n = data.size();
  const auto cut1 = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  const auto cut2 = std::min(
      n, static_cast<std::size_t>(std::llround((ratios[0] + ratios[1]) * static_cast<double>(n))));
  const std::size_t active_splits =
      static_cast<std::size_t>(std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0.0; }));

  // Group by joint label; order within each stratum is shuffled.
  std::map<std::vector<Label>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Label> key{data.y[i]};
    for (const auto& zn : data.z) key.push_back(zn[i]);
    strata[key].push_back(i);
  }
  Rng rng(derive_seed(seed, "split"));
  bool stratified = true;
  for (auto& [key, members] : strata) {
    rng.shuffle(std::span<std::size_t>(members));
    if (members.size() < active_splits) stratified = false;
  }

  std::vector<std::size_t> order;
  order.reserve(n);
  if (stratified) {
    // Interleave strata by relative rank so every prefix of `order` holds
    // each stratum in proportion to its size.
    std::vector<std::pair<double, std::size_t>> keyed;
    std::size_t s = 0;
    for (const auto& [key, members] : strata) {
      for (std::size_t r = 0; r < members.size(); ++r) {
        const double pos = (static_cast<double>(r) + 0.5) / static_cast<double>(members.size());
        keyed.emplace_back(pos + 1e-12 * static_cast<double>(s), members[r]);
      }
      ++s;
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [pos, idx] : keyed) order.push_back(idx);
  } else {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
  }

  SplitResult out;
  out.stratified = stratified;
  auto take = [&](std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> idx(order.begin() + static_cast<long>(lo),
                                 order.begin() + static_cast<long>(hi));
    return data.subset(idx);
  };
  out.train = take(0, cut1);
  out.dev = take(cut1, cut2);
  out.test = take(cut2, n);
  return out;
}

}  // namespace fairscrub
