#include "fairscrub/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fairscrub/error.hpp"
#include "json.hpp"

namespace fairscrub {

std::span<const Label> Dataset::labels(std::size_t attr) const {
  if (attr == 0) return y;
  if (attr > z.size()) throw UsageError("Dataset::labels: attribute index out of range");
  return z[attr - 1];
}

std::size_t Dataset::arity(std::size_t attr) const {
  if (attr == 0) return num_targets;
  if (attr > protected_arities.size()) throw UsageError("Dataset::arity: attribute out of range");
  return protected_arities[attr - 1];
}

LabeledExample Dataset::example(std::size_t i) const {
  LabeledExample ex;
  auto row = x.row(i);
  ex.x.assign(row.begin(), row.end());
  ex.y = y.at(i);
  for (const auto& zn : z) ex.z.push_back(zn.at(i));
  return ex;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.x = gather_rows(x, indices);
  out.num_targets = num_targets;
  out.protected_arities = protected_arities;
  out.y.reserve(indices.size());
  out.z.assign(z.size(), {});
  for (std::size_t idx : indices) {
    out.y.push_back(y.at(idx));
    for (std::size_t n = 0; n < z.size(); ++n) out.z[n].push_back(z[n].at(idx));
  }
  return out;
}

Dataset Dataset::select_attributes(std::span<const std::size_t> attrs) const {
  Dataset out;
  out.x = x;
  out.y = y;
  out.num_targets = num_targets;
  for (std::size_t a : attrs) {
    if (a == 0 || a > z.size()) {
      throw UsageError("select_attributes: protected attribute " + std::to_string(a) +
                       " out of range");
    }
    out.z.push_back(z[a - 1]);
    out.protected_arities.push_back(protected_arities[a - 1]);
  }
  return out;
}

void Dataset::validate() const {
  if (x.rows() != y.size()) throw ConfigError("Dataset: feature/label count mismatch");
  if (z.size() != protected_arities.size()) {
    throw ConfigError("Dataset: protected label sets do not match arities");
  }
  for (Label v : y) {
    if (v < 0 || static_cast<std::size_t>(v) >= num_targets) {
      throw ConfigError("Dataset: target label outside arity");
    }
  }
  for (std::size_t n = 0; n < z.size(); ++n) {
    if (z[n].size() != y.size()) throw ConfigError("Dataset: protected label count mismatch");
    for (Label v : z[n]) {
      if (v < 0 || static_cast<std::size_t>(v) >= protected_arities[n]) {
        throw ConfigError("Dataset: protected label outside arity");
      }
    }
  }
  if (!x.all_finite()) throw ConfigError("Dataset: non-finite feature value");
}

Dataset Dataset::from_examples(const std::vector<LabeledExample>& examples, std::size_t dim,
                               std::size_t num_targets,
                               std::vector<std::size_t> protected_arities) {
  Dataset out;
  out.num_targets = num_targets;
  out.protected_arities = std::move(protected_arities);
  out.x = Matrix(examples.size(), dim);
  out.z.assign(out.protected_arities.size(), {});
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    if (ex.x.size() != dim) throw DimensionError("Dataset: example has wrong feature length");
    if (ex.z.size() != out.protected_arities.size()) {
      throw DimensionError("Dataset: example has wrong number of protected labels");
    }
    std::copy(ex.x.begin(), ex.x.end(), out.x.row(i).begin());
    out.y.push_back(ex.y);
    for (std::size_t n = 0; n < ex.z.size(); ++n) out.z[n].push_back(ex.z[n]);
  }
  out.validate();
  return out;
}

std::string to_jsonl(const Dataset& data) {
  std::string out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    nlohmann::json j;
    auto row = data.x.row(i);
    j["x"] = std::vector<double>(row.begin(), row.end());
    j["y"] = data.y[i];
    std::vector<Label> zs;
    for (const auto& zn : data.z) zs.push_back(zn[i]);
    j["z"] = zs;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_jsonl(data);
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<LabeledExample> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabeledExample ex;
      ex.x = j.at("x").get<std::vector<double>>();
      ex.y = j.at("y").get<Label>();
      ex.z = j.at("z").get<std::vector<Label>>();
      examples.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (examples.empty()) return {};
  const std::size_t dim = examples.front().x.size();
  const std::size_t attrs = examples.front().z.size();
  std::size_t num_targets = 2;
  std::vector<std::size_t> arities(attrs, 2);
  for (const auto& ex : examples) {
    if (ex.y < 0) throw ConfigError(path.string() + ": negative target label");
    num_targets = std::max(num_targets, static_cast<std::size_t>(ex.y) + 1);
    if (ex.z.size() != attrs) throw ConfigError(path.string() + ": inconsistent z length");
    for (std::size_t n = 0; n < attrs; ++n) {
      if (ex.z[n] < 0) throw ConfigError(path.string() + ": negative protected label");
      arities[n] = std::max(arities[n], static_cast<std::size_t>(ex.z[n]) + 1);
    }
  }
  try {
    return Dataset::from_examples(examples, dim, num_targets, std::move(arities));
  } catch (const DimensionError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> label_counts(const Dataset& data, std::size_t attr) {
  std::vector<std::size_t> counts(data.arity(attr), 0);
  for (Label v : data.labels(attr)) ++counts[static_cast<std::size_t>(v)];
  return counts;
}

}  // namespace fairscrub
