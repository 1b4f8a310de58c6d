#include "fairscrub/experiment.hpp"

#include "fairscrub/error.hpp"
#include "fairscrub/rng.hpp"

namespace fairscrub {

std::string attribute_name(std::size_t attr) {
  return attr == 0 ? std::string("y") : "z" + std::to_string(attr);
}

std::size_t parse_attribute(const std::string& name) {
  if (name == "y") return 0;
  if (name.size() >= 2 && name[0] == 'z') {
    try {
      std::size_t used = 0;
      const auto n = std::stoul(name.substr(1), &used);
      if (used == name.size() - 1 && n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  throw UsageError("unknown attribute '" + name + "' (expected y, z1, z2, ...)");
}

ModelDims dims_for(const Dataset& data, ModelDims base) {
  base.input = data.dim();
  base.num_targets = data.num_targets;
  base.protected_arities = data.protected_arities;
  return base;
}

AdsModel initial_model(const ModelDims& dims, std::uint64_t seed) {
  return AdsModel::create(dims, derive_seed(seed, "model"));
}

ProbeReport probe_tap(const AdsModel& model, const Dataset& data, RepresentationTap kind,
                      std::size_t attr, const ProbeSettings& settings) {
  if (attr > data.num_attrs()) throw UsageError("probe_tap: attribute out of range");
  const Matrix reps = tap(model, data.x, kind);
  const auto name = attribute_name(attr);
  const auto seed = derive_seed(settings.seed, "probe/" + name);
  const auto labels = data.labels(attr);
  const auto classes = data.arity(attr);
  if (settings.with_mdl) {
    return evaluate_representation(reps, labels, classes, name, attr > 0, seed, settings.schedule,
                                   settings.probe, settings.threads);
  }
  ProbeReport report;
  report.attribute = name;
  report.is_protected = attr > 0;
  report.num_examples = reps.rows();
  report.num_classes = classes;
  const auto eval = train_probe(reps, labels, classes, derive_seed(seed, "eval/f1"), settings.probe);
  const auto m = metrics(eval.predictions, eval.truth, 100.0 / static_cast<double>(classes));
  report.f1 = m.f1;
  report.precision = m.precision;
  report.recall = m.recall;
  report.accuracy = m.accuracy;
  if (attr > 0) report.delta_z = m.delta_z;
  report.majority_fallback = eval.probe.majority_fallback();
  return report;
}

}  // namespace fairscrub
