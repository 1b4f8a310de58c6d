#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fairscrub/dataset.hpp"
#include "fairscrub/model.hpp"
#include "fairscrub/probing.hpp"
#include "fairscrub/trainer.hpp"

namespace fairscrub {

/// "y" for attribute 0, "z1", "z2", ... for protected attributes.
std::string attribute_name(std::size_t attr);
std::size_t parse_attribute(const std::string& name);

/// Base dims with input width and label arities taken from the data.
ModelDims dims_for(const Dataset& data, ModelDims base = {});

/// Initial model shared by every regime trained from the same seed, so the
/// pretrained tap and both regimes start from identical parameters.
AdsModel initial_model(const ModelDims& dims, std::uint64_t seed);

struct ProbeSettings {
  ProbeConfig probe;
  FractionSchedule schedule;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool with_mdl = true;
};

/// Probes one attribute on one representation tap of `model`. Seeds depend
/// on the attribute only, so two taps yielding identical representations
/// yield identical reports.
ProbeReport probe_tap(const AdsModel& model, const Dataset& data, RepresentationTap tap,
                      std::size_t attr, const ProbeSettings& settings);

}  // namespace fairscrub
