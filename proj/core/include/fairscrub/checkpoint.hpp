#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "fairscrub/model.hpp"

namespace fairscrub {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  AdsModel model;
  std::map<std::string, std::string> metadata;  // regime, lambdas, seed, ...
};

/// JSON document holding layer sizes, activations and flat parameter arrays.
/// Doubles are written with round-trip precision so load(save(m)) is bit-exact.
std::string checkpoint_to_json(const AdsModel& model,
                               const std::map<std::string, std::string>& metadata = {});
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const AdsModel& model,
                     const std::map<std::string, std::string>& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fairscrub
