#include "fairscrub/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "fairscrub/error.hpp"
#include "json.hpp"

namespace fairscrub {
namespace {

using nlohmann::json;

json net_to_json(const Mlp& net) {
  json j;
  j["layer_sizes"] = net.layer_sizes();
  j["hidden_activation"] = net.hidden_activation() == Activation::ReLU ? "relu" : "identity";
  j["params"] = std::vector<double>(net.params().begin(), net.params().end());
  return j;
}

Mlp net_from_json(const json& j) {
  const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  const auto act = j.at("hidden_activation").get<std::string>();
  if (act != "relu" && act != "identity") throw ConfigError("checkpoint: unknown activation " + act);
  Mlp net(sizes, act == "relu" ? Activation::ReLU : Activation::Identity);
  const auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != net.num_params()) {
    throw ConfigError("checkpoint: parameter count does not match layer sizes");
  }
  auto dst = net.mutable_params();
  std::copy(params.begin(), params.end(), dst.begin());
  return net;
}

}  // namespace

std::string checkpoint_to_json(const AdsModel& model,
                               const std::map<std::string, std::string>& metadata) {
  json j;
  j["format"] = "fairscrub-checkpoint";
  j["version"] = kCheckpointVersion;
  j["metadata"] = metadata;
  j["encoder"] = net_to_json(model.encoder());
  j["scrubber"] = net_to_json(model.scrubber());
  j["task"] = net_to_json(model.task());
  json discs = json::array();
  for (const auto& d : model.discriminators()) discs.push_back(net_to_json(d));
  j["discriminators"] = discs;
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "fairscrub-checkpoint") throw ConfigError("checkpoint: wrong format tag");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ConfigError("checkpoint: unsupported version");
    }
    std::vector<Mlp> discs;
    for (const auto& d : j.at("discriminators")) discs.push_back(net_from_json(d));
    AdsModel model(net_from_json(j.at("encoder")), net_from_json(j.at("scrubber")),
                   net_from_json(j.at("task")), std::move(discs));
    return {std::move(model), j.at("metadata").get<std::map<std::string, std::string>>()};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const AdsModel& model,
                     const std::map<std::string, std::string>& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(model, metadata);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace fairscrub
