#include "requer/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "requer/util.hpp"

using nlohmann::json;

namespace requer::checkpoint {

namespace {

json params_to_json(const policy::PolicyParams& p) {
  return {{"feature_dim", p.feature_dim},
          {"num_actions", p.num_actions},
          {"weights", p.weights},
          {"temperature", p.temperature}};
}

policy::PolicyParams params_from_json(const json& obj) {
  policy::PolicyParams p;
  p.feature_dim = obj.at("feature_dim").get<std::size_t>();
  p.num_actions = obj.at("num_actions").get<std::size_t>();
  p.weights = obj.at("weights").get<std::vector<double>>();
  p.temperature = obj.at("temperature").get<double>();
  if (p.weights.size() != p.feature_dim * p.num_actions)
    throw std::runtime_error("checkpoint: weight shape mismatch");
  return p;
}

std::string digest_of(const json& body) {
  std::ostringstream hex;
  hex << std::hex << std::setfill('0') << std::setw(16)
      << hash_str(body.dump());
  return hex.str();
}

}  // namespace

void save(const Checkpoint& ckpt, const std::string& path) {
  json labels = json::object();
  for (const auto& [id, k] : ckpt.labels.labels) labels[id] = k;
  json body = {
      {"format_version", Checkpoint::kFormatVersion},
      {"epoch", ckpt.epoch},
      {"seed", ckpt.seed},
      {"theta", params_to_json(ckpt.theta)},
      {"theta_old", params_to_json(ckpt.theta_old)},
      {"pi_ref", params_to_json(ckpt.pi_ref)},
      {"catalog", ckpt.catalog_names},
      {"curriculum",
       {{"epoch", ckpt.labels.epoch},
        {"pool_size", ckpt.labels.pool_size},
        {"labels", labels}}},
  };
  body["digest"] = digest_of(body);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << body.dump(2) << '\n';
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json body = json::parse(in, nullptr, false);
  if (body.is_discarded())
    throw std::runtime_error("checkpoint is not valid JSON: " + path);
  if (!body.contains("format_version") ||
      body["format_version"] != Checkpoint::kFormatVersion)
    throw std::runtime_error("checkpoint format version mismatch: " + path);
  if (!body.contains("digest"))
    throw std::runtime_error("checkpoint missing digest: " + path);
  const std::string stored = body["digest"].get<std::string>();
  body.erase("digest");
  if (digest_of(body) != stored)
    throw std::runtime_error("checkpoint digest mismatch (corrupt file): " +
                             path);
  Checkpoint ckpt;
  ckpt.epoch = body.at("epoch").get<int>();
  ckpt.seed = body.at("seed").get<std::uint64_t>();
  ckpt.theta = params_from_json(body.at("theta"));
  ckpt.theta_old = params_from_json(body.at("theta_old"));
  ckpt.pi_ref = params_from_json(body.at("pi_ref"));
  ckpt.catalog_names = body.at("catalog").get<std::vector<std::string>>();
  const auto& cur = body.at("curriculum");
  ckpt.labels.epoch = cur.at("epoch").get<int>();
  ckpt.labels.pool_size = cur.at("pool_size").get<int>();
  for (const auto& [id, k] : cur.at("labels").items())
    ckpt.labels.labels[id] = k.get<int>();
  return ckpt;
}

}  // namespace requer::checkpoint
