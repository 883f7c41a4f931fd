#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "requer/curriculum.hpp"
#include "requer/gateway.hpp"
#include "requer/policy.hpp"
#include "requer/rollout.hpp"
#include "requer/simulation.hpp"
#include "requer/types.hpp"

namespace requer::config {

struct JudgeConfig {
  std::string klass = "simulator";  // simulator | mock | remote | none
  std::vector<gateway::MockJudgeRule> rules;
  double default_ppl = 20.0;
  double sim_leaked_ppl = 1.05;
  double sim_clean_ppl = 20.0;
  gateway::EndpointConfig endpoint;
};

struct GatewayConfig {
  std::string klass = "simulator";  // simulator | mock | remote
  gateway::CompetenceModel competence;
  std::vector<gateway::ScriptedSolverSpec> mocks;  // one per solver rank
  std::vector<gateway::EndpointConfig> endpoints;  // one per solver rank
};

struct RefinerConfig {
  std::string klass = "none";  // none | remote
  gateway::EndpointConfig endpoint;
};

struct PolicyConfig {
  std::size_t feature_dim = 4;
  double temperature = 1.0;
  bool include_leak_action = false;
  std::vector<std::string> catalog;  // empty -> default catalog
};

struct Hyperparameters {
  int group_size = 8;
  double kl_beta = 0.05;
  double lambda = 1.0;
  double tau_leak = 5.0;
  double learning_rate = 1e-2;
  double eps_clip = 0.2;
  double eps_std = 1e-8;
  double ratio_epsilon = 1e-8;
  int batch_size = 64;
  int epochs = 6;
  std::string init_label_mode = "ceil-half";  // ceil-half | floor-half | fixed
  int init_label_fixed = 0;
  int theta_old_refresh = 1;
  double solver_temperature = 0.0;
  int warm_start_steps = 0;
  double warm_start_eta = 0.5;
};

struct ScheduleConfig {
  std::string kind = "train";  // train | frozen | improving
  std::string improving_target = "cot-structuring";
  double improving_strength = 6.0;
};

struct RunConfig {
  std::string dataset;
  std::string eval_dataset;
  std::string demos;
  std::string output_dir = "out";
  std::uint64_t seed = 42;
  curriculum::SolverPool pool;
  GatewayConfig gateway;
  JudgeConfig judge;
  RefinerConfig refiner;
  PolicyConfig policy;
  Hyperparameters hp;
  ScheduleConfig schedule;
  bool disable_ash = false;
};

// Validation failures throw ConfigError with the offending field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig parse_config(const nlohmann::json& root);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::string& path);  // also checks file paths exist

policy::ActionCatalog build_catalog(const PolicyConfig& policy);
rollout::RolloutConfig build_rollout_config(const RunConfig& config);
curriculum::InitMode init_mode_of(const RunConfig& config);
gateway::GatewayHub build_hub(const RunConfig& config);
gateway::PolicySchedule build_schedule(const RunConfig& config,
                                       const policy::ActionCatalog& catalog);

std::vector<Sample> load_samples(const std::string& path);
// line-delimited {"sample_id": ..., "action_id": ...}
std::vector<std::pair<std::string, int>> load_demos(const std::string& path);

// Labeled leak corpus: {"ratio": x, "is_leak": b} or
// {"raw_query","refined_query","gold_answer","is_leak"} (scored via a judge).
std::vector<reward::LabeledRatio> load_leak_corpus(
    const std::string& path, gateway::JudgeBackend* judge, double ratio_epsilon);

}  // namespace requer::config
