#pragma once

#include <cstdint>
#include <vector>

#include "requer/gateway.hpp"
#include "requer/rollout.hpp"

namespace requer::gateway {

// Controls what the policy does across the simulated run: stay frozen,
// follow a scripted improving trajectory, or actually train with GRPO.
struct PolicySchedule {
  enum class Kind { kFrozen, kImproving, kTrain };
  Kind kind = Kind::kFrozen;
  policy::PolicyParams initial;
  int improving_target_action = 0;
  double improving_strength = 6.0;  // final bias logit toward the target
};

struct SimulationEpoch {
  curriculum::DistributionSnapshot snapshot;
  double mean_reward = 0.0;
  double leak_rate = 0.0;
  std::vector<double> action_frequency;
};

struct SimulationResult {
  std::vector<SimulationEpoch> epochs;
  policy::PolicyParams final_theta;
};

GatewayHub make_simulator_hub(const curriculum::SolverPool& pool,
                              const CompetenceModel& model);

// Full training-loop dynamics against the competence-model simulator.
SimulationResult run_curriculum_simulation(
    const curriculum::SolverPool& pool, const CompetenceModel& model,
    const policy::ActionCatalog& catalog, const std::vector<Sample>& dataset,
    const PolicySchedule& schedule, const rollout::RolloutConfig& config,
    curriculum::InitMode init_mode, int epochs, std::uint64_t seed,
    metrics::MetricsLog* log);

}  // namespace requer::gateway
