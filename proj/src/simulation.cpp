#include "requer/simulation.hpp"

#include <stdexcept>

namespace requer::gateway {

GatewayHub make_simulator_hub(const curriculum::SolverPool& pool,
                              const CompetenceModel& model) {
  model.validate(pool.size());
  GatewayHub hub;
  hub.klass = "simulator";
  for (int rank = 1; rank <= pool.size(); ++rank)
    hub.solvers.push_back(std::make_unique<SimulatorSolver>(model, rank));
  hub.judge = std::make_unique<SimulatorJudge>();
  return hub;
}

namespace {

// Scripted improving policy: a bias-row logit toward the target action that
// grows linearly over epochs, so the action distribution sharpens from the
// initial policy toward the target.
policy::PolicyParams improving_theta(const policy::PolicyParams& initial,
                                     int target_action, double strength,
                                     int epoch, int total_epochs) {
  policy::PolicyParams theta = initial;
  const double w =
      total_epochs > 1
          ? static_cast<double>(epoch) / static_cast<double>(total_epochs - 1)
          : 1.0;
  theta.at(0, static_cast<std::size_t>(target_action)) += strength * w;
  return theta;
}

}  // namespace

SimulationResult run_curriculum_simulation(
    const curriculum::SolverPool& pool, const CompetenceModel& model,
    const policy::ActionCatalog& catalog, const std::vector<Sample>& dataset,
    const PolicySchedule& schedule, const rollout::RolloutConfig& config,
    curriculum::InitMode init_mode, int epochs, std::uint64_t seed,
    metrics::MetricsLog* log) {
  if (epochs < 1)
    throw std::invalid_argument("run_curriculum_simulation: epochs < 1");
  catalog.validate();
  const GatewayHub hub = make_simulator_hub(pool, model);

  std::vector<std::string> ids;
  for (const auto& s : dataset) ids.push_back(s.id);
  auto state = curriculum::init_labels(pool, ids, init_mode);

  SimulationResult result;
  policy::PolicyParams theta = schedule.initial;
  policy::PolicyParams theta_old = theta;
  const policy::PolicyParams ref = schedule.initial;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rollout::RolloutConfig epoch_config = config;
    switch (schedule.kind) {
      case PolicySchedule::Kind::kFrozen:
        epoch_config.eta = 0.0;
        break;
      case PolicySchedule::Kind::kImproving:
        theta = improving_theta(schedule.initial,
                                schedule.improving_target_action,
                                schedule.improving_strength, epoch, epochs);
        theta_old = theta;
        epoch_config.eta = 0.0;
        break;
      case PolicySchedule::Kind::kTrain:
        break;
    }
    const auto epoch_result = rollout::training_epoch(
        dataset, theta, theta_old, ref, state, pool, catalog, hub,
        epoch_config, seed, epoch, log);
    theta = epoch_result.theta;
    theta_old = epoch_result.theta_old;

    SimulationEpoch record;
    record.snapshot = epoch_result.snapshot;
    record.mean_reward = epoch_result.mean_reward;
    record.leak_rate = epoch_result.leak_rate;
    record.action_frequency = epoch_result.action_frequency;
    result.epochs.push_back(std::move(record));
  }
  result.final_theta = theta;
  return result;
}

}  // namespace requer::gateway
