#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace requer::policy {

// Discrete refinement-action catalog. Templates live in the rollout module;
// here an action is just an identity in the policy's output space.
struct RefinementAction {
  int id = 0;
  std::string name;
};

struct ActionCatalog {
  std::vector<RefinementAction> actions;

  int size() const { return static_cast<int>(actions.size()); }
  // Throws if ids are not 0..A-1 or names repeat.
  void validate() const;
  int find(const std::string& name) const;  // -1 when absent
};

// Default catalog: the seven refinement archetypes plus identity.
ActionCatalog default_catalog(bool include_leak_action);

using Features = std::vector<double>;

// Linear-softmax meta-policy over the action catalog.
// logits = (features . weights) / temperature.
struct PolicyParams {
  std::size_t feature_dim = 0;
  std::size_t num_actions = 0;
  std::vector<double> weights;  // row-major, weights[f * num_actions + a]
  double temperature = 1.0;

  double& at(std::size_t f, std::size_t a) { return weights[f * num_actions + a]; }
  double at(std::size_t f, std::size_t a) const { return weights[f * num_actions + a]; }
};

PolicyParams zero_params(std::size_t feature_dim, std::size_t num_actions,
                         double temperature = 1.0);

std::vector<double> action_probabilities(const PolicyParams& theta,
                                         const Features& features);

// G independent categorical draws; deterministic under a fixed seed.
std::vector<int> sample_group(const PolicyParams& theta,
                              const Features& features, int group_size,
                              std::uint64_t seed);

struct GroupAdvantages {
  std::vector<double> rewards;
  std::vector<double> advantages;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

GroupAdvantages normalize_advantages(const std::vector<double>& rewards,
                                     double eps_std);

double importance_ratio(const PolicyParams& theta,
                        const PolicyParams& theta_old,
                        const Features& features, int action);

// min(r*A, clip(r, 1-eps, 1+eps)*A)
double clipped_term(double ratio, double advantage, double eps_clip);

double kl_to_reference(const PolicyParams& theta, const PolicyParams& ref,
                       const Features& features);

struct GroupBatchItem {
  Features features;
  std::vector<int> actions;     // the G actions taken
  std::vector<double> advantages;  // matching advantages, treated as constants
};

struct ObjectiveResult {
  double objective = 0.0;
  std::vector<double> grad;  // same shape as weights
};

// Clipped surrogate with KL penalty, plus its exact analytic gradient.
// theta_old, ref and the advantages are constants. At min/clip ties the
// unclipped branch is selected.
ObjectiveResult objective_and_gradient(const PolicyParams& theta,
                                       const PolicyParams& theta_old,
                                       const PolicyParams& ref,
                                       const std::vector<GroupBatchItem>& batch,
                                       double beta, double eps_clip);

PolicyParams grpo_step(const PolicyParams& theta,
                       const std::vector<double>& grad, double eta);

// Full-batch gradient ascent on the mean demonstration log-likelihood.
PolicyParams warm_start(PolicyParams theta,
                        const std::vector<std::pair<Features, int>>& demos,
                        int steps, double eta);

double demo_log_likelihood(const PolicyParams& theta,
                           const std::vector<std::pair<Features, int>>& demos);

}  // namespace requer::policy
