#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "requer/curriculum.hpp"
#include "requer/gateway.hpp"
#include "requer/policy.hpp"
#include "requer/reward.hpp"
#include "requer/types.hpp"

namespace requer::metrics {
class MetricsLog;
}

namespace requer::rollout {

using policy::Features;
using policy::PolicyParams;

struct GroupEntry {
  int action_id = -1;
  std::string action_name;
  std::string refined_query;
  bool refine_failed = false;  // remote refiner produced no <rephrase> span
  SolverResponse response;
  reward::RewardBreakdown breakdown;
  bool judge_failed = false;
  bool has_leak_ratio = false;
};

struct RolloutRecord {
  std::string sample_id;
  int epoch = 0;
  int solver_rank = 0;
  std::vector<GroupEntry> entries;
  int success_count = 0;
};

struct EvalReport {
  std::string benchmark;
  std::string solver_id;
  std::string metric;
  double value = 0.0;
  int trials = 0;
};

// Deterministic feature map: bias, a question-length bucket, then
// tag-derived pseudo features.
Features featurize(const Sample& sample, std::size_t dim);

// Template-mode refinement: identity returns the question verbatim, every
// other action applies a fixed text transformation. The leak action embeds
// the gold answer, which is exactly what the leak detector must catch.
std::string render_refined_query(const Sample& sample,
                                 const policy::RefinementAction& action);

// Last balanced \boxed{...} group, nested braces matched.
std::optional<std::string> extract_answer(const std::string& full_text);

// Span of the last balanced <rephrase>...</rephrase> pair.
std::optional<std::string> extract_rephrase(const std::string& refiner_output);

std::string normalize_answer(const std::string& raw);

struct RolloutConfig {
  int group_size = 8;
  double lambda = 1.0;
  double tau_leak = 5.0;
  double ratio_epsilon = 1e-8;
  double eps_std = 1e-8;
  double beta = 0.05;
  double eps_clip = 0.2;
  double eta = 1e-2;
  int batch_size = 64;
  int theta_old_refresh = 1;  // batches between theta_old refreshes
  bool disable_ash = false;
  double solver_temperature = 0.0;
  std::size_t feature_dim = 4;
};

RolloutRecord run_group(const Sample& sample, const PolicyParams& theta,
                        const curriculum::CurriculumState& state,
                        const curriculum::SolverPool& pool,
                        const policy::ActionCatalog& catalog,
                        const gateway::GatewayHub& hub,
                        const RolloutConfig& config, std::uint64_t seed);

struct EpochResult {
  PolicyParams theta;
  PolicyParams theta_old;
  double mean_reward = 0.0;
  double leak_rate = 0.0;  // fraction of group entries with r_leak = 1
  double mean_objective = 0.0;
  curriculum::DistributionSnapshot snapshot;
  std::vector<double> action_frequency;  // sampled-action histogram
};

// One pass of the training loop: mini-batch sampling, group rollouts,
// curriculum updates at batch barriers, one gradient step per batch.
EpochResult training_epoch(const std::vector<Sample>& dataset,
                           const PolicyParams& theta,
                           const PolicyParams& theta_old,
                           const PolicyParams& ref,
                           curriculum::CurriculumState& state,
                           const curriculum::SolverPool& pool,
                           const policy::ActionCatalog& catalog,
                           const gateway::GatewayHub& hub,
                           const RolloutConfig& config, std::uint64_t seed,
                           int epoch, metrics::MetricsLog* log);

enum class RefinerMode { kRaw, kPolicy, kRemote };

EvalReport avg_at_k(const std::vector<Sample>& samples, int solver_rank,
                    const PolicyParams& theta,
                    const policy::ActionCatalog& catalog,
                    const gateway::GatewayHub& hub, RefinerMode mode, int k,
                    double temperature, std::uint64_t seed);

struct CrossModelReport {
  std::vector<double> per_solver;  // mean composite reward per rank
  double mean = 0.0;
};

CrossModelReport cross_model_generalization(
    const std::vector<Sample>& samples, const PolicyParams& theta,
    const policy::ActionCatalog& catalog, const curriculum::SolverPool& pool,
    const gateway::GatewayHub& hub, const RolloutConfig& config,
    std::uint64_t seed);

struct LengthDeltaReport {
  double raw_mean_tokens = 0.0;
  double refined_mean_tokens = 0.0;
  std::optional<double> delta_percent;  // absent when raw mean is 0
};

LengthDeltaReport response_length_delta(const std::vector<Sample>& samples,
                                        int solver_rank,
                                        const PolicyParams& theta,
                                        const policy::ActionCatalog& catalog,
                                        const gateway::GatewayHub& hub,
                                        std::uint64_t seed);

}  // namespace requer::rollout
