#include "requer/policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "requer/util.hpp"

namespace requer::policy {

void ActionCatalog::validate() const {
  if (size() < 2)
    throw std::invalid_argument("action catalog must have at least 2 actions");
  std::set<std::string> names;
  for (int i = 0; i < size(); ++i) {
    const auto& a = actions[static_cast<std::size_t>(i)];
    if (a.id != i)
      throw std::invalid_argument("action ids must be contiguous from 0");
    if (!names.insert(a.name).second)
      throw std::invalid_argument("duplicate action name: " + a.name);
  }
}

int ActionCatalog::find(const std::string& name) const {
  for (const auto& a : actions)
    if (a.name == name) return a.id;
  return -1;
}

ActionCatalog default_catalog(bool include_leak_action) {
  ActionCatalog catalog;
  const char* names[] = {
      "identity",
      "symbolic-parameterization",
      "contextual-denoising",
      "linguistic-disambiguation",
      "conceptual-reduction",
      "procedural-hint-injection",
      "explicit-grounding",
      "cot-structuring",
  };
  int id = 0;
  for (const char* n : names) catalog.actions.push_back({id++, n});
  if (include_leak_action) catalog.actions.push_back({id++, "leak"});
  return catalog;
}

PolicyParams zero_params(std::size_t feature_dim, std::size_t num_actions,
                         double temperature) {
  PolicyParams p;
  p.feature_dim = feature_dim;
  p.num_actions = num_actions;
  p.temperature = temperature;
  p.weights.assign(feature_dim * num_actions, 0.0);
  return p;
}

static std::vector<double> logits_of(const PolicyParams& theta,
                                     const Features& features) {
  if (features.size() != theta.feature_dim)
    throw std::invalid_argument("feature dimension mismatch");
  if (theta.weights.size() != theta.feature_dim * theta.num_actions)
    throw std::invalid_argument("weight shape mismatch");
  std::vector<double> logits(theta.num_actions, 0.0);
  for (std::size_t f = 0; f < theta.feature_dim; ++f) {
    const double x = features[f];
    if (x == 0.0) continue;
    for (std::size_t a = 0; a < theta.num_actions; ++a)
      logits[a] += x * theta.at(f, a);
  }
  for (auto& z : logits) {
    z /= theta.temperature;
    if (!std::isfinite(z)) throw std::invalid_argument("non-finite logit");
  }
  return logits;
}

static std::vector<double> softmax(std::vector<double> logits) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& z : logits) {
    z = std::exp(z - zmax);
    sum += z;
  }
  for (auto& z : logits) z /= sum;
  return logits;
}

std::vector<double> action_probabilities(const PolicyParams& theta,
                                         const Features& features) {
  return softmax(logits_of(theta, features));
}

std::vector<int> sample_group(const PolicyParams& theta,
                              const Features& features, int group_size,
                              std::uint64_t seed) {
  if (group_size < 2)
    throw std::invalid_argument("sample_group: group size must be >= 2");
  const auto probs = action_probabilities(theta, features);
  auto rng = make_rng(seed);
  std::vector<int> actions(static_cast<std::size_t>(group_size));
  for (auto& a : actions) a = sample_categorical(probs, rng);
  return actions;
}

GroupAdvantages normalize_advantages(const std::vector<double>& rewards,
                                     double eps_std) {
  if (rewards.size() < 2)
    throw std::invalid_argument("normalize_advantages: need G >= 2");
  for (double r : rewards)
    if (!std::isfinite(r))
      throw std::invalid_argument("normalize_advantages: non-finite reward");
  GroupAdvantages out;
  out.rewards = rewards;
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;  // population std, per decision
  out.mean = mean;
  out.stddev = std::sqrt(var);
  out.advantages.resize(rewards.size());
  for (std::size_t j = 0; j < rewards.size(); ++j)
    out.advantages[j] = (rewards[j] - mean) / (out.stddev + eps_std);
  return out;
}

double importance_ratio(const PolicyParams& theta,
                        const PolicyParams& theta_old,
                        const Features& features, int action) {
  const auto p_new = action_probabilities(theta, features);
  const auto p_old = action_probabilities(theta_old, features);
  const auto a = static_cast<std::size_t>(action);
  if (a >= p_new.size())
    throw std::out_of_range("importance_ratio: action outside catalog");
  if (p_old[a] <= 0.0)
    throw std::domain_error("importance_ratio: old probability is zero");
  return p_new[a] / p_old[a];
}

double clipped_term(double ratio, double advantage, double eps_clip) {
  if (eps_clip <= 0.0 || eps_clip >= 1.0)
    throw std::invalid_argument("clipped_term: eps_clip must be in (0,1)");
  const double clipped =
      std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip) * advantage;
  return std::min(ratio * advantage, clipped);
}

double kl_to_reference(const PolicyParams& theta, const PolicyParams& ref,
                       const Features& features) {
  const auto p = action_probabilities(theta, features);
  const auto q = action_probabilities(ref, features);
  double kl = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a)
    kl += p[a] * (std::log(p[a]) - std::log(q[a]));
  return kl;
}

ObjectiveResult objective_and_gradient(const PolicyParams& theta,
                                       const PolicyParams& theta_old,
                                       const PolicyParams& ref,
                                       const std::vector<GroupBatchItem>& batch,
                                       double beta, double eps_clip) {
  if (batch.empty())
    throw std::invalid_argument("objective_and_gradient: empty batch");
  ObjectiveResult result;
  result.grad.assign(theta.weights.size(), 0.0);
  const double n_samples = static_cast<double>(batch.size());
  const double inv_temp = 1.0 / theta.temperature;

  for (const auto& item : batch) {
    if (item.actions.size() < 2 ||
        item.actions.size() != item.advantages.size())
      throw std::invalid_argument(
          "objective_and_gradient: malformed rollout group");
    const auto p = action_probabilities(theta, item.features);
    const auto p_old = action_probabilities(theta_old, item.features);
    const auto q_ref = action_probabilities(ref, item.features);
    const double inv_g = 1.0 / static_cast<double>(item.actions.size());

    // dJ/dlogit accumulated per sample, chained to weights once at the end.
    std::vector<double> dlogit(theta.num_actions, 0.0);

    double surrogate = 0.0;
    for (std::size_t j = 0; j < item.actions.size(); ++j) {
      const auto a = static_cast<std::size_t>(item.actions[j]);
      if (a >= theta.num_actions)
        throw std::out_of_range("objective_and_gradient: action id");
      const double r = p[a] / p_old[a];
      const double adv = item.advantages[j];
      const double unclipped = r * adv;
      const double clipped =
          std::clamp(r, 1.0 - eps_clip, 1.0 + eps_clip) * adv;
      surrogate += inv_g * std::min(unclipped, clipped);
      // Ties select the unclipped branch; when clipped wins strictly the
      // clip output is constant in theta and contributes no gradient.
      if (unclipped <= clipped) {
        // d(r*A)/dlogit_b = r*A * (I[b=a] - p_b)
        const double scale = inv_g * unclipped;
        for (std::size_t b = 0; b < theta.num_actions; ++b)
          dlogit[b] -= scale * p[b];
        dlogit[a] += scale;
      }
    }

    double kl = 0.0;
    for (std::size_t b = 0; b < theta.num_actions; ++b)
      kl += p[b] * (std::log(p[b]) - std::log(q_ref[b]));
    // dKL/dlogit_b = p_b * ((ln p_b - ln q_b) - KL)
    for (std::size_t b = 0; b < theta.num_actions; ++b)
      dlogit[b] -= beta * p[b] * ((std::log(p[b]) - std::log(q_ref[b])) - kl);

    result.objective += (surrogate - beta * kl) / n_samples;
    for (std::size_t f = 0; f < theta.feature_dim; ++f) {
      const double x = item.features[f];
      if (x == 0.0) continue;
      for (std::size_t b = 0; b < theta.num_actions; ++b)
        result.grad[f * theta.num_actions + b] +=
            dlogit[b] * x * inv_temp / n_samples;
    }
  }
  return result;
}

PolicyParams grpo_step(const PolicyParams& theta,
                       const std::vector<double>& grad, double eta) {
  if (eta <= 0.0) throw std::invalid_argument("grpo_step: eta must be > 0");
  if (grad.size() != theta.weights.size())
    throw std::invalid_argument("grpo_step: gradient shape mismatch");
  PolicyParams next = theta;
  for (std::size_t i = 0; i < grad.size(); ++i) next.weights[i] += eta * grad[i];
  return next;
}

double demo_log_likelihood(const PolicyParams& theta,
                           const std::vector<std::pair<Features, int>>& demos) {
  double ll = 0.0;
  for (const auto& [features, action] : demos) {
    const auto p = action_probabilities(theta, features);
    ll += std::log(p[static_cast<std::size_t>(action)]);
  }
  return ll / static_cast<double>(demos.size());
}

PolicyParams warm_start(PolicyParams theta,
                        const std::vector<std::pair<Features, int>>& demos,
                        int steps, double eta) {
  if (demos.empty())
    throw std::invalid_argument("warm_start: empty demonstration set");
  const double inv_n = 1.0 / static_cast<double>(demos.size());
  const double inv_temp = 1.0 / theta.temperature;
  double ll = demo_log_likelihood(theta, demos);
  for (int step = 0; step < steps; ++step) {
    std::vector<double> grad(theta.weights.size(), 0.0);
    for (const auto& [features, action] : demos) {
      const auto p = action_probabilities(theta, features);
      const auto a = static_cast<std::size_t>(action);
      for (std::size_t f = 0; f < theta.feature_dim; ++f) {
        const double x = features[f];
        if (x == 0.0) continue;
        for (std::size_t b = 0; b < theta.num_actions; ++b) {
          const double indicator = (b == a) ? 1.0 : 0.0;
          grad[f * theta.num_actions + b] +=
              (indicator - p[b]) * x * inv_temp * inv_n;
        }
      }
    }
    // Backtracking keeps the per-pass likelihood non-decreasing even when
    // the caller's step size overshoots.
    double step_eta = eta;
    for (;;) {
      PolicyParams candidate = grpo_step(theta, grad, step_eta);
      const double candidate_ll = demo_log_likelihood(candidate, demos);
      if (candidate_ll >= ll) {
        theta = std::move(candidate);
        ll = candidate_ll;
        break;
      }
      step_eta *= 0.5;
      if (step_eta < 1e-16) break;  // at a stationary point, keep theta
    }
  }
  return theta;
}

}  // namespace requer::policy
